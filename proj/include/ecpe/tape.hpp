#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cmath>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ecpe/common.hpp"

namespace ecpe {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A named learnable array. Gradients accumulate across backward passes until
// zero_grad() is called, so a batch can sum per-document gradients.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

inline Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

// Uniform in [-1/sqrt(fanin), 1/sqrt(fanin)] with fanin = cols.
inline Mat fanin_matrix(Eigen::Index rows, Eigen::Index cols,
                        std::mt19937_64& rng) {
  return uniform_matrix(rows, cols, 1.0 / std::sqrt(double(cols)), rng);
}

class Tape;

// Lightweight handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const {
    assert(value().size() == 1);
    return value()(0, 0);
  }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode autodiff tape over dense double matrices. Nodes are appended
// in topological order; backward() walks them in reverse. One tape per
// document forward pass; parameter gradients flow into Parameter::grad.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  Var input(Mat value) {
    int id = push(std::move(value));
    return Var(this, id);
  }

  Var scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return input(std::move(m));
  }

  Var zeros(Eigen::Index rows, Eigen::Index cols) {
    return input(Mat::Zero(rows, cols));
  }

  // Leaf whose gradient is forwarded to p.grad after backward().
  Var param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var(this, it->second);
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = &p.value;
    n.grad = Mat::Zero(p.value.rows(), p.value.cols());
    n.sink = &p;
    int id = int(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    return Var(this, id);
  }

  // One row of a lookup table as a column vector; gradient scatters directly
  // into the table without materializing the full matrix on the tape.
  Var lookup(Parameter& table, Eigen::Index row) {
    if (row < 0 || row >= table.value.rows())
      throw IndexError("lookup row " + std::to_string(row) +
                       " out of range for " + table.name + " (" +
                       std::to_string(table.value.rows()) + " rows)");
    int id = push(table.value.row(row).transpose());
    Parameter* t = &table;
    nodes_[id].back = [t, row, id](Tape& tp) {
      t->grad.row(row) += tp.nodes_[id].grad.transpose();
    };
    return Var(this, id);
  }

  Var matmul(Var a, Var b) {
    assert(val(a).cols() == val(b).rows());
    int id = push(val(a) * val(b));
    nodes_[id].back = [ai = a.id_, bi = b.id_, id](Tape& t) {
      const Mat& g = t.nodes_[id].grad;
      t.nodes_[ai].grad.noalias() += g * t.val_at(bi).transpose();
      t.nodes_[bi].grad.noalias() += t.val_at(ai).transpose() * g;
    };
    return Var(this, id);
  }

  Var add(Var a, Var b) {
    assert(same_shape(a, b));
    int id = push(val(a) + val(b));
    nodes_[id].back = [ai = a.id_, bi = b.id_, id](Tape& t) {
      t.nodes_[ai].grad += t.nodes_[id].grad;
      t.nodes_[bi].grad += t.nodes_[id].grad;
    };
    return Var(this, id);
  }

  // Left-fold sum of same-shaped nodes. The evaluation order is fixed
  // ((x0 + x1) + x2 ...) so repeated sums are bit-identical.
  Var add_n(const std::vector<Var>& xs) {
    assert(!xs.empty());
    Mat acc = val(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) acc += val(xs[i]);
    int id = push(std::move(acc));
    std::vector<int> ids(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ids[i] = xs[i].id_;
    nodes_[id].back = [ids = std::move(ids), id](Tape& t) {
      for (int x : ids) t.nodes_[x].grad += t.nodes_[id].grad;
    };
    return Var(this, id);
  }

  Var cmul(Var a, Var b) {
    assert(same_shape(a, b));
    int id = push(val(a).cwiseProduct(val(b)));
    nodes_[id].back = [ai = a.id_, bi = b.id_, id](Tape& t) {
      const Mat& g = t.nodes_[id].grad;
      t.nodes_[ai].grad += g.cwiseProduct(t.val_at(bi));
      t.nodes_[bi].grad += g.cwiseProduct(t.val_at(ai));
    };
    return Var(this, id);
  }

  // Scale by a 1x1 node.
  Var scale(Var a, Var s) {
    assert(val(s).size() == 1);
    int id = push(val(a) * val(s)(0, 0));
    nodes_[id].back = [ai = a.id_, si = s.id_, id](Tape& t) {
      const Mat& g = t.nodes_[id].grad;
      t.nodes_[ai].grad += g * t.val_at(si)(0, 0);
      t.nodes_[si].grad(0, 0) += g.cwiseProduct(t.val_at(ai)).sum();
    };
    return Var(this, id);
  }

  Var scale_const(Var a, double c) {
    int id = push(val(a) * c);
    nodes_[id].back = [ai = a.id_, c, id](Tape& t) {
      t.nodes_[ai].grad += t.nodes_[id].grad * c;
    };
    return Var(this, id);
  }

  Var tanh(Var a) {
    int id = push(val(a).array().tanh().matrix());
    nodes_[id].back = [ai = a.id_, id](Tape& t) {
      const Mat& y = *t.nodes_[id].val;
      t.nodes_[ai].grad +=
          t.nodes_[id].grad.cwiseProduct((1.0 - y.array().square()).matrix());
    };
    return Var(this, id);
  }

  Var logistic(Var a) {
    Mat y = (1.0 / (1.0 + (-val(a)).array().exp())).matrix();
    int id = push(std::move(y));
    nodes_[id].back = [ai = a.id_, id](Tape& t) {
      const Mat& y = *t.nodes_[id].val;
      t.nodes_[ai].grad += t.nodes_[id].grad.cwiseProduct(
          y.cwiseProduct((1.0 - y.array()).matrix()));
    };
    return Var(this, id);
  }

  // Dot product of two column vectors -> 1x1.
  Var dot(Var a, Var b) {
    assert(val(a).cols() == 1 && same_shape(a, b));
    Mat m(1, 1);
    m(0, 0) = val(a).col(0).dot(val(b).col(0));
    int id = push(std::move(m));
    nodes_[id].back = [ai = a.id_, bi = b.id_, id](Tape& t) {
      double g = t.nodes_[id].grad(0, 0);
      t.nodes_[ai].grad += g * t.val_at(bi);
      t.nodes_[bi].grad += g * t.val_at(ai);
    };
    return Var(this, id);
  }

  // Stack column vectors vertically.
  Var vconcat(const std::vector<Var>& xs) {
    assert(!xs.empty());
    Eigen::Index total = 0;
    for (Var x : xs) {
      assert(val(x).cols() == 1);
      total += val(x).rows();
    }
    Mat out(total, 1);
    Eigen::Index at = 0;
    for (Var x : xs) {
      out.middleRows(at, val(x).rows()) = val(x);
      at += val(x).rows();
    }
    int id = push(std::move(out));
    std::vector<int> ids(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ids[i] = xs[i].id_;
    nodes_[id].back = [ids = std::move(ids), id](Tape& t) {
      Eigen::Index at = 0;
      for (int x : ids) {
        Eigen::Index n = t.nodes_[x].grad.rows();
        t.nodes_[x].grad += t.nodes_[id].grad.middleRows(at, n);
        at += n;
      }
    };
    return Var(this, id);
  }

  Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
    assert(r0 >= 0 && r0 + n <= val(a).rows());
    int id = push(val(a).middleRows(r0, n));
    nodes_[id].back = [ai = a.id_, r0, n, id](Tape& t) {
      t.nodes_[ai].grad.middleRows(r0, n) += t.nodes_[id].grad;
    };
    return Var(this, id);
  }

  // Single entry of a column vector -> 1x1.
  Var pick(Var a, Eigen::Index i) {
    assert(val(a).cols() == 1 && i >= 0 && i < val(a).rows());
    Mat m(1, 1);
    m(0, 0) = val(a)(i, 0);
    int id = push(std::move(m));
    nodes_[id].back = [ai = a.id_, i, id](Tape& t) {
      t.nodes_[ai].grad(i, 0) += t.nodes_[id].grad(0, 0);
    };
    return Var(this, id);
  }

  // Numerically stable softmax over a column vector.
  Var softmax(Var a) {
    assert(val(a).cols() == 1);
    const Mat& x = val(a);
    double mx = x.maxCoeff();
    Mat y = (x.array() - mx).exp().matrix();
    y /= y.sum();
    int id = push(std::move(y));
    nodes_[id].back = [ai = a.id_, id](Tape& t) {
      const Mat& y = *t.nodes_[id].val;
      const Mat& g = t.nodes_[id].grad;
      double s = y.cwiseProduct(g).sum();
      t.nodes_[ai].grad += y.cwiseProduct((g.array() - s).matrix());
    };
    return Var(this, id);
  }

  // Inverted dropout; identity in eval mode.
  Var dropout(Var a, double rate, bool training, std::mt19937_64& rng) {
    if (!training || rate <= 0.0) return a;
    std::bernoulli_distribution keep(1.0 - rate);
    const double s = 1.0 / (1.0 - rate);
    Mat mask(val(a).rows(), val(a).cols());
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      for (Eigen::Index r = 0; r < mask.rows(); ++r)
        mask(r, c) = keep(rng) ? s : 0.0;
    return cmul(a, input(std::move(mask)));
  }

  // Binary cross-entropy of a 1x1 probability against a {0,1} label, with
  // the probability clamped to [kProbEps, 1 - kProbEps]. Inside the clamp
  // region the loss is constant in p, so its derivative there is zero.
  static constexpr double kProbEps = 1e-7;
  Var bce(Var prob, double label) {
    assert(val(prob).size() == 1);
    double p = val(prob)(0, 0);
    double pc = std::min(std::max(p, kProbEps), 1.0 - kProbEps);
    Mat m(1, 1);
    m(0, 0) = -(label * std::log(pc) + (1.0 - label) * std::log(1.0 - pc));
    int id = push(std::move(m));
    nodes_[id].back = [pi = prob.id_, label, id](Tape& t) {
      double p = t.val_at(pi)(0, 0);
      if (p <= kProbEps || p >= 1.0 - kProbEps) return;
      t.nodes_[pi].grad(0, 0) +=
          t.nodes_[id].grad(0, 0) * (p - label) / (p * (1.0 - p));
    };
    return Var(this, id);
  }

  void backward(Var loss) {
    assert(loss.tape_ == this && val(loss).size() == 1);
    nodes_[loss.id_].grad(0, 0) += 1.0;
    for (int i = loss.id_; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back) n.back(*this);
      if (n.sink) n.sink->grad += n.grad;
    }
  }

  void clear() {
    nodes_.clear();
    param_nodes_.clear();
  }

 private:
  friend class Var;

  struct Node {
    Mat stored;
    const Mat* val = nullptr;
    Mat grad;
    Parameter* sink = nullptr;
    std::function<void(Tape&)> back;
  };

  int push(Mat value) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.stored = std::move(value);
    n.val = &n.stored;
    n.grad = Mat::Zero(n.stored.rows(), n.stored.cols());
    return int(nodes_.size()) - 1;
  }

  const Mat& val(Var v) const {
    assert(v.tape_ == this);
    return *nodes_[v.id_].val;
  }
  const Mat& val_at(int id) const { return *nodes_[id].val; }

  bool same_shape(Var a, Var b) const {
    return val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols();
  }

  // deque: node references must stay stable while `val` points into `stored`
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

inline const Mat& Var::value() const {
  assert(tape_ != nullptr);
  return *tape_->nodes_[id_].val;
}

}  // namespace ecpe
