#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "ecpe/model.hpp"

namespace ecpe {

struct TrainConfig {
  int batch_size = 32;
  double lr_pretrain = 0.001;
  double lr_train = 0.001;
  int epochs_pretrain = 5;
  int epochs_train = 50;
  int top_k = 3;  // serialized as "K"
  int window = 2; // serialized as "w"
  int embedding_dim = 200;
  int clause_dim = 200;
  DropoutRates dropout;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 disables clipping
  int min_count = 1;
  bool skip_pretrain = false;
  // Supervision signals removed from the training phase ("e", "gp", "fp").
  std::set<std::string> train_loss_mask;

  nlohmann::json to_json() const {
    return {
        {"batch_size", batch_size},
        {"lr_pretrain", lr_pretrain},
        {"lr_train", lr_train},
        {"epochs_pretrain", epochs_pretrain},
        {"epochs_train", epochs_train},
        {"K", top_k},
        {"w", window},
        {"dims", {{"embedding", embedding_dim}, {"clause", clause_dim}}},
        {"dropout",
         {{"embedding", dropout.embedding},
          {"word", dropout.word},
          {"clause", dropout.clause},
          {"prediction", dropout.prediction}}},
        {"seed", seed},
        {"adam_beta1", adam_beta1},
        {"adam_beta2", adam_beta2},
        {"adam_eps", adam_eps},
        {"grad_clip", grad_clip},
        {"min_count", min_count},
        {"skip_pretrain", skip_pretrain},
        {"train_loss_mask",
         std::vector<std::string>(train_loss_mask.begin(),
                                  train_loss_mask.end())}};
  }

  // Applies the keys present in j on top of *this; unknown keys are errors.
  void apply_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "batch_size",     "lr_pretrain",  "lr_train",  "epochs_pretrain",
        "epochs_train",   "K",            "w",         "dims",
        "dropout",        "seed",         "adam_beta1", "adam_beta2",
        "adam_eps",       "grad_clip",    "min_count", "skip_pretrain",
        "train_loss_mask"};
    std::vector<std::string> unknown;
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) unknown.push_back(key);
    if (!unknown.empty()) {
      std::string msg = "unknown config fields:";
      for (const auto& k : unknown) msg += " " + k;
      throw ValidationError(msg);
    }
    if (j.contains("batch_size")) batch_size = j["batch_size"].get<int>();
    if (j.contains("lr_pretrain")) lr_pretrain = j["lr_pretrain"].get<double>();
    if (j.contains("lr_train")) lr_train = j["lr_train"].get<double>();
    if (j.contains("epochs_pretrain"))
      epochs_pretrain = j["epochs_pretrain"].get<int>();
    if (j.contains("epochs_train")) epochs_train = j["epochs_train"].get<int>();
    if (j.contains("K")) top_k = j["K"].get<int>();
    if (j.contains("w")) window = j["w"].get<int>();
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      if (d.contains("embedding")) embedding_dim = d["embedding"].get<int>();
      if (d.contains("clause")) clause_dim = d["clause"].get<int>();
    }
    if (j.contains("dropout")) {
      const auto& d = j["dropout"];
      if (d.contains("embedding")) dropout.embedding = d["embedding"].get<double>();
      if (d.contains("word")) dropout.word = d["word"].get<double>();
      if (d.contains("clause")) dropout.clause = d["clause"].get<double>();
      if (d.contains("prediction"))
        dropout.prediction = d["prediction"].get<double>();
    }
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("adam_beta1")) adam_beta1 = j["adam_beta1"].get<double>();
    if (j.contains("adam_beta2")) adam_beta2 = j["adam_beta2"].get<double>();
    if (j.contains("adam_eps")) adam_eps = j["adam_eps"].get<double>();
    if (j.contains("grad_clip")) grad_clip = j["grad_clip"].get<double>();
    if (j.contains("min_count")) min_count = j["min_count"].get<int>();
    if (j.contains("skip_pretrain"))
      skip_pretrain = j["skip_pretrain"].get<bool>();
    if (j.contains("train_loss_mask")) {
      train_loss_mask.clear();
      for (const auto& m : j["train_loss_mask"])
        train_loss_mask.insert(m.get<std::string>());
    }
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.apply_json(j);
    return c;
  }

  // Every violated constraint, one message per field.
  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    if (batch_size < 1) bad.push_back("batch_size must be >= 1");
    if (lr_pretrain <= 0.0) bad.push_back("lr_pretrain must be > 0");
    if (lr_train <= 0.0) bad.push_back("lr_train must be > 0");
    if (epochs_pretrain < 0) bad.push_back("epochs_pretrain must be >= 0");
    if (epochs_train < 0) bad.push_back("epochs_train must be >= 0");
    if (top_k < 1) bad.push_back("K must be >= 1");
    if (window < 0) bad.push_back("w must be >= 0");
    if (embedding_dim < 1) bad.push_back("dims.embedding must be >= 1");
    if (clause_dim < 2 || clause_dim % 2 != 0)
      bad.push_back("dims.clause must be a positive even number");
    if (!rate_ok(dropout.embedding)) bad.push_back("dropout.embedding must be in [0,1)");
    if (!rate_ok(dropout.word)) bad.push_back("dropout.word must be in [0,1)");
    if (!rate_ok(dropout.clause)) bad.push_back("dropout.clause must be in [0,1)");
    if (!rate_ok(dropout.prediction))
      bad.push_back("dropout.prediction must be in [0,1)");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0))
      bad.push_back("adam_beta1 must be in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      bad.push_back("adam_beta2 must be in [0,1)");
    if (adam_eps <= 0.0) bad.push_back("adam_eps must be > 0");
    if (grad_clip < 0.0) bad.push_back("grad_clip must be >= 0");
    if (min_count < 1) bad.push_back("min_count must be >= 1");
    for (const auto& m : train_loss_mask)
      if (m != "e" && m != "gp" && m != "fp")
        bad.push_back("train_loss_mask entry '" + m + "' not one of e|gp|fp");
    return bad;
  }

  void validate_or_throw() const {
    auto bad = validate();
    if (bad.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw ValidationError(msg);
  }
};

class AdamOptimizer {
 public:
  AdamOptimizer(double beta1, double beta2, double eps)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter*>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (Parameter* p : params) {
      Moments& mo = state_[p];
      if (mo.m.size() == 0) {
        mo.m = Mat::Zero(p->value.rows(), p->value.cols());
        mo.v = Mat::Zero(p->value.rows(), p->value.cols());
      }
      mo.m = beta1_ * mo.m + (1.0 - beta1_) * p->grad;
      mo.v = beta2_ * mo.v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
      Mat m_hat = mo.m / bc1;
      Mat v_hat = mo.v / bc2;
      p->value -=
          lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + eps_).matrix());
    }
  }

 private:
  struct Moments {
    Mat m, v;
  };
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::unordered_map<Parameter*, Moments> state_;
};

struct LossLog {
  Phase phase = Phase::pretrain;
  int epoch = 0;
  LossBreakdown losses;
};

// Two-phase optimization over length-bucketed batches. Pre-training
// minimizes the emotion + fake losses; the genuine scorer is untouched until
// the training phase.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config)
      : model_(model),
        config_(std::move(config)),
        opt_(config_.adam_beta1, config_.adam_beta2, config_.adam_eps),
        rng_(config_.seed) {}

  std::vector<LossLog> pretrain(const std::vector<Document>& docs,
                                const Vocabulary& vocab) {
    return run_epochs(docs, vocab, Phase::pretrain, config_.epochs_pretrain,
                      config_.lr_pretrain);
  }

  std::vector<LossLog> train(const std::vector<Document>& docs,
                             const Vocabulary& vocab) {
    return run_epochs(docs, vocab, Phase::train, config_.epochs_train,
                      config_.lr_train);
  }

  LossBreakdown step(const std::vector<const Document*>& batch,
                     const Vocabulary& vocab, Phase phase, int epoch = -1,
                     int batch_index = -1) {
    if (batch.empty()) throw ArgumentError("step: empty batch");
    model_.zero_grads();
    ForwardOptions opt = forward_options(phase);
    double l_e = 0.0, l_gp = 0.0, l_fp = 0.0;
    for (const Document* d : batch) {
      Tape tape;
      DocForward fwd = forward_document(tape, model_, *d, vocab, opt, rng_);
      if (!std::isfinite(fwd.losses.total))
        throw TrainingError(diagnostic("non-finite loss", *d, fwd.losses,
                                       phase, epoch, batch_index));
      if (fwd.total_loss.valid()) tape.backward(fwd.total_loss);
      l_e += fwd.losses.l_e;
      l_gp += fwd.losses.l_gp;
      l_fp += fwd.losses.l_fp;
    }
    LossBreakdown out = make_breakdown(l_e, l_gp, l_fp, phase);
    for (Parameter* p : model_.params())
      if (!p->grad.allFinite())
        throw TrainingError(diagnostic("non-finite gradient in " + p->name,
                                       *batch.front(), out, phase, epoch,
                                       batch_index));
    if (config_.grad_clip > 0.0) clip_gradients();
    opt_.step(model_.params(),
              phase == Phase::pretrain ? config_.lr_pretrain : config_.lr_train);
    return out;
  }

  std::mt19937_64& rng() { return rng_; }
  const TrainConfig& config() const { return config_; }

  // Length-bucketed batches of at most batch_size documents, shuffled
  // deterministically from the trainer rng.
  std::vector<std::vector<const Document*>> make_batches(
      const std::vector<Document>& docs) {
    std::vector<const Document*> order(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) order[i] = &docs[i];
    shuffle(order);
    std::map<int, std::vector<const Document*>> buckets;
    for (const Document* d : order) buckets[d->size()].push_back(d);
    std::vector<std::vector<const Document*>> batches;
    for (auto& [len, bucket] : buckets) {
      for (std::size_t at = 0; at < bucket.size(); at += config_.batch_size) {
        std::size_t end = std::min(at + config_.batch_size, bucket.size());
        batches.emplace_back(bucket.begin() + at, bucket.begin() + end);
      }
    }
    shuffle(batches);
    return batches;
  }

 private:
  ForwardOptions forward_options(Phase phase) const {
    ForwardOptions opt;
    opt.training = true;
    opt.phase = phase;
    opt.top_k = config_.top_k;
    opt.window = config_.window;
    if (phase == Phase::train) {
      opt.mask_emotion_loss = config_.train_loss_mask.count("e") > 0;
      opt.mask_genuine_loss = config_.train_loss_mask.count("gp") > 0;
      opt.mask_fake_loss = config_.train_loss_mask.count("fp") > 0;
    }
    return opt;
  }

  std::vector<LossLog> run_epochs(const std::vector<Document>& docs,
                                  const Vocabulary& vocab, Phase phase,
                                  int epochs, double /*lr*/) {
    if (epochs == 0) return {};
    if (docs.empty()) throw ArgumentError("no training documents");
    for (const auto& d : docs)
      if (d.gold_pairs.empty())
        throw ValidationError("training document " + d.doc_id +
                              " has no gold pairs");
    std::vector<LossLog> logs;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
      auto batches = make_batches(docs);
      double l_e = 0.0, l_gp = 0.0, l_fp = 0.0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        LossBreakdown bd = step(batches[b], vocab, phase, epoch, int(b));
        l_e += bd.l_e;
        l_gp += bd.l_gp;
        l_fp += bd.l_fp;
      }
      logs.push_back({phase, epoch, make_breakdown(l_e, l_gp, l_fp, phase)});
    }
    return logs;
  }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(xs[i - 1], xs[pick(rng_)]);
    }
  }

  void clip_gradients() {
    double sq = 0.0;
    for (Parameter* p : model_.params()) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm <= config_.grad_clip || norm == 0.0) return;
    double s = config_.grad_clip / norm;
    for (Parameter* p : model_.params()) p->grad *= s;
  }

  std::string diagnostic(const std::string& what, const Document& d,
                         const LossBreakdown& b, Phase phase, int epoch,
                         int batch_index) const {
    std::ostringstream os;
    os << what << " (phase=" << phase_name(phase) << " epoch=" << epoch
       << " batch=" << batch_index << " doc=" << d.doc_id << " l_e=" << b.l_e
       << " l_gp=" << b.l_gp << " l_fp=" << b.l_fp << ")";
    return os.str();
  }

  Model& model_;
  TrainConfig config_;
  AdamOptimizer opt_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary container with a JSON meta block and raw
// double arrays per named parameter. Round-trips bit-exactly.

namespace detail {

constexpr char kCkptMagic[8] = {'E', 'C', 'P', 'E', 'C', 'K', 'P', 'T'};
constexpr char kCkptEnd[4] = {'\n', 'E', 'N', 'D'};
constexpr std::uint32_t kCkptVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), std::streamsize(s.size()));
}
inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}
inline std::string read_str(std::istream& in, std::uint64_t max_len = 1ull << 32) {
  std::uint64_t n = read_u64(in);
  if (n > max_len) throw CheckpointError("corrupt checkpoint (string length)");
  std::string s(n, '\0');
  in.read(s.data(), std::streamsize(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, Model& model,
                            const TrainConfig& config, const Vocabulary& vocab,
                            const std::string& phase, int epoch,
                            const std::mt19937_64& rng) {
  namespace fs = std::filesystem;
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    detail::write_u32(out, detail::kCkptVersion);
    std::ostringstream rng_state;
    rng_state << rng;
    nlohmann::json meta = {{"config", config.to_json()},
                           {"vocab", vocab.tokens()},
                           {"phase", phase},
                           {"epoch", epoch},
                           {"rng", rng_state.str()}};
    detail::write_str(out, meta.dump());
    auto params = model.params();
    detail::write_u32(out, std::uint32_t(params.size()));
    for (Parameter* p : params) {
      detail::write_str(out, p->name);
      detail::write_u64(out, std::uint64_t(p->value.rows()));
      detail::write_u64(out, std::uint64_t(p->value.cols()));
      out.write(reinterpret_cast<const char*>(p->value.data()),
                std::streamsize(sizeof(double) * p->value.size()));
    }
    out.write(detail::kCkptEnd, sizeof(detail::kCkptEnd));
    if (!out) throw IoError("short write on checkpoint " + path);
  }
  fs::rename(tmp, path);
}

struct LoadedCheckpoint {
  Model model;
  TrainConfig config;
  Vocabulary vocab;
  std::string phase;
  int epoch = 0;
  std::mt19937_64 rng;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[sizeof(detail::kCkptMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  std::uint32_t version = detail::read_u32(in);
  if (version != detail::kCkptVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " unsupported (expected " +
                          std::to_string(detail::kCkptVersion) + ")");
  LoadedCheckpoint out;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_str(in));
    out.config = TrainConfig::from_json(meta.at("config"));
    out.vocab =
        Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    out.phase = meta.at("phase").get<std::string>();
    out.epoch = meta.at("epoch").get<int>();
    std::istringstream rs(meta.at("rng").get<std::string>());
    rs >> out.rng;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint meta: ") + e.what());
  }
  std::mt19937_64 init_rng(out.config.seed);
  out.model.dropout = out.config.dropout;
  out.model.init(out.vocab.size(), out.config.embedding_dim,
                 out.config.clause_dim, init_rng);
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : out.model.params()) by_name[p->name] = p;
  std::uint32_t n_params = detail::read_u32(in);
  if (n_params != by_name.size())
    throw CheckpointError("checkpoint has " + std::to_string(n_params) +
                          " parameters, model expects " +
                          std::to_string(by_name.size()));
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = detail::read_str(in);
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CheckpointError("unexpected parameter '" + name + "'");
    std::uint64_t rows = detail::read_u64(in);
    std::uint64_t cols = detail::read_u64(in);
    Parameter* p = it->second;
    if (rows != std::uint64_t(p->value.rows()) ||
        cols != std::uint64_t(p->value.cols()))
      throw CheckpointError("shape mismatch for parameter '" + name + "'");
    in.read(reinterpret_cast<char*>(p->value.data()),
            std::streamsize(sizeof(double) * rows * cols));
    if (!in) throw CheckpointError("truncated checkpoint");
  }
  char end[sizeof(detail::kCkptEnd)];
  in.read(end, sizeof(end));
  if (!in || std::memcmp(end, detail::kCkptEnd, sizeof(end)) != 0)
    throw CheckpointError("missing end marker (truncated checkpoint)");
  return out;
}

}  // namespace ecpe
