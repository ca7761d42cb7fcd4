#pragma once

#include <string>
#include <vector>

#include "ecpe/tape.hpp"

namespace ecpe {

// One direction of an LSTM. Gate rows are stacked [input, forget, cell,
// output]; initial hidden and cell states are zero.
struct LstmParams {
  Parameter input_w;  // 4h x in
  Parameter recur_w;  // 4h x h
  Parameter bias;     // 4h x 1

  void init(const std::string& prefix, int in_dim, int hidden_dim,
            std::mt19937_64& rng) {
    input_w = Parameter(prefix + ".input_w",
                        fanin_matrix(4 * hidden_dim, in_dim, rng));
    recur_w = Parameter(prefix + ".recur_w",
                        fanin_matrix(4 * hidden_dim, hidden_dim, rng));
    bias = Parameter(prefix + ".bias", Mat::Zero(4 * hidden_dim, 1));
  }

  int hidden_dim() const { return int(bias.value.rows()) / 4; }

  std::vector<Parameter*> params() { return {&input_w, &recur_w, &bias}; }
};

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_step(Tape& t, LstmParams& p, Var x,
                           const LstmState& prev) {
  const int h = p.hidden_dim();
  Var pre = t.add(t.add(t.matmul(t.param(p.input_w), x),
                        t.matmul(t.param(p.recur_w), prev.h)),
                  t.param(p.bias));
  Var in_gate = t.logistic(t.slice_rows(pre, 0, h));
  Var forget_gate = t.logistic(t.slice_rows(pre, h, h));
  Var cell_in = t.tanh(t.slice_rows(pre, 2 * h, h));
  Var out_gate = t.logistic(t.slice_rows(pre, 3 * h, h));
  Var c = t.add(t.cmul(forget_gate, prev.c), t.cmul(in_gate, cell_in));
  return {t.cmul(out_gate, t.tanh(c)), c};
}

// Runs forward and backward passes over the sequence and concatenates the
// two hidden states at each position: out[j] = [fw_j ; bw_j].
inline std::vector<Var> bilstm(Tape& t, LstmParams& fw, LstmParams& bw,
                               const std::vector<Var>& xs) {
  const int n = int(xs.size());
  std::vector<Var> fwd(n), rev(n);
  LstmState s{t.zeros(fw.hidden_dim(), 1), t.zeros(fw.hidden_dim(), 1)};
  for (int j = 0; j < n; ++j) {
    s = lstm_step(t, fw, xs[j], s);
    fwd[j] = s.h;
  }
  s = {t.zeros(bw.hidden_dim(), 1), t.zeros(bw.hidden_dim(), 1)};
  for (int j = n - 1; j >= 0; --j) {
    s = lstm_step(t, bw, xs[j], s);
    rev[j] = s.h;
  }
  std::vector<Var> out(n);
  for (int j = 0; j < n; ++j) out[j] = t.vconcat({fwd[j], rev[j]});
  return out;
}

}  // namespace ecpe
