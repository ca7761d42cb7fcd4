#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "ecpe/common.hpp"
#include "ecpe/tape.hpp"

namespace ecpe {

// Emotion/context projections and the per-clause emotion scorer. The affine
// projection parameters and the scoring parameters are distinct groups.
struct HeadParams {
  Parameter emotion_proj_w;  // H x H
  Parameter emotion_proj_b;  // H x 1
  Parameter context_proj_w;  // H x H
  Parameter context_proj_b;  // H x 1
  Parameter emotion_score_w;  // 1 x H
  Parameter emotion_score_b;  // 1 x 1

  void init(int clause_dim, std::mt19937_64& rng) {
    emotion_proj_w =
        Parameter("head.emotion_proj_w", fanin_matrix(clause_dim, clause_dim, rng));
    emotion_proj_b = Parameter("head.emotion_proj_b", Mat::Zero(clause_dim, 1));
    context_proj_w =
        Parameter("head.context_proj_w", fanin_matrix(clause_dim, clause_dim, rng));
    context_proj_b = Parameter("head.context_proj_b", Mat::Zero(clause_dim, 1));
    emotion_score_w =
        Parameter("head.emotion_score_w", fanin_matrix(1, clause_dim, rng));
    emotion_score_b = Parameter("head.emotion_score_b", Mat::Zero(1, 1));
  }

  std::vector<Parameter*> params() {
    return {&emotion_proj_w, &emotion_proj_b, &context_proj_w,
            &context_proj_b, &emotion_score_w, &emotion_score_b};
  }
};

// Top-K emotion clause candidates, ordered by descending probability with
// ties broken by ascending clause index. Indices are 1-based.
struct CandidateSet {
  std::vector<int> indices;
  std::vector<double> probs;

  int size() const { return int(indices.size()); }
  bool contains(int clause_index) const {
    return std::find(indices.begin(), indices.end(), clause_index) !=
           indices.end();
  }
};

// Affine emotion-specific and context-specific views of each clause.
inline std::pair<std::vector<Var>, std::vector<Var>> project(
    Tape& t, const std::vector<Var>& clause_repr, HeadParams& p) {
  Var ew = t.param(p.emotion_proj_w);
  Var eb = t.param(p.emotion_proj_b);
  Var cw = t.param(p.context_proj_w);
  Var cb = t.param(p.context_proj_b);
  std::vector<Var> emotion(clause_repr.size()), context(clause_repr.size());
  for (std::size_t i = 0; i < clause_repr.size(); ++i) {
    emotion[i] = t.add(t.matmul(ew, clause_repr[i]), eb);
    context[i] = t.add(t.matmul(cw, clause_repr[i]), cb);
  }
  return {emotion, context};
}

// Per-clause probability of being an emotion clause (1x1 nodes).
inline std::vector<Var> emotion_prob(Tape& t,
                                     const std::vector<Var>& emotion_repr,
                                     HeadParams& p, double prediction_dropout,
                                     bool training, std::mt19937_64& rng) {
  Var w = t.param(p.emotion_score_w);
  Var b = t.param(p.emotion_score_b);
  std::vector<Var> out(emotion_repr.size());
  for (std::size_t i = 0; i < emotion_repr.size(); ++i) {
    Var in = t.dropout(emotion_repr[i], prediction_dropout, training, rng);
    out[i] = t.logistic(t.add(t.matmul(w, in), b));
  }
  return out;
}

// Hard top-K selection; gradients never flow through the choice itself.
inline CandidateSet select_candidates(const Vec& probs, int top_k) {
  if (top_k < 1) throw ArgumentError("K must be >= 1");
  const int n = int(probs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&probs](int a, int b) {
    if (probs(a) != probs(b)) return probs(a) > probs(b);
    return a < b;
  });
  CandidateSet out;
  const int take = std::min(top_k, n);
  for (int r = 0; r < take; ++r) {
    out.indices.push_back(order[r] + 1);
    out.probs.push_back(probs(order[r]));
  }
  return out;
}

}  // namespace ecpe
