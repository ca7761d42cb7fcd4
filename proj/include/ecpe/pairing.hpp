#pragma once

#include <random>
#include <utility>
#include <vector>

#include "ecpe/common.hpp"
#include "ecpe/emotion_head.hpp"
#include "ecpe/tape.hpp"

namespace ecpe {

// Context window around one candidate emotion clause: inside holds the
// clauses within distance w (clipped to the document), outside the rest.
struct WindowPartition {
  int center = 0;
  std::vector<int> inside;
  std::vector<int> outside;
};

inline WindowPartition build_window(int center, int d_len, int w) {
  if (center < 1 || center > d_len)
    throw ArgumentError("window center " + std::to_string(center) +
                        " out of range [1, " + std::to_string(d_len) + "]");
  if (w < 0) throw ArgumentError("window size must be >= 0");
  WindowPartition p;
  p.center = center;
  int lo = std::max(1, center - w);
  int hi = std::min(d_len, center + w);
  for (int j = 1; j <= d_len; ++j)
    (j >= lo && j <= hi ? p.inside : p.outside).push_back(j);
  return p;
}

// Candidate-emotion x clause index pairs, grouped per candidate. Genuine
// pairs cover each candidate's window, fake pairs the complement; the same
// (emotion, clause) combination may repeat across candidates.
inline std::pair<std::vector<std::pair<int, int>>,
                 std::vector<std::pair<int, int>>>
enumerate_pairs(const CandidateSet& candidates, int d_len, int w) {
  if (candidates.size() == 0)
    throw ContractError("enumerate_pairs: empty candidate set");
  std::vector<std::pair<int, int>> genuine, fake;
  for (int i : candidates.indices) {
    WindowPartition p = build_window(i, d_len, w);
    for (int j : p.inside) genuine.emplace_back(i, j);
    for (int k : p.outside) fake.emplace_back(i, k);
  }
  return {genuine, fake};
}

struct PairParams {
  Parameter genuine_w;  // 1 x H
  Parameter genuine_b;  // 1 x 1
  Parameter fake_w;     // 1 x 2H
  Parameter fake_b;     // 1 x 1

  void init(int clause_dim, std::mt19937_64& rng) {
    genuine_w = Parameter("pair.genuine_w", fanin_matrix(1, clause_dim, rng));
    genuine_b = Parameter("pair.genuine_b", Mat::Zero(1, 1));
    fake_w = Parameter("pair.fake_w", fanin_matrix(1, 2 * clause_dim, rng));
    fake_b = Parameter("pair.fake_b", Mat::Zero(1, 1));
  }

  std::vector<Parameter*> params() {
    return {&genuine_w, &genuine_b, &fake_w, &fake_b};
  }
};

// Genuine pair representations for one candidate: the relevance of each
// window clause to the candidate is the softmax over dot(context_j,
// emotion_i), and each pair representation is that weight times context_j.
struct GenuineGroup {
  int emotion = 0;
  std::vector<int> window;
  Var relevance;               // |window| x 1, sums to 1
  std::vector<Var> pair_repr;  // H x 1 each
};

inline GenuineGroup genuine_represent(Tape& t, int emotion_index,
                                      const std::vector<int>& window,
                                      const std::vector<Var>& emotion_repr,
                                      const std::vector<Var>& context_repr) {
  if (window.empty())
    throw ContractError("genuine_represent: empty window");
  GenuineGroup g;
  g.emotion = emotion_index;
  g.window = window;
  Var emo = emotion_repr[emotion_index - 1];
  std::vector<Var> scores(window.size());
  for (std::size_t a = 0; a < window.size(); ++a)
    scores[a] = t.dot(context_repr[window[a] - 1], emo);
  g.relevance = t.softmax(t.vconcat(scores));
  g.pair_repr.resize(window.size());
  for (std::size_t a = 0; a < window.size(); ++a)
    g.pair_repr[a] =
        t.scale(context_repr[window[a] - 1], t.pick(g.relevance, a));
  return g;
}

inline Var genuine_score(Tape& t, Var pair_repr, PairParams& p,
                         double prediction_dropout, bool training,
                         std::mt19937_64& rng) {
  Var in = t.dropout(pair_repr, prediction_dropout, training, rng);
  return t.logistic(
      t.add(t.matmul(t.param(p.genuine_w), in), t.param(p.genuine_b)));
}

// Fake pair representation: concatenation [emotion_i ; context_k].
inline Var fake_represent(Tape& t, Var emotion_repr_i, Var context_repr_k) {
  return t.vconcat({emotion_repr_i, context_repr_k});
}

inline Var fake_score(Tape& t, Var pair_repr, PairParams& p,
                      double prediction_dropout, bool training,
                      std::mt19937_64& rng) {
  Var in = t.dropout(pair_repr, prediction_dropout, training, rng);
  return t.logistic(
      t.add(t.matmul(t.param(p.fake_w), in), t.param(p.fake_b)));
}

}  // namespace ecpe
