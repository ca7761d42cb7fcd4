#pragma once

#include <vector>

#include "ecpe/common.hpp"
#include "ecpe/tape.hpp"

namespace ecpe {

enum class Phase { pretrain, train };

inline const char* phase_name(Phase p) {
  return p == Phase::pretrain ? "pretrain" : "train";
}

// Component losses of one forward pass. The total is the left-fold sum of
// the active components in the order (emotion, genuine, fake), so repeated
// evaluation is bit-identical.
struct LossBreakdown {
  double l_e = 0.0;
  double l_gp = 0.0;
  double l_fp = 0.0;
  double total = 0.0;
};

namespace detail {

// Sum of clamped binary cross-entropies in index order; empty -> zero node.
inline Var bce_sum(Tape& t, const std::vector<Var>& probs,
                   const std::vector<int>& labels) {
  if (probs.size() != labels.size())
    throw ArgumentError("bce_sum: probs and labels differ in length");
  if (probs.empty()) return t.scalar(0.0);
  std::vector<Var> terms(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    terms[i] = t.bce(probs[i], double(labels[i]));
  return t.add_n(terms);
}

}  // namespace detail

// Cross-entropy of emotion prediction over the real clauses of a document.
inline Var emotion_loss(Tape& t, const std::vector<Var>& probs,
                        const std::vector<int>& labels) {
  return detail::bce_sum(t, probs, labels);
}

// Cross-entropy over the genuine pairs (candidates x window clauses).
inline Var genuine_loss(Tape& t, const std::vector<Var>& scores,
                        const std::vector<int>& labels) {
  return detail::bce_sum(t, scores, labels);
}

// Cross-entropy over the fake pairs (candidates x non-window clauses).
inline Var fake_loss(Tape& t, const std::vector<Var>& scores,
                     const std::vector<int>& labels) {
  return detail::bce_sum(t, scores, labels);
}

// Unweighted phase composition: pretraining excludes the genuine term.
inline double phase_loss(const LossBreakdown& b, Phase phase) {
  return phase == Phase::pretrain ? b.l_e + b.l_fp : (b.l_e + b.l_gp) + b.l_fp;
}

inline LossBreakdown make_breakdown(double l_e, double l_gp, double l_fp,
                                    Phase phase) {
  LossBreakdown b;
  b.l_e = l_e;
  b.l_gp = l_gp;
  b.l_fp = l_fp;
  b.total = phase_loss(b, phase);
  return b;
}

}  // namespace ecpe
