#pragma once

#include <random>
#include <vector>

#include "ecpe/corpus.hpp"
#include "ecpe/emotion_head.hpp"
#include "ecpe/encoder.hpp"
#include "ecpe/objectives.hpp"
#include "ecpe/pairing.hpp"

namespace ecpe {

// All learnable parameter groups of the extractor model.
struct Model {
  int vocab_size = 0;
  int embedding_dim = 0;
  int clause_dim = 0;
  DropoutRates dropout;

  EncoderParams encoder;
  HeadParams head;
  PairParams pair;

  void init(int vocab, int emb_dim, int cl_dim, std::mt19937_64& rng) {
    vocab_size = vocab;
    embedding_dim = emb_dim;
    clause_dim = cl_dim;
    encoder.init(vocab, emb_dim, cl_dim, rng);
    head.init(cl_dim, rng);
    pair.init(cl_dim, rng);
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out = encoder.params();
    for (auto* p : head.params()) out.push_back(p);
    for (auto* p : pair.params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }
};

struct ForwardOptions {
  bool training = false;
  Phase phase = Phase::train;
  int top_k = 3;
  int window = 2;
  // Supervision-signal ablations; a masked loss is excluded from the total
  // and reported as zero.
  bool mask_emotion_loss = false;
  bool mask_genuine_loss = false;
  bool mask_fake_loss = false;
};

struct GenuinePairOut {
  int emotion = 0;
  int clause = 0;
  double relevance = 0.0;  // this pair's share of the window softmax
  Vec pair_repr;
  double score = 0.0;
  int label = 0;
};

struct FakePairOut {
  int emotion = 0;
  int clause = 0;
  Vec pair_repr;
  double score = 0.0;
  int label = 0;
};

// One document's forward pass. Node handles stay valid while the Tape lives.
struct DocForward {
  ClauseStates states;
  Vec emotion_probs;              // over real clauses
  std::vector<int> emotion_labels;
  CandidateSet candidates;
  std::vector<GenuinePairOut> genuine;
  std::vector<FakePairOut> fake;
  LossBreakdown losses;
  Var total_loss;  // valid unless every component was masked
};

inline DocForward forward_document(Tape& t, Model& m, const Document& doc,
                                   const Vocabulary& vocab,
                                   const ForwardOptions& opt,
                                   std::mt19937_64& rng) {
  DocForward out;
  TokenMatrix tm = vectorize(doc, vocab);
  EncodeGraph g =
      encode_document(t, tm, m.encoder, m.dropout, opt.training, rng);
  const int n = int(g.clause_repr.size());

  auto [emotion_repr, context_repr] = project(t, g.clause_repr, m.head);
  std::vector<Var> prob_nodes = emotion_prob(
      t, emotion_repr, m.head, m.dropout.prediction, opt.training, rng);

  out.emotion_probs = Vec(n);
  for (int i = 0; i < n; ++i) out.emotion_probs(i) = prob_nodes[i].scalar();
  std::set<int> gold_emotions = doc.emotion_indices();
  out.emotion_labels.resize(n);
  for (int i = 0; i < n; ++i)
    out.emotion_labels[i] = gold_emotions.count(i + 1) ? 1 : 0;

  out.candidates = select_candidates(out.emotion_probs, opt.top_k);

  const bool build_genuine =
      opt.phase == Phase::train && !opt.mask_genuine_loss;
  const bool build_fake = !opt.mask_fake_loss;

  std::vector<Var> genuine_scores, fake_scores;
  std::vector<int> genuine_labels, fake_labels;
  for (int rank = 0; rank < out.candidates.size(); ++rank) {
    const int i = out.candidates.indices[rank];
    WindowPartition part = build_window(i, n, opt.window);
    if (build_genuine) {
      GenuineGroup grp =
          genuine_represent(t, i, part.inside, emotion_repr, context_repr);
      for (std::size_t a = 0; a < part.inside.size(); ++a) {
        const int j = part.inside[a];
        Var score = genuine_score(t, grp.pair_repr[a], m.pair,
                                  m.dropout.prediction, opt.training, rng);
        GenuinePairOut gp;
        gp.emotion = i;
        gp.clause = j;
        gp.relevance = grp.relevance.value()(Eigen::Index(a), 0);
        gp.pair_repr = grp.pair_repr[a].value().col(0);
        gp.score = score.scalar();
        gp.label = doc.gold_pairs.count({i, j}) ? 1 : 0;
        genuine_scores.push_back(score);
        genuine_labels.push_back(gp.label);
        out.genuine.push_back(std::move(gp));
      }
    }
    if (build_fake) {
      for (int k : part.outside) {
        Var repr = fake_represent(t, emotion_repr[i - 1], context_repr[k - 1]);
        Var score = fake_score(t, repr, m.pair, m.dropout.prediction,
                               opt.training, rng);
        FakePairOut fp;
        fp.emotion = i;
        fp.clause = k;
        fp.pair_repr = repr.value().col(0);
        fp.score = score.scalar();
        fp.label = doc.gold_pairs.count({i, k}) ? 1 : 0;
        fake_scores.push_back(score);
        fake_labels.push_back(fp.label);
        out.fake.push_back(std::move(fp));
      }
    }
  }

  std::vector<Var> active;
  double l_e = 0.0, l_gp = 0.0, l_fp = 0.0;
  if (!opt.mask_emotion_loss) {
    Var node = emotion_loss(t, prob_nodes, out.emotion_labels);
    l_e = node.scalar();
    active.push_back(node);
  }
  if (build_genuine) {
    Var node = genuine_loss(t, genuine_scores, genuine_labels);
    l_gp = node.scalar();
    active.push_back(node);
  }
  if (build_fake) {
    Var node = fake_loss(t, fake_scores, fake_labels);
    l_fp = node.scalar();
    active.push_back(node);
  }
  if (!active.empty()) out.total_loss = t.add_n(active);
  out.losses = make_breakdown(l_e, l_gp, l_fp, opt.phase);
  out.states = materialize_states(g, tm, m.clause_dim);
  return out;
}

}  // namespace ecpe
