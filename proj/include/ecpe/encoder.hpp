#pragma once

#include <random>
#include <string>
#include <vector>

#include "ecpe/corpus.hpp"
#include "ecpe/lstm.hpp"
#include "ecpe/tape.hpp"

namespace ecpe {

struct DropoutRates {
  double embedding = 0.1;
  double word = 0.5;
  double clause = 0.1;
  double prediction = 0.1;
};

// A document as a padded token-id matrix. Real clauses occupy the leading
// rows; clause_len[i] == 0 marks a padded clause row. Padded token slots
// hold the padding id.
struct TokenMatrix {
  Eigen::MatrixXi ids;
  std::vector<int> clause_len;

  int rows() const { return int(ids.rows()); }
  int max_tokens() const { return int(ids.cols()); }
  int real_clauses() const {
    int n = 0;
    for (int l : clause_len) n += (l > 0);
    return n;
  }
};

inline TokenMatrix vectorize(const Document& d, const Vocabulary& vocab) {
  int n_max = 1;
  for (const auto& c : d.clauses) n_max = std::max(n_max, int(c.tokens.size()));
  TokenMatrix tm;
  tm.ids = Eigen::MatrixXi::Constant(d.size(), n_max, Vocabulary::kPadId);
  tm.clause_len.resize(d.size());
  for (int i = 0; i < d.size(); ++i) {
    const auto& toks = d.clauses[i].tokens;
    tm.clause_len[i] = int(toks.size());
    for (int j = 0; j < int(toks.size()); ++j)
      tm.ids(i, j) = vocab.id(toks[j]);
  }
  return tm;
}

// Word-level bidirectional encoder + attention pooling + clause-level
// bidirectional encoder. Word and clause hidden dims are half the clause
// representation dim, so the concatenations land back on clause_dim.
struct EncoderParams {
  Parameter embedding;  // V x embedding_dim, padding row zero
  LstmParams word_fw, word_bw;
  Parameter attn_w;  // H x H
  Parameter attn_b;  // H x 1
  Parameter attn_u;  // H x 1
  LstmParams clause_fw, clause_bw;

  void init(int vocab_size, int embedding_dim, int clause_dim,
            std::mt19937_64& rng) {
    if (clause_dim % 2 != 0)
      throw ArgumentError("clause dim must be even (bidirectional halves)");
    const int h = clause_dim / 2;
    embedding = Parameter("encoder.embedding",
                          uniform_matrix(vocab_size, embedding_dim, 0.1, rng));
    embedding.value.row(Vocabulary::kPadId).setZero();
    word_fw.init("encoder.word_fw", embedding_dim, h, rng);
    word_bw.init("encoder.word_bw", embedding_dim, h, rng);
    attn_w = Parameter("encoder.attn_w", fanin_matrix(clause_dim, clause_dim, rng));
    attn_b = Parameter("encoder.attn_b", Mat::Zero(clause_dim, 1));
    attn_u = Parameter("encoder.attn_u", fanin_matrix(clause_dim, 1, rng));
    clause_fw.init("encoder.clause_fw", clause_dim, h, rng);
    clause_bw.init("encoder.clause_bw", clause_dim, h, rng);
  }

  int embedding_dim() const { return int(embedding.value.cols()); }
  int clause_dim() const { return int(attn_b.value.rows()); }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out{&embedding};
    for (auto* p : word_fw.params()) out.push_back(p);
    for (auto* p : word_bw.params()) out.push_back(p);
    out.push_back(&attn_w);
    out.push_back(&attn_b);
    out.push_back(&attn_u);
    for (auto* p : clause_fw.params()) out.push_back(p);
    for (auto* p : clause_bw.params()) out.push_back(p);
    return out;
  }
};

// Materialized per-document encoder outputs; padded positions are exact
// zeros and padded clause rows are zero rows.
struct ClauseStates {
  std::vector<Mat> word_hidden;     // per clause: n_max x H
  std::vector<Vec> word_attention;  // per clause: n_max, sums to 1 on real rows
  Mat clause_pooled;                // |d| x H
  Mat clause_repr;                  // |d| x H
  std::vector<int> clause_len;
  int n_real = 0;
};

// Embedding lookup per token. Padding slots (and padded clause rows) become
// zero constants so nothing flows back into the padding row.
inline std::vector<std::vector<Var>> embed(Tape& t, const TokenMatrix& doc,
                                           Parameter& embedding, double rate,
                                           bool training,
                                           std::mt19937_64& rng) {
  const int dim = int(embedding.value.cols());
  std::vector<std::vector<Var>> out(doc.rows());
  for (int i = 0; i < doc.rows(); ++i) {
    out[i].resize(doc.max_tokens());
    for (int j = 0; j < doc.max_tokens(); ++j) {
      int id = doc.ids(i, j);
      if (id < 0 || id >= int(embedding.value.rows()))
        throw IndexError("token id " + std::to_string(id) +
                         " out of range [0, " +
                         std::to_string(embedding.value.rows()) + ")");
      if (j >= doc.clause_len[i] || id == Vocabulary::kPadId) {
        out[i][j] = t.zeros(dim, 1);
      } else {
        out[i][j] = t.dropout(t.lookup(embedding, id), rate, training, rng);
      }
    }
  }
  return out;
}

// Bidirectional word encoding of one clause. Positions past `len` stay zero.
inline std::vector<Var> word_encode(Tape& t, const std::vector<Var>& tokens,
                                    int len, LstmParams& fw, LstmParams& bw,
                                    double rate, bool training,
                                    std::mt19937_64& rng) {
  if (len < 1) throw ContractError("word_encode needs at least one real token");
  std::vector<Var> real(tokens.begin(), tokens.begin() + len);
  std::vector<Var> hidden = bilstm(t, fw, bw, real);
  std::vector<Var> out(tokens.size());
  const int h_dim = 2 * fw.hidden_dim();
  for (std::size_t j = 0; j < tokens.size(); ++j)
    out[j] = j < std::size_t(len)
                 ? t.dropout(hidden[j], rate, training, rng)
                 : t.zeros(h_dim, 1);
  return out;
}

// Attention pooling over the real positions of one clause:
//   score_j = tanh(W h_j + b)^T u,  alpha = softmax(score),  out = sum alpha_j h_j
inline std::pair<Var, Var> word_attend(Tape& t, const std::vector<Var>& hidden,
                                       int len, Parameter& attn_w,
                                       Parameter& attn_b, Parameter& attn_u) {
  if (len < 1) throw ContractError("word_attend: all positions masked");
  Var w = t.param(attn_w);
  Var b = t.param(attn_b);
  Var u = t.param(attn_u);
  std::vector<Var> scores(len);
  for (int j = 0; j < len; ++j)
    scores[j] = t.dot(t.tanh(t.add(t.matmul(w, hidden[j]), b)), u);
  Var alpha = t.softmax(t.vconcat(scores));
  std::vector<Var> weighted(len);
  for (int j = 0; j < len; ++j)
    weighted[j] = t.scale(hidden[j], t.pick(alpha, j));
  return {t.add_n(weighted), alpha};
}

// Clause-level bidirectional encoding over the pooled clause states.
inline std::vector<Var> clause_encode(Tape& t, const std::vector<Var>& pooled,
                                      LstmParams& fw, LstmParams& bw,
                                      double rate, bool training,
                                      std::mt19937_64& rng) {
  if (pooled.empty()) throw ContractError("clause_encode: empty document");
  std::vector<Var> hidden = bilstm(t, fw, bw, pooled);
  for (auto& h : hidden) h = t.dropout(h, rate, training, rng);
  return hidden;
}

// Graph handles for one encoded document; indices cover real clauses only.
struct EncodeGraph {
  std::vector<std::vector<Var>> word_hidden;
  std::vector<Var> word_alpha;    // len_i x 1 each
  std::vector<Var> clause_pooled;
  std::vector<Var> clause_repr;
  std::vector<int> clause_len;
};

inline EncodeGraph encode_document(Tape& t, const TokenMatrix& doc,
                                   EncoderParams& params,
                                   const DropoutRates& rates, bool training,
                                   std::mt19937_64& rng) {
  EncodeGraph g;
  auto embedded =
      embed(t, doc, params.embedding, rates.embedding, training, rng);
  const int n_real = doc.real_clauses();
  for (int i = 0; i < n_real; ++i) {
    int len = doc.clause_len[i];
    if (len < 1)
      throw ContractError("padded clause row " + std::to_string(i) +
                          " precedes real clauses");
    auto hidden = word_encode(t, embedded[i], len, params.word_fw,
                              params.word_bw, rates.word, training, rng);
    auto [pooled, alpha] =
        word_attend(t, hidden, len, params.attn_w, params.attn_b, params.attn_u);
    g.word_hidden.push_back(std::move(hidden));
    g.word_alpha.push_back(alpha);
    g.clause_pooled.push_back(pooled);
    g.clause_len.push_back(len);
  }
  g.clause_repr = clause_encode(t, g.clause_pooled, params.clause_fw,
                                params.clause_bw, rates.clause, training, rng);
  return g;
}

// Copies graph values into padded matrices; padded slots stay exact zeros.
inline ClauseStates materialize_states(const EncodeGraph& g,
                                       const TokenMatrix& doc, int h_dim) {
  ClauseStates s;
  s.clause_len = doc.clause_len;
  s.n_real = int(g.clause_repr.size());
  s.clause_pooled = Mat::Zero(doc.rows(), h_dim);
  s.clause_repr = Mat::Zero(doc.rows(), h_dim);
  for (int i = 0; i < doc.rows(); ++i) {
    Mat wh = Mat::Zero(doc.max_tokens(), h_dim);
    Vec wa = Vec::Zero(doc.max_tokens());
    if (i < s.n_real) {
      for (int j = 0; j < doc.clause_len[i]; ++j)
        wh.row(j) = g.word_hidden[i][j].value().transpose();
      for (int j = 0; j < doc.clause_len[i]; ++j)
        wa(j) = g.word_alpha[i].value()(j, 0);
      s.clause_pooled.row(i) = g.clause_pooled[i].value().transpose();
      s.clause_repr.row(i) = g.clause_repr[i].value().transpose();
    }
    s.word_hidden.push_back(std::move(wh));
    s.word_attention.push_back(std::move(wa));
  }
  return s;
}

// Convenience overload materializing ClauseStates with padded zero rows.
inline ClauseStates encode_document(const TokenMatrix& doc,
                                    EncoderParams& params,
                                    const DropoutRates& rates, bool training,
                                    std::mt19937_64& rng) {
  Tape t;
  EncodeGraph g = encode_document(t, doc, params, rates, training, rng);
  return materialize_states(g, doc, params.clause_dim());
}

}  // namespace ecpe
