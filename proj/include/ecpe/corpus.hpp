#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ecpe/common.hpp"
#include "ecpe/tape.hpp"

namespace ecpe {

// One clause: 1-based position in its document plus its tokens.
struct Clause {
  int index = 0;
  std::vector<std::string> tokens;
};

struct Document {
  std::string doc_id;
  std::vector<Clause> clauses;
  // (emotion_index, cause_index), 1-based; may be self-referential.
  std::set<std::pair<int, int>> gold_pairs;

  int size() const { return int(clauses.size()); }

  std::set<int> emotion_indices() const {
    std::set<int> out;
    for (const auto& [e, c] : gold_pairs) out.insert(e);
    return out;
  }
};

struct Lexicon {
  std::set<std::string> words;

  bool contains(const std::string& w) const { return words.count(w) > 0; }
  std::size_t size() const { return words.size(); }
};

// Token ids are contiguous in [0, V); 0 and 1 are reserved for padding and
// unknown and never map back from corpus tokens.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary() : id_to_token_{"<pad>", "<unk>"} {}

  int add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = int(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    return id;
  }

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) > 0;
  }

  int size() const { return int(id_to_token_.size()); }

  const std::string& token(int id) const { return id_to_token_.at(id); }

  // Full id -> token table including the two reserved entries.
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  static Vocabulary from_tokens(const std::vector<std::string>& table) {
    if (table.size() < 2)
      throw ValidationError("vocabulary table must include reserved entries");
    Vocabulary v;
    v.id_to_token_ = table;
    for (int i = 2; i < int(table.size()); ++i)
      v.token_to_id_.emplace(table[i], i);
    return v;
  }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct FoldSplit {
  int fold_id = 0;
  std::set<std::string> train_docs;
  std::set<std::string> test_docs;
};

namespace detail {

inline Document document_from_json(const nlohmann::json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  const auto& clauses = j.at("clauses");
  int index = 1;
  for (const auto& cl : clauses) {
    Clause c;
    c.index = index++;
    for (const auto& tok : cl) c.tokens.push_back(tok.get<std::string>());
    if (c.tokens.empty())
      throw ValidationError("empty clause " + std::to_string(c.index) +
                            " in document " + d.doc_id);
    d.clauses.push_back(std::move(c));
  }
  if (d.clauses.empty())
    throw ValidationError("document " + d.doc_id + " has no clauses");
  if (j.contains("pairs")) {
    for (const auto& p : j.at("pairs")) {
      int e = p.at(0).get<int>();
      int c = p.at(1).get<int>();
      if (e < 1 || e > d.size() || c < 1 || c > d.size())
        throw ValidationError("pair (" + std::to_string(e) + "," +
                              std::to_string(c) + ") out of range in document " +
                              d.doc_id);
      d.gold_pairs.emplace(e, c);
    }
  }
  return d;
}

}  // namespace detail

// One JSONL record per document:
//   {"doc_id": str, "clauses": [[token,...],...], "pairs": [[e,c],...]}
inline std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      docs.push_back(detail::document_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return docs;
}

inline nlohmann::json document_to_json(const Document& d) {
  nlohmann::json clauses = nlohmann::json::array();
  for (const auto& c : d.clauses) clauses.push_back(c.tokens);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [e, c] : d.gold_pairs) pairs.push_back({e, c});
  return {{"doc_id", d.doc_id}, {"clauses", clauses}, {"pairs", pairs}};
}

inline void save_corpus(const std::vector<Document>& docs,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file " + path);
  for (const auto& d : docs) out << document_to_json(d).dump() << "\n";
}

// One word per line; '#' lines are comments; duplicates collapse.
inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file " + path);
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                             line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lex.words.insert(line);
  }
  return lex;
}

inline void save_lexicon(const Lexicon& lex, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lexicon file " + path);
  for (const auto& w : lex.words) out << w << "\n";
}

// Tokens with corpus frequency >= min_count get ids in first-occurrence
// order; everything else maps to the unknown id.
inline Vocabulary build_vocab(const std::vector<Document>& docs,
                              int min_count = 1) {
  if (min_count < 1) throw ArgumentError("min_count must be >= 1");
  std::unordered_map<std::string, int> freq;
  std::vector<const std::string*> order;
  for (const auto& d : docs)
    for (const auto& c : d.clauses)
      for (const auto& tok : c.tokens) {
        auto [it, inserted] = freq.emplace(tok, 0);
        if (inserted) order.push_back(&it->first);
        ++it->second;
      }
  Vocabulary v;
  for (const std::string* tok : order)
    if (freq[*tok] >= min_count) v.add(*tok);
  return v;
}

// Text embeddings, one "token v1 ... v_dim" line each. Tokens absent from
// the file (and the unknown id) draw uniformly from [-0.1, 0.1]; the padding
// row stays zero.
inline Mat load_embeddings(const std::string& path, const Vocabulary& vocab,
                           int dim, std::mt19937_64& rng) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path);
  Mat emb = uniform_matrix(vocab.size(), dim, 0.1, rng);
  emb.row(Vocabulary::kPadId).setZero();
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (int(vals.size()) != dim)
      throw FormatError("embedding row for token '" + token + "' has " +
                        std::to_string(vals.size()) + " values, expected " +
                        std::to_string(dim));
    if (!vocab.contains(token)) continue;
    int id = vocab.id(token);
    for (int k = 0; k < dim; ++k) emb(id, k) = vals[k];
  }
  return emb;
}

// Shuffle document ids by seed and split into n_folds test sets whose sizes
// differ by at most one; train sets are the complements.
inline std::vector<FoldSplit> make_folds(const std::vector<Document>& docs,
                                         int n_folds, std::uint64_t seed) {
  if (n_folds < 1) throw ArgumentError("n_folds must be >= 1");
  if (n_folds > int(docs.size()))
    throw ArgumentError("n_folds (" + std::to_string(n_folds) +
                        ") exceeds corpus size (" +
                        std::to_string(docs.size()) + ")");
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.doc_id);
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(ids[i - 1], ids[pick(rng)]);
  }
  int n = int(ids.size());
  int base = n / n_folds;
  int extra = n % n_folds;
  std::vector<FoldSplit> folds(n_folds);
  int at = 0;
  for (int f = 0; f < n_folds; ++f) {
    folds[f].fold_id = f;
    int take = base + (f < extra ? 1 : 0);
    for (int k = 0; k < take; ++k) folds[f].test_docs.insert(ids[at++]);
  }
  for (int f = 0; f < n_folds; ++f)
    for (const auto& id : ids)
      if (!folds[f].test_docs.count(id)) folds[f].train_docs.insert(id);
  return folds;
}

struct SyntheticCorpus {
  std::vector<Document> docs;
  Lexicon lexicon;
};

// Deterministic desk-scale corpus. Emotion clauses carry exactly one lexicon
// word, cause clauses carry a trigger token of the matching kind, causes sit
// within relative distance 2 of their emotion, and no distractor clause
// contains a lexicon word.
inline SyntheticCorpus generate_synthetic(int n_docs, std::uint64_t seed,
                                          int max_len = 10,
                                          int max_pairs = 2) {
  if (n_docs < 1) throw ArgumentError("n_docs must be >= 1");
  if (max_len < 4) throw ArgumentError("max_len must be >= 4");
  if (max_pairs < 1) throw ArgumentError("max_pairs must be >= 1");

  static const std::vector<std::string> kFillers = {
      "the", "day", "walk", "house", "road", "tree", "rain", "morning"};
  // emotion word / matching cause trigger
  static const std::vector<std::pair<std::string, std::string>> kKinds = {
      {"happy", "victory"}, {"sad", "funeral"}, {"angry", "insult"},
      {"afraid", "storm"},  {"proud", "medal"}, {"upset", "delay"}};

  std::mt19937_64 rng(seed);
  auto rand_int = [&rng](int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(rng);
  };

  SyntheticCorpus out;
  for (const auto& [emo, trig] : kKinds) {
    (void)trig;
    out.lexicon.words.insert(emo);
  }

  for (int n = 0; n < n_docs; ++n) {
    Document d;
    {
      std::ostringstream id;
      id << "synth-" << std::setw(4) << std::setfill('0') << n;
      d.doc_id = id.str();
    }
    int len = rand_int(4, max_len);
    for (int i = 1; i <= len; ++i) {
      Clause c;
      c.index = i;
      int n_fill = rand_int(2, 4);
      for (int k = 0; k < n_fill; ++k)
        c.tokens.push_back(kFillers[rand_int(0, int(kFillers.size()) - 1)]);
      d.clauses.push_back(std::move(c));
    }

    int n_pairs = rand_int(1, std::min(max_pairs, len));
    std::vector<int> positions(len);
    for (int i = 0; i < len; ++i) positions[i] = i + 1;
    for (std::size_t i = positions.size(); i > 1; --i)
      std::swap(positions[i - 1], positions[rand_int(0, int(i) - 1)]);
    std::vector<int> kinds(kKinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) kinds[i] = int(i);
    for (std::size_t i = kinds.size(); i > 1; --i)
      std::swap(kinds[i - 1], kinds[rand_int(0, int(i) - 1)]);

    for (int p = 0; p < n_pairs; ++p) {
      int emotion = positions[p];
      int cause = std::clamp(emotion + rand_int(-2, 2), 1, len);
      int kind = kinds[p % kinds.size()];
      Clause& ec = d.clauses[emotion - 1];
      ec.tokens.insert(ec.tokens.begin() + rand_int(0, int(ec.tokens.size())),
                       kKinds[kind].first);
      Clause& cc = d.clauses[cause - 1];
      cc.tokens.insert(cc.tokens.begin() + rand_int(0, int(cc.tokens.size())),
                       kKinds[kind].second);
      d.gold_pairs.emplace(emotion, cause);
    }
    out.docs.push_back(std::move(d));
  }
  return out;
}

}  // namespace ecpe
