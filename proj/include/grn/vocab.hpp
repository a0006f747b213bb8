// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "grn/corpus.hpp"

namespace grn {

constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr const char* kPadToken = "<pad>";
constexpr const char* kUnkToken = "<unk>";

enum class WordSource : uint8_t { Reserved = 0, Frequency = 1, Pretrained = 2, Both = 3 };

/// Immutable after construction. Ids are dense, assigned in first-seen
/// order after the reserved PAD/UNK slots, so construction is deterministic
/// given input ordering.
struct Vocab {
  std::vector<std::string> words;        // id -> surface form
  std::vector<WordSource> word_sources;  // parallel to words
  std::vector<int> chars;                // id -> byte value
  std::vector<std::string> labels;       // id -> BIOES tag

  std::unordered_map<std::string, int> word_to_id;
  std::unordered_map<int, int> char_to_id;
  std::unordered_map<std::string, int> label_to_id;

  int word_count() const { return static_cast<int>(words.size()); }
  int char_count() const { return static_cast<int>(chars.size()); }
  int label_count() const { return static_cast<int>(labels.size()); }

  void rebuild_maps() {
    word_to_id.clear();
    char_to_id.clear();
    label_to_id.clear();
    for (size_t i = 0; i < words.size(); ++i) word_to_id.emplace(words[i], static_cast<int>(i));
    for (size_t i = 0; i < chars.size(); ++i) char_to_id.emplace(chars[i], static_cast<int>(i));
    for (size_t i = 0; i < labels.size(); ++i) label_to_id.emplace(labels[i], static_cast<int>(i));
  }
};

/// Exact match first, then a lowercased fallback, then UNK.
inline int lookup_word_id(const Vocab& v, const std::string& token) {
  auto it = v.word_to_id.find(token);
  if (it != v.word_to_id.end()) return it->second;
  std::string lower = token;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  it = v.word_to_id.find(lower);
  if (it != v.word_to_id.end()) return it->second;
  return kUnkId;
}

inline int lookup_char_id(const Vocab& v, unsigned char c) {
  auto it = v.char_to_id.find(static_cast<int>(c));
  return it == v.char_to_id.end() ? kUnkId : it->second;
}

/// Builds the vocabulary from training sentences plus the pretrained word
/// list: PAD, UNK, every training word with frequency >= min_freq, then
/// every pretrained word. Character ids come from training characters and
/// label ids from the BIOES-converted training labels.
inline Vocab build_vocab(const std::vector<Sentence>& train,
                         const std::vector<std::string>& pretrained_words, int min_freq = 3) {
  Vocab v;
  v.words = {kPadToken, kUnkToken};
  v.word_sources = {WordSource::Reserved, WordSource::Reserved};
  v.chars = {0, 1};  // PAD and UNK slots; real byte values follow

  std::unordered_map<std::string, int> freq;
  std::vector<std::string> first_seen;
  for (const auto& s : train)
    for (const auto& tok : s.tokens) {
      if (++freq[tok] == 1) first_seen.push_back(tok);
    }

  std::unordered_map<std::string, size_t> pretrained_rank;
  for (size_t i = 0; i < pretrained_words.size(); ++i)
    pretrained_rank.emplace(pretrained_words[i], i);

  for (const auto& tok : first_seen) {
    if (freq[tok] < min_freq) continue;
    v.words.push_back(tok);
    v.word_sources.push_back(pretrained_rank.count(tok) ? WordSource::Both
                                                        : WordSource::Frequency);
  }
  std::unordered_map<std::string, int> seen;
  for (size_t i = 0; i < v.words.size(); ++i) seen.emplace(v.words[i], 1);
  for (const auto& w : pretrained_words) {
    if (seen.count(w)) continue;
    seen.emplace(w, 1);
    v.words.push_back(w);
    v.word_sources.push_back(WordSource::Pretrained);
  }

  std::vector<bool> char_seen(256, false);
  for (const auto& s : train)
    for (const auto& tok : s.tokens)
      for (unsigned char c : tok) {
        if (!char_seen[c]) {
          char_seen[c] = true;
          v.chars.push_back(static_cast<int>(c));
        }
      }

  for (const auto& s : train) {
    for (const auto& tag : bio_to_bioes(s.labels)) {
      if (std::find(v.labels.begin(), v.labels.end(), tag) == v.labels.end())
        v.labels.push_back(tag);
    }
  }

  v.rebuild_maps();
  return v;
}

inline nlohmann::json vocab_to_json(const Vocab& v) {
  nlohmann::json j;
  j["format"] = "grn-vocab";
  j["version"] = 1;
  j["words"] = v.words;
  std::vector<int> src;
  src.reserve(v.word_sources.size());
  for (auto s : v.word_sources) src.push_back(static_cast<int>(s));
  j["word_sources"] = src;
  j["chars"] = v.chars;
  j["labels"] = v.labels;
  return j;
}

inline Vocab vocab_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j["format"] != "grn-vocab")
    throw std::runtime_error("vocab: not a grn-vocab document");
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("vocab: unsupported version " + j.at("version").dump());
  Vocab v;
  v.words = j.at("words").get<std::vector<std::string>>();
  for (int s : j.at("word_sources").get<std::vector<int>>())
    v.word_sources.push_back(static_cast<WordSource>(s));
  v.chars = j.at("chars").get<std::vector<int>>();
  v.labels = j.at("labels").get<std::vector<std::string>>();
  if (v.word_sources.size() != v.words.size())
    throw std::runtime_error("vocab: word_sources/words length mismatch");
  v.rebuild_maps();
  return v;
}

inline void save_vocab(const Vocab& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file " + path);
  out << vocab_to_json(v).dump(2) << '\n';
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file " + path);
  nlohmann::json j;
  in >> j;
  return vocab_from_json(j);
}

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

/// Stable content hash used to pair checkpoints with the vocabulary they
/// were trained with.
inline std::string vocab_hash(const Vocab& v) {
  const std::string dump = vocab_to_json(v).dump();
  const uint64_t h = fnv1a64(dump.data(), dump.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Reads `token v1 ... v_dim` lines. Rows for words present in the file are
/// copied; PAD stays zero; every other row is drawn from the fan-based
/// uniform initializer bound sqrt(6/dim).
template <typename Real, typename Rng>
std::vector<Real> load_pretrained_embeddings(const std::string& path, const Vocab& vocab, int dim,
                                             Rng&& uniform01) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read embeddings file " + path);

  const int V = vocab.word_count();
  std::vector<Real> mat(static_cast<size_t>(V) * dim, Real(0));
  std::vector<bool> filled(static_cast<size_t>(V), false);
  filled[kPadId] = true;  // PAD row frozen at zero

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string word;
    is >> word;
    std::vector<double> vals;
    double x;
    while (is >> x) vals.push_back(x);
    if (static_cast<int>(vals.size()) != dim)
      throw std::runtime_error("embeddings file " + path + " line " + std::to_string(line_no) +
                               ": expected " + std::to_string(dim) + " values, got " +
                               std::to_string(vals.size()));
    auto it = vocab.word_to_id.find(word);
    if (it == vocab.word_to_id.end()) continue;
    for (int d = 0; d < dim; ++d) mat[static_cast<size_t>(it->second) * dim + d] = Real(vals[d]);
    filled[static_cast<size_t>(it->second)] = true;
  }

  const double bound = std::sqrt(6.0 / dim);
  for (int w = 0; w < V; ++w) {
    if (filled[static_cast<size_t>(w)]) continue;
    for (int d = 0; d < dim; ++d)
      mat[static_cast<size_t>(w) * dim + d] = Real((2.0 * uniform01() - 1.0) * bound);
  }
  return mat;
}

}  // namespace grn
