// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "grn/vocab.hpp"

namespace grn {

/// Padded integer grids for one mini-batch. mask[b*T+t] is true iff
/// t < lengths[b]; every padded cell holds the PAD id.
struct Batch {
  int B = 0;  // sentences
  int T = 0;  // max sentence length
  int C = 0;  // max word length (characters)
  std::vector<int> word_ids;      // B*T
  std::vector<int> char_ids;      // B*T*C
  std::vector<int> label_ids;     // B*T (0 where padded or unlabeled)
  std::vector<uint8_t> mask;      // B*T
  std::vector<int> lengths;       // B
  std::vector<int> word_lengths;  // B*T, characters per token (0 where padded)
};

/// Encodes sentences against the vocab. Labels must already be in the
/// BIOES scheme of the label vocabulary; sentences without labels encode
/// label ids of 0 (callers never read them without gold labels).
inline Batch encode_batch(const std::vector<Sentence>& sentences, const Vocab& vocab) {
  if (sentences.empty()) throw std::invalid_argument("encode_batch: empty sentence list");
  Batch b;
  b.B = static_cast<int>(sentences.size());
  for (const auto& s : sentences) {
    if (s.tokens.empty()) throw std::invalid_argument("encode_batch: empty sentence");
    b.T = std::max(b.T, static_cast<int>(s.tokens.size()));
    for (const auto& tok : s.tokens) {
      if (tok.empty()) throw std::invalid_argument("encode_batch: zero-character token");
      b.C = std::max(b.C, static_cast<int>(tok.size()));
    }
  }

  const size_t BT = static_cast<size_t>(b.B) * b.T;
  b.word_ids.assign(BT, kPadId);
  b.char_ids.assign(BT * b.C, kPadId);
  b.label_ids.assign(BT, 0);
  b.mask.assign(BT, 0);
  b.word_lengths.assign(BT, 0);
  b.lengths.resize(b.B);

  for (int i = 0; i < b.B; ++i) {
    const Sentence& s = sentences[static_cast<size_t>(i)];
    const int len = static_cast<int>(s.tokens.size());
    b.lengths[i] = len;
    const bool labeled = !s.labels.empty();
    if (labeled && s.labels.size() != s.tokens.size())
      throw std::invalid_argument("encode_batch: token/label length mismatch");
    for (int t = 0; t < len; ++t) {
      const size_t cell = static_cast<size_t>(i) * b.T + t;
      const std::string& tok = s.tokens[static_cast<size_t>(t)];
      b.word_ids[cell] = lookup_word_id(vocab, tok);
      b.mask[cell] = 1;
      b.word_lengths[cell] = static_cast<int>(tok.size());
      for (size_t c = 0; c < tok.size(); ++c)
        b.char_ids[cell * b.C + c] = lookup_char_id(vocab, static_cast<unsigned char>(tok[c]));
      if (labeled) {
        auto it = vocab.label_to_id.find(s.labels[static_cast<size_t>(t)]);
        if (it == vocab.label_to_id.end())
          throw std::runtime_error("encode_batch: label '" + s.labels[static_cast<size_t>(t)] +
                                   "' not in label vocabulary");
        b.label_ids[cell] = it->second;
      }
    }
  }
  return b;
}

}  // namespace grn
