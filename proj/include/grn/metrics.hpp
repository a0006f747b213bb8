// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "grn/corpus.hpp"

// Span extraction and exact-match precision/recall/F1 with the usual CoNLL
// evaluation semantics: boundary and type must both match.

namespace grn {

struct LabeledSpan {
  std::string entity_type;
  int start = 0;  // inclusive
  int end = 0;    // inclusive
  auto operator<=>(const LabeledSpan&) const = default;
};

/// Maximal entity chunks from a BIO (or BIOES) label sequence. Orphan I/E
/// tags start a new chunk, mirroring the repair rule used in training.
inline std::vector<LabeledSpan> extract_spans(const std::vector<std::string>& labels) {
  std::vector<LabeledSpan> spans;
  std::string open_type;
  int open_start = -1;
  auto close = [&](int end) {
    if (!open_type.empty()) spans.push_back({open_type, open_start, end});
    open_type.clear();
  };
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    char p;
    std::string type;
    split_label(labels[static_cast<size_t>(i)], &p, &type);
    switch (p) {
      case 'O':
        close(i - 1);
        break;
      case 'B':
        close(i - 1);
        open_type = type;
        open_start = i;
        break;
      case 'S':
        close(i - 1);
        spans.push_back({type, i, i});
        break;
      case 'I':
        if (open_type != type) {
          close(i - 1);
          open_type = type;
          open_start = i;
        }
        break;
      case 'E':
        if (open_type == type) {
          close(i);
        } else {
          close(i - 1);
          spans.push_back({type, i, i});
        }
        break;
    }
  }
  close(static_cast<int>(labels.size()) - 1);
  return spans;
}

struct PrfCounts {
  long gold = 0;
  long predicted = 0;
  long correct = 0;
};

struct PrfResult {
  double precision = 0;  // percent
  double recall = 0;
  double f1 = 0;
  PrfCounts counts;
  long tokens = 0;
  std::map<std::string, PrfCounts> by_type;
};

inline double pct(long num, long den) { return den == 0 ? 0.0 : 100.0 * num / den; }

inline double f1_pct(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

/// Micro-averaged exact-match span P/R/F1 over a corpus of label
/// sequences. Sentence counts and lengths must line up.
inline PrfResult span_prf(const std::vector<std::vector<std::string>>& gold,
                          const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("span_prf: corpus size mismatch: " + std::to_string(gold.size()) +
                                " gold vs " + std::to_string(pred.size()) + " predicted");
  PrfResult r;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw std::invalid_argument("span_prf: sentence " + std::to_string(i) +
                                  " length mismatch: " + std::to_string(gold[i].size()) + " vs " +
                                  std::to_string(pred[i].size()));
    r.tokens += static_cast<long>(gold[i].size());
    const auto gs = extract_spans(gold[i]);
    const auto ps = extract_spans(pred[i]);
    const std::set<LabeledSpan> gset(gs.begin(), gs.end());
    for (const auto& s : gs) {
      ++r.counts.gold;
      ++r.by_type[s.entity_type].gold;
    }
    for (const auto& s : ps) {
      ++r.counts.predicted;
      ++r.by_type[s.entity_type].predicted;
      if (gset.count(s)) {
        ++r.counts.correct;
        ++r.by_type[s.entity_type].correct;
      }
    }
  }
  r.precision = pct(r.counts.correct, r.counts.predicted);
  r.recall = pct(r.counts.correct, r.counts.gold);
  r.f1 = f1_pct(r.precision, r.recall);
  return r;
}

/// conlleval-style plain-text report, stable enough to diff against
/// committed golden files.
inline std::string prf_report(const PrfResult& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "processed %ld tokens with %ld phrases; found: %ld phrases; correct: %ld.\n",
                r.tokens, r.counts.gold, r.counts.predicted, r.counts.correct);
  out += buf;
  std::snprintf(buf, sizeof buf, "precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f\n", r.precision,
                r.recall, r.f1);
  out += buf;
  for (const auto& [type, c] : r.by_type) {
    const double p = pct(c.correct, c.predicted);
    const double rec = pct(c.correct, c.gold);
    std::snprintf(buf, sizeof buf, "%17s: precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f  %ld\n",
                  type.c_str(), p, rec, f1_pct(p, rec), c.predicted);
    out += buf;
  }
  return out;
}

}  // namespace grn
