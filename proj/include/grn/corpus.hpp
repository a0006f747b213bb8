// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// CoNLL column-format ingestion and BIO/BIOES labelling-scheme handling.

namespace grn {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  bool doc_start = false;
};

enum class Scheme { BIO, BIOES };

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline bool blank_line(const std::string& line) {
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace detail

/// Splits "P-TYPE" into prefix and type; "O" yields ('O', ""). Anything
/// else with an unknown prefix letter is rejected.
inline void split_label(const std::string& label, char* prefix, std::string* type) {
  if (label == "O") {
    *prefix = 'O';
    type->clear();
    return;
  }
  const auto dash = label.find('-');
  if (dash == 1 && label.size() > 2) {
    const char p = label[0];
    if (p == 'B' || p == 'I' || p == 'E' || p == 'S') {
      *prefix = p;
      *type = label.substr(2);
      return;
    }
  }
  throw std::invalid_argument("unknown label prefix in '" + label + "'");
}

/// Parses blank-line-separated CoNLL blocks. Columns are whitespace
/// separated; `label_column` may be -1 for the last column. "-DOCSTART-"
/// blocks are kept but flagged so callers can drop them from training.
inline std::vector<Sentence> parse_conll(std::istream& in, int token_column = 0,
                                         int label_column = -1) {
  std::vector<Sentence> sentences;
  Sentence cur;
  std::string line;
  int line_no = 0;
  auto flush = [&]() {
    if (!cur.tokens.empty()) sentences.push_back(std::move(cur));
    cur = Sentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank_line(line)) {
      flush();
      continue;
    }
    const auto cols = detail::split_ws(line);
    const int ncols = static_cast<int>(cols.size());
    const int lcol = label_column < 0 ? ncols + label_column : label_column;
    if (token_column >= ncols || lcol < 0 || lcol >= ncols)
      throw std::runtime_error("conll parse error at line " + std::to_string(line_no) +
                               ": expected at least " +
                               std::to_string(std::max(token_column, label_column) + 1) +
                               " columns, got " + std::to_string(ncols));
    if (cols[static_cast<size_t>(token_column)] == "-DOCSTART-") cur.doc_start = true;
    cur.tokens.push_back(cols[static_cast<size_t>(token_column)]);
    cur.labels.push_back(cols[static_cast<size_t>(lcol)]);
  }
  flush();
  return sentences;
}

inline std::vector<Sentence> without_docstart(const std::vector<Sentence>& all) {
  std::vector<Sentence> out;
  for (const auto& s : all)
    if (!s.doc_start) out.push_back(s);
  return out;
}

/// conlleval-tolerant repair: an I-X that does not continue an open X
/// entity becomes B-X.
inline std::vector<std::string> repair_bio(const std::vector<std::string>& labels) {
  std::vector<std::string> out = labels;
  std::string open_type;  // empty = no open entity
  for (auto& label : out) {
    char p;
    std::string type;
    split_label(label, &p, &type);
    if (p == 'O') {
      open_type.clear();
    } else if (p == 'B') {
      open_type = type;
    } else if (p == 'I') {
      if (open_type != type) {
        label = "B-" + type;
        open_type = type;
      }
    } else {
      throw std::invalid_argument("repair_bio: '" + label + "' is not a BIO label");
    }
  }
  return out;
}

inline std::vector<std::string> bio_to_bioes(const std::vector<std::string>& labels) {
  const auto bio = repair_bio(labels);
  std::vector<std::string> out(bio.size());
  for (size_t i = 0; i < bio.size(); ++i) {
    char p;
    std::string type;
    split_label(bio[i], &p, &type);
    if (p == 'O') {
      out[i] = "O";
      continue;
    }
    bool continued = false;
    if (i + 1 < bio.size()) {
      char np;
      std::string ntype;
      split_label(bio[i + 1], &np, &ntype);
      continued = np == 'I' && ntype == type;
    }
    if (p == 'B')
      out[i] = (continued ? "B-" : "S-") + type;
    else
      out[i] = (continued ? "I-" : "E-") + type;
  }
  return out;
}

inline std::vector<std::string> bioes_to_bio(const std::vector<std::string>& labels) {
  std::vector<std::string> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    char p;
    std::string type;
    split_label(labels[i], &p, &type);
    switch (p) {
      case 'O': out[i] = "O"; break;
      case 'B':
      case 'S': out[i] = "B-" + type; break;
      case 'I':
      case 'E': out[i] = "I-" + type; break;
    }
  }
  return out;
}

inline std::vector<std::string> convert_scheme(const std::vector<std::string>& labels, Scheme from,
                                               Scheme to) {
  if (from == to) return from == Scheme::BIO ? repair_bio(labels) : labels;
  return from == Scheme::BIO ? bio_to_bioes(labels) : bioes_to_bio(labels);
}

}  // namespace grn
