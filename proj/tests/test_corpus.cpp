// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "grn/batch.hpp"
#include "grn/corpus.hpp"
#include "grn/metrics.hpp"
#include "grn/vocab.hpp"

using grn::Scheme;
using grn::Sentence;

namespace {

// All syntactically valid BIO sequences of the given length over the
// entity types, built by brute-force enumeration. Serves as the oracle
// domain for the round-trip property.
void valid_bio_sequences(int length, const std::vector<std::string>& types,
                         std::vector<std::string>* cur,
                         std::vector<std::vector<std::string>>* out) {
  if (static_cast<int>(cur->size()) == length) {
    out->push_back(*cur);
    return;
  }
  std::vector<std::string> options{"O"};
  for (const auto& t : types) options.push_back("B-" + t);
  if (!cur->empty()) {
    const std::string& prev = cur->back();
    if (prev != "O") options.push_back("I-" + prev.substr(2));
  }
  for (const auto& o : options) {
    cur->push_back(o);
    valid_bio_sequences(length, types, cur, out);
    cur->pop_back();
  }
}

std::vector<std::vector<std::string>> all_valid_bio(int max_len) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur;
  for (int len = 1; len <= max_len; ++len) valid_bio_sequences(len, {"PER", "LOC"}, &cur, &out);
  return out;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  return path.string();
}

}  // namespace

TEST_CASE("parse_conll block structure") {
  std::istringstream in(
      "-DOCSTART- -X- O O\n"
      "\n"
      "EU NNP B-NP B-ORG\n"
      "rejects VBZ B-VP O\n"
      "\n"
      "Peter NNP B-NP B-PER\n");
  const auto all = grn::parse_conll(in, 0, -1);
  REQUIRE(all.size() == 3);
  CHECK(all[0].doc_start);
  CHECK(all[0].tokens == std::vector<std::string>{"-DOCSTART-"});
  CHECK_FALSE(all[1].doc_start);
  CHECK(all[1].tokens == std::vector<std::string>{"EU", "rejects"});
  CHECK(all[1].labels == std::vector<std::string>{"B-ORG", "O"});
  CHECK(all[2].tokens == std::vector<std::string>{"Peter"});

  const auto train = grn::without_docstart(all);
  REQUIRE(train.size() == 2);
  CHECK(train[0].tokens[0] == "EU");
}

TEST_CASE("parse_conll errors and edges") {
  SECTION("ragged line reports its line number") {
    std::istringstream in("EU NNP B-NP B-ORG\nrejects\n");
    REQUIRE_THROWS_WITH(grn::parse_conll(in, 0, 3),
                        Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("empty input gives empty list") {
    std::istringstream in("");
    CHECK(grn::parse_conll(in).empty());
  }
  SECTION("explicit column selection") {
    std::istringstream in("B-ORG x EU\n");
    const auto s = grn::parse_conll(in, 2, 0);
    REQUIRE(s.size() == 1);
    CHECK(s[0].tokens[0] == "EU");
    CHECK(s[0].labels[0] == "B-ORG");
  }
}

TEST_CASE("scheme conversion definitions") {
  CHECK(grn::convert_scheme({"B-PER", "I-PER", "O"}, Scheme::BIO, Scheme::BIOES) ==
        std::vector<std::string>{"B-PER", "E-PER", "O"});
  CHECK(grn::convert_scheme({"B-LOC"}, Scheme::BIO, Scheme::BIOES) ==
        std::vector<std::string>{"S-LOC"});
  CHECK(grn::convert_scheme({"S-LOC", "B-PER", "I-PER", "E-PER"}, Scheme::BIOES, Scheme::BIO) ==
        std::vector<std::string>{"B-LOC", "B-PER", "I-PER", "I-PER"});
  CHECK(grn::repair_bio({"O", "I-PER", "I-PER"}) ==
        std::vector<std::string>{"O", "B-PER", "I-PER"});
  CHECK(grn::repair_bio({"B-LOC", "I-PER"}) == std::vector<std::string>{"B-LOC", "B-PER"});
  REQUIRE_THROWS_AS(grn::convert_scheme({"Q-PER"}, Scheme::BIO, Scheme::BIOES),
                    std::invalid_argument);
}

TEST_CASE("BIO -> BIOES -> BIO round-trips on all valid sequences of length <= 6") {
  const auto seqs = all_valid_bio(6);
  REQUIRE(seqs.size() > 1000);  // enumeration really is exhaustive
  for (const auto& seq : seqs) {
    const auto bioes = grn::convert_scheme(seq, Scheme::BIO, Scheme::BIOES);
    const auto back = grn::convert_scheme(bioes, Scheme::BIOES, Scheme::BIO);
    REQUIRE(back == seq);
    // span sets agree between the two encodings
    REQUIRE(grn::extract_spans(seq) == grn::extract_spans(bioes));
  }
}

TEST_CASE("build_vocab frequency and pretrained policy") {
  std::vector<Sentence> train;
  // "common" appears 3x, "rare" 2x, "often" 4x
  train.push_back({{"common", "rare", "often"}, {"O", "O", "O"}, false});
  train.push_back({{"common", "often", "often"}, {"B-PER", "O", "O"}, false});
  train.push_back({{"common", "rare", "often"}, {"O", "B-LOC", "I-LOC"}, false});
  const std::vector<std::string> pretrained{"glove1", "often", "glove2"};

  const auto v = grn::build_vocab(train, pretrained, 3);
  CHECK(v.words[grn::kPadId] == grn::kPadToken);
  CHECK(v.words[grn::kUnkId] == grn::kUnkToken);

  REQUIRE(v.word_to_id.count("common"));
  CHECK(v.word_sources[v.word_to_id.at("common")] == grn::WordSource::Frequency);
  CHECK_FALSE(v.word_to_id.count("rare"));  // below min_freq, maps to UNK
  CHECK(grn::lookup_word_id(v, "rare") == grn::kUnkId);
  CHECK(v.word_sources[v.word_to_id.at("often")] == grn::WordSource::Both);
  REQUIRE(v.word_to_id.count("glove1"));
  CHECK(v.word_sources[v.word_to_id.at("glove1")] == grn::WordSource::Pretrained);

  // labels are the BIOES-converted training tags, first seen order
  CHECK(v.labels == std::vector<std::string>{"O", "S-PER", "B-LOC", "E-LOC"});

  SECTION("ids deterministic given input ordering") {
    const auto v2 = grn::build_vocab(train, pretrained, 3);
    CHECK(v2.words == v.words);
    CHECK(v2.chars == v.chars);
    CHECK(v2.labels == v.labels);
  }
}

TEST_CASE("lookup_word_id fallback chain") {
  std::vector<Sentence> train;
  train.push_back({{"EU", "EU", "EU", "eu-zone", "eu-zone", "eu-zone"},
                   {"O", "O", "O", "O", "O", "O"},
                   false});
  const auto v = grn::build_vocab(train, {}, 3);
  CHECK(grn::lookup_word_id(v, "EU") == v.word_to_id.at("EU"));
  // exact miss, lowercased key does not exist either -> UNK
  CHECK(grn::lookup_word_id(v, "eu") == grn::kUnkId);
  // exact miss but lowercase form is in the vocab
  CHECK(grn::lookup_word_id(v, "EU-ZONE") == v.word_to_id.at("eu-zone"));
  CHECK(grn::lookup_word_id(v, "zzzqqq") == grn::kUnkId);
}

TEST_CASE("encode_batch padding and mask") {
  std::vector<Sentence> train;
  train.push_back({{"aa", "bb", "cc", "aa", "bb", "cc", "aa", "bb", "cc"},
                   std::vector<std::string>(9, "O"), false});
  const auto v = grn::build_vocab(train, {}, 3);

  std::vector<Sentence> batch_sents;
  batch_sents.push_back({{"aa", "bb", "cc"}, {"O", "O", "O"}, false});
  batch_sents.push_back({{"cc", "bb", "aa", "bb", "aa"}, {"O", "O", "O", "O", "O"}, false});
  const auto b = grn::encode_batch(batch_sents, v);
  CHECK(b.B == 2);
  CHECK(b.T == 5);
  CHECK(b.C == 2);
  CHECK(std::vector<uint8_t>(b.mask.begin(), b.mask.begin() + 5) ==
        std::vector<uint8_t>{1, 1, 1, 0, 0});
  CHECK(b.word_ids[3] == grn::kPadId);
  CHECK(b.word_ids[4] == grn::kPadId);

  SECTION("single sentence has an all-true mask") {
    const auto one = grn::encode_batch({batch_sents[0]}, v);
    CHECK(one.mask == std::vector<uint8_t>{1, 1, 1});
  }

  SECTION("sum of mask equals sum of lengths on random batches") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Sentence> sents;
      const int n = 1 + static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) {
        Sentence s;
        const int len = 1 + static_cast<int>(rng() % 7);
        for (int t = 0; t < len; ++t) {
          s.tokens.push_back(rng() % 2 ? "aa" : "zzz");
          s.labels.push_back("O");
        }
        sents.push_back(std::move(s));
      }
      const auto bb = grn::encode_batch(sents, v);
      long mask_sum = 0, len_sum = 0;
      for (auto m : bb.mask) mask_sum += m;
      for (auto l : bb.lengths) len_sum += l;
      REQUIRE(mask_sum == len_sum);
    }
  }

  SECTION("empty list rejected") {
    REQUIRE_THROWS_AS(grn::encode_batch({}, v), std::invalid_argument);
  }
}

TEST_CASE("pretrained embedding loading") {
  std::vector<Sentence> train;
  train.push_back({{"hot", "hot", "hot", "cold", "cold", "cold"},
                   std::vector<std::string>(6, "O"), false});
  const auto v = grn::build_vocab(train, {"hot", "pie"}, 3);

  const auto path = write_temp("grn_test_emb.txt", "hot 0.25 -0.5 1.0\npie 3 4 5\n");
  std::mt19937_64 rng(7);
  auto u01 = [&rng]() { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); };
  const auto mat = grn::load_pretrained_embeddings<double>(path, v, 3, u01);

  const int hot = v.word_to_id.at("hot");
  CHECK(mat[static_cast<size_t>(hot) * 3 + 0] == 0.25);
  CHECK(mat[static_cast<size_t>(hot) * 3 + 1] == -0.5);
  CHECK(mat[static_cast<size_t>(hot) * 3 + 2] == 1.0);
  // PAD row all zeros
  CHECK(mat[0] == 0.0);
  CHECK(mat[1] == 0.0);
  CHECK(mat[2] == 0.0);

  SECTION("unfilled rows respect the initializer bound") {
    const double bound = std::sqrt(6.0 / 3.0);
    const int cold = v.word_to_id.at("cold");
    for (int d = 0; d < 3; ++d) {
      const double x = mat[static_cast<size_t>(cold) * 3 + d];
      CHECK(std::abs(x) <= bound);
      CHECK(x != 0.0);
    }
  }

  SECTION("dimension mismatch reports the line") {
    const auto bad = write_temp("grn_test_emb_bad.txt", "hot 1 2 3\npie 1 2\n");
    REQUIRE_THROWS_WITH(grn::load_pretrained_embeddings<double>(bad, v, 3, u01),
                        Catch::Matchers::ContainsSubstring("line 2"));
  }
}

TEST_CASE("initializer bound holds over many draws") {
  // 10^4 samples of the fan-based uniform initializer stay inside
  // [-sqrt(6/fan_in), +sqrt(6/fan_in)] and spread across it
  std::vector<Sentence> train;
  std::vector<std::string> toks(3000, "x");
  std::vector<std::string> labs(3000, "O");
  // 10000 distinct rare words -> all map through the initializer
  std::vector<std::string> pre;
  for (int i = 0; i < 10000; ++i) pre.push_back("w" + std::to_string(i));
  train.push_back({{"x", "x", "x"}, {"O", "O", "O"}, false});
  const auto v = grn::build_vocab(train, pre, 3);
  const auto empty_file = write_temp("grn_test_emb_empty.txt", "");
  std::mt19937_64 rng(11);
  auto u01 = [&rng]() { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); };
  const auto mat = grn::load_pretrained_embeddings<double>(empty_file, v, 1, u01);
  const double bound = std::sqrt(6.0 / 1.0);
  double lo = 1e9, hi = -1e9;
  for (size_t i = 2; i < mat.size(); ++i) {
    REQUIRE(std::abs(mat[i]) <= bound);
    lo = std::min(lo, mat[i]);
    hi = std::max(hi, mat[i]);
  }
  CHECK(lo < -0.9 * bound);
  CHECK(hi > 0.9 * bound);
}

TEST_CASE("vocab json round trip is stable") {
  std::vector<Sentence> train;
  train.push_back({{"aa", "aa", "aa", "bb", "bb", "bb"},
                   {"B-PER", "I-PER", "O", "B-LOC", "O", "O"}, false});
  const auto v = grn::build_vocab(train, {"cc"}, 3);
  const auto path = write_temp("grn_test_vocab.json", "");
  grn::save_vocab(v, path);
  const auto v2 = grn::load_vocab(path);
  CHECK(v2.words == v.words);
  CHECK(v2.chars == v.chars);
  CHECK(v2.labels == v.labels);
  CHECK(grn::vocab_hash(v2) == grn::vocab_hash(v));
  CHECK(v2.word_to_id.at("aa") == v.word_to_id.at("aa"));

  SECTION("version guard") {
    auto j = grn::vocab_to_json(v);
    j["version"] = 99;
    REQUIRE_THROWS_WITH(grn::vocab_from_json(j), Catch::Matchers::ContainsSubstring("version"));
  }
}

TEST_CASE("sentence encode/decode preserves length and label ids") {
  std::vector<Sentence> train;
  train.push_back({{"aa", "aa", "aa", "bb", "bb", "bb"},
                   {"B-PER", "I-PER", "O", "B-LOC", "O", "O"}, false});
  const auto v = grn::build_vocab(train, {}, 3);
  Sentence s{{"aa", "unknown-token", "bb"}, {"B-PER", "E-PER", "O"}, false};
  const auto b = grn::encode_batch({s}, v);
  REQUIRE(b.lengths[0] == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(v.labels[static_cast<size_t>(b.label_ids[t])] == s.labels[static_cast<size_t>(t)]);
  }
  CHECK(b.word_ids[1] == grn::kUnkId);
}
