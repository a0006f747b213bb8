// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "grn/corpus.hpp"
#include "grn/metrics.hpp"

using grn::LabeledSpan;

using Corpus = std::vector<std::vector<std::string>>;

TEST_CASE("extract_spans chunk rules") {
  CHECK(grn::extract_spans({"B-PER", "I-PER", "O", "B-LOC"}) ==
        std::vector<LabeledSpan>{{"PER", 0, 1}, {"LOC", 3, 3}});
  CHECK(grn::extract_spans({"O", "O", "O"}).empty());
  CHECK(grn::extract_spans({"B-PER", "B-PER"}) ==
        std::vector<LabeledSpan>{{"PER", 0, 0}, {"PER", 1, 1}});
  // BIOES input is handled by the same chunker
  CHECK(grn::extract_spans({"S-LOC", "B-PER", "E-PER"}) ==
        std::vector<LabeledSpan>{{"LOC", 0, 0}, {"PER", 1, 2}});
  REQUIRE_THROWS_AS(grn::extract_spans({"X-PER"}), std::invalid_argument);
}

TEST_CASE("span_prf arithmetic") {
  SECTION("perfect prediction") {
    const Corpus x{{"B-PER", "I-PER", "O"}, {"B-LOC", "O"}};
    const auto r = grn::span_prf(x, x);
    CHECK(r.precision == 100.0);
    CHECK(r.recall == 100.0);
    CHECK(r.f1 == 100.0);
  }
  SECTION("one of two spans correct") {
    const Corpus gold{{"B-PER", "O", "B-LOC"}};
    const Corpus pred{{"B-PER", "O", "B-ORG"}};
    const auto r = grn::span_prf(gold, pred);
    CHECK(r.precision == 50.0);
    CHECK(r.recall == 50.0);
    CHECK(r.f1 == 50.0);
  }
  SECTION("empty prediction against non-empty gold") {
    const Corpus gold{{"B-PER", "O"}};
    const Corpus pred{{"O", "O"}};
    const auto r = grn::span_prf(gold, pred);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
  }
  SECTION("boundary match with wrong type does not count") {
    const Corpus gold{{"B-PER", "I-PER"}};
    const Corpus pred{{"B-LOC", "I-LOC"}};
    const auto r = grn::span_prf(gold, pred);
    CHECK(r.f1 == 0.0);
  }
  SECTION("length mismatch is rejected") {
    REQUIRE_THROWS_AS(grn::span_prf({{"O"}}, {{"O", "O"}}), std::invalid_argument);
    REQUIRE_THROWS_AS(grn::span_prf({{"O"}}, {}), std::invalid_argument);
  }
}

TEST_CASE("span_prf invariants") {
  const Corpus x{{"B-PER", "I-PER", "O", "B-LOC"}, {"O", "B-ORG", "I-ORG", "I-ORG"}};
  SECTION("identity scores 100") {
    const auto r = grn::span_prf(x, x);
    CHECK(r.f1 == 100.0);
  }
  SECTION("swapping gold and pred swaps precision and recall") {
    const Corpus y{{"B-PER", "O", "O", "B-LOC"}, {"O", "B-ORG", "I-ORG", "O"}};
    const auto a = grn::span_prf(x, y);
    const auto b = grn::span_prf(y, x);
    CHECK(a.precision == b.recall);
    CHECK(a.recall == b.precision);
    CHECK(a.f1 == b.f1);
  }
}

TEST_CASE("scoring is invariant to the labelling scheme") {
  // exhaustive over valid BIO sequences of length <= 6, 2 types (generated
  // the same way as the corpus round-trip suite)
  std::vector<std::vector<std::string>> seqs;
  std::vector<std::string> cur;
  auto gen = [&](auto&& self, int length) -> void {
    if (static_cast<int>(cur.size()) == length) {
      seqs.push_back(cur);
      return;
    }
    std::vector<std::string> options{"O", "B-PER", "B-LOC"};
    if (!cur.empty() && cur.back() != "O") options.push_back("I-" + cur.back().substr(2));
    for (const auto& o : options) {
      cur.push_back(o);
      self(self, length);
      cur.pop_back();
    }
  };
  for (int len = 1; len <= 6; ++len) gen(gen, len);
  for (const auto& seq : seqs) {
    const auto bioes = grn::bio_to_bioes(seq);
    REQUIRE(grn::extract_spans(seq) == grn::extract_spans(bioes));
  }
}

TEST_CASE("report matches the committed golden file") {
  const Corpus gold{{"B-PER", "I-PER", "O", "B-LOC"}, {"B-ORG", "O", "B-PER"}};
  const Corpus pred{{"B-PER", "I-PER", "O", "B-ORG"}, {"B-ORG", "O", "O"}};
  const auto report = grn::prf_report(grn::span_prf(gold, pred));

  std::ifstream golden(std::string(GRN_DATA_DIR) + "/reports/mixed_case.txt", std::ios::binary);
  REQUIRE(golden.good());
  std::string expected((std::istreambuf_iterator<char>(golden)), std::istreambuf_iterator<char>());
  CHECK(report == expected);
}
