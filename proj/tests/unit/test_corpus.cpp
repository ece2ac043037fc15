#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gapgate/error.hpp"
#include "helpers.hpp"

using namespace gapgate;
using nlohmann::json;

namespace {

Passage passage(std::string id, std::string text) {
  return Passage{std::move(id), PassageKind::Statute, "cit", "title", std::move(text), "doc"};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// Straight-from-the-definition BM25: tokenize everything, count by scanning.
std::vector<std::pair<std::string, double>> brute_force_bm25(const std::string& query,
                                                             const std::vector<Passage>& docs) {
  const double k1 = 1.2;
  const double b = 0.75;
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const auto& d : docs) {
    toks.push_back(text::tokenize(d.text));
    total += static_cast<double>(toks.back().size());
  }
  const double avg = total / static_cast<double>(docs.size());
  const auto q = text::tokenize(query);
  const std::set<std::string> terms(q.begin(), q.end());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0;
    for (const auto& t : terms) {
      double df = 0;
      for (const auto& dt : toks) df += std::count(dt.begin(), dt.end(), t) > 0 ? 1 : 0;
      const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
      if (tf == 0) continue;
      const double n = static_cast<double>(docs.size());
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      const double len = static_cast<double>(toks[i].size());
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
    }
    out.emplace_back(docs[i].id, score);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& c) {
    return a.second != c.second ? a.second > c.second : a.first < c.first;
  });
  return out;
}

}  // namespace

TEST_CASE("corpus rejects duplicate and empty ids") {
  CHECK(code_of([] { Corpus::from_passages({passage("a", "x"), passage("a", "y")}); }) ==
        ErrorCode::DuplicatePassageId);
  CHECK(code_of([] { Corpus::from_passages({passage("", "x")}); }) == ErrorCode::MalformedCorpus);
  CHECK(code_of([] { Corpus::from_passages({passage("a", "")}); }) == ErrorCode::MalformedCorpus);
}

TEST_CASE("passage parsing is strict") {
  const json good = json::parse(R"([{"id":"p","kind":"caselaw","citation":"c","title":"t","text":"x","source_doc":"d"}])");
  CHECK(parse_passages(good, "t").front().kind == PassageKind::CaseLaw);
  json extra = good;
  extra[0]["score"] = 1;
  CHECK(code_of([&] { parse_passages(extra, "t"); }) == ErrorCode::MalformedCorpus);
  json bad_kind = good;
  bad_kind[0]["kind"] = "memo";
  CHECK(code_of([&] { parse_passages(bad_kind, "t"); }) == ErrorCode::MalformedCorpus);
  json missing = good;
  missing[0].erase("citation");
  CHECK(code_of([&] { parse_passages(missing, "t"); }) == ErrorCode::MalformedCorpus);
  CHECK(code_of([] { parse_passages(json::object(), "t"); }) == ErrorCode::MalformedCorpus);
}

TEST_CASE("fixture corpus loads from a directory in filename order") {
  const Corpus& c = testing::fixture_corpus();
  REQUIRE(c.size() == 12);
  CHECK(c.passages().front().id == "reg-test-custody");  // guidance.json sorts first
  std::map<PassageKind, int> kinds;
  for (const auto& p : c.passages()) ++kinds[p.kind];
  CHECK(kinds[PassageKind::Statute] == 6);
  CHECK(kinds[PassageKind::Regulation] == 1);
  CHECK(kinds[PassageKind::Consideration] == 2);
  CHECK(kinds[PassageKind::CaseLaw] == 2);
  CHECK(kinds[PassageKind::Example] == 1);
  CHECK(c.find("stat-substance") != nullptr);
  CHECK(c.find("nope") == nullptr);
}

TEST_CASE("index rebuild is deterministic") {
  const Corpus& c = testing::fixture_corpus();
  CHECK(InvertedIndex::build(c.passages()) == c.index());
  CHECK(c.index().doc_count() == c.size());
}

TEST_CASE("retrieve matches brute-force BM25 on the fixture corpus") {
  const Corpus& c = testing::fixture_corpus();
  for (const auto& cs : testing::fixture_dataset().cases) {
    const auto got = retrieve(cs.narrative, c, c.size());
    const auto want = brute_force_bm25(cs.narrative, c.passages());
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].passage_id == want[i].first);
      CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
      CHECK(got[i].rank == i + 1);
    }
  }
}

TEST_CASE("retrieve matches brute force on random corpora") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> vocab = {"wage", "quit", "rule", "test", "policy", "work",
                                          "hours", "pay", "notice", "safety", "drug", "fired"};
  for (int round = 0; round < 200; ++round) {
    std::vector<Passage> docs;
    const int n = 1 + static_cast<int>(rng() % 15);
    for (int i = 0; i < n; ++i) {
      std::string t;
      const int len = 1 + static_cast<int>(rng() % 12);
      for (int w = 0; w < len; ++w) t += vocab[rng() % vocab.size()] + " ";
      // Some duplicates so ties happen.
      if (i > 0 && rng() % 4 == 0) t = docs[rng() % docs.size()].text;
      docs.push_back(passage("d" + std::to_string(rng() % 1000) + "-" + std::to_string(i), t));
    }
    const Corpus c = Corpus::from_passages(docs);
    std::string q;
    for (int w = 0; w < 3; ++w) q += vocab[rng() % vocab.size()] + " ";
    const std::size_t k = 1 + rng() % 20;
    const auto got = retrieve(q, c, k);
    const auto want = brute_force_bm25(q, docs);
    REQUIRE(got.size() == std::min<std::size_t>(k, docs.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].passage_id == want[i].first);
      CHECK(got[i].score == doctest::Approx(want[i].second).epsilon(1e-12));
      if (i > 0) {
        CHECK(got[i - 1].score >= got[i].score);
        if (got[i - 1].score == got[i].score) CHECK(got[i - 1].passage_id < got[i].passage_id);
      }
    }
  }
}

TEST_CASE("retrieve returns zero-score passages to fill k") {
  const Corpus c = Corpus::from_passages({passage("b", "alpha"), passage("a", "beta"), passage("c", "gamma")});
  const auto r = retrieve("alpha", c, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0].passage_id == "b");
  CHECK(r[1].passage_id == "a");
  CHECK(r[1].score == 0.0);
  CHECK(r[2].passage_id == "c");
}

TEST_CASE("retrieve rejects empty queries and k = 0") {
  const Corpus& c = testing::fixture_corpus();
  CHECK(code_of([&] { retrieve("", c); }) == ErrorCode::EmptyQuery);
  CHECK(code_of([&] { retrieve(" ?! ", c); }) == ErrorCode::EmptyQuery);
  CHECK(code_of([&] { retrieve("wage", c, 0); }) == ErrorCode::EmptyQuery);
}

TEST_CASE("each fixture case retrieves its issue passages within the default k") {
  const auto rules = testing::rules_for(testing::fixture_dataset());
  for (const auto& cs : testing::fixture_dataset().cases) {
    const auto r = retrieve(cs.narrative, testing::fixture_corpus());
    std::set<std::string> ids;
    for (const auto& x : r) ids.insert(x.passage_id);
    for (const auto& tag : cs.issue_tags) {
      const auto& passages = rules->issues().at(tag).passage_ids;
      // The statute carrying the enumerated requirements must be present.
      CHECK_MESSAGE(ids.contains(passages.front()), cs.id);
    }
  }
}
