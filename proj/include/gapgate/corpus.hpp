#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace gapgate {

enum class PassageKind { Statute, Regulation, Consideration, CaseLaw, Example };

std::string_view to_string(PassageKind kind);
std::optional<PassageKind> parse_passage_kind(std::string_view s);

// A complete block of statute, guide, or case-law text. Passages are stored
// and handed around whole; nothing in the library slices them.
struct Passage {
  std::string id;
  PassageKind kind = PassageKind::Statute;
  std::string citation;
  std::string title;
  std::string text;
  std::string source_doc;

  bool operator==(const Passage&) const = default;
};

nlohmann::json to_json(const Passage& p);

struct Posting {
  std::uint32_t doc = 0;  // position of the passage in the corpus
  std::uint32_t term_frequency = 0;

  bool operator==(const Posting&) const = default;
};

// term -> postings sorted by document position.
class InvertedIndex {
 public:
  static InvertedIndex build(std::span<const Passage> passages);

  const std::vector<Posting>* postings(const std::string& term) const;
  std::uint32_t doc_length(std::size_t doc) const { return doc_lengths_.at(doc); }
  double average_doc_length() const { return avg_doc_length_; }
  std::size_t doc_count() const { return doc_lengths_.size(); }
  std::size_t term_count() const { return postings_.size(); }

  bool operator==(const InvertedIndex&) const = default;

 private:
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

class Corpus {
 public:
  Corpus() = default;
  // Validates ids (non-empty, unique) and text (non-empty), then indexes.
  static Corpus from_passages(std::vector<Passage> passages);

  const std::vector<Passage>& passages() const { return passages_; }
  const InvertedIndex& index() const { return index_; }
  const Passage* find(std::string_view id) const;
  std::size_t size() const { return passages_.size(); }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
  InvertedIndex index_;
};

// Parses one corpus document (a JSON array of passage objects). `source` is
// used in error messages only.
std::vector<Passage> parse_passages(const nlohmann::json& doc, const std::string& source);

// Loads a single corpus file, or every *.json file in a directory in
// lexicographic filename order.
Corpus load_corpus(const std::filesystem::path& path);

struct RetrievalResult {
  std::string passage_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalResult&) const = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline constexpr std::size_t kDefaultRetrievalK = 8;

// BM25 over the corpus index. idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
// summed over the distinct query terms. Returns min(k, |corpus|) results,
// descending score, ties by ascending passage id.
std::vector<RetrievalResult> retrieve(std::string_view query_text, const Corpus& corpus,
                                      std::size_t k = kDefaultRetrievalK,
                                      Bm25Params params = {});

}  // namespace gapgate
