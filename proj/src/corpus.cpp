#include "gapgate/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;

std::string_view to_string(PassageKind kind) {
  switch (kind) {
    case PassageKind::Statute: return "statute";
    case PassageKind::Regulation: return "regulation";
    case PassageKind::Consideration: return "consideration";
    case PassageKind::CaseLaw: return "caselaw";
    case PassageKind::Example: return "example";
  }
  return "statute";
}

std::optional<PassageKind> parse_passage_kind(std::string_view s) {
  if (s == "statute") return PassageKind::Statute;
  if (s == "regulation") return PassageKind::Regulation;
  if (s == "consideration") return PassageKind::Consideration;
  if (s == "caselaw") return PassageKind::CaseLaw;
  if (s == "example") return PassageKind::Example;
  return std::nullopt;
}

json to_json(const Passage& p) {
  return json{{"id", p.id},       {"kind", to_string(p.kind)}, {"citation", p.citation},
              {"title", p.title}, {"text", p.text},            {"source_doc", p.source_doc}};
}

InvertedIndex InvertedIndex::build(std::span<const Passage> passages) {
  InvertedIndex index;
  index.doc_lengths_.reserve(passages.size());
  std::uint64_t total = 0;
  for (std::size_t doc = 0; doc < passages.size(); ++doc) {
    const auto tokens = text::tokenize(passages[doc].text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) {
      index.postings_[term].push_back(Posting{static_cast<std::uint32_t>(doc), count});
    }
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
  }
  index.avg_doc_length_ =
      passages.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(passages.size());
  return index;
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

Corpus Corpus::from_passages(std::vector<Passage> passages) {
  Corpus corpus;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    const Passage& p = passages[i];
    if (p.id.empty()) {
      throw Error(ErrorCode::MalformedCorpus, "passage " + std::to_string(i) + " has an empty id");
    }
    if (p.text.empty()) {
      throw Error(ErrorCode::MalformedCorpus, "passage '" + p.id + "' has empty text");
    }
    if (!corpus.by_id_.emplace(p.id, i).second) {
      throw Error(ErrorCode::DuplicatePassageId, "duplicate passage id '" + p.id + "'");
    }
  }
  corpus.passages_ = std::move(passages);
  corpus.index_ = InvertedIndex::build(corpus.passages_);
  return corpus;
}

const Passage* Corpus::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

std::vector<Passage> parse_passages(const json& doc, const std::string& source) {
  static const std::set<std::string> kFields = {"id",    "kind", "citation",
                                                "title", "text", "source_doc"};
  if (!doc.is_array()) {
    throw Error(ErrorCode::MalformedCorpus, source + ": expected a JSON array of passages");
  }
  std::vector<Passage> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& item = doc[i];
    const std::string where = source + " passage #" + std::to_string(i);
    if (!item.is_object()) throw Error(ErrorCode::MalformedCorpus, where + ": not an object");
    for (const auto& [key, _] : item.items()) {
      if (!kFields.contains(key)) {
        throw Error(ErrorCode::MalformedCorpus, where + ": unknown field '" + key + "'");
      }
    }
    auto field = [&](const char* name) -> std::string {
      const auto it = item.find(name);
      if (it == item.end() || !it->is_string()) {
        throw Error(ErrorCode::MalformedCorpus,
                    where + ": missing or non-string field '" + name + "'");
      }
      return it->get<std::string>();
    };
    Passage p;
    p.id = field("id");
    const std::string kind = field("kind");
    const auto parsed = parse_passage_kind(kind);
    if (!parsed) throw Error(ErrorCode::MalformedCorpus, where + ": unknown kind '" + kind + "'");
    p.kind = *parsed;
    p.citation = field("citation");
    p.title = field("title");
    p.text = field("text");
    p.source_doc = field("source_doc");
    if (p.text.empty()) throw Error(ErrorCode::MalformedCorpus, where + ": empty text");
    if (p.id.empty()) throw Error(ErrorCode::MalformedCorpus, where + ": empty id");
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::vector<Passage> load_file(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedCorpus, path.string() + ": " + e.what());
  }
  return parse_passages(doc, path.string());
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::Io, "corpus path does not exist: " + path.string());
  }
  std::vector<Passage> passages;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto chunk = load_file(f);
      passages.insert(passages.end(), std::make_move_iterator(chunk.begin()),
                      std::make_move_iterator(chunk.end()));
    }
  } else {
    passages = load_file(path);
  }
  return Corpus::from_passages(std::move(passages));
}

std::vector<RetrievalResult> retrieve(std::string_view query_text, const Corpus& corpus,
                                      std::size_t k, Bm25Params params) {
  const auto query_terms = text::tokenize(query_text);
  if (query_terms.empty()) throw Error(ErrorCode::EmptyQuery, "query text is empty");
  if (k == 0) throw Error(ErrorCode::EmptyQuery, "k must be at least 1");

  const InvertedIndex& index = corpus.index();
  const auto n = static_cast<double>(index.doc_count());
  const double avgdl = index.average_doc_length();
  std::vector<double> scores(index.doc_count(), 0.0);

  const std::set<std::string> unique_terms(query_terms.begin(), query_terms.end());
  for (const auto& term : unique_terms) {
    const auto* postings = index.postings(term);
    if (postings == nullptr) continue;
    const auto df = static_cast<double>(postings->size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const Posting& p : *postings) {
      const auto tf = static_cast<double>(p.term_frequency);
      const double len_norm =
          avgdl > 0.0 ? static_cast<double>(index.doc_length(p.doc)) / avgdl : 0.0;
      scores[p.doc] +=
          idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * len_norm));
    }
  }

  const auto& passages = corpus.passages();
  std::vector<std::size_t> order(passages.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return passages[a].id < passages[b].id;
                    });
  std::vector<RetrievalResult> results;
  results.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    results.push_back(RetrievalResult{passages[order[r]].id, scores[order[r]], r + 1});
  }
  return results;
}

}  // namespace gapgate
