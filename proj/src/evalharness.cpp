#include "gapgate/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gapgate/error.hpp"

namespace gapgate {

using nlohmann::json;

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::None: return "none";
    case ErrorKind::FalseDenial: return "false_denial";
    case ErrorKind::FalseApproval: return "false_approval";
    case ErrorKind::FalseDeferral: return "false_deferral";
    case ErrorKind::WrongDecision: return "wrong_decision";
    case ErrorKind::Unparseable: return "unparseable";
  }
  return "none";
}

std::optional<ErrorKind> parse_error_kind(std::string_view s) {
  for (ErrorKind k : {ErrorKind::None, ErrorKind::FalseDenial, ErrorKind::FalseApproval,
                      ErrorKind::FalseDeferral, ErrorKind::WrongDecision, ErrorKind::Unparseable}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

ScoredResult score_case(const Prediction& prediction, const CaseFile& c) {
  if (prediction.case_id != c.id) {
    throw Error(ErrorCode::IdMismatch,
                "prediction for '" + prediction.case_id + "' scored against case '" + c.id + "'");
  }
  ScoredResult r;
  r.case_id = c.id;
  r.predicted = prediction.label;
  r.gold = c.gold_label;
  r.completeness = c.completeness;
  r.correct = prediction.label.has_value() && *prediction.label == c.gold_label;
  if (!prediction.label) {
    r.error_kind = ErrorKind::Unparseable;
  } else if (r.correct) {
    r.error_kind = ErrorKind::None;
  } else if (c.gold_label == Label::Inconclusive) {
    r.error_kind = (*prediction.label == Label::Ineligible || *prediction.label == Label::No)
                       ? ErrorKind::FalseDenial
                       : ErrorKind::FalseApproval;
  } else if (*prediction.label == Label::Inconclusive) {
    r.error_kind = ErrorKind::FalseDeferral;
  } else {
    r.error_kind = ErrorKind::WrongDecision;
  }
  return r;
}

namespace {

template <typename Pred>
std::optional<double> accuracy_where(std::span<const ScoredResult> results, Pred pred) {
  std::size_t n = 0;
  std::size_t correct = 0;
  for (const auto& r : results) {
    if (!pred(r)) continue;
    ++n;
    if (r.correct) ++correct;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(n);
}

bool is_inconclusive_case(const ScoredResult& r) { return r.gold == Label::Inconclusive; }

}  // namespace

std::optional<double> accuracy_all(std::span<const ScoredResult> results) {
  return accuracy_where(results, [](const ScoredResult&) { return true; });
}

std::optional<double> accuracy_complete(std::span<const ScoredResult> results) {
  return accuracy_where(results, [](const ScoredResult& r) { return !is_inconclusive_case(r); });
}

std::optional<double> accuracy_inconclusive(std::span<const ScoredResult> results) {
  return accuracy_where(results, is_inconclusive_case);
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t SplitMix64::index(std::size_t n) {
  __extension__ using u128 = unsigned __int128;
  return static_cast<std::size_t>((static_cast<u128>(next()) * n) >> 64);
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

Interval bootstrap_ci(std::span<const ScoredResult> results, const MetricSelector& metric,
                      std::size_t n_resamples, std::uint64_t seed) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "bootstrap over an empty result set");
  if (n_resamples == 0) throw Error(ErrorCode::InvalidConfig, "bootstrap needs at least one resample");
  SplitMix64 rng(seed);
  std::vector<ScoredResult> sample(results.size());
  std::vector<double> values;
  values.reserve(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (auto& slot : sample) slot = results[rng.index(results.size())];
    if (auto v = metric(sample)) values.push_back(*v);
  }
  if (values.empty()) {
    throw Error(ErrorCode::EmptyResults, "metric undefined on every bootstrap resample");
  }
  std::sort(values.begin(), values.end());
  return {percentile(values, 0.025), percentile(values, 0.975)};
}

MetricsReport aggregate_metrics(std::span<const ScoredResult> results,
                                const BootstrapOptions& bootstrap) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "no results to aggregate");
  MetricsReport m;
  std::map<Completeness, std::size_t> correct_by_k;
  for (const auto& r : results) {
    ++m.n_total;
    if (r.correct) ++m.correct_total;
    ++m.error_breakdown[r.error_kind];
    if (is_inconclusive_case(r)) {
      ++m.n_inconclusive;
      if (r.correct) ++m.correct_inconclusive;
      if (r.completeness != Completeness::Complete) {
        ++m.n_by_missing_k[r.completeness];
        if (r.correct) ++correct_by_k[r.completeness];
      }
    } else {
      ++m.n_complete;
      if (r.correct) ++m.correct_complete;
    }
  }
  auto frac = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
  m.accuracy_all = frac(m.correct_total, m.n_total);
  if (m.n_complete > 0) m.accuracy_complete = frac(m.correct_complete, m.n_complete);
  if (m.n_inconclusive > 0) m.accuracy_inconclusive = frac(m.correct_inconclusive, m.n_inconclusive);
  for (const auto& [k, n] : m.n_by_missing_k) m.accuracy_by_missing_k[k] = frac(correct_by_k[k], n);

  if (bootstrap.enabled) {
    const std::vector<std::pair<std::string, MetricSelector>> metrics = {
        {"accuracy_all", accuracy_all},
        {"accuracy_complete", accuracy_complete},
        {"accuracy_inconclusive", accuracy_inconclusive}};
    for (const auto& [name, selector] : metrics) {
      if (!selector(results)) continue;
      m.ci_95[name] = bootstrap_ci(results, selector, bootstrap.n_resamples, bootstrap.seed);
    }
  }
  return m;
}

ErrorAnalysis error_analysis(std::span<const ScoredResult> results) {
  ErrorAnalysis a;
  for (const auto& r : results) {
    if (!is_inconclusive_case(r)) continue;
    ++a.n_inconclusive;
    switch (r.error_kind) {
      case ErrorKind::None: ++a.correct_deferral; break;
      case ErrorKind::FalseDenial: ++a.false_denial; break;
      case ErrorKind::FalseApproval: ++a.false_approval; break;
      default: ++a.unparseable; break;
    }
  }
  if (a.n_inconclusive > 0) {
    const double n = static_cast<double>(a.n_inconclusive);
    a.rates["correct_deferral"] = static_cast<double>(a.correct_deferral) / n;
    a.rates["false_denial"] = static_cast<double>(a.false_denial) / n;
    a.rates["false_approval"] = static_cast<double>(a.false_approval) / n;
    a.rates["unparseable"] = static_cast<double>(a.unparseable) / n;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? fixed2(*v) : "n/a"; }

std::string ci_cell(const MetricsReport& m, const std::string& name) {
  const auto it = m.ci_95.find(name);
  if (it == m.ci_95.end()) return "n/a";
  return "[" + fixed2(it->second.first) + ", " + fixed2(it->second.second) + "]";
}

std::string csv_number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::vector<MetricRow> metric_rows(const MetricsReport& m) {
  std::vector<MetricRow> rows;
  auto ci = [&](const std::string& name) -> std::optional<Interval> {
    const auto it = m.ci_95.find(name);
    if (it == m.ci_95.end()) return std::nullopt;
    return it->second;
  };
  rows.push_back({"accuracy_all", m.accuracy_all, ci("accuracy_all")});
  if (m.accuracy_complete) rows.push_back({"accuracy_complete", *m.accuracy_complete, ci("accuracy_complete")});
  if (m.accuracy_inconclusive) {
    rows.push_back({"accuracy_inconclusive", *m.accuracy_inconclusive, ci("accuracy_inconclusive")});
  }
  for (const auto& [k, acc] : m.accuracy_by_missing_k) {
    rows.push_back({"accuracy_" + std::string(to_string(k)), acc, std::nullopt});
  }
  rows.push_back({"n_total", static_cast<double>(m.n_total), std::nullopt});
  rows.push_back({"n_complete", static_cast<double>(m.n_complete), std::nullopt});
  rows.push_back({"n_inconclusive", static_cast<double>(m.n_inconclusive), std::nullopt});
  for (const auto& [kind, count] : m.error_breakdown) {
    rows.push_back({"errors_" + std::string(to_string(kind)), static_cast<double>(count), std::nullopt});
  }
  return rows;
}

std::string emit_report(const MetricsReport& m, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return to_json(m).dump(2) + "\n";
    case ReportFormat::Csv: {
      std::string out = "metric,value,ci_lower,ci_upper\n";
      for (const auto& row : metric_rows(m)) {
        out += row.name + "," + csv_number(row.value) + ",";
        if (row.ci) out += csv_number(row.ci->first) + "," + csv_number(row.ci->second);
        else out += ",";
        out += "\n";
      }
      return out;
    }
    case ReportFormat::MarkdownTable: {
      std::string out;
      out += "| Metric | All Cases | Complete | Inconclusive |\n";
      out += "|---|---:|---:|---:|\n";
      out += "| Accuracy | " + fixed2(m.accuracy_all) + " | " + cell(m.accuracy_complete) + " | " +
             cell(m.accuracy_inconclusive) + " |\n";
      out += "| 95% CI | " + ci_cell(m, "accuracy_all") + " | " + ci_cell(m, "accuracy_complete") +
             " | " + ci_cell(m, "accuracy_inconclusive") + " |\n";
      out += "| n | " + std::to_string(m.n_total) + " | " + std::to_string(m.n_complete) + " | " +
             std::to_string(m.n_inconclusive) + " |\n";
      if (!m.accuracy_by_missing_k.empty()) {
        out += "\n| Missing facts | n | Accuracy |\n|---|---:|---:|\n";
        for (const auto& [k, acc] : m.accuracy_by_missing_k) {
          out += "| " + std::string(to_string(k)) + " | " + std::to_string(m.n_by_missing_k.at(k)) +
                 " | " + fixed2(acc) + " |\n";
        }
      }
      out += "\n| Outcome | Count |\n|---|---:|\n";
      for (const auto& [kind, count] : m.error_breakdown) {
        out += "| " + std::string(to_string(kind)) + " | " + std::to_string(count) + " |\n";
      }
      return out;
    }
  }
  return {};
}

std::string emit_comparison(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out = "| Configuration | All Cases | Complete | Inconclusive |\n|---|---:|---:|---:|\n";
  for (const auto& [name, m] : rows) {
    out += "| " + name + " | " + fixed2(m.accuracy_all) + " | " + cell(m.accuracy_complete) + " | " +
           cell(m.accuracy_inconclusive) + " |\n";
  }
  return out;
}

json to_json(const ScoredResult& r) {
  return json{{"case_id", r.case_id},
              {"predicted", r.predicted ? json(to_string(*r.predicted)) : json("unparseable")},
              {"gold", to_string(r.gold)},
              {"correct", r.correct},
              {"completeness", to_string(r.completeness)},
              {"error_kind", to_string(r.error_kind)}};
}

json to_json(std::span<const ScoredResult> results) {
  json out = json::array();
  for (const auto& r : results) out.push_back(to_json(r));
  return out;
}

json to_json(const MetricsReport& m) {
  json by_k = json::object();
  for (const auto& [k, acc] : m.accuracy_by_missing_k) by_k[std::string(to_string(k))] = acc;
  json n_by_k = json::object();
  for (const auto& [k, n] : m.n_by_missing_k) n_by_k[std::string(to_string(k))] = n;
  json errors = json::object();
  for (const auto& [kind, n] : m.error_breakdown) errors[std::string(to_string(kind))] = n;
  json ci = json::object();
  for (const auto& [name, interval] : m.ci_95) ci[name] = json::array({interval.first, interval.second});
  return json{{"schema_version", kReportSchemaVersion},
              {"n_total", m.n_total},
              {"n_complete", m.n_complete},
              {"n_inconclusive", m.n_inconclusive},
              {"correct_total", m.correct_total},
              {"correct_complete", m.correct_complete},
              {"correct_inconclusive", m.correct_inconclusive},
              {"accuracy_all", m.accuracy_all},
              {"accuracy_complete", optional_number(m.accuracy_complete)},
              {"accuracy_inconclusive", optional_number(m.accuracy_inconclusive)},
              {"accuracy_by_missing_k", by_k},
              {"n_by_missing_k", n_by_k},
              {"error_breakdown", errors},
              {"ci_95", ci}};
}

json to_json(const ErrorAnalysis& a) {
  return json{{"n_inconclusive", a.n_inconclusive},
              {"correct_deferral", a.correct_deferral},
              {"false_denial", a.false_denial},
              {"false_approval", a.false_approval},
              {"unparseable", a.unparseable},
              {"rates", a.rates}};
}

ScoredResult scored_result_from_json(const json& j) {
  try {
    ScoredResult r;
    r.case_id = j.at("case_id").get<std::string>();
    const auto predicted = j.at("predicted").get<std::string>();
    if (predicted != "unparseable") {
      r.predicted = parse_label(predicted);
      if (!r.predicted) throw Error(ErrorCode::MalformedDataset, "unknown label '" + predicted + "'");
    }
    const auto gold = parse_label(j.at("gold").get<std::string>());
    const auto completeness = parse_completeness(j.at("completeness").get<std::string>());
    const auto kind = parse_error_kind(j.at("error_kind").get<std::string>());
    if (!gold || !completeness || !kind) {
      throw Error(ErrorCode::MalformedDataset, "unknown enum value in scored result");
    }
    r.gold = *gold;
    r.completeness = *completeness;
    r.error_kind = *kind;
    r.correct = j.at("correct").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDataset, std::string("malformed scored result: ") + e.what());
  }
}

std::vector<ScoredResult> results_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedDataset, "results file must be a JSON array");
  std::vector<ScoredResult> out;
  for (const auto& item : j) out.push_back(scored_result_from_json(item));
  return out;
}

MetricsReport report_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw Error(ErrorCode::MalformedDataset, "unsupported report schema version");
    }
    MetricsReport m;
    m.n_total = j.at("n_total").get<std::size_t>();
    m.n_complete = j.at("n_complete").get<std::size_t>();
    m.n_inconclusive = j.at("n_inconclusive").get<std::size_t>();
    m.correct_total = j.at("correct_total").get<std::size_t>();
    m.correct_complete = j.at("correct_complete").get<std::size_t>();
    m.correct_inconclusive = j.at("correct_inconclusive").get<std::size_t>();
    m.accuracy_all = j.at("accuracy_all").get<double>();
    m.accuracy_complete = optional_from(j.at("accuracy_complete"));
    m.accuracy_inconclusive = optional_from(j.at("accuracy_inconclusive"));
    auto completeness = [](const std::string& s) {
      const auto c = parse_completeness(s);
      if (!c) throw Error(ErrorCode::MalformedDataset, "unknown completeness '" + s + "'");
      return *c;
    };
    for (const auto& [k, v] : j.at("accuracy_by_missing_k").items()) {
      m.accuracy_by_missing_k[completeness(k)] = v.get<double>();
    }
    for (const auto& [k, v] : j.at("n_by_missing_k").items()) {
      m.n_by_missing_k[completeness(k)] = v.get<std::size_t>();
    }
    for (const auto& [k, v] : j.at("error_breakdown").items()) {
      const auto kind = parse_error_kind(k);
      if (!kind) throw Error(ErrorCode::MalformedDataset, "unknown error kind '" + k + "'");
      m.error_breakdown[*kind] = v.get<std::size_t>();
    }
    for (const auto& [k, v] : j.at("ci_95").items()) {
      m.ci_95[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDataset, std::string("malformed report: ") + e.what());
  }
}

}  // namespace gapgate
