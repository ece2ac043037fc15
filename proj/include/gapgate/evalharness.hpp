#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gapgate/casefile.hpp"
#include "gapgate/trace.hpp"

namespace gapgate {

inline constexpr int kReportSchemaVersion = 1;

enum class ErrorKind { None, FalseDenial, FalseApproval, FalseDeferral, WrongDecision, Unparseable };

std::string_view to_string(ErrorKind k);
std::optional<ErrorKind> parse_error_kind(std::string_view s);

struct Prediction {
  std::string case_id;
  std::optional<Label> label;  // absent: unparseable or aborted run
};

struct ScoredResult {
  std::string case_id;
  std::optional<Label> predicted;
  Label gold = Label::Inconclusive;
  bool correct = false;
  Completeness completeness = Completeness::Complete;
  ErrorKind error_kind = ErrorKind::None;

  bool operator==(const ScoredResult&) const = default;
};

ScoredResult score_case(const Prediction& prediction, const CaseFile& c);

using Interval = std::pair<double, double>;

struct MetricsReport {
  std::size_t n_total = 0;
  std::size_t n_complete = 0;
  std::size_t n_inconclusive = 0;
  std::size_t correct_total = 0;
  std::size_t correct_complete = 0;
  std::size_t correct_inconclusive = 0;
  double accuracy_all = 0.0;
  std::optional<double> accuracy_complete;      // absent when no complete cases
  std::optional<double> accuracy_inconclusive;  // absent when no inconclusive cases
  std::map<Completeness, double> accuracy_by_missing_k;
  std::map<Completeness, std::size_t> n_by_missing_k;
  std::map<ErrorKind, std::size_t> error_breakdown;
  std::map<std::string, Interval> ci_95;

  bool operator==(const MetricsReport&) const = default;
};

struct BootstrapOptions {
  bool enabled = true;
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 42;
};

// Metric over a resample; nullopt when undefined (e.g. no complete cases drawn).
using MetricSelector = std::function<std::optional<double>(std::span<const ScoredResult>)>;

std::optional<double> accuracy_all(std::span<const ScoredResult> results);
std::optional<double> accuracy_complete(std::span<const ScoredResult> results);
std::optional<double> accuracy_inconclusive(std::span<const ScoredResult> results);

MetricsReport aggregate_metrics(std::span<const ScoredResult> results,
                                const BootstrapOptions& bootstrap = {});

// splitmix64. Resample index for a population of n is (next() * n) >> 64.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
};

// Percentile bootstrap. Resamples where the metric is undefined are skipped;
// the 2.5th and 97.5th percentiles interpolate linearly at p * (R - 1) over
// the R defined values.
Interval bootstrap_ci(std::span<const ScoredResult> results, const MetricSelector& metric,
                      std::size_t n_resamples = 1000, std::uint64_t seed = 42);

struct ErrorAnalysis {
  std::size_t n_inconclusive = 0;
  std::size_t correct_deferral = 0;
  std::size_t false_denial = 0;
  std::size_t false_approval = 0;
  std::size_t unparseable = 0;
  // Empty when there are no inconclusive cases.
  std::map<std::string, double> rates;
};

ErrorAnalysis error_analysis(std::span<const ScoredResult> results);

enum class ReportFormat { Json, MarkdownTable, Csv };

struct MetricRow {
  std::string name;
  double value = 0.0;
  std::optional<Interval> ci;
};

std::vector<MetricRow> metric_rows(const MetricsReport& report);

std::string emit_report(const MetricsReport& report, ReportFormat format);

// Comparison table with one row per configuration.
std::string emit_comparison(const std::vector<std::pair<std::string, MetricsReport>>& rows);

nlohmann::json to_json(const ScoredResult& r);
nlohmann::json to_json(std::span<const ScoredResult> results);
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const ErrorAnalysis& analysis);
ScoredResult scored_result_from_json(const nlohmann::json& j);
std::vector<ScoredResult> results_from_json(const nlohmann::json& j);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace gapgate
