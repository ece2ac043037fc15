#include "gapgate/runner.hpp"

#include <atomic>
#include <fstream>
#include <ostream>
#include <thread>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;
namespace fs = std::filesystem;

Workspace open_workspace(const RunConfig& config, bool require_dataset) {
  validate_config(config, require_dataset);
  Workspace ws;
  ws.config = config;
  ws.corpus = load_corpus(config.corpus_path);
  if (!config.dataset_path.empty()) {
    ws.dataset = load_dataset(config.dataset_path);
    ws.dataset_hash = text::sha256_hex(text::read_file(config.dataset_path)).substr(0, 12);
  } else {
    ws.dataset_hash = "adhoc";
  }
  ws.backend = make_backend(config, ws.corpus);
  return ws;
}

std::string run_stem(PipelineMode mode, const std::string& backend, const std::string& dataset_hash) {
  return std::string(to_string(mode)) + "__" + backend + "__" + dataset_hash;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << content;
}

void write_json_file(const fs::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

EvaluationRun evaluate_dataset(const Workspace& ws, PipelineMode mode, std::size_t workers) {
  if (!ws.dataset) throw Error(ErrorCode::InvalidConfig, "evaluation needs a dataset_path");
  const auto& cases = ws.dataset->cases;
  if (cases.empty()) throw Error(ErrorCode::EmptyResults, "dataset has no cases");

  EvaluationRun run;
  run.mode = mode;
  run.runs.resize(cases.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      PipelineOptions options;
      options.mode = mode;
      options.retrieval_k = ws.config.retrieval_k;
      options.max_parse_retries = ws.config.backend.max_parse_retries;
      run.runs[i] = run_pipeline(redact(cases[i]), ws.corpus, options, *ws.backend);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, cases.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < cases.size(); ++i) {
    const PipelineResult& r = run.runs[i];
    Prediction p{cases[i].id, std::nullopt};
    if (r.determination) p.label = r.determination->label;
    if (r.trace.abort) ++run.aborted;
    run.results.push_back(score_case(p, cases[i]));
  }
  run.report = aggregate_metrics(run.results, BootstrapOptions{true, ws.config.bootstrap_resamples,
                                                               ws.config.seed});
  return run;
}

EvaluationFiles write_evaluation(const Workspace& ws, const EvaluationRun& run) {
  const std::string stem = run_stem(run.mode, backend_label(ws.config.backend), ws.dataset_hash);
  const fs::path dir = ws.config.output_dir;
  EvaluationFiles files{dir / (stem + ".results.json"), dir / (stem + ".report.json"),
                        dir / (stem + ".report.md"), dir / (stem + ".report.csv"),
                        dir / "traces" / stem};
  fs::create_directories(files.trace_dir);
  for (const auto& r : run.runs) {
    write_json_file(files.trace_dir / (r.trace.case_id + ".json"), to_json(r.trace));
  }
  write_json_file(files.results, to_json(std::span<const ScoredResult>(run.results)));
  write_text_file(files.report_json, emit_report(run.report, ReportFormat::Json));
  write_text_file(files.report_markdown, emit_report(run.report, ReportFormat::MarkdownTable));
  write_text_file(files.report_csv, emit_report(run.report, ReportFormat::Csv));
  return files;
}

namespace {

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

bool too_many_failures(const EvaluationRun& run) {
  return run.aborted * 10 > run.results.size();
}

}  // namespace

int cli_adjudicate(const RunConfig& config, const AdjudicateRequest& request, std::ostream& out,
                   std::ostream& err) {
  try {
    const Workspace ws = open_workspace(config, false);
    CaseView view;
    if (request.case_id) {
      if (!ws.dataset) throw Error(ErrorCode::InvalidConfig, "--case needs dataset_path in the config");
      const CaseFile* c = ws.dataset->find(*request.case_id);
      if (c == nullptr) {
        throw Error(ErrorCode::InvalidConfig, "case '" + *request.case_id + "' is not in the dataset");
      }
      view = redact(*c);
    } else if (request.narrative && !request.narrative->empty()) {
      view = CaseView{"adhoc", *request.narrative, request.question_type};
    } else {
      throw Error(ErrorCode::InvalidConfig, "give either a case id or a narrative");
    }

    PipelineOptions options;
    options.mode = config.mode;
    options.retrieval_k = config.retrieval_k;
    options.max_parse_retries = config.backend.max_parse_retries;
    const PipelineResult result = run_pipeline(view, ws.corpus, options, *ws.backend);
    const fs::path trace_path = config.output_dir / "traces" / "adjudicate" / (result.trace.trace_id + ".json");
    write_json_file(trace_path, to_json(result.trace));

    if (result.trace.abort) {
      const AbortInfo& a = *result.trace.abort;
      err << "error: " << to_string(a.code) << " at stage " << a.stage << ": " << a.message << "\n";
      err << "trace: " << trace_path.string() << "\n";
      return kExitError;
    }
    const Determination& d = *result.determination;
    if (!d.label) {
      err << "error: the answer names no label\n";
      out << "Trace: " << trace_path.string() << "\n";
      return kExitError;
    }
    out << "Determination: " << capitalized(to_string(*d.label)) << "\n";
    if (!d.reasoning.empty()) out << "Reasoning: " << d.reasoning << "\n";
    if (!d.cited_passage_ids.empty()) {
      out << "Citations:";
      for (const auto& id : d.cited_passage_ids) {
        const Passage* p = ws.corpus.find(id);
        out << "\n  " << id;
        if (p != nullptr) out << " (" << p->citation << ")";
      }
      out << "\n";
    }
    for (const auto& line : d.missing_information) out << "Needed: " << line << "\n";
    out << "Trace: " << trace_path.string() << "\n";
    return *d.label == Label::Inconclusive ? kExitInconclusive : kExitDetermination;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cli_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Workspace ws = open_workspace(config, true);
    const EvaluationRun run = evaluate_dataset(ws, config.mode, config.workers);
    const EvaluationFiles files = write_evaluation(ws, run);
    out << emit_report(run.report, ReportFormat::MarkdownTable);
    out << "\nReport: " << files.report_json.string() << "\nResults: " << files.results.string()
        << "\nTraces: " << files.trace_dir.string() << "\n";
    if (too_many_failures(run)) {
      err << "error: " << run.aborted << " of " << run.results.size() << " cases failed\n";
      return kExitPartialFailure;
    }
    return kExitDetermination;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cli_ablate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const Workspace ws = open_workspace(config, true);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    json summary = json::array();
    bool failed = false;
    for (PipelineMode mode : all_modes()) {
      const EvaluationRun run = evaluate_dataset(ws, mode, config.workers);
      const EvaluationFiles files = write_evaluation(ws, run);
      rows.emplace_back(std::string(to_string(mode)), run.report);
      json calls = json::object();
      for (const auto& r : run.runs) calls[r.trace.case_id] = r.trace.backend_calls();
      summary.push_back({{"mode", to_string(mode)},
                         {"report", to_json(run.report)},
                         {"report_path", files.report_json.string()},
                         {"backend_calls", calls},
                         {"aborted", run.aborted}});
      failed = failed || too_many_failures(run);
    }
    const std::string table = emit_comparison(rows);
    const std::string stem = "ablation__" + backend_label(config.backend) + "__" + ws.dataset_hash;
    write_text_file(config.output_dir / (stem + ".md"), table);
    write_json_file(config.output_dir / (stem + ".json"), summary);
    out << table;
    if (failed) {
      err << "error: more than 10% of cases failed in at least one configuration\n";
      return kExitPartialFailure;
    }
    return kExitDetermination;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace gapgate
