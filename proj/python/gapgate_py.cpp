#include <optional>
#include <string>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gapgate/config.hpp"
#include "gapgate/corpus.hpp"
#include "gapgate/error.hpp"
#include "gapgate/evalharness.hpp"
#include "gapgate/pipeline.hpp"
#include "gapgate/runner.hpp"
#include "gapgate/service.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as Python objects via the json module.
py::object to_py(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

gapgate::RunConfig config_from(const std::string& path, std::optional<std::string> mode,
                               std::optional<std::size_t> workers, std::optional<std::string> out) {
  gapgate::RunConfig config = gapgate::load_config(path);
  gapgate::ConfigOverrides o;
  o.mode = std::move(mode);
  o.workers = workers;
  if (out) o.output_dir = *out;
  gapgate::apply_overrides(config, o);
  return config;
}

gapgate::PipelineMode mode_from(const std::string& s) {
  const auto mode = gapgate::parse_mode(s);
  if (!mode) throw gapgate::Error(gapgate::ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
  return *mode;
}

}  // namespace

PYBIND11_MODULE(_gapgate, m) {
  m.doc() = "Gap-gated adjudication pipeline";

  // Leaked so no Python object is destroyed after interpreter shutdown.
  static auto* error = new py::exception<gapgate::Error>(m, "GapgateError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gapgate::Error& e) {
      PyErr_SetString(error->ptr(), (std::string(gapgate::to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<gapgate::Corpus>(m, "Corpus")
      .def_static("load", [](const std::string& path) { return gapgate::load_corpus(path); })
      .def("__len__", [](const gapgate::Corpus& c) { return c.passages().size(); })
      .def("passage",
           [](const gapgate::Corpus& c, const std::string& id) -> py::object {
             const gapgate::Passage* p = c.find(id);
             return p ? to_py(gapgate::to_json(*p)) : py::none();
           })
      .def(
          "retrieve",
          [](const gapgate::Corpus& c, const std::string& query, std::size_t k) {
            py::list out;
            for (const auto& r : gapgate::retrieve(query, c, k)) {
              py::dict d;
              d["passage_id"] = r.passage_id;
              d["score"] = r.score;
              d["rank"] = r.rank;
              out.append(d);
            }
            return out;
          },
          py::arg("query"), py::arg("k") = gapgate::kDefaultRetrievalK);

  m.def("load_dataset",
        [](const std::string& path) { return to_py(gapgate::to_json(gapgate::load_dataset(path))); });

  m.def("modes", [] {
    std::vector<std::string> out;
    for (auto mode : gapgate::all_modes()) out.emplace_back(gapgate::to_string(mode));
    return out;
  });

  m.def("expected_backend_calls",
        [](const std::string& mode, bool gap_empty) {
          return gapgate::expected_backend_calls(mode_from(mode), gap_empty);
        },
        py::arg("mode"), py::arg("gap_empty"));

  m.def("compute_gap",
        [](py::handle checklist, py::handle assessments) {
          return to_py(gapgate::to_json(gapgate::compute_gap(
              gapgate::parse_checklist(from_py(checklist)), gapgate::parse_assessments(from_py(assessments)))));
        },
        py::arg("checklist"), py::arg("assessments"));

  m.def("score_case",
        [](const std::string& case_id, std::optional<std::string> label, py::handle case_doc) {
          const auto dataset = gapgate::parse_dataset(json::array({from_py(case_doc)}), "case");
          gapgate::Prediction p{case_id, std::nullopt};
          if (label) p.label = gapgate::parse_label(*label);
          return to_py(gapgate::to_json(gapgate::score_case(p, dataset.cases.front())));
        },
        py::arg("case_id"), py::arg("label"), py::arg("case"));

  m.def("aggregate_metrics",
        [](py::handle results, std::size_t n_resamples, std::uint64_t seed) {
          const auto parsed = gapgate::results_from_json(from_py(results));
          return to_py(gapgate::to_json(
              gapgate::aggregate_metrics(parsed, gapgate::BootstrapOptions{true, n_resamples, seed})));
        },
        py::arg("results"), py::arg("n_resamples") = 1000, py::arg("seed") = 42);

  m.def("bootstrap_ci",
        [](py::handle results, const std::string& metric, std::size_t n_resamples, std::uint64_t seed) {
          const auto parsed = gapgate::results_from_json(from_py(results));
          gapgate::MetricSelector selector;
          if (metric == "accuracy_all") selector = gapgate::accuracy_all;
          else if (metric == "accuracy_complete") selector = gapgate::accuracy_complete;
          else if (metric == "accuracy_inconclusive") selector = gapgate::accuracy_inconclusive;
          else throw gapgate::Error(gapgate::ErrorCode::InvalidConfig, "unknown metric '" + metric + "'");
          return gapgate::bootstrap_ci(parsed, selector, n_resamples, seed);
        },
        py::arg("results"), py::arg("metric") = "accuracy_all", py::arg("n_resamples") = 1000,
        py::arg("seed") = 42);

  m.def("adjudicate",
        [](const std::string& config_path, std::optional<std::string> case_id,
           std::optional<std::string> narrative, const std::string& question_type,
           std::optional<std::string> mode) {
          const gapgate::RunConfig config = config_from(config_path, mode, std::nullopt, std::nullopt);
          gapgate::Workspace ws;
          gapgate::PipelineResult result;
          {
            py::gil_scoped_release release;
            ws = gapgate::open_workspace(config, false);
          }
          gapgate::CaseView view;
          if (case_id) {
            const gapgate::CaseFile* c = ws.dataset ? ws.dataset->find(*case_id) : nullptr;
            if (c == nullptr) {
              throw gapgate::Error(gapgate::ErrorCode::InvalidConfig, "unknown case '" + *case_id + "'");
            }
            view = gapgate::redact(*c);
          } else if (narrative) {
            const auto qt = gapgate::parse_question_type(question_type);
            if (!qt) throw gapgate::Error(gapgate::ErrorCode::InvalidConfig, "unknown question type");
            view = gapgate::CaseView{"adhoc", *narrative, *qt};
          } else {
            throw gapgate::Error(gapgate::ErrorCode::InvalidConfig, "give case_id or narrative");
          }
          gapgate::PipelineOptions options;
          options.mode = config.mode;
          options.retrieval_k = config.retrieval_k;
          options.max_parse_retries = config.backend.max_parse_retries;
          {
            py::gil_scoped_release release;
            result = gapgate::run_pipeline(view, ws.corpus, options, *ws.backend);
          }
          py::dict out;
          out["determination"] =
              result.determination ? to_py(gapgate::to_json(*result.determination)) : py::none();
          out["trace"] = to_py(gapgate::to_json(result.trace));
          return out;
        },
        py::arg("config"), py::arg("case_id") = std::nullopt, py::arg("narrative") = std::nullopt,
        py::arg("question_type") = "eligibility", py::arg("mode") = std::nullopt);

  m.def("evaluate",
        [](const std::string& config_path, std::optional<std::string> mode,
           std::optional<std::size_t> workers, std::optional<std::string> out) {
          const gapgate::RunConfig config = config_from(config_path, mode, workers, out);
          gapgate::EvaluationRun run;
          gapgate::EvaluationFiles files;
          {
            py::gil_scoped_release release;
            const gapgate::Workspace ws = gapgate::open_workspace(config, true);
            run = gapgate::evaluate_dataset(ws, config.mode, config.workers);
            files = gapgate::write_evaluation(ws, run);
          }
          py::dict result;
          result["report"] = to_py(gapgate::to_json(run.report));
          result["results"] = to_py(gapgate::to_json(std::span<const gapgate::ScoredResult>(run.results)));
          result["report_path"] = files.report_json.string();
          result["aborted"] = run.aborted;
          return result;
        },
        py::arg("config"), py::arg("mode") = std::nullopt, py::arg("workers") = std::nullopt,
        py::arg("out") = std::nullopt);

  m.def("openapi", [] { return to_py(gapgate::Service::openapi()); });
}
