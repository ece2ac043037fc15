#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "gapgate/config.hpp"
#include "gapgate/error.hpp"
#include "gapgate/runner.hpp"
#include "gapgate/service.hpp"

namespace {

gapgate::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

struct CommonFlags {
  std::string config;
  gapgate::ConfigOverrides overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_mode) {
  cmd->add_option("--config", flags.config, "Run configuration (TOML or JSON)")->required();
  if (with_mode) {
    cmd->add_option_function<std::string>(
        "--mode", [&flags](const std::string& v) { flags.overrides.mode = v; },
        "full, no-extractor, no-supervisor, single-agent, static, baseline, enhanced");
  }
  cmd->add_option_function<std::string>(
      "--backend", [&flags](const std::string& v) { flags.overrides.backend = v; },
      "scripted, http, openai, anthropic, gemini");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&flags](const std::uint64_t& v) { flags.overrides.seed = v; }, "Bootstrap seed");
  cmd->add_option_function<std::size_t>(
         "--workers", [&flags](const std::size_t& v) { flags.overrides.workers = v; },
         "Parallel cases")
      ->check(CLI::PositiveNumber);
  cmd->add_option_function<std::string>(
      "--out", [&flags](const std::string& v) { flags.overrides.output_dir = v; }, "Output directory");
}

gapgate::RunConfig resolve(const CommonFlags& flags) {
  gapgate::RunConfig config = gapgate::load_config(flags.config);
  gapgate::apply_overrides(config, flags.overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gap-gated adjudication pipeline"};
  app.require_subcommand(1);

  CommonFlags adj_flags, eval_flags, ablate_flags, serve_flags;
  std::string case_id, narrative, question_type = "eligibility";
  auto* adjudicate = app.add_subcommand("adjudicate", "Run one case");
  add_common(adjudicate, adj_flags, true);
  auto* case_opt = adjudicate->add_option("--case", case_id, "Dataset case id");
  auto* narrative_opt = adjudicate->add_option("--narrative", narrative, "Ad-hoc question text");
  case_opt->excludes(narrative_opt);
  adjudicate->add_option("--question-type", question_type, "eligibility or direct")
      ->check(CLI::IsMember({"eligibility", "direct"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score every dataset case");
  add_common(evaluate, eval_flags, true);

  auto* ablate = app.add_subcommand("ablate", "Evaluate every pipeline mode");
  add_common(ablate, ablate_flags, false);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  add_common(serve, serve_flags, true);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Bind port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (adjudicate->parsed()) {
      gapgate::AdjudicateRequest request;
      if (!case_id.empty()) request.case_id = case_id;
      if (!narrative.empty()) request.narrative = narrative;
      request.question_type = *gapgate::parse_question_type(question_type);
      return gapgate::cli_adjudicate(resolve(adj_flags), request, std::cout, std::cerr);
    }
    if (evaluate->parsed()) return gapgate::cli_evaluate(resolve(eval_flags), std::cout, std::cerr);
    if (ablate->parsed()) return gapgate::cli_ablate(resolve(ablate_flags), std::cout, std::cerr);
    if (serve->parsed()) {
      gapgate::Service service(gapgate::open_workspace(resolve(serve_flags), false));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      service.listen(host, port);
      g_service = nullptr;
      return 0;
    }
  } catch (const gapgate::Error& e) {
    std::cerr << "error: " << gapgate::to_string(e.code()) << ": " << e.what() << "\n";
    return gapgate::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gapgate::kExitError;
  }
  return gapgate::kExitError;
}
