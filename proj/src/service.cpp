#include "gapgate/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate {

using nlohmann::json;

namespace {

struct RunRecord {
  std::size_t index = 0;
  std::string trace_id;
  std::string narrative;
  std::optional<Determination> determination;
  std::optional<GapSet> gap_set;
  std::optional<AbortInfo> abort;
};

struct Session {
  std::string id;
  std::optional<std::string> case_id;
  std::string narrative;
  QuestionType question_type = QuestionType::EligibilityDetermination;
  std::vector<std::string> facts;
  std::vector<RunRecord> runs;
  bool running = false;

  std::string current_narrative() const {
    std::string out = narrative;
    for (const auto& f : facts) out += " " + f;
    return out;
  }
};

json to_json(const RunRecord& r) {
  json out{{"run_index", r.index},
           {"trace_id", r.trace_id},
           {"narrative", r.narrative},
           {"determination", r.determination ? gapgate::to_json(*r.determination) : json(nullptr)},
           {"gap_set", r.gap_set ? gapgate::to_json(*r.gap_set) : json(nullptr)}};
  if (r.abort) {
    out["abort"] = {{"stage", r.abort->stage},
                    {"code", to_string(r.abort->code)},
                    {"message", r.abort->message}};
  }
  return out;
}

json to_json(const Session& s) {
  json runs = json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r));
  return json{{"schema_version", kApiSchemaVersion},
              {"session_id", s.id},
              {"case_id", s.case_id ? json(*s.case_id) : json(nullptr)},
              {"narrative", s.narrative},
              {"question_type", to_string(s.question_type)},
              {"facts", s.facts},
              {"current_narrative", s.current_narrative()},
              {"running", s.running},
              {"runs", runs}};
}

struct ApiError {
  int status;
  std::string code;
  std::string detail;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_problem(httplib::Response& res, const ApiError& e) {
  res.status = e.status;
  const json body{{"type", "about:blank"},
                  {"title", httplib::status_message(e.status)},
                  {"status", e.status},
                  {"code", e.code},
                  {"detail", e.detail},
                  {"schema_version", kApiSchemaVersion}};
  res.set_content(body.dump(2), "application/problem+json");
}

json parse_body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ApiError{400, "invalid_json", std::string("request body is not JSON: ") + e.what()};
  }
  if (!body.is_object()) throw ApiError{400, "invalid_json", "request body must be a JSON object"};
  return body;
}

std::string string_field(const json& body, const char* name) {
  const auto it = body.find(name);
  if (it == body.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

bool backend_unavailable(ErrorCode code) {
  return code == ErrorCode::ProviderError || code == ErrorCode::Timeout ||
         code == ErrorCode::UnknownScriptKey;
}

json ref(const std::string& name) { return {{"$ref", "#/components/schemas/" + name}}; }

json json_response(const std::string& description, const json& schema) {
  return {{"description", description}, {"content", {{"application/json", {{"schema", schema}}}}}};
}

json problem_response(const std::string& description) {
  return {{"description", description},
          {"content", {{"application/problem+json", {{"schema", ref("Problem")}}}}}};
}

json path_param(const std::string& name) {
  return {{"name", name}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}};
}

json string_enum(std::vector<std::string> values) {
  return {{"type", "string"}, {"enum", std::move(values)}};
}

json nullable(json schema) { return {{"oneOf", json::array({std::move(schema), {{"type", "null"}}})}}; }

}  // namespace

struct Service::Impl {
  explicit Impl(Workspace ws) : workspace(std::move(ws)) {}

  Workspace workspace;
  httplib::Server server;
  std::thread thread;
  std::mutex mutex;
  std::map<std::string, Session> sessions;
  std::map<std::string, json> traces;
  std::size_t next_session = 1;

  Session& session_locked(const std::string& id) {
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw ApiError{404, "session_not_found", "no session '" + id + "'"};
    return it->second;
  }

  json create_session(const json& body) {
    Session s;
    const std::string case_id = string_field(body, "case_id");
    if (!case_id.empty()) {
      const CaseFile* c = workspace.dataset ? workspace.dataset->find(case_id) : nullptr;
      if (c == nullptr) throw ApiError{404, "case_not_found", "no dataset case '" + case_id + "'"};
      s.case_id = c->id;
      s.narrative = c->narrative;
      s.question_type = c->question_type;
    } else {
      s.narrative = string_field(body, "narrative");
      if (s.narrative.empty()) {
        throw ApiError{400, "validation_failed", "give a non-empty 'narrative' or a 'case_id'"};
      }
      const std::string q = string_field(body, "question_type");
      const auto qt = parse_question_type(q.empty() ? "eligibility" : q);
      if (!qt) {
        throw ApiError{400, "validation_failed",
                       "question_type must be 'eligibility' or 'direct', got '" + q + "'"};
      }
      s.question_type = *qt;
    }
    std::lock_guard lock(mutex);
    s.id = "s" + std::to_string(next_session++);
    const json out = to_json(s);
    sessions.emplace(s.id, std::move(s));
    return out;
  }

  json add_fact(const std::string& id, const json& body) {
    const std::string fact = string_field(body, "text");
    if (text::normalize_whitespace(fact).empty()) {
      throw ApiError{400, "validation_failed", "'text' must be a non-empty string"};
    }
    std::lock_guard lock(mutex);
    Session& s = session_locked(id);
    s.facts.push_back(fact);
    return to_json(s);
  }

  std::pair<int, json> run(const std::string& id) {
    CaseView view;
    std::size_t index = 0;
    {
      std::lock_guard lock(mutex);
      Session& s = session_locked(id);
      if (s.running) throw ApiError{409, "run_in_progress", "session '" + id + "' is already running"};
      s.running = true;
      view = CaseView{s.case_id.value_or(s.id), s.current_narrative(), s.question_type};
      index = s.runs.size() + 1;
    }

    PipelineOptions options;
    options.mode = workspace.config.mode;
    options.retrieval_k = workspace.config.retrieval_k;
    options.max_parse_retries = workspace.config.backend.max_parse_retries;
    options.trace_id =
        id + "-r" + std::to_string(index) + "-" + text::sha256_hex(view.narrative).substr(0, 12);
    PipelineResult result;
    try {
      result = run_pipeline(view, workspace.corpus, options, *workspace.backend);
    } catch (...) {
      std::lock_guard lock(mutex);
      session_locked(id).running = false;
      throw;
    }

    RunRecord record{index, result.trace.trace_id, view.narrative, result.determination,
                     result.trace.gap_set, result.trace.abort};
    std::lock_guard lock(mutex);
    traces[record.trace_id] = gapgate::to_json(result.trace);
    Session& s = session_locked(id);
    s.running = false;
    s.runs.push_back(record);
    if (record.abort && backend_unavailable(record.abort->code)) {
      json problem{{"type", "about:blank"},
                   {"title", "Service Unavailable"},
                   {"status", 503},
                   {"code", "backend_unavailable"},
                   {"detail", record.abort->message},
                   {"trace_id", record.trace_id},
                   {"schema_version", kApiSchemaVersion}};
      return {503, problem};
    }
    json out = to_json(record);
    out["schema_version"] = kApiSchemaVersion;
    out["session_id"] = id;
    return {200, out};
  }

  void routes() {
    auto guarded = [](auto handler) {
      return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
          handler(req, res);
        } catch (const ApiError& e) {
          send_problem(res, e);
        } catch (const Error& e) {
          send_problem(res, ApiError{500, std::string(to_string(e.code())), e.what()});
        } catch (const std::exception& e) {
          send_problem(res, ApiError{500, "internal_error", e.what()});
        }
      };
    };

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 201, create_session(parse_body(req)));
    }));
    server.Post(R"(/sessions/([^/]+)/facts)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, add_fact(req.matches[1], parse_body(req)));
                }));
    server.Post(R"(/sessions/([^/]+)/run)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto [status, body] = run(req.matches[1]);
                  if (status == 200) send_json(res, status, body);
                  else {
                    res.status = status;
                    res.set_content(body.dump(2), "application/problem+json");
                  }
                }));
    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      send_json(res, 200, to_json(session_locked(req.matches[1])));
    }));
    server.Get(R"(/traces/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex);
      const auto it = traces.find(req.matches[1]);
      if (it == traces.end()) {
        throw ApiError{404, "trace_not_found", "no trace '" + std::string(req.matches[1]) + "'"};
      }
      send_json(res, 200, it->second);
    }));
    server.Get(R"(/corpus/passages/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Passage* p = workspace.corpus.find(std::string(req.matches[1]));
                 if (p == nullptr) {
                   throw ApiError{404, "passage_not_found",
                                  "no passage '" + std::string(req.matches[1]) + "'"};
                 }
                 json body = gapgate::to_json(*p);
                 body["schema_version"] = kApiSchemaVersion;
                 send_json(res, 200, body);
               }));
    server.Get("/openapi.json", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Service::openapi());
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      const int status = res.status;
      send_problem(res, ApiError{status, status == 404 ? "not_found" : "http_error",
                                 "no handler for " + req.method + " " + req.path});
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string detail = "unknown error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        detail = e.what();
      } catch (...) {
      }
      send_problem(res, ApiError{500, "internal_error", detail});
    });
  }
};

Service::Service(Workspace workspace) : impl_(std::make_unique<Impl>(std::move(workspace))) {
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

json Service::openapi() {
  const json problem_codes = string_enum({"invalid_json", "validation_failed", "session_not_found",
                                          "case_not_found", "trace_not_found", "passage_not_found",
                                          "not_found", "run_in_progress", "backend_unavailable",
                                          "internal_error"});
  const json label = string_enum({"eligible", "ineligible", "yes", "no", "inconclusive", "unparseable"});
  json schemas;
  schemas["Problem"] = {{"type", "object"},
                        {"required", {"type", "title", "status", "code", "detail"}},
                        {"properties",
                         {{"type", {{"type", "string"}}},
                          {"title", {{"type", "string"}}},
                          {"status", {{"type", "integer"}}},
                          {"code", problem_codes},
                          {"detail", {{"type", "string"}}},
                          {"trace_id", {{"type", "string"}}},
                          {"schema_version", {{"type", "integer"}}}}}};
  schemas["CreateSession"] = {
      {"type", "object"},
      {"description", "Either a narrative (with question_type) or the id of a dataset case."},
      {"properties",
       {{"narrative", {{"type", "string"}}},
        {"question_type", string_enum({"eligibility", "direct"})},
        {"case_id", {{"type", "string"}}}}}};
  schemas["AddFact"] = {{"type", "object"},
                        {"required", {"text"}},
                        {"properties", {{"text", {{"type", "string"}, {"minLength", 1}}}}}};
  schemas["Determination"] = {{"type", "object"},
                              {"required", {"label", "reasoning", "cited_passage_ids",
                                            "missing_information", "trace_id"}},
                              {"properties",
                               {{"label", label},
                                {"reasoning", {{"type", "string"}}},
                                {"cited_passage_ids", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                                {"missing_information", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                                {"trace_id", {{"type", "string"}}}}}};
  schemas["GapSet"] = {
      {"type", "object"},
      {"properties",
       {{"gaps",
         {{"type", "array"},
          {"items",
           {{"type", "object"},
            {"properties",
             {{"item_id", {{"type", "string"}}},
              {"requirement_text", {{"type", "string"}}},
              {"needed_information", {{"type", "string"}}}}}}}}}}}};
  schemas["Run"] = {{"type", "object"},
                    {"required", {"run_index", "trace_id", "narrative", "determination", "gap_set"}},
                    {"properties",
                     {{"run_index", {{"type", "integer"}}},
                      {"trace_id", {{"type", "string"}}},
                      {"narrative", {{"type", "string"}}},
                      {"determination", nullable(ref("Determination"))},
                      {"gap_set", nullable(ref("GapSet"))},
                      {"abort", {{"type", "object"}}},
                      {"session_id", {{"type", "string"}}},
                      {"schema_version", {{"type", "integer"}}}}}};
  schemas["Session"] = {{"type", "object"},
                        {"required", {"schema_version", "session_id", "narrative", "question_type",
                                      "facts", "current_narrative", "running", "runs"}},
                        {"properties",
                         {{"schema_version", {{"type", "integer"}}},
                          {"session_id", {{"type", "string"}}},
                          {"case_id", {{"type", {"string", "null"}}}},
                          {"narrative", {{"type", "string"}}},
                          {"question_type", string_enum({"eligibility", "direct"})},
                          {"facts", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                          {"current_narrative", {{"type", "string"}}},
                          {"running", {{"type", "boolean"}}},
                          {"runs", {{"type", "array"}, {"items", ref("Run")}}}}}};
  schemas["Passage"] = {{"type", "object"},
                        {"required", {"id", "kind", "citation", "title", "text", "source_doc"}},
                        {"properties",
                         {{"id", {{"type", "string"}}},
                          {"kind", string_enum({"statute", "regulation", "consideration", "caselaw", "example"})},
                          {"citation", {{"type", "string"}}},
                          {"title", {{"type", "string"}}},
                          {"text", {{"type", "string"}}},
                          {"source_doc", {{"type", "string"}}}}}};
  schemas["Trace"] = {{"type", "object"},
                      {"description", "Full pipeline trace: retrieval, stage prompts and outputs, gap set, determination."},
                      {"required", {"schema_version", "trace_id", "case_id", "mode", "stages"}}};

  auto body = [](const std::string& schema) {
    return json{{"required", true}, {"content", {{"application/json", {{"schema", ref(schema)}}}}}};
  };
  json paths;
  paths["/sessions"]["post"] = {{"summary", "Create a session"},
                                {"requestBody", body("CreateSession")},
                                {"responses",
                                 {{"201", json_response("Created", ref("Session"))},
                                  {"400", problem_response("Invalid body")},
                                  {"404", problem_response("Unknown case id")}}}};
  paths["/sessions/{id}"]["get"] = {{"summary", "Session with run history"},
                                    {"parameters", {path_param("id")}},
                                    {"responses",
                                     {{"200", json_response("Session", ref("Session"))},
                                      {"404", problem_response("Unknown session")}}}};
  paths["/sessions/{id}/facts"]["post"] = {{"summary", "Append a stated fact"},
                                           {"parameters", {path_param("id")}},
                                           {"requestBody", body("AddFact")},
                                           {"responses",
                                            {{"200", json_response("Updated session", ref("Session"))},
                                             {"400", problem_response("Invalid body")},
                                             {"404", problem_response("Unknown session")}}}};
  paths["/sessions/{id}/run"]["post"] = {{"summary", "Run the pipeline on the current narrative"},
                                         {"parameters", {path_param("id")}},
                                         {"responses",
                                          {{"200", json_response("Run result", ref("Run"))},
                                           {"404", problem_response("Unknown session")},
                                           {"409", problem_response("Run already in progress")},
                                           {"503", problem_response("Backend unavailable")}}}};
  paths["/traces/{id}"]["get"] = {{"summary", "Full trace"},
                                  {"parameters", {path_param("id")}},
                                  {"responses",
                                   {{"200", json_response("Trace", ref("Trace"))},
                                    {"404", problem_response("Unknown trace")}}}};
  paths["/corpus/passages/{id}"]["get"] = {{"summary", "One corpus passage"},
                                           {"parameters", {path_param("id")}},
                                           {"responses",
                                            {{"200", json_response("Passage", ref("Passage"))},
                                             {"404", problem_response("Unknown passage")}}}};
  paths["/openapi.json"]["get"] = {{"summary", "This document"},
                                   {"responses", {{"200", {{"description", "OpenAPI document"}}}}}};
  return json{{"openapi", "3.1.0"},
              {"info", {{"title", "gapgate adjudication service"}, {"version", std::to_string(kApiSchemaVersion)}}},
              {"paths", paths},
              {"components", {{"schemas", schemas}}}};
}

}  // namespace gapgate
