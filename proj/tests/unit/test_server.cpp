#include <doctest.h>

#include <thread>

#include "fixtures.hpp"
#include "schema_check.hpp"
#include "semloop/error.hpp"
#include "semloop/server.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

using namespace semloop;
using namespace semloop::testing;

namespace {

std::shared_ptr<const PreparedExperiment> cached(const ExperimentConfig& cfg) {
  static std::map<std::string, std::shared_ptr<const PreparedExperiment>> cache;
  static std::mutex m;
  std::lock_guard lock(m);
  auto& slot = cache[cfg.to_json().dump()];
  if (!slot) slot = prepare_experiment(cfg);
  return slot;
}

class LiveServer {
 public:
  LiveServer() : manager_(cached) {
    register_routes(server_, manager_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  SessionManager manager_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

SchemaCheck& schemas() {
  static SchemaCheck check(SEMLOOP_SCHEMA_DIR);
  return check;
}

void conforms(const nlohmann::json& value, const std::string& schema) {
  const auto errors = schemas().errors(value, schema);
  CAPTURE(schema);
  for (const auto& e : errors) CAPTURE(e);
  CHECK(errors.empty());
  if (!errors.empty()) MESSAGE(errors.front());
}

nlohmann::json json_of(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

void expect_error(const httplib::Result& r, int status, const std::string& code) {
  REQUIRE(r);
  CHECK(r->status == status);
  const auto j = json_of(r);
  conforms(j, "error.schema.json");
  CHECK(j.at("error").at("code") == code);
}

}  // namespace

TEST_CASE("status mapping") {
  CHECK(http_status(ErrorCode::UnknownSession) == 404);
  CHECK(http_status(ErrorCode::Conflict) == 409);
  CHECK(http_status(ErrorCode::WrongPhase) == 409);
  CHECK(http_status(ErrorCode::SchemaError) == 400);
  CHECK(http_status(ErrorCode::InvalidConfig) == 422);
  CHECK(http_status(ErrorCode::DegenerateMixture) == 500);
}

TEST_CASE("config documents conform to the config schema") {
  conforms(nlohmann::json::parse(ExperimentConfig{}.to_json().dump()), "config.schema.json");
  conforms(nlohmann::json::parse(small_config().to_json().dump()), "config.schema.json");
  CHECK(!schemas().errors(nlohmann::json{{"schema_version", 1}, {"iterations", 0}}, "config.schema.json").empty());
}

TEST_CASE("a full session over HTTP") {
  LiveServer live;
  httplib::Client client("127.0.0.1", live.port());

  const auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  conforms(json_of(health), "health.schema.json");
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto preflight = client.Options("/v1/sessions");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);

  auto cfg = small_config(8);
  cfg.iterations = 3;
  for (const char* strategy : {"semantic_push", "caipi_dc"}) {
    CAPTURE(strategy);
    const nlohmann::json create{{"config", nlohmann::json::parse(cfg.to_json().dump())}, {"strategy", strategy}};
    conforms(create, "session_create.schema.json");
    const auto created = client.Post("/v1/sessions", create.dump(), "application/json");
    REQUIRE(created);
    REQUIRE(created->status == 200);
    const auto state = json_of(created);
    conforms(state, "session_state.schema.json");
    const auto id = state.at("session_id").get<std::string>();
    const auto base = "/v1/sessions/" + id;

    const auto gs_res = client.Get(base + "/gold_standard?kind=" + std::string(strategy == std::string("semantic_push") ? "topic" : "word"));
    REQUIRE(gs_res);
    CHECK(gs_res->status == 200);
    conforms(json_of(gs_res), "gold_standard.schema.json");
    const auto gs = GoldStandard::from_json(json_of(gs_res).at("gold_standard"));
    const auto prepared = cached(cfg);

    for (int it = 0; it < 3; ++it) {
      const auto qres = client.Get(base + "/query");
      REQUIRE(qres);
      REQUIRE(qres->status == 200);
      const auto payload = json_of(qres);
      conforms(payload, "query.schema.json");
      const auto q = pending_from_payload(payload);
      const auto req = gold_standard_request(gs, q, parse_strategy(strategy), prepared->corpus.labels.at(q.instance),
                                             cfg.strategy.k_fraction);
      conforms(req.to_json(), "correction_request.schema.json");
      const auto cres = client.Post(base + "/correction", req.to_json().dump(), "application/json");
      REQUIRE(cres);
      REQUIRE(cres->status == 200);
      const auto summary = json_of(cres);
      conforms(summary, "correction_response.schema.json");
      CHECK(summary.at("iteration") == it + 1);
    }
    const auto st = client.Get(base);
    REQUIRE(st);
    conforms(json_of(st), "session_state.schema.json");
    CHECK(json_of(st).at("phase") == "finished");

    const auto metrics = client.Get(base + "/metrics");
    REQUIRE(metrics);
    conforms(json_of(metrics), "metrics.schema.json");
    const auto records = client.Get(base + "/records");
    REQUIRE(records);
    conforms(json_of(records), "records.schema.json");
    CHECK(json_of(records).at("records").size() == 3);

    expect_error(client.Get(base + "/query"), 409, "WrongPhase");
    expect_error(client.Post(base + "/correction", R"({"true_label": 0, "verdicts": []})", "application/json"), 409,
                 "WrongPhase");
  }

  expect_error(client.Get("/v1/sessions/nope/query"), 404, "UnknownSession");
  expect_error(client.Post("/v1/sessions", "{not json", "application/json"), 400, "SchemaError");
  expect_error(client.Post("/v1/sessions", R"({"config": {"iterations": 0}})", "application/json"), 422,
               "InvalidConfig");

  const nlohmann::json fresh{{"config", nlohmann::json::parse(cfg.to_json().dump())}, {"strategy", "al"}};
  const auto id = json_of(client.Post("/v1/sessions", fresh.dump(), "application/json")).at("session_id").get<std::string>();
  expect_error(client.Post("/v1/sessions/" + id + "/correction", R"({"true_label": "x"})", "application/json"), 400,
               "SchemaError");
  expect_error(client.Post("/v1/sessions/" + id + "/correction", R"({"true_label": 99, "verdicts": []})", "application/json"),
               400, "SchemaError");
}
