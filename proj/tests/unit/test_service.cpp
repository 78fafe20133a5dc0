#include "support/torch_doctest.hpp"

#include <filesystem>
#include <fstream>
#include <thread>

#include "colay/error.hpp"
#include "colay/metrics.hpp"
#include "colay/model/sampler.hpp"
#include "colay/service.hpp"
#include "support/generators.hpp"
#include "support/model_fixtures.hpp"

#include "httplib.h"

using namespace colay;
using namespace colay::testing;

namespace {

std::shared_ptr<model::LatentDiffusion> shared_tiny_model(bool gen_all = true) {
  return std::shared_ptr<model::LatentDiffusion>(tiny_model(3, gen_all, 10).release());
}

ServiceConfig service_config() {
  ServiceConfig c;
  c.schema = toy_schema();
  return c;
}

HttpResponse post(Service& s, const std::string& path, const json& body) { return s.handle("POST", path, body.dump()); }

Layout sample_layout() {
  std::mt19937_64 rng(12);
  Layout l = random_layout(toy_schema(), rng, 6);
  while (l.valid_count() == 0) l = random_layout(toy_schema(), rng, 6);
  return l;
}

}  // namespace

TEST_CASE("schema endpoint describes the attribute layout and model state") {
  Service offline(service_config(), nullptr);
  const auto r = offline.handle("GET", "/schema", "");
  CHECK(r.status == 200);
  CHECK(r.body["model_loaded"] == false);
  CHECK(r.body["resolution"] == toy_schema()->resolution());
  CHECK(r.body["capacity"] == toy_schema()->capacity());
  CHECK(r.body["legend"].size() == std::size_t(toy_schema()->num_classes()));
  CHECK(r.body["legend"][0]["color"].get<std::string>().size() == 7);
  CHECK(r.body["conditions"] == json({"prompt", "class_count", "given_design", "guidelines"}));

  Service online(service_config(), shared_tiny_model());
  CHECK(online.handle("GET", "/schema", "").body["model_loaded"] == true);
}

TEST_CASE("generation without a model answers 503") {
  Service s(service_config(), nullptr);
  const auto r = post(s, "/generate", {{"guidance", {{"steps", 2}}}});
  CHECK(r.status == 503);
  CHECK(r.body["error"] == "model_unavailable");
  const auto id = post(s, "/session", json::object()).body["session"].get<std::string>();
  CHECK(post(s, "/session/" + id + "/step", json::object()).status == 503);
}

TEST_CASE("validation errors carry the offending field path") {
  Service s(service_config(), shared_tiny_model());
  auto detail = [&](const json& body) {
    const auto r = post(s, "/generate", body);
    CHECK(r.status == 400);
    CHECK(r.body["error"] == "validation_error");
    return r.body["detail"].get<std::string>();
  };
  CHECK(detail({{"conditions", {{"class_count", {1, 2}}}}}) == "/conditions/class_count");
  CHECK(detail({{"count", 0}}) == "/count");
  CHECK(detail({{"count", 1000}}) == "/count");
  CHECK(detail({{"guidance", {{"steps", 10000}}}}) == "/guidance/steps");
  CHECK(detail({{"guidance", {{"seed", "x"}}}}) == "/guidance/seed");
  CHECK(detail({{"guidance", {{"weights", {{"colour", 1.0}}}}}}) == "/guidance/weights/colour");
  CHECK(detail({{"guidance", {{"weights", {{"guidelines", -1.0}}}}}}) == "/guidance/weights/guidelines");
  // A weight for a condition that was not sent.
  CHECK(detail({{"guidance", {{"weights", {{"guidelines", 1.0}}}}}}) == "/guidance/weights");
  CHECK(detail({{"conditions", {{"class_count", {1, 0, 0, 0}}}}, {"guidance", {{"preset", "nope"}}}}) == "/guidance/preset");
  CHECK(detail({{"element_count", 0}}) == "/element_count");

  const auto bad = s.handle("POST", "/generate", "{not json");
  CHECK(bad.status == 400);
  CHECK(s.handle("GET", "/nowhere", "").status == 404);
}

TEST_CASE("generate returns layouts, rasters and the resolved guidance") {
  Service s(service_config(), shared_tiny_model());
  const json req = {{"conditions", {{"class_count", {1, 1, 0, 0}}, {"guidelines", {{{"axis", "x"}, {"pos", 10}}}}}},
                    {"guidance", {{"weights", {{"C", 1.0}, {"guidelines", 2.0}}}, {"steps", 4}, {"seed", 5}}},
                    {"count", 3}};
  const auto a = post(s, "/generate", req);
  REQUIRE(a.status == 200);
  CHECK(a.body["layouts"].size() == 3);
  CHECK(a.body["rasters"].size() == 3);
  CHECK(a.body["rasters"][0].get<std::string>().rfind("iVBOR", 0) == 0);
  CHECK(a.body["guidance"]["weights"] == json({{"class_count", 1.0}, {"guidelines", 2.0}}));
  CHECK(a.body["guidance"]["steps"] == 4);
  CHECK(a.body["guidance"]["sample_seeds"][1] == model::derive_seed(5, 1));
  // Idempotent for identical requests.
  CHECK(post(s, "/generate", req).body == a.body);
  for (const auto& l : a.body["layouts"]) CHECK_NOTHROW(layout_from_json(l, toy_schema(), ""));

  // Preset weights when none are given.
  const auto p = post(s, "/generate", {{"conditions", {{"class_count", {1, 0, 0, 0}}}}, {"guidance", {{"steps", 2}}}});
  REQUIRE(p.status == 200);
  CHECK(p.body["guidance"]["weights"] == json({{"class_count", 2.5}}));
}

TEST_CASE("a model trained without Gen-All needs an element count") {
  Service s(service_config(), shared_tiny_model(false));
  CHECK(post(s, "/generate", {{"guidance", {{"steps", 2}}}}).body["detail"] == "/element_count");
  const auto r = post(s, "/generate", {{"guidance", {{"steps", 2}}}, {"element_count", 5}});
  REQUIRE(r.status == 200);
  CHECK(layout_from_json(r.body["layouts"][0], toy_schema(), "").valid_count() <= 5);
}

TEST_CASE("extract-conditions matches the library extraction") {
  Service s(service_config(), nullptr);
  const auto l = sample_layout();
  const auto r = post(s, "/extract-conditions", {{"layout", layout_to_json(l)}, {"prompt", {"a title", "two buttons"}}});
  REQUIRE(r.status == 200);
  const auto back = conditions_from_json(r.body["conditions"], toy_schema(), "");
  const auto expect = extract_conditions(l);
  CHECK(back.guidelines == expect.guidelines);
  CHECK(back.class_count == expect.class_count);
  REQUIRE(back.given_design);
  CHECK(layout_to_json(*back.given_design) == layout_to_json(l));
  CHECK(back.prompt.has_value());
  const auto weighted = extract_guidelines(l);
  REQUIRE(r.body["weighted_guidelines"].size() == weighted.size());
  CHECK(r.body["weighted_guidelines"][0]["weight"].get<double>() == weighted[0].weight);
  CHECK(post(s, "/extract-conditions", json::object()).body["detail"] == "/layout");
}

TEST_CASE("metrics endpoint scores a layout against its conditions") {
  Service s(service_config(), nullptr);
  const auto l = sample_layout();
  const auto cs = extract_conditions(l);
  const auto r = post(s, "/metrics", {{"layout", layout_to_json(l)}, {"conditions", conditions_to_json(cs)}});
  REQUIRE(r.status == 200);
  CHECK(r.body["c_usage"] == 1.0);
  CHECK(r.body["design_distance"] == 0.0);
  CHECK(r.body["g_usage"] == 1.0);
  const auto none = post(s, "/metrics", {{"layout", layout_to_json(l)}});
  CHECK(none.body["g_usage"].is_null());

  std::mt19937_64 rng(4);
  json real = json::array(), gen = json::array();
  for (int i = 0; i < 6; ++i) {
    real.push_back(layout_to_json(random_layout(toy_schema(), rng)));
    gen.push_back(layout_to_json(random_layout(toy_schema(), rng)));
  }
  const auto f = post(s, "/metrics", {{"real", real}, {"generated", gen}});
  REQUIRE(f.status == 200);
  CHECK(f.body["fid"].get<double>() >= 0.0);
  CHECK(post(s, "/metrics", {{"real", real}, {"generated", real}}).body["fid"].get<double>() <= 1e-6);
  CHECK(post(s, "/metrics", {{"real", real}}).body["detail"] == "/generated");
}

TEST_CASE("sessions record a bounded history") {
  const auto log = std::filesystem::temp_directory_path() / "colay_session_test.jsonl";
  std::filesystem::remove(log);
  auto cfg = service_config();
  cfg.history_limit = 3;
  cfg.session_log = log.string();
  Service s(cfg, shared_tiny_model());
  CHECK(post(s, "/session/s9/step", json::object()).status == 409);
  CHECK(s.handle("GET", "/session/s9", "").body["error"] == "unknown_session");

  const auto id = post(s, "/session", json::object()).body["session"].get<std::string>();
  CHECK(post(s, "/session", json::object()).body["session"] != id);
  for (int i = 0; i < 5; ++i) {
    const auto r = post(s, "/session/" + id + "/step", {{"guidance", {{"steps", 2}, {"seed", i}}}});
    REQUIRE(r.status == 200);
    CHECK(r.body["step"] == i);
    CHECK(r.body["history_length"] == std::min(i + 1, 3));
  }
  const auto h = s.handle("GET", "/session/" + id, "").body["history"];
  REQUIRE(h.size() == 3);
  CHECK(h[0]["step"] == 2);
  CHECK(h[2]["step"] == 4);
  // Replaying a recorded step reproduces its layout.
  const auto replay = post(s, "/generate", {{"guidance", {{"steps", 2}, {"seed", 4}}}});
  CHECK(replay.body["layouts"][0] == h[2]["layout"]);

  std::ifstream in(log);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 5);
}

TEST_CASE("default history limit is 50") {
  Service s(service_config(), shared_tiny_model());
  const auto id = post(s, "/session", json::object()).body["session"].get<std::string>();
  for (int i = 0; i < 52; ++i) post(s, "/session/" + id + "/step", {{"guidance", {{"steps", 1}, {"seed", i}}}});
  const auto h = s.handle("GET", "/session/" + id, "").body["history"];
  CHECK(h.size() == 50);
  CHECK(h[0]["step"] == 2);
}

TEST_CASE("handlers are reachable over HTTP") {
  Service s(service_config(), shared_tiny_model());
  httplib::Server server;
  s.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  const auto schema = client.Get("/schema");
  REQUIRE(schema);
  CHECK(schema->status == 200);
  CHECK(json::parse(schema->body)["model_loaded"] == true);
  const std::string body = json{{"guidance", {{"steps", 2}, {"seed", 3}}}, {"count", 2}}.dump();
  const auto a = client.Post("/generate", body, "application/json");
  const auto b = client.Post("/generate", body, "application/json");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  CHECK(a->body == b->body);
  const auto bad = client.Post("/generate", "{\"count\": -1}", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  const auto session = client.Post("/session", "", "application/json");
  REQUIRE(session);
  const auto id = json::parse(session->body)["session"].get<std::string>();
  const auto step = client.Post(("/session/" + id + "/step").c_str(), body, "application/json");
  REQUIRE(step);
  CHECK(step->status == 200);
  const auto hist = client.Get(("/session/" + id).c_str());
  REQUIRE(hist);
  CHECK(json::parse(hist->body)["history"].size() == 1);
  const auto missing = client.Get("/missing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  server.stop();
  th.join();
}
