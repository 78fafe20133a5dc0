#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "colay/guidance.hpp"
#include "colay/json_io.hpp"
#include "colay/model/latent_diffusion.hpp"

namespace httplib {
class Server;
}

namespace colay {

struct ServiceConfig {
  SchemaPtr schema;
  std::string default_preset = "single:2.5";
  int default_steps = 0;           // 0: every training timestep
  std::size_t max_count = 64;      // samples per /generate request
  std::size_t history_limit = 50;  // entries kept per session
  std::string session_log;         // optional JSONL of session steps
};

struct HttpResponse {
  int status = 200;
  json body;
};

// Generation and condition-extraction API. Handlers are transport
// independent; bind() wires them into an HTTP server.
class Service {
 public:
  // `model` may be null: generation endpoints then answer 503.
  Service(ServiceConfig config, std::shared_ptr<model::LatentDiffusion> model);

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);
  void bind(httplib::Server& server);

  HttpResponse schema() const;
  HttpResponse generate(const json& request);
  HttpResponse extract_conditions(const json& request) const;
  HttpResponse metrics(const json& request) const;
  HttpResponse create_session();
  HttpResponse session_step(const std::string& id, const json& request);
  HttpResponse session_history(const std::string& id) const;

 private:
  struct Generation {
    std::vector<Layout> layouts;
    json guidance;
  };
  struct Session {
    std::deque<json> history;
    std::size_t steps = 0;
    std::mutex mutex;
  };

  Generation run_generation(const json& request, std::size_t count);
  std::shared_ptr<Session> find_session(const std::string& id) const;
  json layout_payload(const Layout& layout) const;

  ServiceConfig config_;
  std::shared_ptr<model::LatentDiffusion> model_;
  std::mutex model_mutex_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
  std::mutex log_mutex_;
};

}  // namespace colay
