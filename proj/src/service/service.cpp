#include "colay/service.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"

#include "colay/error.hpp"
#include "colay/metrics.hpp"
#include "colay/model/sampler.hpp"
#include "colay/render.hpp"

namespace colay {

namespace {

HttpResponse error(int status, const std::string& code, const std::string& detail, const std::string& message = {}) {
  json body = {{"error", code}, {"detail", detail}};
  if (!message.empty()) body["message"] = message;
  return {status, body};
}

HttpResponse validation(const ValidationError& e) {
  return error(400, "validation_error", e.path().empty() ? std::string(e.what()) : e.path(), e.what());
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError("expected an object", path.empty() ? "/" : path);
  return j;
}

std::string hex_color(const std::array<std::uint8_t, 3>& c) {
  static const char* digits = "0123456789abcdef";
  std::string s = "#";
  for (auto v : c) {
    s += digits[v >> 4];
    s += digits[v & 15];
  }
  return s;
}

std::optional<ConditionKind> kind_from_name(const std::string& name) {
  for (std::size_t k = 0; k < kConditionKinds; ++k) {
    const auto kind = static_cast<ConditionKind>(k);
    if (name == condition_name(kind) || name == condition_letter(kind)) return kind;
  }
  return std::nullopt;
}

template <typename T>
T field(const json& j, const std::string& key, T fallback, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("wrong type", path + "/" + key);
  }
}

}  // namespace

Service::Service(ServiceConfig config, std::shared_ptr<model::LatentDiffusion> model)
    : config_(std::move(config)), model_(std::move(model)) {
  if (model_) {
    if (!config_.schema) config_.schema = model_->schema_ptr();
    if (!(model_->schema() == *config_.schema))
      throw ValidationError("model and service schemas differ", "/schema");
    model_->eval();
  }
  if (!config_.schema) throw ValidationError("service needs a schema", "/schema");
  load_preset(config_.default_preset);
}

json Service::layout_payload(const Layout& layout) const {
  const auto png = encode_png(render(layout, config_.schema->canvas_width(), config_.schema->canvas_height()));
  return {{"layout", layout_to_json(layout)},
          {"raster", httplib::detail::base64_encode(std::string(png.begin(), png.end()))}};
}

HttpResponse Service::schema() const {
  const auto& s = *config_.schema;
  json legend = json::array();
  for (int k = 0; k < s.num_classes(); ++k) legend.push_back({{"class", k}, {"name", s.class_name(k)}, {"color", hex_color(class_color(k))}});
  json conditions = json::array();
  for (std::size_t k = 0; k < kConditionKinds; ++k) conditions.push_back(condition_name(static_cast<ConditionKind>(k)));
  return {200,
          {{"schema", schema_to_json(s)},
           {"legend", legend},
           {"resolution", s.resolution()},
           {"capacity", s.capacity()},
           {"conditions", conditions},
           {"model_loaded", model_ != nullptr},
           {"gen_all", model_ ? model_->gen_all() : true},
           {"default_preset", config_.default_preset}}};
}

Service::Generation Service::run_generation(const json& request, std::size_t count) {
  require_object(request, "");
  const ConditionSet cs = request.contains("conditions") && !request.at("conditions").is_null()
                              ? conditions_from_json(require_object(request.at("conditions"), "/conditions"),
                                                     config_.schema, "/conditions")
                              : ConditionSet{};
  validate_conditions(cs, *config_.schema);
  const json guidance = request.value("guidance", json::object());
  require_object(guidance, "/guidance");
  const auto seed = field<std::uint64_t>(guidance, "seed", 0, "/guidance");
  const int steps = field<int>(guidance, "steps", config_.default_steps, "/guidance");
  const auto preset_name = field<std::string>(guidance, "preset", config_.default_preset, "/guidance");

  std::map<ConditionKind, double> weights;
  if (guidance.contains("weights") && !guidance.at("weights").is_null()) {
    const auto& w = require_object(guidance.at("weights"), "/guidance/weights");
    for (const auto& [name, value] : w.items()) {
      const auto kind = kind_from_name(name);
      if (!kind) throw ValidationError("unknown condition", "/guidance/weights/" + name);
      if (!value.is_number() || value.get<double>() < 0.0)
        throw ValidationError("weight must be a non-negative number", "/guidance/weights/" + name);
      weights[*kind] = value.get<double>();
    }
  } else if (!cs.empty()) {
    try {
      weights = load_preset(preset_name).resolve(presence_of(cs));
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), "/guidance/preset");
    }
  }
  GuidanceConfig gc;
  gc.weights = weights;
  try {
    ordered_conditions(gc, presence_of(cs));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "/guidance/weights");
  }

  std::optional<int> element_count;
  if (request.contains("element_count") && !request.at("element_count").is_null()) {
    const int n = field<int>(request, "element_count", 0, "");
    if (n < 1 || n > config_.schema->capacity()) throw ValidationError("element count out of range", "/element_count");
    element_count = n;
  }
  if (!model_) throw MissingArtifactError("no model is loaded");
  if (steps < 0 || steps > model_->schedule().size()) throw ValidationError("steps out of range", "/guidance/steps");
  if (!model_->gen_all() && !element_count)
    throw ValidationError("this model needs an element count", "/element_count");

  std::vector<model::SampleItem> items;
  json seeds = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    model::SampleItem it{cs, weights, model::derive_seed(seed, i), element_count};
    seeds.push_back(it.seed);
    items.push_back(std::move(it));
  }
  Generation g;
  {
    std::lock_guard lock(model_mutex_);
    g.layouts = model::sample_items(*model_, items, steps);
  }
  json wj = json::object();
  for (const auto& [k, w] : weights) wj[std::string(condition_name(k))] = w;
  g.guidance = {{"weights", wj},
                {"steps", steps > 0 ? steps : model_->schedule().size()},
                {"seed", seed},
                {"sample_seeds", seeds}};
  return g;
}

HttpResponse Service::generate(const json& request) {
  require_object(request, "");
  const auto count = field<std::int64_t>(request, "count", 1, "");
  if (count < 1 || std::size_t(count) > config_.max_count) throw ValidationError("count out of range", "/count");
  auto g = run_generation(request, std::size_t(count));
  json layouts = json::array(), rasters = json::array();
  for (const auto& l : g.layouts) {
    auto p = layout_payload(l);
    layouts.push_back(p["layout"]);
    rasters.push_back(p["raster"]);
  }
  return {200, {{"layouts", layouts}, {"rasters", rasters}, {"guidance", g.guidance}}};
}

HttpResponse Service::extract_conditions(const json& request) const {
  require_object(request, "");
  if (!request.contains("layout")) throw ValidationError("missing layout", "/layout");
  const auto layout = layout_from_json(request.at("layout"), config_.schema, "/layout");
  std::optional<Prompt> prompt;
  if (request.contains("prompt") && !request.at("prompt").is_null())
    prompt = prompt_from_json(request.at("prompt"), "/prompt");
  const auto cs = colay::extract_conditions(layout, prompt);
  json weighted = json::array();
  for (const auto& w : extract_guidelines(layout))
    weighted.push_back({{"axis", w.guideline.axis == Axis::X ? "x" : "y"}, {"pos", w.guideline.position}, {"weight", w.weight}});
  return {200, {{"conditions", conditions_to_json(cs)}, {"weighted_guidelines", weighted}}};
}

HttpResponse Service::metrics(const json& request) const {
  require_object(request, "");
  json out = json::object();
  if (request.contains("layout")) {
    const auto layout = layout_from_json(request.at("layout"), config_.schema, "/layout");
    const ConditionSet cs = request.contains("conditions") && !request.at("conditions").is_null()
                                ? conditions_from_json(request.at("conditions"), config_.schema, "/conditions")
                                : ConditionSet{};
    const auto s = score_conditions(cs, layout);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    out["c_usage"] = opt(s.c_usage);
    out["design_distance"] = opt(s.design_distance);
    out["g_usage"] = opt(s.g_usage);
  }
  if (request.contains("real") || request.contains("generated")) {
    auto read = [&](const std::string& key) {
      std::vector<FeatureVector> f;
      static const RandomConvFeatureExtractor fx;
      if (!request.contains(key) || !request.at(key).is_array() || request.at(key).empty())
        throw ValidationError("expected a non-empty layout list", "/" + key);
      std::size_t i = 0;
      for (const auto& l : request.at(key))
        f.push_back(layout_features(layout_from_json(l, config_.schema, "/" + key + "/" + std::to_string(i++)), fx));
      return f;
    };
    const auto r = fid(read("real"), read("generated"));
    out["fid"] = r.value;
    out["fid_regularized"] = r.regularized;
  }
  if (out.empty()) throw ValidationError("nothing to score: send a layout or real/generated sets", "/");
  return {200, out};
}

HttpResponse Service::create_session() {
  std::lock_guard lock(sessions_mutex_);
  const std::string id = "s" + std::to_string(next_session_++);
  sessions_[id] = std::make_shared<Session>();
  return {200, {{"session", id}, {"history", json::array()}}};
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

HttpResponse Service::session_step(const std::string& id, const json& request) {
  const auto session = find_session(id);
  if (!session) return error(409, "unknown_session", id);
  require_object(request, "");
  std::lock_guard lock(session->mutex);
  auto g = run_generation(request, 1);
  const auto payload = layout_payload(g.layouts.front());
  const std::size_t step = session->steps++;
  json entry = {{"step", step},
                {"conditions", request.value("conditions", json(nullptr))},
                {"guidance", g.guidance},
                {"layout", payload["layout"]}};
  session->history.push_back(entry);
  while (session->history.size() > config_.history_limit) session->history.pop_front();
  if (!config_.session_log.empty()) {
    std::lock_guard log_lock(log_mutex_);
    std::ofstream(config_.session_log, std::ios::app) << json{{"session", id}, {"entry", entry}}.dump() << '\n';
  }
  return {200,
          {{"session", id},
           {"step", step},
           {"layout", payload["layout"]},
           {"raster", payload["raster"]},
           {"guidance", g.guidance},
           {"history_length", session->history.size()}}};
}

HttpResponse Service::session_history(const std::string& id) const {
  const auto session = find_session(id);
  if (!session) return error(409, "unknown_session", id);
  std::lock_guard lock(session->mutex);
  return {200, {{"session", id}, {"history", json(session->history)}}};
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    auto parse = [&]() {
      try {
        return body.empty() ? json::object() : json::parse(body);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what(), "/");
      }
    };
    if (method == "GET" && path == "/schema") return schema();
    if (method == "POST" && path == "/generate") return generate(parse());
    if (method == "POST" && path == "/extract-conditions") return extract_conditions(parse());
    if (method == "POST" && path == "/metrics") return metrics(parse());
    if (method == "POST" && path == "/session") return create_session();
    const std::string prefix = "/session/";
    if (path.rfind(prefix, 0) == 0) {
      const auto rest = path.substr(prefix.size());
      const auto slash = rest.find('/');
      const auto id = rest.substr(0, slash);
      if (method == "POST" && slash != std::string::npos && rest.substr(slash) == "/step") return session_step(id, parse());
      if (method == "GET" && slash == std::string::npos) return session_history(id);
    }
    return error(404, "not_found", path);
  } catch (const ValidationError& e) {
    return validation(e);
  } catch (const MissingArtifactError& e) {
    return error(503, "model_unavailable", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal_error", e.what());
  }
}

void Service::bind(httplib::Server& server) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/schema", route);
  server.Post("/generate", route);
  server.Post("/extract-conditions", route);
  server.Post("/metrics", route);
  server.Post("/session", route);
  server.Post(R"(/session/[^/]+/step)", route);
  server.Get(R"(/session/[^/]+)", route);
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404)
      res.set_content(json{{"error", "not_found"}, {"detail", req.path}}.dump(), "application/json");
  });
}

}  // namespace colay
