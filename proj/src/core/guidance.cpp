#include "colay/guidance.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "colay/error.hpp"

namespace colay {
namespace {

// Key order used in combination keys and preset weight vectors.
constexpr std::array<ConditionKind, 4> kKeyOrder = {ConditionKind::Guidelines, ConditionKind::GivenDesign,
                                                    ConditionKind::ClassCount, ConditionKind::Prompt};

std::vector<ConditionKind> kinds_of(const PresenceMask& present) {
  std::vector<ConditionKind> out;
  for (auto k : kKeyOrder)
    if (present[static_cast<std::size_t>(k)]) out.push_back(k);
  return out;
}

// Optimal per-combination weights found by grid search on CLAY (G, E, C, P).
const std::map<std::string, std::vector<double>>& clay_rows() {
  static const std::map<std::string, std::vector<double>> rows = {
      {"G+E+C+P", {1.8, 1.3, 1.9, 2.3}}, {"G+E+P", {1.9, 2.0, 2.4}}, {"E+C+P", {2.2, 1.9, 2.4}},
      {"G+E+C", {2.4, 2.2, 2.2}},        {"E+C", {2.1, 2.7}},        {"G+E", {2.6, 2.3}},
      {"E+P", {2.5, 3.3}},               {"G+C+P", {2.2, 3.7, 2.3}}, {"G+C", {2.3, 3.7}},
      {"C+P", {3.6, 3.6}},               {"G+P", {2.1, 3.8}},        {"E", {2.6}},
      {"G", {3.3}},                      {"C", {3.8}},               {"P", {3.4}},
  };
  return rows;
}

const std::map<std::string, std::vector<double>>& c4_rows() {
  static const std::map<std::string, std::vector<double>> rows = {
      {"G+E+C+P", {2.1, 2.0, 1.9, 2.4}}, {"G+E+C", {2.2, 2.2, 2.4}}, {"G+E+P", {2.1, 2.0, 2.1}},
      {"G+E", {2.2, 1.8}},               {"G+C", {2.2, 3.3}},        {"G+P", {2.2, 3.7}},
      {"E+C", {2.1, 3.4}},               {"E+C+P", {1.8, 2.6, 2.5}}, {"G", {2.8}},
      {"E+P", {2.1, 3.5}},               {"G+C+P", {2.3, 3.3, 2.6}}, {"E", {2.9}},
      {"P", {2.6}},                      {"C+P", {3.1, 3.3}},        {"C", {3.6}},
  };
  return rows;
}

}  // namespace

PresenceMask presence_of(const ConditionSet& cs) {
  PresenceMask m{};
  for (std::size_t k = 0; k < kConditionKinds; ++k) m[k] = cs.has(static_cast<ConditionKind>(k));
  return m;
}

std::string combination_key(const PresenceMask& present) {
  std::string key;
  for (auto k : kinds_of(present)) {
    if (!key.empty()) key += '+';
    key += condition_letter(k);
  }
  return key.empty() ? "none" : key;
}

PresenceMask parse_combination_key(const std::string& key) {
  PresenceMask m{};
  if (key == "none") return m;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '+')) {
    bool matched = false;
    for (auto k : kKeyOrder) {
      if (part == condition_letter(k)) {
        if (m[static_cast<std::size_t>(k)]) throw ValidationError("repeated condition in key '" + key + "'");
        m[static_cast<std::size_t>(k)] = true;
        matched = true;
      }
    }
    if (!matched) throw ValidationError("invalid combination key '" + key + "'");
  }
  if (combination_key(m) != key) throw ValidationError("combination key must list conditions in G+E+C+P order: '" + key + "'");
  return m;
}

std::vector<WeightedCondition> ordered_conditions(const GuidanceConfig& gc, const PresenceMask& present) {
  std::vector<WeightedCondition> out;
  for (const auto& [kind, w] : gc.weights) {
    if (!present[static_cast<std::size_t>(kind)])
      throw ValidationError("guidance weight given for absent condition " + std::string(condition_name(kind)),
                            "/guidance/weights/" + std::string(condition_name(kind)));
    if (!(w >= 0.0))
      throw ValidationError("guidance weights must be non-negative",
                            "/guidance/weights/" + std::string(condition_name(kind)));
  }
  // Tie order is the enum order: prompt, class_count, given_design, guidelines.
  for (std::size_t k = 0; k < kConditionKinds; ++k) {
    if (!present[k]) continue;
    const auto kind = static_cast<ConditionKind>(k);
    auto it = gc.weights.find(kind);
    if (it == gc.weights.end())
      throw ValidationError("missing guidance weight for " + std::string(condition_name(kind)),
                            "/guidance/weights/" + std::string(condition_name(kind)));
    out.push_back({kind, it->second});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const WeightedCondition& a, const WeightedCondition& b) { return a.weight < b.weight; });
  return out;
}

GuidancePreset GuidancePreset::uniform(double weight) {
  if (!(weight >= 0.0)) throw ValidationError("guidance weight must be non-negative", "/preset");
  GuidancePreset p;
  p.uniform_ = weight;
  return p;
}

GuidancePreset GuidancePreset::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("preset must be an object", "/preset");
  GuidancePreset p;
  for (const auto& [key, value] : j.items()) {
    if (key == "*") {
      if (!value.is_number()) throw ValidationError("uniform weight must be a number", "/preset/*");
      p.uniform_ = value.get<double>();
      continue;
    }
    const auto mask = parse_combination_key(key);
    if (!value.is_array()) throw ValidationError("weights must be an array", "/preset/" + key);
    auto weights = value.get<std::vector<double>>();
    if (weights.size() != kinds_of(mask).size())
      throw ValidationError("weight vector length does not match key", "/preset/" + key);
    for (double w : weights)
      if (!(w >= 0.0)) throw ValidationError("guidance weights must be non-negative", "/preset/" + key);
    p.rows_[key] = std::move(weights);
  }
  return p;
}

json GuidancePreset::to_json() const {
  json out = json::object();
  if (uniform_) out["*"] = *uniform_;
  for (const auto& [key, w] : rows_) out[key] = w;
  return out;
}

std::map<ConditionKind, double> GuidancePreset::resolve(const PresenceMask& present) const {
  std::map<ConditionKind, double> out;
  const auto kinds = kinds_of(present);
  if (kinds.empty()) return out;
  const std::string key = combination_key(present);
  auto assign = [&](const std::string& row_key, const std::vector<double>& w) {
    const auto row_kinds = kinds_of(parse_combination_key(row_key));
    for (std::size_t i = 0; i < row_kinds.size(); ++i)
      if (present[static_cast<std::size_t>(row_kinds[i])]) out[row_kinds[i]] = w[i];
  };
  if (auto it = rows_.find(key); it != rows_.end()) {
    assign(it->first, it->second);
    return out;
  }
  const std::string* best = nullptr;
  std::size_t best_size = 0;
  for (const auto& [row_key, w] : rows_) {
    const auto mask = parse_combination_key(row_key);
    bool superset = true;
    for (auto k : kinds) superset = superset && mask[static_cast<std::size_t>(k)];
    const auto size = kinds_of(mask).size();
    if (superset && (!best || size < best_size)) {
      best = &row_key;
      best_size = size;
    }
  }
  if (best) {
    assign(*best, rows_.at(*best));
    return out;
  }
  if (uniform_) {
    for (auto k : kinds) out[k] = *uniform_;
    return out;
  }
  throw ValidationError("preset has no weights for combination '" + key + "'", "/preset");
}

GuidancePreset load_preset(const std::string& name_or_path) {
  const std::string single = "single:";
  if (name_or_path.rfind(single, 0) == 0) {
    try {
      std::size_t used = 0;
      const auto text = name_or_path.substr(single.size());
      const double w = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing characters");
      return GuidancePreset::uniform(w);
    } catch (const std::logic_error&) {
      throw ValidationError("invalid preset '" + name_or_path + "'", "/preset");
    }
  }
  if (name_or_path == "single") return GuidancePreset::uniform(2.5);
  auto from_rows = [](const std::map<std::string, std::vector<double>>& rows, bool all_only) {
    json j = json::object();
    for (const auto& [k, w] : rows)
      if (!all_only || k == "G+E+C+P") j[k] = w;
    return GuidancePreset::from_json(j);
  };
  if (name_or_path == "clay") return from_rows(clay_rows(), false);
  if (name_or_path == "c4") return from_rows(c4_rows(), false);
  if (name_or_path == "clay-all") return from_rows(clay_rows(), true);
  if (name_or_path == "c4-all") return from_rows(c4_rows(), true);
  std::ifstream f(name_or_path);
  if (!f) throw ValidationError("invalid preset '" + name_or_path + "'", "/preset");
  try {
    json j;
    f >> j;
    return GuidancePreset::from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("preset file is not JSON: ") + e.what(), "/preset");
  }
}

}  // namespace colay
