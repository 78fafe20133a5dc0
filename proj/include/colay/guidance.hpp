#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "colay/conditions.hpp"
#include "colay/json_io.hpp"

namespace colay {

using PresenceMask = std::array<bool, kConditionKinds>;

PresenceMask presence_of(const ConditionSet& cs);

// "G+E+C+P" style key listing present conditions in G, E, C, P order.
std::string combination_key(const PresenceMask& present);
PresenceMask parse_combination_key(const std::string& key);

// Per-condition guidance weights plus sampler settings.
struct GuidanceConfig {
  std::map<ConditionKind, double> weights;
  int steps = 0;  // 0: every training timestep
  std::uint64_t seed = 0;
};

// A condition present with weight w, ordered for multi-weight guidance.
struct WeightedCondition {
  ConditionKind kind;
  double weight;
};

// Present conditions sorted by ascending weight; ties follow prompt,
// class_count, given_design, guidelines. Throws ValidationError if a weight
// refers to an absent condition or a present one has none.
std::vector<WeightedCondition> ordered_conditions(const GuidanceConfig& gc, const PresenceMask& present);

// Combination key -> weights listed in key order.
class GuidancePreset {
 public:
  GuidancePreset() = default;
  // Every present condition gets `weight`.
  static GuidancePreset uniform(double weight);
  static GuidancePreset from_json(const json& j);
  json to_json() const;

  // Exact key match, else the smallest listed superset restricted to the
  // present conditions. Throws ValidationError if neither exists.
  std::map<ConditionKind, double> resolve(const PresenceMask& present) const;

  const std::map<std::string, std::vector<double>>& rows() const noexcept { return rows_; }

 private:
  std::optional<double> uniform_;
  std::map<std::string, std::vector<double>> rows_;
};

// Named presets: "single:<w>", "clay", "c4", "clay-all", "c4-all", or a path
// to a preset JSON file.
GuidancePreset load_preset(const std::string& name_or_path);

}  // namespace colay
