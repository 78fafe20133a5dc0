#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "colay/layout.hpp"

namespace colay {

enum class Axis : std::uint8_t { X = 0, Y = 1 };

struct Guideline {
  Axis axis = Axis::X;
  int position = 0;

  auto operator<=>(const Guideline&) const = default;
};

struct WeightedGuideline {
  Guideline guideline;
  double weight = 0.0;  // total length (px) of box edges lying on the line
};

// Sentences of lower-case word tokens.
struct Prompt {
  std::vector<std::vector<std::string>> sentences;

  bool empty() const noexcept { return sentences.empty(); }
  std::size_t token_count() const;
  std::vector<std::string> tokens() const;
  std::string text() const;
  bool operator==(const Prompt&) const = default;
};

enum class ConditionKind : std::uint8_t { Prompt = 0, ClassCount = 1, GivenDesign = 2, Guidelines = 3 };
inline constexpr std::size_t kConditionKinds = 4;
constexpr std::string_view condition_letter(ConditionKind k) {
  switch (k) {
    case ConditionKind::Prompt: return "P";
    case ConditionKind::ClassCount: return "C";
    case ConditionKind::GivenDesign: return "E";
    case ConditionKind::Guidelines: return "G";
  }
  return "?";
}
constexpr std::string_view condition_name(ConditionKind k) {
  switch (k) {
    case ConditionKind::Prompt: return "prompt";
    case ConditionKind::ClassCount: return "class_count";
    case ConditionKind::GivenDesign: return "given_design";
    case ConditionKind::Guidelines: return "guidelines";
  }
  return "?";
}

// Any subset of the four conditions; all absent means unconditional.
struct ConditionSet {
  std::optional<Prompt> prompt;
  std::optional<std::vector<int>> class_count;
  std::optional<Layout> given_design;
  std::optional<std::vector<Guideline>> guidelines;

  bool has(ConditionKind k) const;
  void drop(ConditionKind k);
  bool empty() const;
};

struct DropoutPolicy {
  double p_cfg = 0.1;   // drop all conditions together
  double p_cond = 0.5;  // then drop each remaining one independently
};

// Guideline keep rule. MeanNormalized is p_base^(mean_h / h); SumNormalized
// keeps a line with probability h / sum(h) (the older weighting, kept for
// ablations).
enum class GuidelineSampling : std::uint8_t { MeanNormalized, SumNormalized };

using Rng = std::mt19937_64;

// X lines (ascending) then Y lines (ascending), one per distinct box edge.
std::vector<WeightedGuideline> extract_guidelines(const Layout& layout);
std::vector<Guideline> guideline_set(const std::vector<WeightedGuideline>& weighted);

double guideline_keep_probability(double weight, double mean_weight, double p_base);

std::vector<Guideline> sample_guidelines(const std::vector<WeightedGuideline>& gs, double p_base, Rng& rng,
                                         GuidelineSampling mode = GuidelineSampling::MeanNormalized);
std::vector<Guideline> sample_guidelines(const std::vector<WeightedGuideline>& gs, double p_base,
                                         std::uint64_t seed);

// Keeps round(keep_fraction * n) uniformly chosen valid elements in their
// original order and pads the rest.
Layout subset_given_design(const Layout& layout, double keep_fraction, Rng& rng);
Layout subset_given_design(const Layout& layout, double keep_fraction, std::uint64_t seed);

// Each nonzero class survives with `keep_probability`; the others become 0.
std::vector<int> subset_class_count(const std::vector<int>& counts, Rng& rng, double keep_probability = 0.5);
std::vector<int> subset_class_count(const std::vector<int>& counts, std::uint64_t seed);

// Non-empty ordered subset of the sentences.
Prompt subset_prompt(const Prompt& p, Rng& rng, double keep_probability = 0.5);
Prompt subset_prompt(const Prompt& p, std::uint64_t seed);

ConditionSet apply_dropout(const ConditionSet& cs, const DropoutPolicy& policy, Rng& rng);
ConditionSet apply_dropout(const ConditionSet& cs, const DropoutPolicy& policy, std::uint64_t seed);

// Full (unsampled) conditions of a layout: every guideline, full counts, the
// layout itself as given design, and the supplied prompt.
ConditionSet extract_conditions(const Layout& layout, std::optional<Prompt> prompt = std::nullopt);

// Throws ValidationError with a field path if any present member is
// inconsistent with `schema`.
void validate_conditions(const ConditionSet& cs, const AttributeSchema& schema);

}  // namespace colay
