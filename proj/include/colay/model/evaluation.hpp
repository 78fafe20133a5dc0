#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "colay/datasets.hpp"
#include "colay/guidance.hpp"
#include "colay/metrics.hpp"
#include "colay/model/latent_diffusion.hpp"

namespace colay::model {

inline constexpr int kEvalReportVersion = 1;

// "unconditional", "all" or a combination key such as "G" or "G+E+C+P".
PresenceMask parse_eval_mode(const std::string& mode);
std::string eval_mode_name(const PresenceMask& mode);

struct EvalOptions {
  PresenceMask mode{};
  std::size_t samples = 256;
  int steps = 0;  // 0: every training timestep
  std::uint64_t seed = 0;
  double p_base = 0.5;            // guideline sampling from held-out layouts
  double given_fraction = 0.5;    // share of held-out elements kept as given design
  std::size_t k = 100;            // retrieval depth, capped at the corpus size
  std::string preset = "single:2.5";
};

// Conditions drawn from held-out items for the requested mode. Items that
// cannot supply a present condition (no elements, no prompt) are skipped.
struct EvalConditions {
  std::vector<ConditionSet> conditions;
  std::vector<std::size_t> source;  // corpus index of every condition set
};
EvalConditions eval_conditions(const Corpus& corpus, const EvalOptions& opt);

// Samples and scores the model; the JSON report lists every metric and sets
// the ones whose condition is absent to null.
json evaluate(LatentDiffusion& model, const Corpus& eval_corpus, const EvalOptions& opt,
              const FeatureExtractor& fx, const SentenceEncoder& se);

// Mean of the available per-sample scores; empty if none apply.
struct MeanScores {
  std::optional<double> c_usage, design_distance, g_usage;
};
MeanScores mean_scores(std::span<const ConditionSet> conditions, std::span<const Layout> generated);

}  // namespace colay::model
