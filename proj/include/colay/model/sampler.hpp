#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "colay/guidance.hpp"
#include "colay/model/latent_diffusion.hpp"

namespace colay::model {

// Presence variants for ordered conditions C_1..C_L: variant i keeps
// C_{i+1}..C_L, so variant 0 has all of them and variant L none.
std::vector<PresenceMask> guidance_variants(std::span<const WeightedCondition> ordered);

// eps_hat = (1 + w_1) eps(C_1..C_L) - w_1 eps(none)
//         + sum_{i>=2} (w_i - w_{i-1}) (eps(C_i..C_L) - eps(none)),
// from exactly L + 1 evaluations in one batched call.
torch::Tensor guided_noise(NoisePredictor& predictor, const torch::Tensor& z_t, const EncodedConditions& enc,
                           const torch::Tensor& t, std::span<const WeightedCondition> ordered);

struct SampleItem {
  ConditionSet conditions;
  std::map<ConditionKind, double> weights;
  std::uint64_t seed = 0;
  std::optional<int> element_count;  // only for models trained without Gen-All
};

// Ancestral sampling with `steps` respaced steps (0: every step). Items
// sharing a guidance pattern run as one batch; each item draws its noise
// from its own seed, so results do not depend on batching.
std::vector<Layout> sample_items(LatentDiffusion& model, std::span<const SampleItem> items, int steps = 0);
torch::Tensor sample_latents(LatentDiffusion& model, std::span<const SampleItem> items, int steps = 0);

Layout sample(LatentDiffusion& model, const ConditionSet& cs, const GuidanceConfig& gc);

// `conditions` holds one set for all items or one per item. Item i uses the
// weights the preset resolves for its conditions and seed
// derive_seed(root_seed, i).
std::vector<Layout> sample_batch(LatentDiffusion& model, std::span<const ConditionSet> conditions,
                                 const GuidancePreset& preset, int steps, std::uint64_t root_seed, std::size_t count);

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

}  // namespace colay::model
