#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "colay/conditions.hpp"
#include "colay/datasets.hpp"
#include "colay/model/condition_encoders.hpp"
#include "colay/model/denoiser.hpp"
#include "colay/model/latent_diffusion.hpp"
#include "colay/model/vae.hpp"

namespace colay::model {

struct OptimConfig {
  int steps = 10000;
  int batch = 64;
  double lr = 5e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.98;
  int warmup = 200;
  double min_lr_fraction = 0.1;  // cosine decay floor
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  torch::optim::AdamWOptions adamw() const;
  json to_json() const;
  static OptimConfig from_json(const json& j);
};

// Where training writes. Empty paths disable the corresponding output.
struct TrainIo {
  std::string checkpoint;  // optimizer state goes to checkpoint + ".optim"
  std::string log;         // JSONL, one record per log interval
  bool resume = false;
  int checkpoint_every = 1000;
  int log_every = 50;
  std::function<void(const json&)> on_log;
};

double learning_rate(const OptimConfig& cfg, int step);

struct VaeTrainConfig {
  VaeConfig model = VaeConfig::desk();
  OptimConfig optim;
  double subset_probability = 0.5;  // chance a sample is a random element subset

  json to_json() const;
  // Missing keys keep their defaults.
  static VaeTrainConfig from_json(const json& j);
};

struct VaeTrainResult {
  Vae vae{nullptr};
  int steps = 0;
  double final_loss = 0.0;
};

VaeTrainResult train_vae(const std::vector<Layout>& layouts, const SchemaPtr& schema, const VaeTrainConfig& cfg,
                         const TrainIo& io = {});

struct DiffusionTrainConfig {
  ConditionEncoderConfig encoders = ConditionEncoderConfig::desk();
  DenoiserConfig denoiser = DenoiserConfig::desk();
  OptimConfig optim;
  int diffusion_steps = 100;
  DropoutPolicy dropout;
  double p_base = 0.5;
  GuidelineSampling guideline_sampling = GuidelineSampling::MeanNormalized;
  bool sort = true;  // train on canonically sorted layouts

  json to_json() const;
  static DiffusionTrainConfig from_json(const json& j);
};

// One training example's conditions: full conditions from the layout, each
// reduced to a random subset, then hierarchical dropout. Subsets that come
// out empty count as absent.
ConditionSet training_conditions(const CorpusItem& item, const DiffusionTrainConfig& cfg, Rng& rng);

struct DiffusionTrainResult {
  std::unique_ptr<LatentDiffusion> model;
  int steps = 0;
  double final_loss = 0.0;
};

// Trains condition encoders and denoiser on top of a frozen VAE.
DiffusionTrainResult train_diffusion(const Corpus& corpus, Vae vae, const DiffusionTrainConfig& cfg,
                                     const TrainIo& io = {});

}  // namespace colay::model
