#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "colay/model/condition_encoders.hpp"
#include "colay/model/denoiser.hpp"
#include "colay/model/schedule.hpp"
#include "colay/model/vae.hpp"

namespace colay::model {

// Both training stages assembled for sampling: the frozen VAE, condition
// encoders, denoiser and noise schedule. Diffusion runs on latents divided
// by `latent_scale` (the latent standard deviation of the training corpus).
class LatentDiffusion {
 public:
  LatentDiffusion(Vae vae, ConditionEncoders encoders, Denoiser denoiser, NoiseSchedule schedule, double latent_scale);

  const AttributeSchema& schema() const { return vae_->schema(); }
  const SchemaPtr& schema_ptr() const { return vae_->schema_ptr(); }
  Vae& vae() noexcept { return vae_; }
  ConditionEncoders& encoders() noexcept { return encoders_; }
  Denoiser& denoiser() noexcept { return denoiser_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  double latent_scale() const noexcept { return latent_scale_; }
  bool gen_all() const { return denoiser_->config().gen_all; }

  NoisePredictor& predictor() noexcept { return *predictor_; }
  // Swaps in another predictor (stubs in tests); nullptr restores the network.
  void set_predictor(std::shared_ptr<NoisePredictor> predictor);

  EncodedConditions encode(std::span<const ConditionSet> conditions);
  // Diffusion-space latents of layouts (posterior mean / latent_scale).
  torch::Tensor latents(std::span<const Layout> layouts);
  // Latents [B, N, d] -> canonical sorted layouts. Models trained without
  // Gen-All need the element count of each item.
  std::vector<Layout> decode(const torch::Tensor& z, std::span<const int> element_counts = {});

  void eval();
  void train();

 private:
  Vae vae_;
  ConditionEncoders encoders_;
  Denoiser denoiser_;
  NoiseSchedule schedule_;
  double latent_scale_;
  std::shared_ptr<NoisePredictor> network_;
  std::shared_ptr<NoisePredictor> predictor_;
};

}  // namespace colay::model
