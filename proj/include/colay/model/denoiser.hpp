#pragma once

#include <atomic>
#include <cstdint>
#include <span>

#include <torch/torch.h>

#include "colay/guidance.hpp"
#include "colay/json_io.hpp"
#include "colay/model/condition_encoders.hpp"
#include "colay/model/nn.hpp"
#include "colay/model/schedule.hpp"

namespace colay::model {

// Where the given-design tokens enter the network.
enum class GivenRoute : std::uint8_t { Concatenate, Context };

struct DenoiserConfig {
  int latent_dim = 8;
  int width = 512;
  int heads = 8;
  int mlp = 2048;
  int layers = 4;
  bool positional_encoding = false;
  GivenRoute given_route = GivenRoute::Concatenate;
  // Generate all N slots, valid and invalid. When false the network is told
  // the element count and trained on valid rows only.
  bool gen_all = true;
  int capacity = 0;  // N, needed for the element-count table

  static DenoiserConfig desk();
  json to_json() const;
  static DenoiserConfig from_json(const json& j);
};

// Noise prediction for z_t [B, N, d] at timesteps t [B]. The given-design
// tokens are concatenated along the element axis; t and the pooled prompt
// modulate every block; prompt, class and guideline tokens join z_t as keys
// and values of each attention layer.
class DenoiserImpl : public torch::nn::Module {
 public:
  explicit DenoiserImpl(DenoiserConfig config);
  torch::Tensor forward(const torch::Tensor& z_t, const EncodedConditions& enc, const torch::Tensor& t);
  const DenoiserConfig& config() const noexcept { return config_; }

 private:
  DenoiserConfig config_;
  torch::nn::Linear in_proj_{nullptr}, out_proj_{nullptr};
  torch::nn::Sequential time_mlp_{nullptr};
  torch::nn::Linear pool_proj_{nullptr};
  torch::nn::Embedding count_emb_{nullptr};
  torch::Tensor segment_, stream_type_;
  nn::Stack blocks_{nullptr};
  torch::nn::LayerNorm out_norm_{nullptr};
  torch::nn::Linear out_mod_{nullptr};
};
TORCH_MODULE(Denoiser);

// Anything that predicts noise under a set of condition-presence variants.
// Presence variants are applied on top of each item's own presence.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  // Rows are variant-major: item b under variant v is row v * B + b.
  torch::Tensor predict(const torch::Tensor& z_t, const EncodedConditions& enc, std::span<const PresenceMask> variants,
                        const torch::Tensor& t);
  // Single evaluation with every present condition.
  torch::Tensor predict(const torch::Tensor& z_t, const EncodedConditions& enc, const torch::Tensor& t);

  // Network evaluations so far, one per variant per call.
  std::size_t evaluations() const noexcept { return evaluations_.load(); }
  void reset_evaluations() noexcept { evaluations_ = 0; }

 protected:
  virtual torch::Tensor run(const torch::Tensor& z_t, const EncodedConditions& enc,
                            std::span<const PresenceMask> variants, const torch::Tensor& t) = 0;

 private:
  std::atomic<std::size_t> evaluations_{0};
};

// Encoders plus denoiser as one predictor.
class NetworkPredictor final : public NoisePredictor {
 public:
  NetworkPredictor(ConditionEncoders encoders, Denoiser denoiser)
      : encoders_(std::move(encoders)), denoiser_(std::move(denoiser)) {}

 protected:
  torch::Tensor run(const torch::Tensor& z_t, const EncodedConditions& enc, std::span<const PresenceMask> variants,
                    const torch::Tensor& t) override;

 private:
  ConditionEncoders encoders_;
  Denoiser denoiser_;
};

// Simplified objective: t ~ U[0, T), eps ~ N(0, I), mean squared error
// between eps and the prediction at q_sample(z0, t, eps). `valid_rows`
// [B, N] restricts the mean to those rows when defined.
torch::Tensor diffusion_loss(NoisePredictor& predictor, const NoiseSchedule& schedule, const torch::Tensor& z0,
                             const EncodedConditions& enc, at::Generator& gen, const torch::Tensor& valid_rows = {});

}  // namespace colay::model
