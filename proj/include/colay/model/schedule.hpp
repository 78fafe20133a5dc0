#pragma once

#include <vector>

#include <torch/torch.h>

#include "colay/json_io.hpp"

namespace colay::model {

// Discrete forward-noising process. Step k of a respaced schedule runs the
// network at original timestep timesteps()[k].
class NoiseSchedule {
 public:
  // Linear betas from beta_start to beta_end.
  static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);
  // Linear schedule whose endpoints are scaled by 1000 / steps, so short
  // schedules still end near pure noise.
  static NoiseSchedule scaled_linear(int steps);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int size() const noexcept { return static_cast<int>(betas_.size()); }
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }
  const std::vector<int>& timesteps() const noexcept { return timesteps_; }
  double alpha_bar(int t) const { return alpha_bars_.at(static_cast<std::size_t>(t)); }
  // Variance of the posterior q(z_{t-1} | z_t, z_0).
  double posterior_variance(int t) const;

  // sqrt(abar_t) z0 + sqrt(1 - abar_t) noise, t: [B] int64.
  torch::Tensor q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& noise) const;

  // `steps` evenly spaced timesteps of this schedule with betas recomputed
  // from the retained cumulative products.
  NoiseSchedule respaced(int steps) const;

  json to_json() const;
  static NoiseSchedule from_json(const json& j);

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
  std::vector<int> timesteps_;
};

}  // namespace colay::model
