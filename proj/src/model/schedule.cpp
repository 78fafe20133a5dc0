#include "colay/model/schedule.hpp"

#include <cmath>

#include "colay/error.hpp"

namespace colay::model {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ValidationError("schedule needs at least one step", "/schedule/steps");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    betas[std::size_t(i)] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (steps - 1);
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::scaled_linear(int steps) {
  const double scale = 1000.0 / steps;
  return linear(steps, 1e-4 * scale, std::min(0.02 * scale, 0.999));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  NoiseSchedule s;
  double prod = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0))
      throw ValidationError("betas must lie in (0, 1)", "/schedule/betas/" + std::to_string(i));
    prod *= 1.0 - betas[i];
    s.alpha_bars_.push_back(prod);
    s.timesteps_.push_back(static_cast<int>(i));
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::posterior_variance(int t) const {
  if (t == 0) return 0.0;
  const double ab = alpha_bar(t);
  const double ab_prev = alpha_bar(t - 1);
  return betas_.at(std::size_t(t)) * (1.0 - ab_prev) / (1.0 - ab);
}

torch::Tensor NoiseSchedule::q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& noise) const {
  TORCH_CHECK(t.dim() == 1 && t.size(0) == z0.size(0), "t must hold one step per batch item");
  if (t.numel() > 0 && (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() >= size()))
    throw ValidationError("timestep out of range", "/t");
  const auto ab = torch::tensor(alpha_bars_, torch::TensorOptions().dtype(torch::kDouble)).index_select(0, t);
  std::vector<int64_t> shape(static_cast<std::size_t>(z0.dim()), 1);
  shape[0] = z0.size(0);
  const auto a = ab.sqrt().to(z0.scalar_type()).view(shape);
  const auto s = (1.0 - ab).sqrt().to(z0.scalar_type()).view(shape);
  return a * z0 + s * noise;
}

NoiseSchedule NoiseSchedule::respaced(int steps) const {
  if (steps < 1 || steps > size()) throw ValidationError("steps must lie in [1, T]", "/steps");
  if (steps == size()) return *this;
  std::vector<int> keep;
  for (int k = 0; k < steps; ++k) {
    const double pos = steps == 1 ? size() - 1 : static_cast<double>(k) * (size() - 1) / (steps - 1);
    keep.push_back(static_cast<int>(std::lround(pos)));
  }
  std::vector<double> betas;
  double prev = 1.0;
  for (int t : keep) {
    const double ab = alpha_bar(t);
    betas.push_back(1.0 - ab / prev);
    prev = ab;
  }
  NoiseSchedule s = from_betas(std::move(betas));
  for (std::size_t k = 0; k < keep.size(); ++k) s.timesteps_[k] = timesteps_[std::size_t(keep[k])];
  return s;
}

json NoiseSchedule::to_json() const { return {{"betas", betas_}, {"timesteps", timesteps_}}; }

NoiseSchedule NoiseSchedule::from_json(const json& j) {
  NoiseSchedule s = from_betas(j.at("betas").get<std::vector<double>>());
  if (j.contains("timesteps")) {
    auto ts = j.at("timesteps").get<std::vector<int>>();
    if (ts.size() != s.betas_.size()) throw ValidationError("timesteps and betas differ in length", "/schedule");
    s.timesteps_ = std::move(ts);
  }
  return s;
}

}  // namespace colay::model
