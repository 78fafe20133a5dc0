#pragma once

// Central finite differences against autograd for randomly picked entries.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <torch/torch.h>

namespace colay::testing {

struct GradCheck {
  int checked = 0;
  double worst_relative_error = 0.0;
};

inline GradCheck check_gradients(std::vector<torch::Tensor> params, const std::function<torch::Tensor()>& loss,
                                 int count, std::uint64_t seed = 11, double h = 1e-6) {
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  loss().backward();
  std::mt19937_64 rng(seed);
  GradCheck out;
  for (int tries = 0; out.checked < count && tries < 100 * count; ++tries) {
    auto& p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng)];
    if (!p.grad().defined()) continue;
    auto flat = p.view(-1);
    const auto j = std::uniform_int_distribution<int64_t>(0, flat.numel() - 1)(rng);
    const double analytic = p.grad().view(-1)[j].item<double>();
    if (std::abs(analytic) < 1e-6) continue;
    torch::NoGradGuard guard;
    const double orig = flat[j].item<double>();
    flat[j] = orig + h;
    const double up = loss().item<double>();
    flat[j] = orig - h;
    const double down = loss().item<double>();
    flat[j] = orig;
    const double numeric = (up - down) / (2 * h);
    out.worst_relative_error = std::max(
        out.worst_relative_error, std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic)));
    ++out.checked;
  }
  return out;
}

}  // namespace colay::testing
