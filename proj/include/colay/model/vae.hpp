#pragma once

#include <span>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "colay/json_io.hpp"
#include "colay/layout.hpp"
#include "colay/model/nn.hpp"

namespace colay::model {

struct VaeConfig {
  int latent_dim = 8;
  int layers = 4;
  int heads = 8;
  int width = 512;
  int mlp = 2048;
  double kl_weight = 1e-2;

  // 2 layers, 4 heads, width 128: the size used by tests and the toy run.
  static VaeConfig desk();
  json to_json() const;
  static VaeConfig from_json(const json& j);
};

// Element-wise transformer encoder/decoder between one-hot layouts
// [B, N, d_total] and latents [B, N, latent_dim]. There is no positional
// encoding: every element carries its coordinates explicitly.
class VaeImpl : public torch::nn::Module {
 public:
  VaeImpl(SchemaPtr schema, VaeConfig config);

  // Posterior mean and log-variance.
  std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& one_hot);
  // Unnormalized slice logits.
  torch::Tensor decode_logits(const torch::Tensor& z);
  // Per-slice softmax: every attribute slice of every row sums to one.
  torch::Tensor decode(const torch::Tensor& z);

  const AttributeSchema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  const VaeConfig& config() const noexcept { return config_; }

 private:
  SchemaPtr schema_;
  VaeConfig config_;
  torch::nn::Linear enc_in_{nullptr}, enc_out_{nullptr}, dec_in_{nullptr}, dec_out_{nullptr};
  nn::Stack enc_blocks_{nullptr}, dec_blocks_{nullptr};
  torch::nn::LayerNorm enc_norm_{nullptr}, dec_norm_{nullptr};
};
TORCH_MODULE(Vae);

// [B, N, d_total] one-hot tensor of the given layouts.
torch::Tensor layouts_to_tensor(std::span<const Layout> layouts, torch::Dtype dtype = torch::kFloat);
std::vector<Layout> tensor_to_layouts(const SchemaPtr& schema, const torch::Tensor& probs);

// Target class index per attribute slot: [B, N, attributes] int64.
torch::Tensor attribute_targets(std::span<const Layout> layouts);

struct VaeLoss {
  torch::Tensor total;
  torch::Tensor reconstruction;  // mean per-attribute cross-entropy over all N slots
  torch::Tensor kl;              // mean per-latent-entry divergence from N(0, I)
};

// `noise` replaces the reparameterization draw when defined.
VaeLoss vae_loss(Vae& vae, const torch::Tensor& one_hot, double kl_weight, const torch::Tensor& noise = {});
VaeLoss vae_loss_from(const AttributeSchema& schema, const torch::Tensor& logits, const torch::Tensor& targets,
                      const torch::Tensor& mean, const torch::Tensor& logvar, double kl_weight);

// Fraction of attributes of valid elements recovered by mean-encode,
// decode and argmax (predicting the invalid slot counts as an error).
double attribute_accuracy(Vae& vae, std::span<const Layout> layouts);

// Posterior means in eval mode, batched internally.
torch::Tensor encode_mean(Vae& vae, std::span<const Layout> layouts);

}  // namespace colay::model
