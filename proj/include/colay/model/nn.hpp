#pragma once

#include <torch/torch.h>

namespace colay::nn {

// Additive mask value for padded keys; finite so fully padded rows stay
// well-defined.
inline constexpr double kMaskedLogit = -1e9;

// Multi-head attention from queries onto a separate key/value sequence.
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int width, int heads);
  // q: [B, Lq, W], kv: [B, Lk, W], key_mask: [B, Lk] bool (true = attend) or undefined.
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& kv, const torch::Tensor& key_mask = {});

 private:
  int heads_;
  torch::nn::Linear to_q_{nullptr}, to_k_{nullptr}, to_v_{nullptr}, out_{nullptr};
};
TORCH_MODULE(Attention);

// Pre-norm transformer block. Keys and values are the block input followed
// by an optional context sequence (joint attention). With cond_width > 0 the
// layer norms are modulated by a per-item conditioning vector.
class BlockImpl : public torch::nn::Module {
 public:
  BlockImpl(int width, int heads, int mlp, int cond_width = 0);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context = {}, const torch::Tensor& key_mask = {},
                        const torch::Tensor& cond = {});

 private:
  int width_;
  torch::nn::LayerNorm ln_attn_{nullptr}, ln_ctx_{nullptr}, ln_mlp_{nullptr};
  Attention attn_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  torch::nn::Linear modulation_{nullptr};
};
TORCH_MODULE(Block);

// Stack of blocks sharing one context/mask/cond.
class StackImpl : public torch::nn::Module {
 public:
  StackImpl(int layers, int width, int heads, int mlp, int cond_width = 0);
  torch::Tensor forward(torch::Tensor x, const torch::Tensor& context = {}, const torch::Tensor& key_mask = {},
                        const torch::Tensor& cond = {});

 private:
  torch::nn::ModuleList blocks_;
};
TORCH_MODULE(Stack);

// Sinusoidal features of real-valued positions: [B] -> [B, dim].
torch::Tensor sinusoidal_embedding(const torch::Tensor& positions, int dim);

// Mean over rows where mask is true: x [B, L, W], mask [B, L] -> [B, W].
torch::Tensor masked_mean(const torch::Tensor& x, const torch::Tensor& mask);

}  // namespace colay::nn
