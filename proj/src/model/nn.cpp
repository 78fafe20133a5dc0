#include "colay/model/nn.hpp"

#include <cmath>

namespace colay::nn {

AttentionImpl::AttentionImpl(int width, int heads) : heads_(heads) {
  TORCH_CHECK(width % heads == 0, "attention width must be divisible by heads");
  to_q_ = register_module("to_q", torch::nn::Linear(width, width));
  to_k_ = register_module("to_k", torch::nn::Linear(width, width));
  to_v_ = register_module("to_v", torch::nn::Linear(width, width));
  out_ = register_module("out", torch::nn::Linear(width, width));
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& kv, const torch::Tensor& key_mask) {
  const auto b = q.size(0);
  const auto lq = q.size(1);
  const auto lk = kv.size(1);
  const auto w = q.size(2);
  const auto hd = w / heads_;
  auto split = [&](const torch::Tensor& x, int64_t len) { return x.view({b, len, heads_, hd}).transpose(1, 2); };
  const auto qh = split(to_q_(q), lq);
  const auto kh = split(to_k_(kv), lk);
  const auto vh = split(to_v_(kv), lk);
  auto logits = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  if (key_mask.defined()) logits = logits.masked_fill(key_mask.logical_not().view({b, 1, 1, lk}), kMaskedLogit);
  const auto attn = torch::softmax(logits, -1);
  const auto out = torch::matmul(attn, vh).transpose(1, 2).reshape({b, lq, w});
  return out_(out);
}

BlockImpl::BlockImpl(int width, int heads, int mlp, int cond_width) : width_(width) {
  const bool modulated = cond_width > 0;
  auto ln = [&](const char* name) {
    return register_module(name, torch::nn::LayerNorm(torch::nn::LayerNormOptions({width}).elementwise_affine(!modulated)));
  };
  ln_attn_ = ln("ln_attn");
  ln_ctx_ = register_module("ln_ctx", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  ln_mlp_ = ln("ln_mlp");
  attn_ = register_module("attn", Attention(width, heads));
  fc1_ = register_module("fc1", torch::nn::Linear(width, mlp));
  fc2_ = register_module("fc2", torch::nn::Linear(mlp, width));
  if (modulated) {
    // shift/scale for both norms plus a gate for each residual branch
    modulation_ = register_module("modulation", torch::nn::Linear(cond_width, 6 * width));
    torch::NoGradGuard guard;
    modulation_->weight.mul_(0.1);
    modulation_->bias.zero_();
  }
}

torch::Tensor BlockImpl::forward(const torch::Tensor& x, const torch::Tensor& context, const torch::Tensor& key_mask,
                                 const torch::Tensor& cond) {
  torch::Tensor shift1, scale1, gate1, shift2, scale2, gate2;
  const bool modulated = !modulation_.is_empty() && cond.defined();
  if (modulated) {
    auto parts = modulation_(torch::silu(cond)).unsqueeze(1).chunk(6, -1);
    shift1 = parts[0], scale1 = parts[1], gate1 = parts[2];
    shift2 = parts[3], scale2 = parts[4], gate2 = parts[5];
  }
  auto h = ln_attn_(x);
  if (modulated) h = h * (1 + scale1) + shift1;
  const auto kv = context.defined() && context.size(1) > 0 ? torch::cat({h, ln_ctx_(context)}, 1) : h;
  auto a = attn_(h, kv, key_mask);
  if (modulated) a = a * (1 + gate1);
  auto y = x + a;
  auto m = ln_mlp_(y);
  if (modulated) m = m * (1 + scale2) + shift2;
  auto f = fc2_(torch::gelu(fc1_(m)));
  if (modulated) f = f * (1 + gate2);
  return y + f;
}

StackImpl::StackImpl(int layers, int width, int heads, int mlp, int cond_width) {
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < layers; ++i) blocks_->push_back(Block(width, heads, mlp, cond_width));
}

torch::Tensor StackImpl::forward(torch::Tensor x, const torch::Tensor& context, const torch::Tensor& key_mask,
                                 const torch::Tensor& cond) {
  for (const auto& b : *blocks_) x = b->as<Block>()->forward(x, context, key_mask, cond);
  return x;
}

torch::Tensor sinusoidal_embedding(const torch::Tensor& positions, int dim) {
  const int half = dim / 2;
  const auto dtype = positions.scalar_type() == torch::kDouble ? torch::kDouble : torch::kFloat;
  const auto freqs = torch::exp(torch::arange(half, torch::TensorOptions().dtype(dtype)) * (-std::log(10000.0) / half));
  const auto args = positions.to(dtype).unsqueeze(-1) * freqs.unsqueeze(0);
  auto emb = torch::cat({torch::sin(args), torch::cos(args)}, -1);
  if (dim % 2) emb = torch::cat({emb, torch::zeros_like(emb.narrow(-1, 0, 1))}, -1);
  return emb;
}

torch::Tensor masked_mean(const torch::Tensor& x, const torch::Tensor& mask) {
  const auto m = mask.to(x.dtype()).unsqueeze(-1);
  return (x * m).sum(1) / m.sum(1).clamp_min(1.0);
}

}  // namespace colay::nn
