#include "colay/model/denoiser.hpp"

#include "colay/error.hpp"

namespace colay::model {

DenoiserConfig DenoiserConfig::desk() {
  DenoiserConfig c;
  c.width = 128;
  c.heads = 4;
  c.mlp = 512;
  c.layers = 4;
  return c;
}

json DenoiserConfig::to_json() const {
  return {{"latent_dim", latent_dim},
          {"width", width},
          {"heads", heads},
          {"mlp", mlp},
          {"layers", layers},
          {"positional_encoding", positional_encoding},
          {"given_route", given_route == GivenRoute::Concatenate ? "concatenate" : "context"},
          {"gen_all", gen_all},
          {"capacity", capacity}};
}

DenoiserConfig DenoiserConfig::from_json(const json& j) {
  DenoiserConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.mlp = j.value("mlp", c.mlp);
  c.layers = j.value("layers", c.layers);
  c.positional_encoding = j.value("positional_encoding", c.positional_encoding);
  const auto route = j.value("given_route", std::string("concatenate"));
  if (route != "concatenate" && route != "context") throw ValidationError("unknown given_route", "/denoiser/given_route");
  c.given_route = route == "context" ? GivenRoute::Context : GivenRoute::Concatenate;
  c.gen_all = j.value("gen_all", c.gen_all);
  c.capacity = j.value("capacity", c.capacity);
  if (c.width % c.heads != 0 || c.layers < 1) throw ValidationError("invalid denoiser configuration", "/denoiser");
  return c;
}

DenoiserImpl::DenoiserImpl(DenoiserConfig config) : config_(config) {
  const int w = config_.width;
  in_proj_ = register_module("in_proj", torch::nn::Linear(config_.latent_dim, w));
  time_mlp_ = register_module("time_mlp", torch::nn::Sequential(torch::nn::Linear(w, w), torch::nn::SiLU(),
                                                                torch::nn::Linear(w, w)));
  pool_proj_ = register_module("pool_proj", torch::nn::Linear(w, w));
  if (!config_.gen_all) {
    if (config_.capacity < 1) throw ValidationError("element-count conditioning needs the capacity", "/denoiser/capacity");
    count_emb_ = register_module("count_emb", torch::nn::Embedding(config_.capacity + 1, w));
  }
  segment_ = register_parameter("segment", torch::randn({2, w}) * 0.02);
  stream_type_ = register_parameter("stream_type", torch::randn({4, w}) * 0.02);
  blocks_ = register_module("blocks", nn::Stack(config_.layers, w, config_.heads, config_.mlp, w));
  out_norm_ = register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w}).elementwise_affine(false)));
  out_mod_ = register_module("out_mod", torch::nn::Linear(w, 2 * w));
  {
    torch::NoGradGuard guard;
    out_mod_->weight.mul_(0.1);
    out_mod_->bias.zero_();
  }
  out_proj_ = register_module("out_proj", torch::nn::Linear(w, config_.latent_dim));
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& z_t, const EncodedConditions& enc, const torch::Tensor& t) {
  TORCH_CHECK(z_t.dim() == 3 && z_t.size(2) == config_.latent_dim, "z_t must be [B, N, latent_dim]");
  TORCH_CHECK(enc.given_emb.size(2) == config_.width, "condition width does not match the denoiser");
  const auto b = z_t.size(0);
  const auto n = z_t.size(1);
  const auto w = config_.width;

  auto x = in_proj_(z_t) + segment_[0];
  auto given = enc.given_emb + segment_[1];
  if (config_.positional_encoding) {
    const auto pos = nn::sinusoidal_embedding(torch::arange(n, torch::kLong), w).to(x.scalar_type()).unsqueeze(0);
    x = x + pos;
    given = given + pos;
  }

  std::vector<torch::Tensor> ctx{enc.prompt_seq + stream_type_[0], enc.class_emb + stream_type_[1],
                                 enc.guide_emb + stream_type_[2]};
  std::vector<torch::Tensor> ctx_mask{enc.prompt_mask, enc.class_mask, enc.guide_mask};
  torch::Tensor tokens;
  if (config_.given_route == GivenRoute::Concatenate) {
    tokens = torch::cat({x, given}, 1);
  } else {
    tokens = x;
    ctx.push_back(given + stream_type_[3]);
    ctx_mask.push_back(torch::ones({b, n}, torch::kBool));
  }
  const auto context = torch::cat(ctx, 1);
  const auto key_mask = torch::cat({torch::ones({b, tokens.size(1)}, torch::kBool), torch::cat(ctx_mask, 1)}, 1);

  auto cond = time_mlp_->forward(nn::sinusoidal_embedding(t, w).to(x.scalar_type())) + pool_proj_(enc.prompt_pool);
  if (!config_.gen_all) {
    TORCH_CHECK(enc.element_count.defined(), "this model needs an element count");
    cond = cond + count_emb_(enc.element_count.clamp(0, config_.capacity));
  }

  auto h = blocks_(tokens, context, key_mask, cond).narrow(1, 0, n);
  auto mod = out_mod_(torch::silu(cond)).unsqueeze(1).chunk(2, -1);
  h = out_norm_(h) * (1 + mod[1]) + mod[0];
  return out_proj_(h);
}

torch::Tensor NoisePredictor::predict(const torch::Tensor& z_t, const EncodedConditions& enc,
                                      std::span<const PresenceMask> variants, const torch::Tensor& t) {
  evaluations_ += variants.size();
  return run(z_t, enc, variants, t);
}

torch::Tensor NoisePredictor::predict(const torch::Tensor& z_t, const EncodedConditions& enc, const torch::Tensor& t) {
  const PresenceMask all{true, true, true, true};
  return predict(z_t, enc, std::span<const PresenceMask>(&all, 1), t);
}

torch::Tensor NetworkPredictor::run(const torch::Tensor& z_t, const EncodedConditions& enc,
                                    std::span<const PresenceMask> variants, const torch::Tensor& t) {
  const auto v = static_cast<int64_t>(variants.size());
  const auto b = z_t.size(0);
  if (v == 1 && variants[0] == PresenceMask{true, true, true, true}) return denoiser_(z_t, enc, t);
  std::vector<PresenceMask> rows;
  rows.reserve(static_cast<std::size_t>(v * b));
  for (const auto& m : variants)
    for (int64_t i = 0; i < b; ++i) rows.push_back(m);
  const auto masked = encoders_->with_presence(enc.repeat(v), presence_tensor(rows));
  return denoiser_(z_t.repeat({v, 1, 1}), masked, t.repeat({v}));
}

torch::Tensor diffusion_loss(NoisePredictor& predictor, const NoiseSchedule& schedule, const torch::Tensor& z0,
                             const EncodedConditions& enc, at::Generator& gen, const torch::Tensor& valid_rows) {
  const auto b = z0.size(0);
  const auto t = torch::randint(0, schedule.size(), {b}, gen, torch::TensorOptions().dtype(torch::kLong));
  const auto eps = torch::randn(z0.sizes(), gen, z0.options());
  const auto z_t = schedule.q_sample(z0, t, eps);
  const auto err = (predictor.predict(z_t, enc, t) - eps).pow(2);
  if (!valid_rows.defined()) return err.mean();
  const auto m = valid_rows.to(err.scalar_type()).unsqueeze(-1);
  return (err * m).sum() / (m.sum() * err.size(-1)).clamp_min(1.0);
}

}  // namespace colay::model
