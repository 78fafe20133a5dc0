#pragma once

// Small networks and predictor stubs shared by the model tests.

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "colay/datasets.hpp"
#include "colay/model/latent_diffusion.hpp"
#include "colay/model/vocabulary.hpp"
#include "support/generators.hpp"

namespace colay::testing {

inline void single_thread() {
  static const bool once = [] {
    torch::set_num_threads(1);
    return true;
  }();
  (void)once;
}

inline model::VaeConfig tiny_vae_config() {
  model::VaeConfig c;
  c.latent_dim = 4;
  c.layers = 1;
  c.heads = 2;
  c.width = 16;
  c.mlp = 32;
  return c;
}

inline model::ConditionEncoderConfig tiny_encoder_config() {
  model::ConditionEncoderConfig c;
  c.width = 16;
  c.heads = 2;
  c.mlp = 32;
  c.layers = 1;
  return c;
}

inline model::DenoiserConfig tiny_denoiser_config(int latent_dim, int capacity, bool gen_all = true) {
  model::DenoiserConfig c;
  c.latent_dim = latent_dim;
  c.width = 16;
  c.heads = 2;
  c.mlp = 32;
  c.layers = 1;
  c.gen_all = gen_all;
  c.capacity = capacity;
  return c;
}

inline Corpus small_corpus(const SchemaPtr& schema, std::size_t size, std::uint64_t seed) {
  SynthSpec spec;
  spec.schema = schema;
  spec.size = size;
  spec.seed = seed;
  return generate_corpus(spec);
}

inline model::Vocabulary corpus_vocab(const Corpus& corpus) {
  std::vector<Prompt> prompts;
  for (const auto& it : corpus) prompts.push_back(it.prompt);
  return model::Vocabulary::build(prompts);
}

// Randomly initialized model over the toy schema.
inline std::unique_ptr<model::LatentDiffusion> tiny_model(std::uint64_t seed = 1, bool gen_all = true,
                                                         int diffusion_steps = 20) {
  single_thread();
  torch::manual_seed(seed);
  const auto schema = toy_schema();
  const auto corpus = small_corpus(schema, 16, seed);
  model::Vae vae(schema, tiny_vae_config());
  model::ConditionEncoders enc(schema, corpus_vocab(corpus), tiny_encoder_config(), vae->config().latent_dim);
  model::Denoiser den(tiny_denoiser_config(vae->config().latent_dim, schema->capacity(), gen_all));
  auto m = std::make_unique<model::LatentDiffusion>(vae, enc, den, model::NoiseSchedule::scaled_linear(diffusion_steps),
                                                    0.5);
  m->eval();
  return m;
}

// Noise prediction as a function of (z_t, t, effective presence of the row).
class FunctionPredictor final : public model::NoisePredictor {
 public:
  using Fn = std::function<torch::Tensor(const torch::Tensor& z_t, const torch::Tensor& t, const PresenceMask& row)>;
  explicit FunctionPredictor(Fn fn) : fn_(std::move(fn)) {}
  std::vector<std::size_t> call_sizes;

 protected:
  torch::Tensor run(const torch::Tensor& z_t, const model::EncodedConditions& enc,
                    std::span<const PresenceMask> variants, const torch::Tensor& t) override {
    call_sizes.push_back(variants.size());
    std::vector<torch::Tensor> out;
    const auto pres = enc.presence.to(torch::kBool);
    for (const auto& v : variants)
      for (int64_t b = 0; b < z_t.size(0); ++b) {
        PresenceMask row{};
        for (std::size_t k = 0; k < kConditionKinds; ++k) row[k] = v[k] && pres[b][int64_t(k)].item<bool>();
        out.push_back(fn_(z_t[b], t[b], row));
      }
    return torch::stack(out);
  }

 private:
  Fn fn_;
};

// Scalar per presence pattern, broadcast over the latent.
inline double pattern_value(const PresenceMask& m) {
  double v = 0.5;
  for (std::size_t k = 0; k < kConditionKinds; ++k)
    if (m[k]) v += std::pow(3.0, double(k)) * 0.25;
  return v;
}

// Recovers the true noise from z_t given the clean latents z0 (rows in call
// order), then adds `offset`.
inline std::shared_ptr<FunctionPredictor> exact_noise_predictor(const model::NoiseSchedule& s, const torch::Tensor& z0,
                                                                double offset) {
  auto row = std::make_shared<int64_t>(0);
  return std::make_shared<FunctionPredictor>([=, &s](const torch::Tensor& zt, const torch::Tensor& t, const PresenceMask&) {
    const double ab = s.alpha_bar(int(t.item<int64_t>()));
    const auto b = *row % z0.size(0);
    ++*row;
    return (zt - std::sqrt(ab) * z0[b]) / std::sqrt(1 - ab) + offset;
  });
}

inline std::shared_ptr<FunctionPredictor> pattern_predictor() {
  return std::make_shared<FunctionPredictor>([](const torch::Tensor& zt, const torch::Tensor&, const PresenceMask& m) {
    return torch::full_like(zt, pattern_value(m));
  });
}


}  // namespace colay::testing
