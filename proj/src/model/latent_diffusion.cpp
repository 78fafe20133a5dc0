#include "colay/model/latent_diffusion.hpp"

#include "colay/error.hpp"

namespace colay::model {

LatentDiffusion::LatentDiffusion(Vae vae, ConditionEncoders encoders, Denoiser denoiser, NoiseSchedule schedule,
                                 double latent_scale)
    : vae_(std::move(vae)),
      encoders_(std::move(encoders)),
      denoiser_(std::move(denoiser)),
      schedule_(std::move(schedule)),
      latent_scale_(latent_scale) {
  if (!(latent_scale_ > 0.0)) throw ValidationError("latent scale must be positive", "/latent_scale");
  if (denoiser_->config().latent_dim != vae_->config().latent_dim)
    throw ValidationError("denoiser and VAE latent sizes differ", "/denoiser/latent_dim");
  network_ = std::make_shared<NetworkPredictor>(encoders_, denoiser_);
  predictor_ = network_;
}

void LatentDiffusion::set_predictor(std::shared_ptr<NoisePredictor> predictor) {
  predictor_ = predictor ? std::move(predictor) : network_;
}

EncodedConditions LatentDiffusion::encode(std::span<const ConditionSet> conditions) {
  return encoders_->assemble(conditions, vae_);
}

torch::Tensor LatentDiffusion::latents(std::span<const Layout> layouts) {
  return encode_mean(vae_, layouts) / latent_scale_;
}

std::vector<Layout> LatentDiffusion::decode(const torch::Tensor& z, std::span<const int> element_counts) {
  torch::NoGradGuard guard;
  auto probs = vae_->decode(z.to(torch::kFloat) * latent_scale_);
  if (!gen_all()) {
    if (static_cast<int64_t>(element_counts.size()) != z.size(0))
      throw ValidationError("this model needs an element count per sample", "/element_count");
    const auto& s = schema();
    const auto cls = static_cast<int64_t>(s.class_index());
    const auto sentinel = s.slot_offset(s.class_index()) + s.sentinel(s.class_index());
    auto acc = probs.accessor<float, 3>();
    for (int64_t b = 0; b < probs.size(0); ++b) {
      const int n = element_counts[std::size_t(b)];
      for (int64_t r = 0; r < probs.size(1); ++r) {
        if (r < n) {
          acc[b][r][sentinel] = 0.0f;
        } else {
          for (int c = 0; c <= s.sentinel(std::size_t(cls)); ++c) acc[b][r][s.slot_offset(std::size_t(cls)) + c] = 0.0f;
          acc[b][r][sentinel] = 1.0f;
        }
      }
    }
  }
  auto layouts = tensor_to_layouts(schema_ptr(), probs);
  for (auto& l : layouts) l = sort_canonical(l);
  return layouts;
}

void LatentDiffusion::eval() {
  vae_->eval();
  encoders_->eval();
  denoiser_->eval();
}

void LatentDiffusion::train() {
  vae_->eval();
  encoders_->train();
  denoiser_->train();
}

}  // namespace colay::model
