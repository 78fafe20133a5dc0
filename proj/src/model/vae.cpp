#include "colay/model/vae.hpp"

#include "colay/error.hpp"
#include "colay/one_hot.hpp"

namespace colay::model {

VaeConfig VaeConfig::desk() {
  VaeConfig c;
  c.layers = 2;
  c.heads = 4;
  c.width = 128;
  c.mlp = 512;
  return c;
}

json VaeConfig::to_json() const {
  return {{"latent_dim", latent_dim}, {"layers", layers}, {"heads", heads},
          {"width", width},           {"mlp", mlp},       {"kl_weight", kl_weight}};
}

VaeConfig VaeConfig::from_json(const json& j) {
  VaeConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.width = j.value("width", c.width);
  c.mlp = j.value("mlp", c.mlp);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  if (c.latent_dim < 1 || c.layers < 0 || c.heads < 1 || c.width % c.heads != 0 || c.kl_weight < 0)
    throw ValidationError("invalid VAE configuration", "/vae");
  return c;
}

VaeImpl::VaeImpl(SchemaPtr schema, VaeConfig config) : schema_(std::move(schema)), config_(config) {
  const int d = schema_->one_hot_width();
  enc_in_ = register_module("enc_in", torch::nn::Linear(d, config_.width));
  enc_blocks_ = register_module("enc_blocks", nn::Stack(config_.layers, config_.width, config_.heads, config_.mlp));
  enc_norm_ = register_module("enc_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config_.width})));
  enc_out_ = register_module("enc_out", torch::nn::Linear(config_.width, 2 * config_.latent_dim));
  dec_in_ = register_module("dec_in", torch::nn::Linear(config_.latent_dim, config_.width));
  dec_blocks_ = register_module("dec_blocks", nn::Stack(config_.layers, config_.width, config_.heads, config_.mlp));
  dec_norm_ = register_module("dec_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config_.width})));
  dec_out_ = register_module("dec_out", torch::nn::Linear(config_.width, d));
}

std::pair<torch::Tensor, torch::Tensor> VaeImpl::encode(const torch::Tensor& one_hot) {
  TORCH_CHECK(one_hot.dim() == 3 && one_hot.size(1) == schema_->capacity() &&
                  one_hot.size(2) == schema_->one_hot_width(),
              "VAE input must be [B, N, d_total]");
  auto h = enc_out_(enc_norm_(enc_blocks_(enc_in_(one_hot))));
  auto parts = h.chunk(2, -1);
  return {parts[0], parts[1].clamp(-10.0, 10.0)};
}

torch::Tensor VaeImpl::decode_logits(const torch::Tensor& z) {
  TORCH_CHECK(z.dim() == 3 && z.size(2) == config_.latent_dim, "latent must be [B, N, latent_dim]");
  TORCH_CHECK(torch::isfinite(z).all().item<bool>(), "latent has non-finite entries");
  return dec_out_(dec_norm_(dec_blocks_(dec_in_(z))));
}

torch::Tensor VaeImpl::decode(const torch::Tensor& z) {
  const auto logits = decode_logits(z);
  std::vector<torch::Tensor> slices;
  for (std::size_t i = 0; i < schema_->attribute_count(); ++i)
    slices.push_back(torch::softmax(logits.narrow(-1, schema_->slot_offset(i), schema_->cardinality(i) + 1), -1));
  return torch::cat(slices, -1);
}

torch::Tensor layouts_to_tensor(std::span<const Layout> layouts, torch::Dtype dtype) {
  if (layouts.empty()) throw ValidationError("no layouts to encode");
  const auto& s = layouts.front().schema();
  const auto n = s.capacity();
  const auto d = s.one_hot_width();
  auto out = torch::zeros({static_cast<int64_t>(layouts.size()), n, d}, torch::kFloat);
  auto acc = out.accessor<float, 3>();
  for (std::size_t b = 0; b < layouts.size(); ++b) {
    if (!(layouts[b].schema() == s)) throw ValidationError("layouts in one batch must share a schema", "/schema");
    for (int r = 0; r < n; ++r) {
      const auto& e = layouts[b][static_cast<std::size_t>(r)];
      for (std::size_t i = 0; i < s.attribute_count(); ++i) acc[b][r][s.slot_offset(i) + e.values[i]] = 1.0f;
    }
  }
  return out.to(dtype);
}

std::vector<Layout> tensor_to_layouts(const SchemaPtr& schema, const torch::Tensor& probs) {
  const auto p = probs.to(torch::kFloat).contiguous();
  TORCH_CHECK(p.dim() == 3, "expected [B, N, d_total]");
  std::vector<Layout> out;
  out.reserve(static_cast<std::size_t>(p.size(0)));
  const auto rows = static_cast<int>(p.size(1));
  const auto cols = static_cast<int>(p.size(2));
  for (int64_t b = 0; b < p.size(0); ++b) {
    OneHotLayout m(rows, cols);
    const float* src = p[b].data_ptr<float>();
    std::copy(src, src + m.data.size(), m.data.begin());
    out.push_back(decode_one_hot(schema, m));
  }
  return out;
}

torch::Tensor attribute_targets(std::span<const Layout> layouts) {
  const auto& s = layouts.front().schema();
  const auto a = static_cast<int64_t>(s.attribute_count());
  auto out = torch::empty({static_cast<int64_t>(layouts.size()), s.capacity(), a}, torch::kLong);
  auto acc = out.accessor<int64_t, 3>();
  for (std::size_t b = 0; b < layouts.size(); ++b)
    for (int r = 0; r < s.capacity(); ++r)
      for (int64_t i = 0; i < a; ++i) acc[b][r][i] = layouts[b][static_cast<std::size_t>(r)].values[std::size_t(i)];
  return out;
}

VaeLoss vae_loss_from(const AttributeSchema& s, const torch::Tensor& logits, const torch::Tensor& targets,
                      const torch::Tensor& mean, const torch::Tensor& logvar, double kl_weight) {
  torch::Tensor recon = torch::zeros({}, logits.options());
  const auto attrs = static_cast<int64_t>(s.attribute_count());
  for (int64_t i = 0; i < attrs; ++i) {
    const auto slice = logits.narrow(-1, s.slot_offset(std::size_t(i)), s.cardinality(std::size_t(i)) + 1);
    const auto logp = torch::log_softmax(slice, -1);
    const auto picked = logp.gather(-1, targets.select(-1, i).unsqueeze(-1));
    recon = recon - picked.mean();
  }
  recon = recon / static_cast<double>(attrs);
  const auto kl = (0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar)).mean();
  return {recon + kl_weight * kl, recon, kl};
}

VaeLoss vae_loss(Vae& vae, const torch::Tensor& one_hot, double kl_weight, const torch::Tensor& noise) {
  if (kl_weight < 0) throw ValidationError("kl_weight must be non-negative", "/kl_weight");
  auto [mean, logvar] = vae->encode(one_hot);
  const auto eps = noise.defined() ? noise : torch::randn_like(mean);
  const auto z = mean + torch::exp(0.5 * logvar) * eps;
  const auto& s = vae->schema();
  std::vector<torch::Tensor> idx;
  for (std::size_t i = 0; i < s.attribute_count(); ++i)
    idx.push_back(one_hot.narrow(-1, s.slot_offset(i), s.cardinality(i) + 1).argmax(-1));
  return vae_loss_from(s, vae->decode_logits(z), torch::stack(idx, -1), mean, logvar, kl_weight);
}

torch::Tensor encode_mean(Vae& vae, std::span<const Layout> layouts) {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < layouts.size(); i += kChunk) {
    const auto chunk = layouts.subspan(i, std::min(kChunk, layouts.size() - i));
    parts.push_back(vae->encode(layouts_to_tensor(chunk)).first);
  }
  if (parts.empty()) return torch::zeros({0, vae->schema().capacity(), vae->config().latent_dim});
  return torch::cat(parts, 0);
}

double attribute_accuracy(Vae& vae, std::span<const Layout> layouts) {
  torch::NoGradGuard guard;
  const auto& s = vae->schema();
  std::size_t correct = 0, total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < layouts.size(); i += kChunk) {
    const auto chunk = layouts.subspan(i, std::min(kChunk, layouts.size() - i));
    const auto logits = vae->decode_logits(vae->encode(layouts_to_tensor(chunk)).first);
    std::vector<torch::Tensor> idx;
    for (std::size_t a = 0; a < s.attribute_count(); ++a)
      idx.push_back(logits.narrow(-1, s.slot_offset(a), s.cardinality(a) + 1).argmax(-1));
    const auto pred = torch::stack(idx, -1).contiguous();
    auto acc = pred.accessor<int64_t, 3>();
    for (std::size_t b = 0; b < chunk.size(); ++b)
      for (int r = 0; r < s.capacity(); ++r) {
        const auto& e = chunk[b][std::size_t(r)];
        if (!e.valid) continue;
        for (std::size_t a = 0; a < s.attribute_count(); ++a) {
          correct += acc[int64_t(b)][r][int64_t(a)] == e.values[a];
          ++total;
        }
      }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
}

}  // namespace colay::model
