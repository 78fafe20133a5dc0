#include "colay/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "colay/error.hpp"

namespace colay::model {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'L', 'A', 'Y', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw MissingArtifactError("checkpoint is truncated");
  return v;
}

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return 0;
    case torch::kDouble: return 1;
    case torch::kLong: return 2;
    case torch::kBool: return 3;
    default: throw ValidationError("unsupported tensor dtype in checkpoint");
  }
}

torch::ScalarType dtype_of(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat;
    case 1: return torch::kDouble;
    case 2: return torch::kLong;
    case 3: return torch::kBool;
    default: throw MissingArtifactError("checkpoint has an unknown tensor dtype");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

const torch::Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw MissingArtifactError("checkpoint has no tensor '" + name + "'");
}

std::uint64_t config_hash(const json& config) { return fnv1a(config.dump()); }

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto schema = schema_from_json(ckpt.header.at("schema"));
  const std::string header = ckpt.header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw MissingArtifactError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, schema->hash());
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      const auto c = t.detach().contiguous().cpu();
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(out, dtype_code(c.scalar_type()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim()));
      for (auto d : c.sizes()) put<std::int64_t>(out, d);
      const auto bytes = static_cast<std::uint64_t>(c.numel() * c.element_size());
      put<std::uint64_t>(out, bytes);
      out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(bytes));
    }
    if (!out) throw MissingArtifactError("failed writing checkpoint " + path);
  }
  std::rename(tmp.c_str(), path.c_str());
}

Checkpoint read_checkpoint(const std::string& path, const AttributeSchema* expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw MissingArtifactError(path + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw MissingArtifactError("checkpoint version " + std::to_string(version) + " is not supported");
  const auto schema_hash = get<std::uint64_t>(in);
  if (expected_schema && expected_schema->hash() != schema_hash)
    throw ValidationError("checkpoint was trained for a different schema", "/schema");
  const auto header_size = get<std::uint64_t>(in);
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw MissingArtifactError("checkpoint is truncated");
  Checkpoint ckpt;
  try {
    ckpt.header = json::parse(header);
  } catch (const json::exception& e) {
    throw MissingArtifactError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_size = get<std::uint32_t>(in);
    std::string name(name_size, '\0');
    in.read(name.data(), name_size);
    const auto dtype = dtype_of(get<std::uint8_t>(in));
    const auto rank = get<std::uint32_t>(in);
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = get<std::int64_t>(in);
    const auto bytes = get<std::uint64_t>(in);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != bytes)
      throw MissingArtifactError("checkpoint tensor '" + name + "' has an inconsistent size");
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    if (!in) throw MissingArtifactError("checkpoint is truncated");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::nn::Module& module, const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
  for (const auto& b : module.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
  return out;
}

void load_state(torch::nn::Module& module, const Checkpoint& ckpt, const std::string& prefix) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto& src = ckpt.tensor(prefix + key);
    if (src.sizes() != dst.sizes())
      throw ValidationError("checkpoint tensor '" + prefix + key + "' has the wrong shape", "/checkpoint");
    dst.copy_(src);
  };
  for (auto& p : module.named_parameters()) copy(p.key(), p.value());
  for (auto& b : module.named_buffers()) copy(b.key(), b.value());
}

void save_vae(const std::string& path, Vae& vae, int step, const json& training) {
  Checkpoint ckpt;
  const json config = vae->config().to_json();
  ckpt.header = {{"kind", "vae"},
                 {"schema", schema_to_json(vae->schema())},
                 {"vae", config},
                 {"config_hash", config_hash({{"vae", config}, {"training", training}})},
                 {"training", training},
                 {"step", step}};
  ckpt.tensors = named_state(*vae);
  write_checkpoint(path, ckpt);
}

std::pair<Vae, Checkpoint> load_vae(const std::string& path, const AttributeSchema* expected_schema) {
  auto ckpt = read_checkpoint(path, expected_schema);
  const std::string prefix = ckpt.kind() == "diffusion" ? "vae." : "";
  if (ckpt.kind() != "vae" && ckpt.kind() != "diffusion")
    throw MissingArtifactError(path + " does not contain a VAE");
  const auto schema = schema_from_json(ckpt.header.at("schema"));
  Vae vae(schema, VaeConfig::from_json(ckpt.header.at("vae")));
  load_state(*vae, ckpt, prefix);
  vae->eval();
  return {vae, std::move(ckpt)};
}

void save_diffusion(const std::string& path, LatentDiffusion& model, int step, const json& training) {
  Checkpoint ckpt;
  const json config = {{"vae", model.vae()->config().to_json()},
                       {"encoders", model.encoders()->config().to_json()},
                       {"denoiser", model.denoiser()->config().to_json()}};
  ckpt.header = {{"kind", "diffusion"},
                 {"schema", schema_to_json(model.schema())},
                 {"vae", config["vae"]},
                 {"encoders", config["encoders"]},
                 {"denoiser", config["denoiser"]},
                 {"schedule", model.schedule().to_json()},
                 {"latent_scale", model.latent_scale()},
                 {"vocab", model.encoders()->vocabulary().tokens()},
                 {"config_hash", config_hash({{"model", config}, {"training", training}})},
                 {"training", training},
                 {"step", step}};
  ckpt.tensors = named_state(*model.vae(), "vae.");
  for (auto& t : named_state(*model.encoders(), "encoders.")) ckpt.tensors.push_back(std::move(t));
  for (auto& t : named_state(*model.denoiser(), "denoiser.")) ckpt.tensors.push_back(std::move(t));
  write_checkpoint(path, ckpt);
}

std::pair<std::unique_ptr<LatentDiffusion>, Checkpoint> load_diffusion(const std::string& path,
                                                                       const AttributeSchema* expected_schema) {
  auto ckpt = read_checkpoint(path, expected_schema);
  if (ckpt.kind() != "diffusion") throw MissingArtifactError(path + " is not a diffusion checkpoint");
  const auto schema = schema_from_json(ckpt.header.at("schema"));
  const auto& h = ckpt.header;
  Vae vae(schema, VaeConfig::from_json(h.at("vae")));
  load_state(*vae, ckpt, "vae.");
  const auto vae_cfg = vae->config();
  Vocabulary vocab(h.at("vocab").get<std::vector<std::string>>());
  ConditionEncoders enc(schema, vocab, ConditionEncoderConfig::from_json(h.at("encoders")), vae_cfg.latent_dim);
  load_state(*enc, ckpt, "encoders.");
  Denoiser den(DenoiserConfig::from_json(h.at("denoiser")));
  load_state(*den, ckpt, "denoiser.");
  auto model = std::make_unique<LatentDiffusion>(vae, enc, den, NoiseSchedule::from_json(h.at("schedule")),
                                                 h.at("latent_scale").get<double>());
  model->eval();
  return {std::move(model), std::move(ckpt)};
}

}  // namespace colay::model
