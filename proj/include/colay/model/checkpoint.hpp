#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "colay/json_io.hpp"
#include "colay/model/latent_diffusion.hpp"
#include "colay/model/vae.hpp"
#include "colay/model/vocabulary.hpp"

namespace colay::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk layout: "COLAYCK1", u32 version, u64 schema hash, u64 header size,
// JSON header, u32 tensor count, then per tensor: u32 name size, name,
// u8 dtype, u32 rank, i64 dims, u64 byte count, raw little-endian data.
struct Checkpoint {
  json header;  // kind, schema, configs, step, ...
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor& tensor(const std::string& name) const;
  std::string kind() const { return header.value("kind", std::string()); }
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws MissingArtifactError when absent or unreadable and ValidationError
// when `expected_schema` is given and differs from the recorded one.
Checkpoint read_checkpoint(const std::string& path, const AttributeSchema* expected_schema = nullptr);

std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::nn::Module& module, const std::string& prefix = "");
// Copies matching tensors into the module; every module entry must exist.
void load_state(torch::nn::Module& module, const Checkpoint& ckpt, const std::string& prefix = "");

// Stable hash of a JSON config, recorded next to the weights.
std::uint64_t config_hash(const json& config);

void save_vae(const std::string& path, Vae& vae, int step, const json& training = json::object());
std::pair<Vae, Checkpoint> load_vae(const std::string& path, const AttributeSchema* expected_schema = nullptr);

// The diffusion checkpoint embeds the VAE so it can be used on its own.
void save_diffusion(const std::string& path, LatentDiffusion& model, int step, const json& training = json::object());
std::pair<std::unique_ptr<LatentDiffusion>, Checkpoint> load_diffusion(const std::string& path,
                                                                       const AttributeSchema* expected_schema = nullptr);

}  // namespace colay::model
