#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "colay/conditions.hpp"
#include "colay/guidance.hpp"
#include "colay/json_io.hpp"
#include "colay/model/nn.hpp"
#include "colay/model/vae.hpp"
#include "colay/model/vocabulary.hpp"

namespace colay::model {

struct ConditionEncoderConfig {
  int width = 512;
  int heads = 8;
  int mlp = 2048;
  int layers = 2;
  int max_prompt_tokens = 128;

  static ConditionEncoderConfig desk();
  json to_json() const;
  static ConditionEncoderConfig from_json(const json& j);
};

// Batched condition embeddings, all of the denoiser width. Absent members
// already hold the learned null embeddings; masks mark attendable rows.
struct EncodedConditions {
  torch::Tensor prompt_seq;   // [B, Lp, W]
  torch::Tensor prompt_mask;  // [B, Lp] bool
  torch::Tensor prompt_pool;  // [B, W]
  torch::Tensor class_emb;    // [B, K, W]
  torch::Tensor class_mask;   // [B, K] bool
  torch::Tensor given_emb;    // [B, N, W]
  torch::Tensor guide_emb;    // [B, Lg, W]
  torch::Tensor guide_mask;   // [B, Lg] bool
  torch::Tensor presence;     // [B, 4] bool, indexed by ConditionKind
  torch::Tensor element_count;  // [B] int64, only for models trained without Gen-All

  int64_t batch() const { return presence.size(0); }
  EncodedConditions index_select(const torch::Tensor& rows) const;
  EncodedConditions repeat(int64_t times) const;  // [B] -> [times * B], block-wise
  EncodedConditions detach() const;
  static EncodedConditions cat(std::span<const EncodedConditions> parts);
};

// presence as a [B, 4] bool tensor.
torch::Tensor presence_tensor(std::span<const PresenceMask> masks);

class ConditionEncodersImpl : public torch::nn::Module {
 public:
  ConditionEncodersImpl(SchemaPtr schema, Vocabulary vocab, ConditionEncoderConfig config, int latent_dim);

  // seq [B, L, W] with L = min(max tokens, longest prompt) and pool = masked mean.
  std::pair<torch::Tensor, torch::Tensor> encode_prompt(std::span<const Prompt> prompts, torch::Tensor* mask = nullptr);
  torch::Tensor encode_class_count(std::span<const std::vector<int>> counts);
  // X lines then Y lines, each ascending.
  torch::Tensor encode_guidelines(std::span<const std::vector<Guideline>> sets, torch::Tensor* mask = nullptr);
  torch::Tensor encode_given(Vae& vae, std::span<const Layout> given);

  EncodedConditions assemble(std::span<const ConditionSet> conditions, Vae& vae);
  // Replaces every stream whose flag is off with its null embedding.
  EncodedConditions with_presence(const EncodedConditions& enc, const torch::Tensor& presence) const;

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const ConditionEncoderConfig& config() const noexcept { return config_; }
  int max_guidelines() const { return 2 * schema_->resolution(); }

 private:
  SchemaPtr schema_;
  Vocabulary vocab_;
  ConditionEncoderConfig config_;

  torch::nn::Embedding word_emb_{nullptr}, word_pos_{nullptr};
  nn::Stack text_blocks_{nullptr};
  torch::nn::LayerNorm text_norm_{nullptr};

  torch::nn::Embedding class_id_{nullptr}, count_bucket_{nullptr};
  nn::Stack class_blocks_{nullptr};
  torch::nn::LayerNorm class_norm_{nullptr};

  torch::nn::Linear guide_in_{nullptr};
  nn::Stack guide_blocks_{nullptr};
  torch::nn::LayerNorm guide_norm_{nullptr};

  torch::nn::Linear given_proj_{nullptr};

  torch::Tensor null_prompt_, null_pool_, null_class_, null_given_, null_guide_;
};
TORCH_MODULE(ConditionEncoders);

// Guidelines in canonical encoder order: X then Y, positions ascending,
// duplicates removed.
std::vector<Guideline> canonical_guidelines(std::vector<Guideline> gs);

}  // namespace colay::model
