#include "colay/model/condition_encoders.hpp"

#include <algorithm>

#include "colay/error.hpp"

namespace colay::model {

ConditionEncoderConfig ConditionEncoderConfig::desk() {
  ConditionEncoderConfig c;
  c.width = 128;
  c.heads = 4;
  c.mlp = 512;
  return c;
}

json ConditionEncoderConfig::to_json() const {
  return {{"width", width}, {"heads", heads}, {"mlp", mlp}, {"layers", layers}, {"max_prompt_tokens", max_prompt_tokens}};
}

ConditionEncoderConfig ConditionEncoderConfig::from_json(const json& j) {
  ConditionEncoderConfig c;
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.mlp = j.value("mlp", c.mlp);
  c.layers = j.value("layers", c.layers);
  c.max_prompt_tokens = j.value("max_prompt_tokens", c.max_prompt_tokens);
  if (c.width % c.heads != 0 || c.max_prompt_tokens < 1) throw ValidationError("invalid encoder configuration", "/encoders");
  return c;
}

namespace {

template <typename F>
EncodedConditions map_streams(const EncodedConditions& e, F f) {
  EncodedConditions out{f(e.prompt_seq), f(e.prompt_mask), f(e.prompt_pool), f(e.class_emb), f(e.class_mask),
                        f(e.given_emb),  f(e.guide_emb),   f(e.guide_mask),  f(e.presence),   {}};
  if (e.element_count.defined()) out.element_count = f(e.element_count);
  return out;
}

}  // namespace

EncodedConditions EncodedConditions::index_select(const torch::Tensor& rows) const {
  return map_streams(*this, [&](const torch::Tensor& t) { return t.index_select(0, rows); });
}

EncodedConditions EncodedConditions::repeat(int64_t times) const {
  return map_streams(*this, [times](const torch::Tensor& t) {
    std::vector<int64_t> reps(static_cast<std::size_t>(t.dim()), 1);
    reps[0] = times;
    return t.repeat(reps);
  });
}

EncodedConditions EncodedConditions::detach() const {
  return map_streams(*this, [](const torch::Tensor& t) { return t.detach(); });
}

EncodedConditions EncodedConditions::cat(std::span<const EncodedConditions> parts) {
  TORCH_CHECK(!parts.empty(), "nothing to concatenate");
  // Sequence streams may differ in length; pad them to the longest.
  auto pad_to = [](const torch::Tensor& t, int64_t len) {
    if (t.size(1) == len) return t;
    auto shape = t.sizes().vec();
    shape[1] = len - t.size(1);
    return torch::cat({t, torch::zeros(shape, t.options())}, 1);
  };
  int64_t lp = 0, lg = 0;
  for (const auto& p : parts) {
    lp = std::max(lp, p.prompt_seq.size(1));
    lg = std::max(lg, p.guide_emb.size(1));
  }
  std::vector<torch::Tensor> ps, pm, pp, ce, cm, ge, gu, gm, pr, ec;
  for (const auto& p : parts) {
    ps.push_back(pad_to(p.prompt_seq, lp));
    pm.push_back(pad_to(p.prompt_mask, lp));
    pp.push_back(p.prompt_pool);
    ce.push_back(p.class_emb);
    cm.push_back(p.class_mask);
    ge.push_back(p.given_emb);
    gu.push_back(pad_to(p.guide_emb, lg));
    gm.push_back(pad_to(p.guide_mask, lg));
    pr.push_back(p.presence);
    if (p.element_count.defined()) ec.push_back(p.element_count);
  }
  EncodedConditions out{torch::cat(ps), torch::cat(pm), torch::cat(pp), torch::cat(ce), torch::cat(cm),
                        torch::cat(ge), torch::cat(gu), torch::cat(gm), torch::cat(pr), {}};
  if (ec.size() == parts.size()) out.element_count = torch::cat(ec);
  return out;
}

torch::Tensor presence_tensor(std::span<const PresenceMask> masks) {
  auto out = torch::zeros({static_cast<int64_t>(masks.size()), static_cast<int64_t>(kConditionKinds)}, torch::kBool);
  auto acc = out.accessor<bool, 2>();
  for (std::size_t b = 0; b < masks.size(); ++b)
    for (std::size_t k = 0; k < kConditionKinds; ++k) acc[int64_t(b)][int64_t(k)] = masks[b][k];
  return out;
}

std::vector<Guideline> canonical_guidelines(std::vector<Guideline> gs) {
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
  return gs;
}

ConditionEncodersImpl::ConditionEncodersImpl(SchemaPtr schema, Vocabulary vocab, ConditionEncoderConfig config,
                                             int latent_dim)
    : schema_(std::move(schema)), vocab_(std::move(vocab)), config_(config) {
  const int w = config_.width;
  word_emb_ = register_module("word_emb", torch::nn::Embedding(static_cast<int64_t>(vocab_.size()), w));
  word_pos_ = register_module("word_pos", torch::nn::Embedding(config_.max_prompt_tokens, w));
  text_blocks_ = register_module("text_blocks", nn::Stack(config_.layers, w, config_.heads, config_.mlp));
  text_norm_ = register_module("text_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));

  class_id_ = register_module("class_id", torch::nn::Embedding(schema_->num_classes(), w));
  count_bucket_ = register_module("count_bucket", torch::nn::Embedding(schema_->capacity() + 1, w));
  class_blocks_ = register_module("class_blocks", nn::Stack(config_.layers, w, config_.heads, config_.mlp));
  class_norm_ = register_module("class_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));

  guide_in_ = register_module("guide_in", torch::nn::Linear(2 + schema_->resolution(), w));
  guide_blocks_ = register_module("guide_blocks", nn::Stack(config_.layers, w, config_.heads, config_.mlp));
  guide_norm_ = register_module("guide_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));

  given_proj_ = register_module("given_proj", torch::nn::Linear(latent_dim, w));

  null_prompt_ = register_parameter("null_prompt", torch::randn({w}) * 0.02);
  null_pool_ = register_parameter("null_pool", torch::randn({w}) * 0.02);
  null_class_ = register_parameter("null_class", torch::randn({w}) * 0.02);
  null_given_ = register_parameter("null_given", torch::randn({w}) * 0.02);
  null_guide_ = register_parameter("null_guide", torch::randn({w}) * 0.02);
}

std::pair<torch::Tensor, torch::Tensor> ConditionEncodersImpl::encode_prompt(std::span<const Prompt> prompts,
                                                                             torch::Tensor* mask_out) {
  const auto b = static_cast<int64_t>(prompts.size());
  std::vector<std::vector<int64_t>> ids;
  std::size_t longest = 1;
  for (const auto& p : prompts) {
    ids.push_back(vocab_.encode(p, static_cast<std::size_t>(config_.max_prompt_tokens)));
    longest = std::max(longest, ids.back().size());
  }
  const auto len = static_cast<int64_t>(longest);
  auto tokens = torch::zeros({b, len}, torch::kLong);
  auto mask = torch::zeros({b, len}, torch::kBool);
  auto ta = tokens.accessor<int64_t, 2>();
  auto ma = mask.accessor<bool, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& row = ids[std::size_t(i)];
    // An empty prompt still gets one (padding) row so shapes stay uniform.
    ma[i][0] = true;
    for (std::size_t j = 0; j < row.size(); ++j) {
      ta[i][int64_t(j)] = row[j];
      ma[i][int64_t(j)] = true;
    }
  }
  auto x = word_emb_(tokens) + word_pos_(torch::arange(len, torch::kLong)).unsqueeze(0);
  x = text_norm_(text_blocks_->forward(x, torch::Tensor(), mask));
  auto pool = nn::masked_mean(x, mask);
  if (mask_out) *mask_out = mask;
  return {x, pool};
}

torch::Tensor ConditionEncodersImpl::encode_class_count(std::span<const std::vector<int>> counts) {
  const auto b = static_cast<int64_t>(counts.size());
  const int k = schema_->num_classes();
  auto buckets = torch::zeros({b, k}, torch::kLong);
  auto acc = buckets.accessor<int64_t, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& c = counts[std::size_t(i)];
    if (static_cast<int>(c.size()) != k)
      throw ValidationError("class count has " + std::to_string(c.size()) + " entries, expected " + std::to_string(k),
                            "/class_count");
    for (int j = 0; j < k; ++j) {
      if (c[std::size_t(j)] < 0) throw ValidationError("class counts must be non-negative", "/class_count/" + std::to_string(j));
      acc[i][j] = std::min(c[std::size_t(j)], schema_->capacity());
    }
  }
  auto x = class_id_(torch::arange(k, torch::kLong)).unsqueeze(0) + count_bucket_(buckets);
  return class_norm_(class_blocks_(x));
}

torch::Tensor ConditionEncodersImpl::encode_guidelines(std::span<const std::vector<Guideline>> sets,
                                                       torch::Tensor* mask_out) {
  const auto b = static_cast<int64_t>(sets.size());
  const int res = schema_->resolution();
  std::vector<std::vector<Guideline>> canon;
  std::size_t longest = 1;
  for (const auto& g : sets) {
    canon.push_back(canonical_guidelines(g));
    if (static_cast<int>(canon.back().size()) > max_guidelines())
      throw ValidationError("too many guidelines", "/guidelines");
    longest = std::max(longest, canon.back().size());
  }
  const auto len = static_cast<int64_t>(longest);
  auto x = torch::zeros({b, len, 2 + res});
  auto mask = torch::zeros({b, len}, torch::kBool);
  auto xa = x.accessor<float, 3>();
  auto ma = mask.accessor<bool, 2>();
  for (int64_t i = 0; i < b; ++i) {
    ma[i][0] = true;
    for (std::size_t j = 0; j < canon[std::size_t(i)].size(); ++j) {
      const auto& g = canon[std::size_t(i)][j];
      if (g.position < 0 || g.position >= res)
        throw ValidationError("guideline position out of range", "/guidelines/" + std::to_string(j) + "/pos");
      xa[i][int64_t(j)][static_cast<int64_t>(g.axis)] = 1.0f;
      xa[i][int64_t(j)][2 + g.position] = 1.0f;
      ma[i][int64_t(j)] = true;
    }
  }
  const auto w = guide_in_->weight;
  auto h = guide_norm_(guide_blocks_->forward(guide_in_(x.to(w.dtype())), torch::Tensor(), mask));
  if (mask_out) *mask_out = mask;
  return h;
}

torch::Tensor ConditionEncodersImpl::encode_given(Vae& vae, std::span<const Layout> given) {
  if (vae->config().latent_dim != given_proj_->options.in_features())
    throw ValidationError("given-design projection expects latent size " +
                          std::to_string(given_proj_->options.in_features()));
  torch::Tensor mean;
  {
    torch::NoGradGuard guard;
    mean = vae->encode(layouts_to_tensor(given, given_proj_->weight.scalar_type())).first;
  }
  return given_proj_(mean);
}

EncodedConditions ConditionEncodersImpl::assemble(std::span<const ConditionSet> conditions, Vae& vae) {
  const auto b = conditions.size();
  std::vector<Prompt> prompts(b);
  std::vector<std::vector<int>> counts(b, std::vector<int>(static_cast<std::size_t>(schema_->num_classes()), 0));
  std::vector<Layout> given(b, Layout(schema_));
  std::vector<std::vector<Guideline>> guides(b);
  std::vector<PresenceMask> presence(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& cs = conditions[i];
    validate_conditions(cs, *schema_);
    presence[i] = presence_of(cs);
    if (cs.prompt) prompts[i] = *cs.prompt;
    if (cs.class_count) counts[i] = *cs.class_count;
    if (cs.given_design) given[i] = *cs.given_design;
    if (cs.guidelines) guides[i] = *cs.guidelines;
  }
  EncodedConditions enc;
  std::tie(enc.prompt_seq, enc.prompt_pool) = encode_prompt(prompts, &enc.prompt_mask);
  enc.class_emb = encode_class_count(counts);
  enc.class_mask = torch::ones({int64_t(b), schema_->num_classes()}, torch::kBool);
  enc.given_emb = encode_given(vae, given);
  enc.guide_emb = encode_guidelines(guides, &enc.guide_mask);
  const auto p = presence_tensor(presence);
  enc.presence = p;
  return with_presence(enc, p);
}

EncodedConditions ConditionEncodersImpl::with_presence(const EncodedConditions& enc, const torch::Tensor& presence) const {
  TORCH_CHECK(presence.size(0) == enc.batch(), "presence batch mismatch");
  const auto dtype = enc.prompt_seq.scalar_type();
  auto flag = [&](ConditionKind k) { return presence.select(1, static_cast<int64_t>(k)).view({-1, 1}); };

  // A null stream is one attendable row holding the learned vector.
  auto null_seq = [&](const torch::Tensor& seq, const torch::Tensor& mask, const torch::Tensor& null_vec,
                      const torch::Tensor& on, torch::Tensor& seq_out, torch::Tensor& mask_out) {
    auto first = torch::zeros({seq.size(1)}, torch::kBool);
    first[0] = true;
    const auto on3 = on.view({-1, 1, 1});
    auto filled = torch::cat({null_vec.to(dtype).view({1, 1, -1}).expand({seq.size(0), 1, seq.size(2)}),
                              torch::zeros({seq.size(0), seq.size(1) - 1, seq.size(2)}, seq.options())},
                             1);
    seq_out = torch::where(on3, seq, filled);
    mask_out = torch::where(on, mask, first.view({1, -1}).expand_as(mask));
  };

  EncodedConditions out = enc;
  out.presence = enc.presence.logical_and(presence);
  null_seq(enc.prompt_seq, enc.prompt_mask, null_prompt_, flag(ConditionKind::Prompt), out.prompt_seq, out.prompt_mask);
  out.prompt_pool = torch::where(flag(ConditionKind::Prompt), enc.prompt_pool, null_pool_.to(dtype).view({1, -1}));
  null_seq(enc.class_emb, enc.class_mask, null_class_, flag(ConditionKind::ClassCount), out.class_emb, out.class_mask);
  out.given_emb = torch::where(flag(ConditionKind::GivenDesign).view({-1, 1, 1}), enc.given_emb,
                               null_given_.to(dtype).view({1, 1, -1}));
  null_seq(enc.guide_emb, enc.guide_mask, null_guide_, flag(ConditionKind::Guidelines), out.guide_emb, out.guide_mask);
  return out;
}

}  // namespace colay::model
