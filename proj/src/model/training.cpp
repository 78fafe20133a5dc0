#include "colay/model/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "colay/error.hpp"
#include "colay/model/checkpoint.hpp"
#include "colay/model/sampler.hpp"

namespace colay::model {

json OptimConfig::to_json() const {
  return {{"steps", steps},       {"batch", batch},         {"lr", lr},
          {"weight_decay", weight_decay}, {"beta1", beta1}, {"beta2", beta2}, {"warmup", warmup}, {"min_lr_fraction", min_lr_fraction},
          {"grad_clip", grad_clip}, {"seed", seed}};
}

OptimConfig OptimConfig::from_json(const json& j) {
  OptimConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.warmup = j.value("warmup", c.warmup);
  c.min_lr_fraction = j.value("min_lr_fraction", c.min_lr_fraction);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  return c;
}

torch::optim::AdamWOptions OptimConfig::adamw() const {
  return torch::optim::AdamWOptions(lr).betas({beta1, beta2}).weight_decay(weight_decay);
}

double learning_rate(const OptimConfig& cfg, int step) {
  if (cfg.warmup > 0 && step < cfg.warmup) return cfg.lr * double(step + 1) / double(cfg.warmup);
  const double span = std::max(1, cfg.steps - cfg.warmup);
  const double progress = std::clamp(double(step - cfg.warmup) / span, 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return cfg.lr * (cfg.min_lr_fraction + (1.0 - cfg.min_lr_fraction) * cosine);
}

json VaeTrainConfig::to_json() const {
  return {{"model", model.to_json()}, {"optim", optim.to_json()}, {"subset_probability", subset_probability}};
}

VaeTrainConfig VaeTrainConfig::from_json(const json& j) {
  VaeTrainConfig c;
  if (j.contains("model")) c.model = VaeConfig::from_json(j.at("model"));
  if (j.contains("optim")) c.optim = OptimConfig::from_json(j.at("optim"));
  c.subset_probability = j.value("subset_probability", c.subset_probability);
  return c;
}

DiffusionTrainConfig DiffusionTrainConfig::from_json(const json& j) {
  DiffusionTrainConfig c;
  if (j.contains("encoders")) c.encoders = ConditionEncoderConfig::from_json(j.at("encoders"));
  if (j.contains("denoiser")) c.denoiser = DenoiserConfig::from_json(j.at("denoiser"));
  if (j.contains("optim")) c.optim = OptimConfig::from_json(j.at("optim"));
  c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
  c.dropout.p_cfg = j.value("p_cfg", c.dropout.p_cfg);
  c.dropout.p_cond = j.value("p_cond", c.dropout.p_cond);
  c.p_base = j.value("p_base", c.p_base);
  const auto mode = j.value("guideline_sampling", std::string("mean"));
  if (mode != "mean" && mode != "sum") throw ValidationError("guideline_sampling must be mean or sum", "/guideline_sampling");
  c.guideline_sampling = mode == "mean" ? GuidelineSampling::MeanNormalized : GuidelineSampling::SumNormalized;
  c.sort = j.value("sort", c.sort);
  return c;
}

json DiffusionTrainConfig::to_json() const {
  return {{"encoders", encoders.to_json()},
          {"denoiser", denoiser.to_json()},
          {"optim", optim.to_json()},
          {"diffusion_steps", diffusion_steps},
          {"p_cfg", dropout.p_cfg},
          {"p_cond", dropout.p_cond},
          {"p_base", p_base},
          {"guideline_sampling", guideline_sampling == GuidelineSampling::MeanNormalized ? "mean" : "sum"},
          {"sort", sort}};
}

namespace {

class Logger {
 public:
  explicit Logger(const TrainIo& io) : io_(io) {
    if (!io.log.empty()) out_.open(io.log, io.resume ? std::ios::app : std::ios::trunc);
  }
  void add(int step, double loss, const std::function<void(json&)>& extra = {}) {
    sum_ += loss;
    ++n_;
    if (io_.log_every <= 0 || (step + 1) % io_.log_every != 0) return;
    json rec = {{"step", step + 1}, {"loss", sum_ / n_}};
    if (extra) extra(rec);
    if (out_.is_open()) out_ << rec.dump() << '\n' << std::flush;
    if (io_.on_log) io_.on_log(rec);
    sum_ = 0.0;
    n_ = 0;
  }

 private:
  const TrainIo& io_;
  std::ofstream out_;
  double sum_ = 0.0;
  int n_ = 0;
};

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

std::string optim_path(const TrainIo& io) { return io.checkpoint + ".optim"; }

bool can_resume(const TrainIo& io) {
  return io.resume && !io.checkpoint.empty() && std::filesystem::exists(io.checkpoint) &&
         std::filesystem::exists(optim_path(io));
}

std::vector<std::size_t> draw_batch(std::size_t n, int batch, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

}  // namespace

VaeTrainResult train_vae(const std::vector<Layout>& layouts, const SchemaPtr& schema, const VaeTrainConfig& cfg,
                         const TrainIo& io) {
  if (layouts.empty()) throw ValidationError("training corpus is empty", "/corpus");
  torch::manual_seed(cfg.optim.seed);
  Vae vae(schema, cfg.model);
  torch::optim::AdamW opt(vae->parameters(),
                          cfg.optim.adamw());
  int start = 0;
  if (can_resume(io)) {
    auto [loaded, ckpt] = load_vae(io.checkpoint, schema.get());
    vae = loaded;
    opt = torch::optim::AdamW(vae->parameters(),
                              cfg.optim.adamw());
    torch::load(opt, optim_path(io));
    start = ckpt.header.at("step").get<int>();
  }
  vae->train();
  Logger log(io);
  const json training = cfg.to_json();
  auto save = [&](int step) {
    if (io.checkpoint.empty()) return;
    save_vae(io.checkpoint, vae, step, training);
    torch::save(opt, optim_path(io));
  };

  VaeTrainResult result;
  for (int step = start; step < cfg.optim.steps; ++step) {
    Rng rng(derive_seed(cfg.optim.seed, std::uint64_t(step)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Layout> batch;
    batch.reserve(std::size_t(cfg.optim.batch));
    for (auto i : draw_batch(layouts.size(), cfg.optim.batch, rng)) {
      const Layout& l = layouts[i];
      batch.push_back(u(rng) < cfg.subset_probability ? subset_given_design(l, u(rng), rng) : l);
    }
    auto gen = at::make_generator<at::CPUGeneratorImpl>(rng());
    const auto x = layouts_to_tensor(batch, torch::kFloat);
    const auto noise = torch::randn({x.size(0), x.size(1), cfg.model.latent_dim}, gen);
    set_lr(opt, learning_rate(cfg.optim, step));
    opt.zero_grad();
    auto loss = vae_loss(vae, x, cfg.model.kl_weight, noise);
    loss.total.backward();
    if (cfg.optim.grad_clip > 0) torch::nn::utils::clip_grad_norm_(vae->parameters(), cfg.optim.grad_clip);
    opt.step();
    result.final_loss = loss.total.item<double>();
    const double rec = loss.reconstruction.item<double>(), kl = loss.kl.item<double>();
    log.add(step, result.final_loss, [&](json& j) {
      j["reconstruction"] = rec;
      j["kl"] = kl;
    });
    if (io.checkpoint_every > 0 && (step + 1) % io.checkpoint_every == 0) save(step + 1);
  }
  result.steps = std::max(start, cfg.optim.steps);
  save(result.steps);
  vae->eval();
  result.vae = vae;
  return result;
}

ConditionSet training_conditions(const CorpusItem& item, const DiffusionTrainConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Layout layout = cfg.sort ? sort_canonical(item.layout) : item.layout;
  ConditionSet cs;
  if (!item.prompt.empty()) cs.prompt = subset_prompt(item.prompt, rng);
  {
    auto counts = subset_class_count(count_classes(layout), rng);
    if (std::any_of(counts.begin(), counts.end(), [](int c) { return c > 0; })) cs.class_count = std::move(counts);
  }
  {
    auto given = subset_given_design(layout, u(rng), rng);
    if (given.valid_count() > 0) cs.given_design = std::move(given);
  }
  {
    auto lines = sample_guidelines(extract_guidelines(layout), cfg.p_base, rng, cfg.guideline_sampling);
    if (!lines.empty()) cs.guidelines = std::move(lines);
  }
  return apply_dropout(cs, cfg.dropout, rng);
}

DiffusionTrainResult train_diffusion(const Corpus& corpus, Vae vae, const DiffusionTrainConfig& cfg,
                                     const TrainIo& io) {
  if (corpus.empty()) throw ValidationError("training corpus is empty", "/corpus");
  const auto& schema = vae->schema_ptr();
  const auto n = int64_t(schema->capacity());
  vae->eval();

  std::vector<Layout> layouts;
  layouts.reserve(corpus.size());
  for (const auto& it : corpus) layouts.push_back(cfg.sort ? sort_canonical(it.layout) : it.layout);
  const auto raw = encode_mean(vae, layouts);  // [M, N, d]

  std::unique_ptr<LatentDiffusion> model;
  int start = 0;
  if (can_resume(io)) {
    auto [loaded, ckpt] = load_diffusion(io.checkpoint, schema.get());
    model = std::move(loaded);
    start = ckpt.header.at("step").get<int>();
  } else {
    std::vector<Prompt> prompts;
    for (const auto& it : corpus) prompts.push_back(it.prompt);
    auto vocab = Vocabulary::build(prompts);
    torch::manual_seed(cfg.optim.seed);
    auto den_cfg = cfg.denoiser;
    den_cfg.latent_dim = vae->config().latent_dim;
    den_cfg.capacity = int(n);
    ConditionEncoders enc(schema, vocab, cfg.encoders, den_cfg.latent_dim);
    Denoiser den(den_cfg);
    const double scale = raw.std().item<double>();
    model = std::make_unique<LatentDiffusion>(vae, enc, den, NoiseSchedule::scaled_linear(cfg.diffusion_steps),
                                              scale > 1e-8 ? scale : 1.0);
  }
  const auto z_all = raw / model->latent_scale();

  std::vector<torch::Tensor> params = model->encoders()->parameters();
  for (auto& p : model->denoiser()->parameters()) params.push_back(p);
  auto make_opt = [&] {
    return torch::optim::AdamW(params, cfg.optim.adamw());
  };
  auto opt = make_opt();
  if (start > 0) torch::load(opt, optim_path(io));

  const json training = cfg.to_json();
  auto save = [&](int step) {
    if (io.checkpoint.empty()) return;
    save_diffusion(io.checkpoint, *model, step, training);
    torch::save(opt, optim_path(io));
  };

  model->train();
  Logger log(io);
  DiffusionTrainResult result;
  for (int step = start; step < cfg.optim.steps; ++step) {
    Rng rng(derive_seed(cfg.optim.seed, std::uint64_t(step)));
    const auto idx = draw_batch(corpus.size(), cfg.optim.batch, rng);
    std::vector<ConditionSet> conditions;
    std::vector<int64_t> rows, counts;
    conditions.reserve(idx.size());
    for (auto i : idx) {
      conditions.push_back(training_conditions(corpus[i], cfg, rng));
      rows.push_back(int64_t(i));
      counts.push_back(int64_t(layouts[i].valid_count()));
    }
    const auto z0 = z_all.index_select(0, torch::tensor(rows));
    auto enc = model->encode(conditions);
    torch::Tensor valid;
    if (!model->gen_all()) {
      const auto c = torch::tensor(counts);
      enc.element_count = c;
      valid = torch::arange(n).unsqueeze(0) < c.unsqueeze(1);
    }
    auto gen = at::make_generator<at::CPUGeneratorImpl>(rng());
    set_lr(opt, learning_rate(cfg.optim, step));
    opt.zero_grad();
    auto loss = diffusion_loss(model->predictor(), model->schedule(), z0, enc, gen, valid);
    loss.backward();
    if (cfg.optim.grad_clip > 0) torch::nn::utils::clip_grad_norm_(params, cfg.optim.grad_clip);
    opt.step();
    result.final_loss = loss.item<double>();
    log.add(step, result.final_loss);
    if (io.checkpoint_every > 0 && (step + 1) % io.checkpoint_every == 0) save(step + 1);
  }
  result.steps = std::max(start, cfg.optim.steps);
  save(result.steps);
  model->eval();
  result.model = std::move(model);
  return result;
}

}  // namespace colay::model
