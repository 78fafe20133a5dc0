#include "colay/model/sampler.hpp"

#include <cmath>
#include <tuple>

#include "colay/error.hpp"

namespace colay::model {

std::vector<PresenceMask> guidance_variants(std::span<const WeightedCondition> ordered) {
  std::vector<PresenceMask> out;
  for (std::size_t i = 0; i <= ordered.size(); ++i) {
    PresenceMask m{};
    for (std::size_t j = i; j < ordered.size(); ++j) m[static_cast<std::size_t>(ordered[j].kind)] = true;
    out.push_back(m);
  }
  return out;
}

torch::Tensor guided_noise(NoisePredictor& predictor, const torch::Tensor& z_t, const EncodedConditions& enc,
                           const torch::Tensor& t, std::span<const WeightedCondition> ordered) {
  const auto variants = guidance_variants(ordered);
  const auto b = z_t.size(0);
  const auto eps = predictor.predict(z_t, enc, variants, t);
  const auto l = ordered.size();
  auto part = [&](std::size_t v) { return eps.narrow(0, static_cast<int64_t>(v) * b, b); };
  if (l == 0) return part(0);
  const auto uncond = part(l);
  auto out = (1.0 + ordered[0].weight) * part(0) - ordered[0].weight * uncond;
  for (std::size_t i = 1; i < l; ++i) {
    const double dw = ordered[i].weight - ordered[i - 1].weight;
    if (dw != 0.0) out = out + dw * (part(i) - uncond);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

using GroupKey = std::vector<std::pair<ConditionKind, double>>;

GroupKey group_key(const std::vector<WeightedCondition>& ordered) {
  GroupKey k;
  for (const auto& w : ordered) k.emplace_back(w.kind, w.weight);
  return k;
}

constexpr std::size_t kMaxBatch = 128;

void run_group(LatentDiffusion& model, std::span<const SampleItem> items, const std::vector<std::size_t>& members,
               const std::vector<WeightedCondition>& ordered, const NoiseSchedule& sched, torch::Tensor& out) {
  const auto& s = model.schema();
  const int64_t n = s.capacity();
  const int64_t d = model.denoiser()->config().latent_dim;
  const auto b = static_cast<int64_t>(members.size());

  std::vector<ConditionSet> cs;
  std::vector<at::Generator> gens;
  for (auto i : members) {
    cs.push_back(items[i].conditions);
    gens.push_back(at::make_generator<at::CPUGeneratorImpl>(items[i].seed));
  }
  auto enc = model.encode(cs);
  if (!model.gen_all()) {
    auto counts = torch::empty({b}, torch::kLong);
    for (int64_t j = 0; j < b; ++j) {
      const auto& c = items[members[std::size_t(j)]].element_count;
      if (!c || *c < 1 || *c > n) throw ValidationError("this model needs an element count in [1, N]", "/element_count");
      counts[j] = *c;
    }
    enc.element_count = counts;
  }

  auto draw = [&]() {
    std::vector<torch::Tensor> rows;
    for (auto& g : gens) rows.push_back(torch::randn({n, d}, g));
    return torch::stack(rows);
  };
  auto z = draw();
  for (int k = sched.size() - 1; k >= 0; --k) {
    const auto t = torch::full({b}, static_cast<int64_t>(sched.timesteps()[std::size_t(k)]), torch::kLong);
    const auto eps = guided_noise(model.predictor(), z, enc, t, ordered);
    const double ab = sched.alpha_bar(k);
    const double ab_prev = k > 0 ? sched.alpha_bar(k - 1) : 1.0;
    const double beta = sched.betas()[std::size_t(k)];
    const auto x0 = (z - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    const auto mean =
        (std::sqrt(ab_prev) * beta / (1.0 - ab)) * x0 + (std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab)) * z;
    z = k > 0 ? mean + std::sqrt(sched.posterior_variance(k)) * draw() : mean;
  }
  for (int64_t j = 0; j < b; ++j) out[static_cast<int64_t>(members[std::size_t(j)])].copy_(z[j]);
}

}  // namespace

torch::Tensor sample_latents(LatentDiffusion& model, std::span<const SampleItem> items, int steps) {
  torch::NoGradGuard guard;
  model.eval();
  const auto& s = model.schema();
  const int64_t d = model.denoiser()->config().latent_dim;
  auto out = torch::zeros({static_cast<int64_t>(items.size()), s.capacity(), d});
  if (items.empty()) return out;
  const NoiseSchedule sched = steps > 0 ? model.schedule().respaced(steps) : model.schedule();

  std::vector<std::tuple<GroupKey, std::vector<WeightedCondition>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    GuidanceConfig gc;
    gc.weights = items[i].weights;
    const auto ordered = ordered_conditions(gc, presence_of(items[i].conditions));
    const auto key = group_key(ordered);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return std::get<0>(g) == key; });
    if (it == groups.end() || std::get<2>(*it).size() >= kMaxBatch) {
      groups.emplace_back(key, ordered, std::vector<std::size_t>{});
      it = std::prev(groups.end());
    }
    std::get<2>(*it).push_back(i);
  }
  for (const auto& [key, ordered, members] : groups) run_group(model, items, members, ordered, sched, out);
  return out;
}

std::vector<Layout> sample_items(LatentDiffusion& model, std::span<const SampleItem> items, int steps) {
  if (items.empty()) return {};
  const auto z = sample_latents(model, items, steps);
  std::vector<int> counts;
  if (!model.gen_all())
    for (const auto& it : items) counts.push_back(it.element_count.value_or(0));
  return model.decode(z, counts);
}

Layout sample(LatentDiffusion& model, const ConditionSet& cs, const GuidanceConfig& gc) {
  SampleItem item{cs, gc.weights, gc.seed, std::nullopt};
  return sample_items(model, std::span<const SampleItem>(&item, 1), gc.steps).front();
}

std::vector<Layout> sample_batch(LatentDiffusion& model, std::span<const ConditionSet> conditions,
                                 const GuidancePreset& preset, int steps, std::uint64_t root_seed, std::size_t count) {
  if (count == 0) return {};
  if (conditions.size() != 1 && conditions.size() != count)
    throw ValidationError("need one condition set or one per sample", "/conditions");
  std::vector<SampleItem> items;
  items.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& cs = conditions.size() == 1 ? conditions[0] : conditions[i];
    const auto present = presence_of(cs);
    SampleItem item;
    item.conditions = cs;
    if (!cs.empty()) item.weights = preset.resolve(present);
    item.seed = derive_seed(root_seed, i);
    items.push_back(std::move(item));
  }
  return sample_items(model, items, steps);
}

}  // namespace colay::model
