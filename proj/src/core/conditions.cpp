#include "colay/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "colay/error.hpp"

namespace colay {

std::size_t Prompt::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<std::string> Prompt::tokens() const {
  std::vector<std::string> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string Prompt::text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ' ';
      out += s[i];
    }
    out += '.';
  }
  return out;
}

bool ConditionSet::has(ConditionKind k) const {
  switch (k) {
    case ConditionKind::Prompt: return prompt.has_value();
    case ConditionKind::ClassCount: return class_count.has_value();
    case ConditionKind::GivenDesign: return given_design.has_value();
    case ConditionKind::Guidelines: return guidelines.has_value();
  }
  return false;
}

void ConditionSet::drop(ConditionKind k) {
  switch (k) {
    case ConditionKind::Prompt: prompt.reset(); break;
    case ConditionKind::ClassCount: class_count.reset(); break;
    case ConditionKind::GivenDesign: given_design.reset(); break;
    case ConditionKind::Guidelines: guidelines.reset(); break;
  }
}

bool ConditionSet::empty() const { return !prompt && !class_count && !given_design && !guidelines; }

std::vector<WeightedGuideline> extract_guidelines(const Layout& layout) {
  const auto& s = layout.schema();
  const double cell_w = static_cast<double>(s.canvas_width()) / s.resolution();
  const double cell_h = static_cast<double>(s.canvas_height()) / s.resolution();
  std::map<Guideline, double> weights;
  for (const auto& e : layout.elements()) {
    if (!e.valid) continue;
    const Box b = element_box(s, e);
    // Vertical edges lie on X lines and span the box height; horizontal
    // edges lie on Y lines and span its width.
    const double height = (b.y_max - b.y_min + 1) * cell_h;
    const double width = (b.x_max - b.x_min + 1) * cell_w;
    weights[{Axis::X, b.x_min}] += height;
    weights[{Axis::X, b.x_max}] += height;
    weights[{Axis::Y, b.y_min}] += width;
    weights[{Axis::Y, b.y_max}] += width;
  }
  std::vector<WeightedGuideline> out;
  out.reserve(weights.size());
  for (const auto& [g, h] : weights) out.push_back({g, h});
  return out;
}

std::vector<Guideline> guideline_set(const std::vector<WeightedGuideline>& weighted) {
  std::vector<Guideline> out;
  out.reserve(weighted.size());
  for (const auto& w : weighted) out.push_back(w.guideline);
  return out;
}

double guideline_keep_probability(double weight, double mean_weight, double p_base) {
  if (weight <= 0.0) return 0.0;
  return std::pow(p_base, mean_weight / weight);
}

std::vector<Guideline> sample_guidelines(const std::vector<WeightedGuideline>& gs, double p_base, Rng& rng,
                                         GuidelineSampling mode) {
  if (!(p_base > 0.0 && p_base <= 1.0)) throw ValidationError("p_base must lie in (0, 1]", "/p_base");
  std::vector<Guideline> out;
  if (gs.empty()) return out;
  const double total = std::accumulate(gs.begin(), gs.end(), 0.0,
                                       [](double acc, const WeightedGuideline& w) { return acc + w.weight; });
  const double mean = total / static_cast<double>(gs.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& w : gs) {
    const double p = mode == GuidelineSampling::MeanNormalized ? guideline_keep_probability(w.weight, mean, p_base)
                                                               : (total > 0.0 ? w.weight / total : 0.0);
    if (u(rng) < p) out.push_back(w.guideline);
  }
  return out;
}

std::vector<Guideline> sample_guidelines(const std::vector<WeightedGuideline>& gs, double p_base,
                                         std::uint64_t seed) {
  Rng rng(seed);
  return sample_guidelines(gs, p_base, rng);
}

Layout subset_given_design(const Layout& layout, double keep_fraction, Rng& rng) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0))
    throw ValidationError("keep_fraction must lie in [0, 1]", "/keep_fraction");
  const auto valid = layout.valid_elements();
  const auto keep = static_cast<std::size_t>(std::lround(keep_fraction * static_cast<double>(valid.size())));
  std::vector<std::size_t> idx(valid.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates picks a uniform k-subset.
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<Element> kept;
  kept.reserve(keep);
  for (auto i : idx) kept.push_back(valid[i]);
  return Layout::from_valid(layout.schema_ptr(), std::move(kept));
}

Layout subset_given_design(const Layout& layout, double keep_fraction, std::uint64_t seed) {
  Rng rng(seed);
  return subset_given_design(layout, keep_fraction, rng);
}

std::vector<int> subset_class_count(const std::vector<int>& counts, Rng& rng, double keep_probability) {
  std::bernoulli_distribution keep(keep_probability);
  std::vector<int> out(counts.size(), 0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 0) throw ValidationError("class counts must be non-negative", "/class_count/" + std::to_string(k));
    if (counts[k] > 0 && keep(rng)) out[k] = counts[k];
  }
  return out;
}

std::vector<int> subset_class_count(const std::vector<int>& counts, std::uint64_t seed) {
  Rng rng(seed);
  return subset_class_count(counts, rng);
}

Prompt subset_prompt(const Prompt& p, Rng& rng, double keep_probability) {
  if (p.empty()) throw ValidationError("cannot subset an empty prompt", "/prompt");
  std::bernoulli_distribution keep(keep_probability);
  std::vector<bool> mask(p.sentences.size());
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = keep(rng);
    any = any || mask[i];
  }
  if (!any) {
    std::uniform_int_distribution<std::size_t> pick(0, mask.size() - 1);
    mask[pick(rng)] = true;
  }
  Prompt out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.sentences.push_back(p.sentences[i]);
  return out;
}

Prompt subset_prompt(const Prompt& p, std::uint64_t seed) {
  Rng rng(seed);
  return subset_prompt(p, rng);
}

ConditionSet apply_dropout(const ConditionSet& cs, const DropoutPolicy& policy, Rng& rng) {
  if (!(policy.p_cfg >= 0.0 && policy.p_cfg <= 1.0)) throw ValidationError("p_cfg must lie in [0, 1]", "/p_cfg");
  if (!(policy.p_cond >= 0.0 && policy.p_cond <= 1.0)) throw ValidationError("p_cond must lie in [0, 1]", "/p_cond");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < policy.p_cfg) return {};
  ConditionSet out = cs;
  for (std::size_t k = 0; k < kConditionKinds; ++k) {
    const auto kind = static_cast<ConditionKind>(k);
    // Draw for every slot so the stream stays aligned regardless of presence.
    const bool drop = u(rng) < policy.p_cond;
    if (drop) out.drop(kind);
  }
  return out;
}

ConditionSet apply_dropout(const ConditionSet& cs, const DropoutPolicy& policy, std::uint64_t seed) {
  Rng rng(seed);
  return apply_dropout(cs, policy, rng);
}

ConditionSet extract_conditions(const Layout& layout, std::optional<Prompt> prompt) {
  ConditionSet cs;
  if (prompt && !prompt->empty()) cs.prompt = std::move(prompt);
  cs.class_count = count_classes(layout);
  cs.given_design = layout;
  cs.guidelines = guideline_set(extract_guidelines(layout));
  return cs;
}

void validate_conditions(const ConditionSet& cs, const AttributeSchema& schema) {
  if (cs.prompt) {
    if (cs.prompt->empty()) throw ValidationError("prompt must contain at least one sentence", "/prompt");
    for (std::size_t i = 0; i < cs.prompt->sentences.size(); ++i)
      if (cs.prompt->sentences[i].empty())
        throw ValidationError("prompt sentence is empty", "/prompt/" + std::to_string(i));
  }
  if (cs.class_count) {
    if (cs.class_count->size() != static_cast<std::size_t>(schema.num_classes()))
      throw ValidationError("class_count must have " + std::to_string(schema.num_classes()) + " entries",
                            "/class_count");
    for (std::size_t k = 0; k < cs.class_count->size(); ++k)
      if ((*cs.class_count)[k] < 0)
        throw ValidationError("class counts must be non-negative", "/class_count/" + std::to_string(k));
  }
  if (cs.given_design) {
    if (!(cs.given_design->schema() == schema))
      throw ValidationError("given design uses a different schema", "/given_design/schema");
    cs.given_design->validate();
  }
  if (cs.guidelines) {
    std::set<Guideline> seen;
    for (std::size_t i = 0; i < cs.guidelines->size(); ++i) {
      const auto& g = (*cs.guidelines)[i];
      if (g.position < 0 || g.position >= schema.resolution())
        throw ValidationError("guideline position outside [0, " + std::to_string(schema.resolution()) + ")",
                              "/guidelines/" + std::to_string(i) + "/pos");
      if (!seen.insert(g).second)
        throw ValidationError("duplicate guideline", "/guidelines/" + std::to_string(i));
    }
  }
}

}  // namespace colay
