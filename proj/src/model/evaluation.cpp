#include "colay/model/evaluation.hpp"

#include <algorithm>

#include "colay/error.hpp"
#include "colay/model/sampler.hpp"

namespace colay::model {

PresenceMask parse_eval_mode(const std::string& mode) {
  if (mode == "unconditional" || mode == "none") return PresenceMask{};
  if (mode == "all") return PresenceMask{true, true, true, true};
  return parse_combination_key(mode);
}

std::string eval_mode_name(const PresenceMask& mode) {
  if (mode == PresenceMask{}) return "unconditional";
  return combination_key(mode);
}

EvalConditions eval_conditions(const Corpus& corpus, const EvalOptions& opt) {
  if (corpus.empty()) throw ValidationError("evaluation corpus is empty", "/corpus");
  auto on = [&](ConditionKind k) { return opt.mode[std::size_t(k)]; };
  EvalConditions out;
  std::size_t misses = 0;
  for (std::size_t i = 0; out.conditions.size() < opt.samples; ++i) {
    const auto& item = corpus[i % corpus.size()];
    Rng rng(derive_seed(opt.seed ^ 0x5eedc0de, i));
    const Layout layout = sort_canonical(item.layout);
    const auto n = layout.valid_count();
    ConditionSet cs;
    bool ok = true;
    if (on(ConditionKind::Prompt)) {
      ok = ok && !item.prompt.empty();
      cs.prompt = item.prompt;
    }
    if (on(ConditionKind::ClassCount)) {
      ok = ok && n > 0;
      cs.class_count = count_classes(layout);
    }
    if (on(ConditionKind::GivenDesign)) {
      ok = ok && n > 0;
      if (n > 0) cs.given_design = subset_given_design(layout, std::max(opt.given_fraction, 1.0 / double(n)), rng);
    }
    if (on(ConditionKind::Guidelines)) {
      auto lines = sample_guidelines(extract_guidelines(layout), opt.p_base, rng);
      ok = ok && !lines.empty();
      cs.guidelines = std::move(lines);
    }
    if (!ok) {
      if (++misses > 16 * corpus.size() + opt.samples)
        throw ValidationError("no evaluation item can supply the requested conditions", "/mode");
      continue;
    }
    out.conditions.push_back(std::move(cs));
    out.source.push_back(i % corpus.size());
  }
  return out;
}

MeanScores mean_scores(std::span<const ConditionSet> conditions, std::span<const Layout> generated) {
  double c = 0, d = 0, g = 0;
  std::size_t nc = 0, nd = 0, ng = 0;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto s = score_conditions(conditions[i], generated[i]);
    if (s.c_usage) c += *s.c_usage, ++nc;
    if (s.design_distance) d += *s.design_distance, ++nd;
    if (s.g_usage) g += *s.g_usage, ++ng;
  }
  MeanScores out;
  if (nc) out.c_usage = c / double(nc);
  if (nd) out.design_distance = d / double(nd);
  if (ng) out.g_usage = g / double(ng);
  return out;
}

json evaluate(LatentDiffusion& model, const Corpus& eval_corpus, const EvalOptions& opt, const FeatureExtractor& fx,
              const SentenceEncoder& se) {
  if (opt.samples == 0) throw ValidationError("sample count must be positive", "/count");
  if (eval_corpus.front().layout.schema() != model.schema())
    throw ValidationError("evaluation corpus uses a different schema", "/schema");
  const auto preset = load_preset(opt.preset);
  const auto ec = eval_conditions(eval_corpus, opt);

  std::vector<SampleItem> items;
  for (std::size_t i = 0; i < ec.conditions.size(); ++i) {
    SampleItem it;
    it.conditions = ec.conditions[i];
    if (!it.conditions.empty()) it.weights = preset.resolve(presence_of(it.conditions));
    it.seed = derive_seed(opt.seed, i);
    if (!model.gen_all()) it.element_count = int(std::max<std::size_t>(1, eval_corpus[ec.source[i]].layout.valid_count()));
    items.push_back(std::move(it));
  }
  const auto generated = sample_items(model, items, opt.steps);

  std::vector<FeatureVector> real, gen;
  for (std::size_t i = 0; i < std::min(opt.samples, eval_corpus.size()); ++i)
    real.push_back(layout_features(eval_corpus[i].layout, fx));
  for (const auto& l : generated) gen.push_back(layout_features(l, fx));
  const auto f = fid(real, gen);

  json metrics = {{"fid", f.value}, {"cyc_sim_p", nullptr}, {"cyc_sim_l", nullptr},
                  {"c_usage", nullptr}, {"design_distance", nullptr}, {"g_usage", nullptr}};
  if (opt.mode[std::size_t(ConditionKind::Prompt)]) {
    std::vector<Layout> layouts;
    std::vector<Prompt> prompts;
    for (const auto& it : eval_corpus) {
      layouts.push_back(it.layout);
      prompts.push_back(it.prompt);
    }
    const auto pool = EvalCorpus::build(std::move(layouts), std::move(prompts), fx, se);
    const std::size_t k = std::min(opt.k, pool.size());
    double p = 0, l = 0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
      const auto q = se.encode(*ec.conditions[i].prompt);
      p += cyc_sim_p(q, gen[i], pool, k);
      l += cyc_sim_l(q, gen[i], pool, k);
    }
    metrics["cyc_sim_p"] = p / double(generated.size());
    metrics["cyc_sim_l"] = l / double(generated.size());
  }
  const auto m = mean_scores(ec.conditions, generated);
  if (m.c_usage) metrics["c_usage"] = *m.c_usage;
  if (m.design_distance) metrics["design_distance"] = *m.design_distance;
  if (m.g_usage) metrics["g_usage"] = *m.g_usage;

  return {{"version", kEvalReportVersion},
          {"mode", eval_mode_name(opt.mode)},
          {"samples", generated.size()},
          {"steps", opt.steps > 0 ? opt.steps : model.schedule().size()},
          {"seed", opt.seed},
          {"preset", opt.preset},
          {"fid_regularized", f.regularized},
          {"feature_extractor", fx.hash()},
          {"metrics", metrics}};
}

}  // namespace colay::model
