#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "httplib.h"

#include "colay/datasets.hpp"
#include "colay/error.hpp"
#include "colay/metrics.hpp"
#include "colay/model/checkpoint.hpp"
#include "colay/model/evaluation.hpp"
#include "colay/model/sampler.hpp"
#include "colay/model/training.hpp"
#include "colay/render.hpp"
#include "colay/service.hpp"

namespace fs = std::filesystem;
using namespace colay;
using namespace colay::model;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitMissing = 3;

// Relative artifact paths live under $COLAY_HOME when it is set.
std::string artifact(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  const char* home = std::getenv("COLAY_HOME");
  return home && *home ? (fs::path(home) / p).string() : p;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON in ") + path + ": " + e.what(), "/");
  }
}

void write_json_file(const std::string& path, const json& j) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void emit(const json& j) { std::cout << j.dump() << std::endl; }

Corpus require_corpus(const std::string& dir, const SchemaPtr& schema) {
  if (dir.empty() || !fs::exists(dir)) throw MissingArtifactError("corpus not found: " + dir);
  return load_corpus(dir, schema);
}

std::vector<Layout> corpus_layouts(const Corpus& c) {
  std::vector<Layout> out;
  for (const auto& it : c) out.push_back(it.layout);
  return out;
}

// Conditions file: one ConditionSet object, an array of them, or JSONL.
std::vector<ConditionSet> read_conditions(const std::string& path, const SchemaPtr& schema) {
  if (path.empty()) return {ConditionSet{}};
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  std::vector<ConditionSet> out;
  try {
    const auto j = json::parse(text);
    if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) out.push_back(conditions_from_json(j[i], schema, "/" + std::to_string(i)));
    } else {
      out.push_back(conditions_from_json(j, schema));
    }
  } catch (const json::parse_error&) {
    std::istringstream lines(text);
    std::size_t i = 0;
    for (std::string line; std::getline(lines, line); ++i) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(conditions_from_json(json::parse(line), schema, "/" + std::to_string(i)));
      } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed conditions: ") + e.what(), "/" + std::to_string(i));
      }
    }
  }
  if (out.empty()) throw ValidationError("conditions file is empty", "/");
  for (const auto& cs : out) validate_conditions(cs, *schema);
  return out;
}

struct Common {
  std::string schema = "toy";
  std::uint64_t seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Multi-condition layout generation: corpora, training, sampling, evaluation and serving."};
  app.require_subcommand(1);
  Common common;
  app.add_option("--schema", common.schema, "builtin schema (toy, clay, c4) or schema JSON path");
  app.add_option("--seed", common.seed, "root seed");

  // generate-corpus
  auto* gen = app.add_subcommand("generate-corpus", "write a synthetic corpus");
  std::size_t gen_count = 5000;
  std::string gen_out, gen_spec, gen_style = "layout";
  double gen_eval = 0.0;
  gen->add_option("--count", gen_count, "layouts");
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_option("--spec", gen_spec, "SynthSpec JSON overriding the defaults");
  gen->add_option("--style", gen_style, "prompt style: layout, functionality, usability, overview");
  gen->add_option("--eval-fraction", gen_eval, "if > 0, write train/ and eval/ splits");

  // ingest
  auto* ing = app.add_subcommand("ingest", "convert layout JSONL into a corpus");
  std::string ing_in, ing_out;
  int ing_res = 0;
  ing->add_option("--input", ing_in, "JSONL of layout records")->required();
  ing->add_option("--out", ing_out, "corpus directory")->required();
  ing->add_option("--resolution", ing_res, "source coordinate resolution (default: per record or schema)");

  // stats
  auto* st = app.add_subcommand("stats", "element-count histogram and class frequencies");
  std::string st_corpus, st_out;
  st->add_option("--corpus", st_corpus, "corpus directory")->required();
  st->add_option("--out", st_out, "write the report here as well");

  // train-vae
  auto* tv = app.add_subcommand("train-vae", "stage 1: train the layout VAE");
  std::string tv_corpus, tv_out, tv_log, tv_config, tv_eval;
  int tv_steps = -1, tv_batch = -1, tv_every = 1000;
  double tv_lr = -1;
  bool tv_resume = false;
  tv->add_option("--corpus", tv_corpus, "training corpus")->required();
  tv->add_option("--out,--checkpoint", tv_out, "checkpoint path")->required();
  tv->add_option("--steps", tv_steps, "optimizer steps");
  tv->add_option("--batch", tv_batch, "batch size");
  tv->add_option("--lr", tv_lr, "peak learning rate");
  tv->add_option("--log", tv_log, "JSONL loss log");
  tv->add_option("--config", tv_config, "JSON training config merged over the desk preset");
  tv->add_option("--checkpoint-every", tv_every, "steps between checkpoints");
  tv->add_option("--eval-corpus", tv_eval, "report held-out attribute accuracy");
  tv->add_flag("--resume", tv_resume, "continue from the checkpoint if present");

  // train-diffusion
  auto* td = app.add_subcommand("train-diffusion", "stage 2: train condition encoders and denoiser");
  std::string td_corpus, td_vae, td_out, td_log, td_config, td_sampling;
  int td_steps = -1, td_batch = -1, td_t = -1, td_every = 1000;
  double td_lr = -1, td_pcfg = -1, td_pcond = -1, td_pbase = -1;
  bool td_resume = false, td_no_sort = false, td_no_gen_all = false;
  td->add_option("--corpus", td_corpus, "training corpus")->required();
  td->add_option("--vae", td_vae, "stage-1 checkpoint")->required();
  td->add_option("--out,--checkpoint", td_out, "checkpoint path")->required();
  td->add_option("--steps", td_steps, "optimizer steps");
  td->add_option("--batch", td_batch, "batch size");
  td->add_option("--lr", td_lr, "peak learning rate");
  td->add_option("--diffusion-steps", td_t, "training timesteps T");
  td->add_option("--p-cfg", td_pcfg, "probability of dropping all conditions");
  td->add_option("--p-cond", td_pcond, "probability of dropping each remaining condition");
  td->add_option("--p-base", td_pbase, "guideline keep base probability");
  td->add_option("--guideline-sampling", td_sampling, "mean (default) or sum");
  td->add_option("--log", td_log, "JSONL loss log");
  td->add_option("--config", td_config, "JSON training config merged over the desk preset");
  td->add_option("--checkpoint-every", td_every, "steps between checkpoints");
  td->add_flag("--resume", td_resume, "continue from the checkpoint if present");
  td->add_flag("--no-sort", td_no_sort, "train on layouts in their stored order");
  td->add_flag("--no-gen-all", td_no_gen_all, "condition on the element count and skip invalid rows");

  // sample
  auto* sm = app.add_subcommand("sample", "generate layouts as JSON + PNG");
  std::string sm_ckpt, sm_cond, sm_preset = "single:2.5", sm_out;
  std::size_t sm_count = 1;
  int sm_steps = 0, sm_elements = 0;
  sm->add_option("--checkpoint", sm_ckpt, "diffusion checkpoint")->required();
  sm->add_option("--conditions", sm_cond, "ConditionSet JSON (object, array or JSONL); empty: unconditional");
  sm->add_option("--preset", sm_preset, "guidance preset: single:<w>, clay, c4, clay-all, c4-all or a JSON file");
  sm->add_option("--count", sm_count, "samples");
  sm->add_option("--steps", sm_steps, "sampling steps (0: all)");
  sm->add_option("--element-count", sm_elements, "element count for models trained without gen-all");
  sm->add_option("--out", sm_out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "sample and score against a held-out corpus");
  std::string ev_ckpt, ev_corpus, ev_mode = "unconditional", ev_preset = "single:2.5", ev_out;
  std::size_t ev_count = 256, ev_k = 100;
  int ev_steps = 0;
  ev->add_option("--checkpoint", ev_ckpt, "diffusion checkpoint")->required();
  ev->add_option("--corpus", ev_corpus, "evaluation corpus")->required();
  ev->add_option("--mode", ev_mode, "unconditional, all, or a key such as G or G+E+C+P");
  ev->add_option("--preset", ev_preset, "guidance preset");
  ev->add_option("--count", ev_count, "samples");
  ev->add_option("--k", ev_k, "retrieval depth for the cycle metrics");
  ev->add_option("--steps", ev_steps, "sampling steps (0: all)");
  ev->add_option("--out", ev_out, "report path (also printed)");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP API for generation and condition extraction");
  std::string sv_ckpt, sv_host = "127.0.0.1", sv_preset = "single:2.5", sv_log;
  int sv_port = 8080, sv_steps = 0;
  sv->add_option("--checkpoint", sv_ckpt, "diffusion checkpoint; without it generation answers 503");
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--port", sv_port, "port");
  sv->add_option("--preset", sv_preset, "default guidance preset");
  sv->add_option("--steps", sv_steps, "default sampling steps (0: all)");
  sv->add_option("--session-log", sv_log, "append session steps to this JSONL file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    const auto schema = load_schema(common.schema);

    if (*gen) {
      SynthSpec spec;
      if (!gen_spec.empty()) spec = synth_spec_from_json(read_json_file(artifact(gen_spec)));
      if (!spec.schema) spec.schema = schema;
      spec.size = gen_count;
      spec.seed = common.seed;
      if (gen_spec.empty()) spec.prompt_style = prompt_style_from_string(gen_style);
      const auto corpus = generate_corpus(spec);
      const auto out = artifact(gen_out);
      if (gen_eval > 0.0) {
        const auto split = split_corpus(corpus, gen_eval, common.seed);
        save_corpus(split.train, (fs::path(out) / "train").string());
        save_corpus(split.eval, (fs::path(out) / "eval").string());
        emit({{"out", out}, {"train", split.train.size()}, {"eval", split.eval.size()}});
      } else {
        save_corpus(corpus, out);
        emit({{"out", out}, {"layouts", corpus.size()}});
      }
    } else if (*ing) {
      const auto report = ingest(artifact(ing_in), schema, ing_res);
      Corpus corpus;
      for (std::size_t i = 0; i < report.layouts.size(); ++i)
        corpus.push_back({report.layouts[i], synthesize_prompt(report.layouts[i], PromptStyle::Layout, common.seed + i), {}});
      save_corpus(corpus, artifact(ing_out));
      emit({{"layouts", report.layouts.size()},
            {"dropped_oversize", report.dropped_oversize},
            {"malformed", report.malformed}});
    } else if (*st) {
      const auto corpus = require_corpus(artifact(st_corpus), schema);
      const auto report = stats_to_json(stats(corpus_layouts(corpus), schema->num_classes()), *schema);
      if (!st_out.empty()) write_json_file(artifact(st_out), report);
      emit(report);
    } else if (*tv) {
      const auto corpus = require_corpus(artifact(tv_corpus), schema);
      json cfg_json = VaeTrainConfig().to_json();
      if (!tv_config.empty()) cfg_json.merge_patch(read_json_file(artifact(tv_config)));
      auto cfg = VaeTrainConfig::from_json(cfg_json);
      if (tv_steps >= 0) cfg.optim.steps = tv_steps;
      if (tv_batch > 0) cfg.optim.batch = tv_batch;
      if (tv_lr > 0) cfg.optim.lr = tv_lr;
      cfg.optim.seed = common.seed;
      TrainIo io;
      io.checkpoint = artifact(tv_out);
      io.log = artifact(tv_log);
      io.resume = tv_resume;
      io.checkpoint_every = tv_every;
      if (const auto parent = fs::path(io.checkpoint).parent_path(); !parent.empty()) fs::create_directories(parent);
      auto result = train_vae(corpus_layouts(corpus), schema, cfg, io);
      json out = {{"checkpoint", io.checkpoint}, {"steps", result.steps}, {"final_loss", result.final_loss},
                  {"config_hash", read_checkpoint(io.checkpoint).header.at("config_hash")}};
      if (!tv_eval.empty()) {
        const auto held = require_corpus(artifact(tv_eval), schema);
        const auto layouts = corpus_layouts(held);
        out["held_out_accuracy"] = attribute_accuracy(result.vae, layouts);
      }
      emit(out);
    } else if (*td) {
      const auto vae_path = artifact(td_vae);
      if (!fs::exists(vae_path)) throw MissingArtifactError("stage-1 VAE checkpoint not found: " + vae_path);
      auto [vae, vckpt] = load_vae(vae_path, schema.get());
      const auto corpus = require_corpus(artifact(td_corpus), schema);
      json cfg_json = DiffusionTrainConfig().to_json();
      if (!td_config.empty()) cfg_json.merge_patch(read_json_file(artifact(td_config)));
      auto cfg = DiffusionTrainConfig::from_json(cfg_json);
      if (td_steps >= 0) cfg.optim.steps = td_steps;
      if (td_batch > 0) cfg.optim.batch = td_batch;
      if (td_lr > 0) cfg.optim.lr = td_lr;
      if (td_t > 0) cfg.diffusion_steps = td_t;
      if (td_pcfg >= 0) cfg.dropout.p_cfg = td_pcfg;
      if (td_pcond >= 0) cfg.dropout.p_cond = td_pcond;
      if (td_pbase >= 0) cfg.p_base = td_pbase;
      if (!td_sampling.empty()) {
        if (td_sampling != "mean" && td_sampling != "sum")
          throw ValidationError("guideline sampling must be mean or sum", "/guideline_sampling");
        cfg.guideline_sampling = td_sampling == "mean" ? GuidelineSampling::MeanNormalized : GuidelineSampling::SumNormalized;
      }
      if (td_no_sort) cfg.sort = false;
      if (td_no_gen_all) cfg.denoiser.gen_all = false;
      cfg.optim.seed = common.seed;
      TrainIo io;
      io.checkpoint = artifact(td_out);
      io.log = artifact(td_log);
      io.resume = td_resume;
      io.checkpoint_every = td_every;
      if (const auto parent = fs::path(io.checkpoint).parent_path(); !parent.empty()) fs::create_directories(parent);
      const auto result = train_diffusion(corpus, vae, cfg, io);
      emit({{"checkpoint", io.checkpoint}, {"steps", result.steps}, {"final_loss", result.final_loss},
            {"config_hash", read_checkpoint(io.checkpoint).header.at("config_hash")}});
    } else if (*sm) {
      auto [model, ckpt] = load_diffusion(artifact(sm_ckpt), schema.get());
      const auto conditions = read_conditions(artifact(sm_cond), schema);
      const auto preset = load_preset(sm_preset);
      if (conditions.size() != 1 && conditions.size() != sm_count)
        throw ValidationError("need one condition set or one per sample", "/conditions");
      std::vector<SampleItem> items;
      for (std::size_t i = 0; i < sm_count; ++i) {
        const auto& cs = conditions.size() == 1 ? conditions[0] : conditions[i];
        SampleItem it{cs, {}, derive_seed(common.seed, i), std::nullopt};
        if (!cs.empty()) it.weights = preset.resolve(presence_of(cs));
        if (!model->gen_all()) {
          if (sm_elements < 1) throw ValidationError("this model needs --element-count", "/element_count");
          it.element_count = sm_elements;
        }
        items.push_back(std::move(it));
      }
      const auto layouts = sample_items(*model, items, sm_steps);
      const auto out = artifact(sm_out);
      fs::create_directories(out);
      json files = json::array();
      for (std::size_t i = 0; i < layouts.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%04zu", i);
        const auto base = (fs::path(out) / stem).string();
        std::ofstream(base + ".json") << layout_to_json(layouts[i]).dump() << '\n';
        write_png(render(layouts[i], schema->canvas_width(), schema->canvas_height()), base + ".png");
        files.push_back(std::string(stem) + ".json");
      }
      emit({{"out", out}, {"samples", files}});
    } else if (*ev) {
      auto [model, ckpt] = load_diffusion(artifact(ev_ckpt), schema.get());
      const auto corpus = require_corpus(artifact(ev_corpus), schema);
      EvalOptions opt;
      opt.mode = parse_eval_mode(ev_mode);
      opt.samples = ev_count;
      opt.steps = ev_steps;
      opt.seed = common.seed;
      opt.k = ev_k;
      opt.preset = ev_preset;
      std::vector<Prompt> prompts;
      for (const auto& it : corpus) prompts.push_back(it.prompt);
      const RandomConvFeatureExtractor fx;
      const TfidfSentenceEncoder se(prompts);
      const auto report = evaluate(*model, corpus, opt, fx, se);
      if (!ev_out.empty()) write_json_file(artifact(ev_out), report);
      emit(report);
    } else if (*sv) {
      std::shared_ptr<LatentDiffusion> model;
      if (!sv_ckpt.empty()) model = std::shared_ptr<LatentDiffusion>(load_diffusion(artifact(sv_ckpt), schema.get()).first.release());
      ServiceConfig cfg;
      cfg.schema = model ? model->schema_ptr() : schema;
      cfg.default_preset = sv_preset;
      cfg.default_steps = sv_steps;
      cfg.session_log = artifact(sv_log);
      Service service(cfg, model);
      httplib::Server server;
      service.bind(server);
      std::cerr << "listening on " << sv_host << ":" << sv_port << std::endl;
      if (!server.listen(sv_host, sv_port)) throw MissingArtifactError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
    }
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", "validation_error"}, {"detail", e.path()}, {"message", e.what()}}.dump() << std::endl;
    return kExitValidation;
  } catch (const MissingArtifactError& e) {
    std::cerr << json{{"error", "missing_artifact"}, {"detail", e.what()}}.dump() << std::endl;
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal_error"}, {"detail", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
