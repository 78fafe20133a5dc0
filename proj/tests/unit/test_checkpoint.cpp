#include "support/torch_doctest.hpp"

#include <filesystem>
#include <fstream>

#include "colay/error.hpp"
#include "colay/model/checkpoint.hpp"
#include "colay/model/sampler.hpp"
#include "colay/model/training.hpp"
#include "support/model_fixtures.hpp"

using namespace colay;
using namespace colay::model;
using namespace colay::testing;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& n) const { return (path / n).string(); }
};

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("diffusion checkpoint roundtrip reproduces samples") {
  TempDir dir("colay_ckpt_roundtrip");
  auto m = tiny_model(6);
  save_diffusion(dir.file("m.ckpt"), *m, 12);
  auto [loaded, ckpt] = load_diffusion(dir.file("m.ckpt"));
  CHECK(ckpt.kind() == "diffusion");
  CHECK(ckpt.header.at("step") == 12);
  CHECK(ckpt.header.contains("config_hash"));
  CHECK(loaded->latent_scale() == m->latent_scale());
  CHECK(loaded->encoders()->vocabulary().tokens() == m->encoders()->vocabulary().tokens());
  const auto cs = extract_conditions(small_corpus(toy_schema(), 1, 8)[0].layout);
  std::vector<SampleItem> items{{cs, {{ConditionKind::ClassCount, 1.5}, {ConditionKind::GivenDesign, 1.0},
                                      {ConditionKind::Guidelines, 2.0}}, 5, std::nullopt}};
  CHECK(torch::equal(sample_latents(*m, items, 4), sample_latents(*loaded, items, 4)));

  SUBCASE("the embedded VAE loads on its own") {
    auto [vae, vc] = load_vae(dir.file("m.ckpt"));
    for (const auto& [name, t] : named_state(*vae))
      CHECK(torch::equal(t, ckpt.tensor("vae." + name)));
  }
}

TEST_CASE("checkpoints refuse a different schema and corrupt files") {
  TempDir dir("colay_ckpt_errors");
  auto m = tiny_model(7);
  save_diffusion(dir.file("m.ckpt"), *m, 1);
  const auto other = AttributeSchema::clay();
  CHECK_THROWS_AS(load_diffusion(dir.file("m.ckpt"), &other), ValidationError);
  CHECK_NOTHROW(load_diffusion(dir.file("m.ckpt"), toy_schema().get()));
  CHECK_THROWS_AS(load_diffusion(dir.file("absent.ckpt")), MissingArtifactError);
  {
    std::ofstream(dir.file("junk.ckpt")) << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_diffusion(dir.file("junk.ckpt")), MissingArtifactError);
  {
    std::ifstream in(dir.file("m.ckpt"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(dir.file("cut.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_AS(load_diffusion(dir.file("cut.ckpt")), MissingArtifactError);
  save_vae(dir.file("v.ckpt"), m->vae(), 3);
  CHECK_THROWS_AS(load_diffusion(dir.file("v.ckpt")), MissingArtifactError);
}

TEST_CASE("config hashes are stable and sensitive") {
  const json a = {{"x", 1}, {"y", {1, 2}}};
  CHECK(config_hash(a) == config_hash(json::parse(a.dump())));
  CHECK(config_hash(a) != config_hash({{"x", 2}, {"y", {1, 2}}}));
}

TEST_CASE("learning rate warms up then decays to the floor") {
  OptimConfig c;
  c.steps = 100;
  c.warmup = 10;
  c.lr = 1.0;
  c.min_lr_fraction = 0.1;
  CHECK(learning_rate(c, 0) == doctest::Approx(0.1));
  CHECK(learning_rate(c, 9) == doctest::Approx(1.0));
  CHECK(learning_rate(c, 10) == doctest::Approx(1.0));
  CHECK(learning_rate(c, 100) == doctest::Approx(0.1));
  CHECK(learning_rate(c, 55) < learning_rate(c, 30));
}

TEST_CASE("training conditions are subsets of the layout's conditions") {
  const auto corpus = small_corpus(toy_schema(), 50, 12);
  DiffusionTrainConfig cfg;
  cfg.dropout = {0.0, 0.0};
  Rng rng(4);
  std::size_t with_all = 0;
  for (const auto& it : corpus) {
    const auto sorted = sort_canonical(it.layout);
    const auto cs = training_conditions(it, cfg, rng);
    if (cs.class_count) {
      const auto full = count_classes(sorted);
      for (std::size_t k = 0; k < full.size(); ++k) CHECK(((*cs.class_count)[k] == 0 || (*cs.class_count)[k] == full[k]));
    }
    if (cs.guidelines) {
      const auto all = guideline_set(extract_guidelines(sorted));
      for (const auto& g : *cs.guidelines) CHECK(std::find(all.begin(), all.end(), g) != all.end());
      CHECK_FALSE(cs.guidelines->empty());
    }
    if (cs.given_design) {
      CHECK(cs.given_design->valid_count() > 0);
      for (const auto& e : cs.given_design->valid_elements())
        CHECK(std::find(sorted.elements().begin(), sorted.elements().end(), e) != sorted.elements().end());
    }
    with_all += cs.prompt && cs.class_count && cs.guidelines && cs.given_design;
  }
  CHECK(with_all > 0);

  SUBCASE("full dropout leaves nothing") {
    cfg.dropout = {1.0, 0.0};
    for (const auto& it : corpus) CHECK(training_conditions(it, cfg, rng).empty());
  }
}

TEST_CASE("short training runs log, checkpoint and resume the step counter") {
  single_thread();
  TempDir dir("colay_train_resume");
  const auto schema = toy_schema();
  const auto corpus = small_corpus(schema, 40, 2);
  std::vector<Layout> layouts;
  for (const auto& it : corpus) layouts.push_back(it.layout);

  VaeTrainConfig vc;
  vc.model = tiny_vae_config();
  vc.optim.steps = 6;
  vc.optim.batch = 8;
  TrainIo vio;
  vio.checkpoint = dir.file("vae.ckpt");
  vio.log = dir.file("vae.jsonl");
  vio.log_every = 2;
  const auto vr = train_vae(layouts, schema, vc, vio);
  CHECK(vr.steps == 6);
  const auto vlog = read_jsonl(vio.log);
  REQUIRE(vlog.size() == 3);
  CHECK(vlog.back().at("step") == 6);
  CHECK(vlog.back().contains("reconstruction"));

  DiffusionTrainConfig dc;
  dc.encoders = tiny_encoder_config();
  dc.denoiser = tiny_denoiser_config(4, schema->capacity());
  dc.optim.steps = 4;
  dc.optim.batch = 8;
  dc.optim.warmup = 0;
  dc.optim.min_lr_fraction = 1.0;  // constant rate, so the total step count does not matter
  dc.diffusion_steps = 20;
  TrainIo dio;
  dio.checkpoint = dir.file("diff.ckpt");
  dio.log = dir.file("diff.jsonl");
  dio.log_every = 1;
  dio.checkpoint_every = 2;
  const auto first = train_diffusion(corpus, vr.vae, dc, dio);
  CHECK(first.steps == 4);
  CHECK(read_checkpoint(dio.checkpoint).header.at("step") == 4);

  SUBCASE("a resumed run continues from the saved step") {
    dc.optim.steps = 7;
    dio.resume = true;
    const auto resumed = train_diffusion(corpus, vr.vae, dc, dio);
    CHECK(resumed.steps == 7);
    const auto log = read_jsonl(dio.log);
    REQUIRE(log.size() == 7);
    for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].at("step") == int(i + 1));
    CHECK(read_checkpoint(dio.checkpoint).header.at("step") == 7);
  }
  SUBCASE("resuming matches an uninterrupted run") {
    dc.optim.steps = 7;
    dio.resume = true;
    const auto resumed = train_diffusion(corpus, vr.vae, dc, dio);
    TrainIo straight;
    straight.checkpoint = dir.file("straight.ckpt");
    straight.checkpoint_every = 0;
    const auto full = train_diffusion(corpus, vr.vae, dc, straight);
    CHECK(resumed.final_loss == doctest::Approx(full.final_loss).epsilon(1e-4));
  }
}
