#include "support/torch_doctest.hpp"

#include "colay/error.hpp"
#include "colay/model/condition_encoders.hpp"
#include "support/model_fixtures.hpp"

using namespace colay;
using namespace colay::model;
using namespace colay::testing;

namespace {

struct Fixture {
  SchemaPtr schema = toy_schema();
  Corpus corpus = small_corpus(schema, 32, 5);
  Vae vae{schema, tiny_vae_config()};
  ConditionEncoders enc{schema, corpus_vocab(corpus), tiny_encoder_config(), 4};
  Fixture() {
    single_thread();
    vae->eval();
    enc->eval();
  }
};

Prompt words(std::size_t n) {
  Prompt p;
  p.sentences.emplace_back();
  for (std::size_t i = 0; i < n; ++i) p.sentences.back().push_back(i % 2 ? "button" : "image");
  return p;
}

}  // namespace

TEST_CASE("vocabulary order, unknown words and file roundtrip") {
  auto v = Vocabulary::build({words(3), words(2)});
  CHECK(v.token(Vocabulary::kPad) == "[PAD]");
  CHECK(v.token(Vocabulary::kUnknown) == "[UNK]");
  CHECK(v.token(2) == "image");  // 3 occurrences against 2
  CHECK(v.id("never-seen") == Vocabulary::kUnknown);
  CHECK(v.encode(words(5), 3).size() == 3);
  const auto path = std::filesystem::temp_directory_path() / "colay_vocab_test.txt";
  v.save(path.string());
  CHECK(Vocabulary::load(path.string()).tokens() == v.tokens());
  std::filesystem::remove(path);
}

TEST_CASE("prompt encoder truncates and pools") {
  Fixture f;
  torch::NoGradGuard g;
  torch::Tensor mask;
  std::vector<Prompt> ps{words(200), words(1)};
  auto [seq, pool] = f.enc->encode_prompt(ps, &mask);
  CHECK(seq.size(1) == 128);
  CHECK(mask[0].sum().item<int64_t>() == 128);
  CHECK(mask[1].sum().item<int64_t>() == 1);
  CHECK(torch::allclose(pool[1], seq[1][0], 1e-5, 1e-6));
  CHECK(torch::allclose(pool[0], seq[0].mean(0), 1e-5, 1e-5));
}

TEST_CASE("class count encoder emits one row per class and validates") {
  Fixture f;
  torch::NoGradGuard g;
  std::vector<std::vector<int>> counts{{1, 0, 3, 2}};
  CHECK(f.enc->encode_class_count(counts).sizes() == torch::IntArrayRef({1, 4, 16}));
  std::vector<std::vector<int>> bad{{1, 0, 3}};
  CHECK_THROWS_AS(f.enc->encode_class_count(bad), ValidationError);
  std::vector<std::vector<int>> neg{{1, -1, 3, 0}};
  CHECK_THROWS_AS(f.enc->encode_class_count(neg), ValidationError);
}

TEST_CASE("guideline encoder is order invariant and bounded") {
  Fixture f;
  torch::NoGradGuard g;
  std::vector<std::vector<Guideline>> a{{{Axis::Y, 9}, {Axis::X, 3}, {Axis::X, 1}}};
  std::vector<std::vector<Guideline>> b{{{Axis::X, 1}, {Axis::Y, 9}, {Axis::X, 3}, {Axis::X, 3}}};
  CHECK(torch::allclose(f.enc->encode_guidelines(a), f.enc->encode_guidelines(b), 1e-6, 1e-6));
  const auto canon = canonical_guidelines(b[0]);
  CHECK((canon == std::vector<Guideline>{{Axis::X, 1}, {Axis::X, 3}, {Axis::Y, 9}}));
  std::vector<std::vector<Guideline>> out_of_range{{{Axis::X, 64}}};
  CHECK_THROWS_AS(f.enc->encode_guidelines(out_of_range), ValidationError);
}

TEST_CASE("absent conditions use learned null streams") {
  Fixture f;
  torch::NoGradGuard g;
  const auto& item = f.corpus[0];
  std::vector<ConditionSet> cs{extract_conditions(item.layout, item.prompt), ConditionSet{}};
  const auto e = f.enc->assemble(cs, f.vae);
  CHECK(e.presence[0].all().item<bool>());
  CHECK_FALSE(e.presence[1].any().item<bool>());
  CHECK(e.prompt_mask[1].sum().item<int64_t>() == 1);
  CHECK(e.prompt_mask[1][0].item<bool>());
  CHECK(e.guide_mask[1].sum().item<int64_t>() == 1);
  CHECK(e.class_mask[1].sum().item<int64_t>() == 1);
  // Every row of the null given design is the same vector.
  CHECK(torch::allclose(e.given_emb[1], e.given_emb[1][0].expand_as(e.given_emb[1])));

  SUBCASE("dropping everything equals encoding nothing") {
    DropoutPolicy all{1.0, 0.0};
    std::vector<ConditionSet> dropped{apply_dropout(cs[0], all, 3)};
    CHECK(dropped[0].empty());
    std::vector<ConditionSet> none{ConditionSet{}};
    const auto a = f.enc->assemble(dropped, f.vae), b = f.enc->assemble(none, f.vae);
    CHECK(torch::equal(a.prompt_seq, b.prompt_seq));
    CHECK(torch::equal(a.guide_emb, b.guide_emb));
    CHECK(torch::equal(a.given_emb, b.given_emb));
    CHECK(torch::equal(a.class_emb, b.class_emb));
  }
  SUBCASE("masking a present stream yields the same nulls") {
    const auto masked = f.enc->with_presence(e.index_select(torch::tensor({0L})), torch::zeros({1, 4}, torch::kBool));
    std::vector<ConditionSet> none{ConditionSet{}};
    const auto b = f.enc->assemble(none, f.vae);
    CHECK(torch::equal(masked.prompt_seq[0][0], b.prompt_seq[0][0]));
    CHECK(torch::equal(masked.prompt_pool, b.prompt_pool));
    CHECK(torch::equal(masked.given_emb, b.given_emb));
    CHECK(torch::equal(masked.guide_emb[0][0], b.guide_emb[0][0]));
    CHECK_FALSE(masked.presence.any().item<bool>());
  }
}

TEST_CASE("assemble rejects invalid conditions with a field path") {
  Fixture f;
  ConditionSet cs;
  cs.class_count = std::vector<int>{1, 2};
  std::vector<ConditionSet> v{cs};
  try {
    f.enc->assemble(v, f.vae);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.path() == "/class_count");
  }
}

TEST_CASE("encoded conditions repeat, select and concatenate block-wise") {
  Fixture f;
  torch::NoGradGuard g;
  std::vector<ConditionSet> cs{extract_conditions(f.corpus[0].layout, f.corpus[0].prompt), ConditionSet{}};
  const auto e = f.enc->assemble(cs, f.vae);
  const auto r = e.repeat(3);
  CHECK(r.batch() == 6);
  CHECK(torch::equal(r.prompt_seq[4], e.prompt_seq[0]));
  CHECK(torch::equal(r.presence[5], e.presence[1]));
  std::vector<EncodedConditions> parts{e.index_select(torch::tensor({1L})), e.index_select(torch::tensor({0L}))};
  const auto c = EncodedConditions::cat(parts);
  CHECK(c.batch() == 2);
  CHECK(torch::equal(c.presence[0], e.presence[1]));
}
