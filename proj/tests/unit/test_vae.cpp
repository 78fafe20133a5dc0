#include "support/torch_doctest.hpp"

#include <cmath>

#include "colay/model/vae.hpp"
#include "support/gradcheck.hpp"
#include "support/model_fixtures.hpp"

using namespace colay;
using namespace colay::model;
using namespace colay::testing;

namespace {

std::vector<Layout> random_layouts(const SchemaPtr& s, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Layout> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_layout(s, rng));
  return out;
}

}  // namespace

TEST_CASE("vae shapes and per-slice softmax") {
  single_thread();
  torch::manual_seed(0);
  const auto s = toy_schema();
  Vae vae(s, tiny_vae_config());
  vae->eval();
  const auto layouts = random_layouts(s, 3, 1);
  const auto x = layouts_to_tensor(layouts);
  CHECK(x.sizes() == torch::IntArrayRef({3, s->capacity(), s->one_hot_width()}));
  auto [mean, logvar] = vae->encode(x);
  CHECK(mean.sizes() == torch::IntArrayRef({3, s->capacity(), 4}));
  CHECK(logvar.sizes() == mean.sizes());
  const auto p = vae->decode(mean);
  CHECK(p.sizes() == x.sizes());
  for (std::size_t a = 0; a < s->attribute_count(); ++a) {
    const auto slice = p.narrow(-1, s->slot_offset(a), s->cardinality(a) + 1).sum(-1);
    CHECK(torch::allclose(slice, torch::ones_like(slice), 1e-5, 1e-5));
  }
}

TEST_CASE("vae encoding is deterministic and independent of batch companions") {
  single_thread();
  torch::manual_seed(0);
  const auto s = toy_schema();
  Vae vae(s, tiny_vae_config());
  vae->eval();
  const auto layouts = random_layouts(s, 4, 2);
  const auto all = encode_mean(vae, layouts);
  const auto first = encode_mean(vae, std::span(layouts).subspan(0, 1));
  CHECK(torch::allclose(all[0], first[0], 1e-5, 1e-6));
  CHECK(torch::equal(all, encode_mean(vae, layouts)));
}

TEST_CASE("vae encoder is permutation equivariant over elements") {
  single_thread();
  torch::manual_seed(0);
  const auto s = toy_schema();
  Vae vae(s, tiny_vae_config());
  vae->eval();
  const auto x = layouts_to_tensor(random_layouts(s, 2, 3));
  const auto perm = torch::randperm(s->capacity(), torch::kLong);
  const auto a = vae->encode(x).first.index_select(1, perm);
  const auto b = vae->encode(x.index_select(1, perm)).first;
  CHECK(torch::allclose(a, b, 1e-5, 1e-5));
}

TEST_CASE("kl term matches the closed form") {
  const auto s = toy_schema();
  const auto layouts = random_layouts(s, 2, 4);
  const auto targets = attribute_targets(layouts);
  torch::manual_seed(3);
  const auto logits = torch::randn({2, s->capacity(), s->one_hot_width()}, torch::kDouble);
  const auto mean = torch::randn({2, s->capacity(), 4}, torch::kDouble);
  const auto logvar = torch::randn({2, s->capacity(), 4}, torch::kDouble);
  const auto loss = vae_loss_from(*s, logits, targets, mean, logvar, 0.25);
  double kl = 0.0;
  const auto m = mean.contiguous().view(-1), lv = logvar.contiguous().view(-1);
  for (int64_t i = 0; i < m.numel(); ++i) {
    const double mu = m[i].item<double>(), l = lv[i].item<double>();
    kl += 0.5 * (mu * mu + std::exp(l) - 1.0 - l);
  }
  kl /= double(m.numel());
  CHECK(loss.kl.item<double>() == doctest::Approx(kl).epsilon(1e-10));
  CHECK(loss.total.item<double>() == doctest::Approx(loss.reconstruction.item<double>() + 0.25 * kl).epsilon(1e-10));
}

TEST_CASE("reconstruction term is an attribute-averaged cross-entropy") {
  const auto s = toy_schema();
  const auto layouts = random_layouts(s, 2, 5);
  const auto x = layouts_to_tensor(layouts, torch::kDouble);
  const auto targets = attribute_targets(layouts);
  const auto zeros = torch::zeros({2, s->capacity(), 4}, torch::kDouble);

  SUBCASE("a decoder placing all mass on the target costs nothing") {
    const auto loss = vae_loss_from(*s, x * 1e3, targets, zeros, zeros, 1.0);
    CHECK(loss.reconstruction.item<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss.kl.item<double>() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform logits cost the mean log cardinality") {
    const auto loss = vae_loss_from(*s, torch::zeros_like(x), targets, zeros, zeros, 1.0);
    double expect = 0.0;
    for (std::size_t a = 0; a < s->attribute_count(); ++a) expect += std::log(double(s->cardinality(a) + 1));
    expect /= double(s->attribute_count());
    CHECK(loss.reconstruction.item<double>() == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("vae_loss gradients match finite differences on the desk preset") {
  single_thread();
  torch::manual_seed(5);
  const auto s = toy_schema();
  Vae vae(s, VaeConfig::desk());
  vae->to(torch::kDouble);
  vae->train();
  const auto layouts = random_layouts(s, 2, 6);
  const auto x = layouts_to_tensor(layouts, torch::kDouble);
  const auto noise = torch::randn({2, s->capacity(), vae->config().latent_dim}, torch::kDouble);
  const auto r = check_gradients(vae->parameters(), [&] { return vae_loss(vae, x, vae->config().kl_weight, noise).total; }, 8);
  CHECK(r.checked >= 5);
  CHECK(r.worst_relative_error <= 1e-3);
}

TEST_CASE("attribute accuracy counts only valid elements") {
  single_thread();
  const auto s = small_schema(3);
  Vae vae(s, tiny_vae_config());
  vae->eval();
  // Empty layouts have no valid attributes to score.
  std::vector<Layout> empty{Layout(s)};
  CHECK(attribute_accuracy(vae, empty) == doctest::Approx(1.0));
  const auto layouts = random_layouts(s, 5, 9);
  const double acc = attribute_accuracy(vae, layouts);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("tensor_to_layouts inverts layouts_to_tensor") {
  const auto s = toy_schema();
  const auto layouts = random_layouts(s, 20, 10);
  const auto back = tensor_to_layouts(s, layouts_to_tensor(layouts));
  REQUIRE(back.size() == layouts.size());
  for (std::size_t i = 0; i < layouts.size(); ++i) CHECK(back[i] == layouts[i]);
}
