#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "colay/datasets.hpp"
#include "colay/error.hpp"
#include "colay/metrics.hpp"
#include "support/generators.hpp"

using namespace colay;
using namespace colay::testing;

namespace {

SynthSpec toy_spec(std::size_t size, std::uint64_t seed) {
  SynthSpec spec;
  spec.schema = toy_schema();
  spec.size = size;
  spec.seed = seed;
  return spec;
}

std::string element_record(int cls, int x0, int y0, int x1, int y1) {
  return "{\"class\":" + std::to_string(cls) + ",\"x_min\":" + std::to_string(x0) + ",\"y_min\":" +
         std::to_string(y0) + ",\"x_max\":" + std::to_string(x1) + ",\"y_max\":" + std::to_string(y1) + "}";
}

std::string layout_record(int n, int resolution = 0) {
  std::string s = "{\"elements\":[";
  for (int i = 0; i < n; ++i) s += (i ? "," : "") + element_record(i % 4, 0, i % 60, 3, i % 60 + 2);
  s += "]";
  if (resolution) s += ",\"resolution\":" + std::to_string(resolution);
  return s + "}";
}

}  // namespace

TEST_CASE("generated corpora are deterministic and valid") {
  CHECK(generate_corpus(toy_spec(0, 1)).empty());
  const Corpus a = generate_corpus(toy_spec(300, 42));
  const Corpus b = generate_corpus(toy_spec(300, 42));
  REQUIRE(a.size() == 300);
  std::size_t differs = 0;
  const Corpus c = generate_corpus(toy_spec(300, 43));
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].layout == b[i].layout);
    REQUIRE(a[i].prompt == b[i].prompt);
    a[i].layout.validate();
    REQUIRE(a[i].layout.valid_count() >= 1);
    REQUIRE(a[i].layout.valid_count() <= 16);
    REQUIRE_FALSE(a[i].prompt.empty());
    REQUIRE(parents_precede_children(a[i].layout));
    REQUIRE(g_usage(a[i].grid, a[i].layout) == 1.0);
    differs += !(a[i].layout == c[i].layout);
  }
  CHECK(differs > 250);
}

TEST_CASE("generator covers the element count range and every class") {
  const Corpus corpus = generate_corpus(toy_spec(1000, 7));
  std::vector<Layout> ls;
  for (const auto& item : corpus) ls.push_back(item.layout);
  const DatasetStats st = stats(ls, 4);
  CHECK(st.element_count_histogram.size() >= 8);
  for (auto f : st.class_frequency) CHECK(f > 100);
}

TEST_CASE("generator runs on the style schema") {
  SynthSpec spec;
  spec.schema = builtin_schema("c4");
  spec.size = 50;
  spec.seed = 3;
  for (const auto& item : generate_corpus(spec)) {
    item.layout.validate();
    REQUIRE(parents_precede_children(item.layout));
    REQUIRE(g_usage(item.grid, item.layout) == 1.0);
  }
}

TEST_CASE("parents_precede_children detects a child before its container") {
  const auto s = toy_schema();
  const auto ok = Layout::from_valid(s, {box_element(*s, 0, 0, 0, 30, 30), box_element(*s, 1, 2, 2, 10, 10)});
  const auto bad = Layout::from_valid(s, {box_element(*s, 1, 2, 2, 10, 10), box_element(*s, 0, 0, 0, 30, 30)});
  CHECK(parents_precede_children(ok));
  CHECK_FALSE(parents_precede_children(bad));
}

TEST_CASE("ingest drops oversized layouts and rescales coordinates") {
  const auto clay = builtin_schema("clay");
  const auto report = ingest_lines({layout_record(65), layout_record(64), "not json", "{\"elements\":3}"}, clay);
  CHECK(report.layouts.size() == 1);
  CHECK(report.dropped_oversize == 1);
  CHECK(report.malformed == 2);

  const auto scaled = ingest_lines({"{\"resolution\":1024,\"elements\":[" + element_record(1, 0, 0, 1000, 1023) + "]}"},
                                   clay);
  REQUIRE(scaled.layouts.size() == 1);
  const Box b = element_box(*clay, scaled.layouts[0][0]);
  CHECK(b.x_max == 62);
  CHECK(b.y_max == 63);
  const auto by_param = ingest_lines({"{\"elements\":[" + element_record(1, 0, 0, 1000, 1000) + "]}"}, clay, 1024);
  REQUIRE(by_param.layouts.size() == 1);
  CHECK(element_box(*clay, by_param.layouts[0][0]).x_max == 62);

  const auto dir = std::filesystem::temp_directory_path() / "colay_ingest_test";
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "empty.jsonl"); }
  CHECK(ingest((dir / "empty.jsonl").string(), clay).layouts.empty());
  CHECK_THROWS_AS(ingest((dir / "missing.jsonl").string(), clay), MissingArtifactError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ingested layouts satisfy layout invariants") {
  const auto s = toy_schema();
  std::mt19937_64 rng(12);
  std::vector<std::string> lines;
  for (int i = 0; i < 200; ++i) {
    const auto l = random_layout(s, rng);
    lines.push_back(layout_to_json(l).dump());
  }
  const auto report = ingest_lines(lines, s);
  CHECK(report.layouts.size() == 200);
  for (const auto& l : report.layouts) l.validate();
}

TEST_CASE("stats tally element counts and classes") {
  const auto s = toy_schema();
  const auto three = Layout::from_valid(
      s, {box_element(*s, 0, 0, 0, 1, 1), box_element(*s, 2, 2, 2, 3, 3), box_element(*s, 2, 4, 4, 5, 5)});
  const DatasetStats one = stats({three}, 4);
  CHECK(one.element_count_histogram == std::map<std::size_t, std::size_t>{{3, 1}});
  CHECK(one.class_frequency == std::vector<std::size_t>{1, 0, 2, 0});

  std::mt19937_64 rng(1);
  std::vector<Layout> ls;
  for (int i = 0; i < 300; ++i) ls.push_back(random_layout(s, rng));
  const DatasetStats st = stats(ls, 4);
  std::size_t total = 0, layouts = 0;
  for (auto [n, c] : st.element_count_histogram) {
    layouts += c;
    total += n * c;
  }
  CHECK(layouts == 300);
  std::size_t freq = 0;
  for (auto f : st.class_frequency) freq += f;
  CHECK(freq == total);
  std::vector<std::size_t> tally(4, 0);
  for (const auto& l : ls)
    for (const auto& e : l.valid_elements()) tally[std::size_t(e.values[0])] += 1;
  CHECK(st.class_frequency == tally);
  const json j = stats_to_json(st, *s);
  CHECK(j["layouts"] == 300);
}

TEST_CASE("split is disjoint and exhaustive") {
  const Corpus corpus = generate_corpus(toy_spec(200, 5));
  const Split sp = split_corpus(corpus, 0.2, 9);
  CHECK(sp.eval.size() == 40);
  CHECK(sp.train.size() == 160);
  std::set<std::string> train, eval;
  for (const auto& item : sp.train) train.insert(layout_to_json(item.layout).dump() + item.prompt.text());
  for (const auto& item : sp.eval) eval.insert(layout_to_json(item.layout).dump() + item.prompt.text());
  std::size_t overlap = 0;
  for (const auto& k : eval) overlap += train.count(k);
  // Duplicates in the corpus could collide; the generator makes none at this size.
  CHECK(overlap == 0);
  CHECK(split_corpus(corpus, 0.2, 9).eval.front().layout == sp.eval.front().layout);
}

TEST_CASE("corpus directories roundtrip") {
  const Corpus corpus = generate_corpus(toy_spec(20, 2));
  const auto dir = std::filesystem::temp_directory_path() / "colay_corpus_test";
  std::filesystem::remove_all(dir);
  save_corpus(corpus, dir.string());
  const Corpus back = load_corpus(dir.string(), toy_schema());
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].layout == corpus[i].layout);
    CHECK(back[i].prompt == corpus[i].prompt);
    CHECK(back[i].grid == corpus[i].grid);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_corpus(dir.string(), toy_schema()), MissingArtifactError);
}

TEST_CASE("synth spec JSON roundtrip") {
  const SynthSpec spec = toy_spec(10, 4);
  const SynthSpec back = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(back.size == 10);
  CHECK(back.seed == 4);
  CHECK(back.schema->name() == "toy");
  CHECK(back.columns.max == spec.columns.max);
}
