#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colay/conditions.hpp"
#include "colay/json_io.hpp"
#include "colay/prompt.hpp"

namespace colay {

struct IntRange {
  int min = 0;
  int max = 0;
};

// Parameters of the synthetic guillotine-grid generator.
struct SynthSpec {
  SchemaPtr schema;
  IntRange columns{1, 4};
  IntRange bands{2, 7};
  IntRange nesting_depth{1, 3};
  // container, image, text, button mix for leaves (indices past K ignored)
  std::vector<double> class_weights{1.0, 1.0, 1.0, 1.0};
  PromptStyle prompt_style = PromptStyle::Layout;
  std::size_t size = 0;
  std::uint64_t seed = 0;
};

SynthSpec synth_spec_from_json(const json& j);
json synth_spec_to_json(const SynthSpec& spec);

struct CorpusItem {
  Layout layout;
  Prompt prompt;
  std::vector<Guideline> grid;  // lines the generator aligned elements to
};

using Corpus = std::vector<CorpusItem>;

// Layout i depends only on (seed, i).
Corpus generate_corpus(const SynthSpec& spec);
CorpusItem generate_layout(const SynthSpec& spec, std::uint64_t item_seed);

// True if no valid element encloses (contains the box of) an element that
// precedes it, i.e. containers come before their children.
bool parents_precede_children(const Layout& layout);

struct IngestReport {
  std::vector<Layout> layouts;
  std::size_t dropped_oversize = 0;
  std::size_t malformed = 0;
};

// JSONL of layout records. Coordinates are floor-rescaled from the record's
// "resolution" (or `source_resolution`, default: the schema's) to the schema
// resolution. Records with more than N valid elements are dropped.
IngestReport ingest(const std::string& path, const SchemaPtr& schema, int source_resolution = 0);
IngestReport ingest_lines(const std::vector<std::string>& lines, const SchemaPtr& schema,
                          int source_resolution = 0);

struct DatasetStats {
  std::map<std::size_t, std::size_t> element_count_histogram;
  std::vector<std::size_t> class_frequency;
  std::size_t layouts = 0;
};

DatasetStats stats(const std::vector<Layout>& layouts, int num_classes);
json stats_to_json(const DatasetStats& s, const AttributeSchema& schema);

struct Split {
  Corpus train;
  Corpus eval;
};

// Deterministic shuffle then split; every item lands in exactly one side.
Split split_corpus(const Corpus& corpus, double eval_fraction, std::uint64_t seed);

// Corpus directory: layouts.jsonl + prompts.jsonl (+ grids.jsonl).
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir, const SchemaPtr& schema);

}  // namespace colay
