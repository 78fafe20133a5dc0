#include "colay/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "colay/error.hpp"

namespace colay {
namespace {

enum Cls { kContainer = 0, kImage = 1, kText = 2, kButton = 3 };

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
  // splitmix64 over (seed, i)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

class LayoutBuilder {
 public:
  LayoutBuilder(const AttributeSchema& s, Rng& rng) : s_(s), rng_(rng) {}

  std::size_t size() const { return elements_.size(); }

  void add(int cls, Box b) {
    cls = std::min(cls, s_.num_classes() - 1);
    Element e = make_element(s_, cls, b);
    if (s_.has_style()) style(e, cls);
    elements_.push_back(std::move(e));
  }

  std::vector<Element> take() { return std::move(elements_); }

 private:
  void set(Element& e, const char* name, int v) {
    if (auto i = s_.index_of(name)) e.values[*i] = std::clamp(v, 0, s_.cardinality(*i) - 1);
  }

  void style(Element& e, int cls) {
    auto jitter = [&](int v, int r) { return v + uniform_int(rng_, -r, r); };
    struct Palette {
      int bg[4];
      int fg[4];
      int font_lo, font_hi, weight_lo, weight_hi, align;
    };
    static constexpr Palette kPalettes[4] = {
        {{240, 240, 240, 255}, {200, 200, 200, 255}, 0, 0, 0, 0, 0},
        {{180, 200, 220, 255}, {120, 140, 160, 255}, 0, 0, 0, 0, 4},
        {{255, 255, 255, 0}, {30, 30, 30, 255}, 24, 48, 3, 6, 3},
        {{33, 150, 243, 255}, {255, 255, 255, 255}, 20, 32, 5, 8, 4},
    };
    const auto& p = kPalettes[std::clamp(cls, 0, 3)];
    const char* bg[4] = {"bg_r", "bg_g", "bg_b", "bg_a"};
    const char* fg[4] = {"fg_r", "fg_g", "fg_b", "fg_a"};
    for (int c = 0; c < 4; ++c) {
      set(e, bg[c], c == 3 ? p.bg[c] : jitter(p.bg[c], 12));
      set(e, fg[c], c == 3 ? p.fg[c] : jitter(p.fg[c], 12));
    }
    set(e, "font_size", p.font_hi > 0 ? uniform_int(rng_, p.font_lo, p.font_hi) : 0);
    set(e, "font_weight", p.weight_hi > 0 ? uniform_int(rng_, p.weight_lo, p.weight_hi) : 0);
    set(e, "alignment", cls == kText ? (uniform_int(rng_, 0, 1) ? 3 : 0) : p.align);
  }

  const AttributeSchema& s_;
  Rng& rng_;
  std::vector<Element> elements_;
};

struct Column {
  int x0, x1;
};

}  // namespace

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec spec;
  try {
    spec.schema = load_schema(j.value("schema", std::string("toy")));
    auto range = [&](const char* key, IntRange def) {
      if (!j.contains(key)) return def;
      const auto& r = j.at(key);
      return IntRange{r.at(0).get<int>(), r.at(1).get<int>()};
    };
    spec.columns = range("columns", spec.columns);
    spec.bands = range("bands", spec.bands);
    spec.nesting_depth = range("nesting_depth", spec.nesting_depth);
    if (j.contains("class_weights")) spec.class_weights = j.at("class_weights").get<std::vector<double>>();
    spec.prompt_style = prompt_style_from_string(j.value("prompt_style", std::string("layout")));
    spec.size = j.value("size", std::size_t{0});
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed synth spec: ") + e.what(), "/synth");
  }
  auto check = [](IntRange r, int lo, const char* name) {
    if (r.min < lo || r.max < r.min) throw ValidationError(std::string("invalid range for ") + name, std::string("/") + name);
  };
  check(spec.columns, 1, "columns");
  check(spec.bands, 1, "bands");
  check(spec.nesting_depth, 1, "nesting_depth");
  return spec;
}

json synth_spec_to_json(const SynthSpec& spec) {
  return {{"schema", spec.schema ? spec.schema->name() : "toy"},
          {"columns", {spec.columns.min, spec.columns.max}},
          {"bands", {spec.bands.min, spec.bands.max}},
          {"nesting_depth", {spec.nesting_depth.min, spec.nesting_depth.max}},
          {"class_weights", spec.class_weights},
          {"prompt_style", std::string(to_string(spec.prompt_style))},
          {"size", spec.size},
          {"seed", spec.seed}};
}

CorpusItem generate_layout(const SynthSpec& spec, std::uint64_t item_seed) {
  if (!spec.schema) throw ValidationError("synth spec needs a schema", "/schema");
  const auto& s = *spec.schema;
  Rng rng(item_seed);
  const int res = s.resolution();
  const int u = std::max(1, res / 64);
  const int capacity = s.capacity();

  const int margin_x = u * uniform_int(rng, 1, 4);
  const int margin_y = u * uniform_int(rng, 1, 3);
  const int gutter = u * uniform_int(rng, 1, 2);
  const int pad = u;
  const int content_x0 = margin_x;
  const int content_x1 = res - 1 - margin_x;
  const int content_w = content_x1 - content_x0 + 1;

  int cols = uniform_int(rng, spec.columns.min, spec.columns.max);
  while (cols > 1 && (content_w - (cols - 1) * gutter) / cols < 6 * u) --cols;
  const int col_w = (content_w - (cols - 1) * gutter) / cols;
  std::vector<Column> columns;
  for (int i = 0; i < cols; ++i) {
    const int x0 = content_x0 + i * (col_w + gutter);
    columns.push_back({x0, i + 1 == cols ? content_x1 : x0 + col_w - 1});
  }

  const int depth = uniform_int(rng, spec.nesting_depth.min, spec.nesting_depth.max);
  const int bands = uniform_int(rng, spec.bands.min, spec.bands.max);
  const bool root = depth >= 3;

  std::vector<double> weights(4, 1.0);
  for (std::size_t k = 0; k < 4 && k < spec.class_weights.size(); ++k) weights[k] = std::max(0.0, spec.class_weights[k]);
  if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) weights.assign(4, 1.0);
  std::discrete_distribution<int> band_kind(weights.begin(), weights.end());
  static constexpr int kHeights[] = {4, 6, 8, 10, 12};

  LayoutBuilder b(s, rng);
  const int budget = capacity - (root ? 1 : 0);
  int y = margin_y;
  int last_y = margin_y;
  for (int band = 0; band < bands; ++band) {
    const int h = u * kHeights[uniform_int(rng, 0, 4)];
    const int y0 = y;
    const int y1 = y + h - 1;
    if (y1 > res - 1 - margin_y) break;
    const int remaining = budget - static_cast<int>(b.size());
    if (remaining <= 0) break;
    int kind = band_kind(rng);
    if (kind == kContainer && depth < 2) kind = kText;

    switch (kind) {
      case kContainer: {
        const bool cards = cols > 1 && h >= 8 * u && remaining >= 3 * cols;
        if (cards) {
          const int split = y0 + pad + (h - 2 * pad) * 3 / 5;
          for (const auto& c : columns) {
            b.add(kContainer, {c.x0, y0, c.x1, y1});
            b.add(kImage, {c.x0 + pad, y0 + pad, c.x1 - pad, split - 1});
            b.add(kText, {c.x0 + pad, split, c.x1 - pad, y1 - pad});
          }
        } else if (remaining >= 3) {
          // Toolbar: title text on the left, action button on the right.
          const int mid = content_x0 + content_w * 3 / 5;
          const int bw = std::max(4 * u, content_w / 5);
          b.add(kContainer, {content_x0, y0, content_x1, y1});
          b.add(kText, {content_x0 + pad, y0 + pad, mid, y1 - pad});
          b.add(kButton, {content_x1 - pad - bw + 1, y0 + pad, content_x1 - pad, y1 - pad});
        } else {
          b.add(kText, {content_x0, y0, content_x1, y1});
        }
        break;
      }
      case kImage: {
        if (cols > 1 && remaining >= cols && uniform_int(rng, 0, 1)) {
          for (const auto& c : columns) b.add(kImage, {c.x0, y0, c.x1, y1});
        } else {
          b.add(kImage, {content_x0, y0, content_x1, y1});
        }
        break;
      }
      case kText: {
        // Adjacent columns may merge into one wider text block.
        std::size_t i = 0;
        while (i < columns.size() && static_cast<int>(b.size()) < budget) {
          std::size_t j = i;
          while (j + 1 < columns.size() && uniform_int(rng, 0, 2) == 0) ++j;
          b.add(kText, {columns[i].x0, y0, columns[j].x1, y1});
          i = j + 1;
        }
        break;
      }
      default: {
        const int bh = std::min(h, 6 * u);
        const int by0 = y0 + (h - bh) / 2;
        for (const auto& c : columns) {
          if (static_cast<int>(b.size()) >= budget) break;
          b.add(kButton, {c.x0, by0, c.x1, by0 + bh - 1});
        }
        break;
      }
    }
    last_y = y1;
    y = y1 + 1 + gutter;
  }
  if (b.size() == 0) {
    const int h = std::min(res - 2 * margin_y, u * 8);
    b.add(kText, {content_x0, margin_y, content_x1, margin_y + h - 1});
    last_y = margin_y + h - 1;
  }
  std::vector<Element> elements = b.take();
  if (root) {
    // Screen container spanning the content; precedes everything it holds.
    LayoutBuilder rb(s, rng);
    rb.add(kContainer, {content_x0, margin_y, content_x1, last_y});
    auto r = rb.take();
    elements.insert(elements.begin(), std::move(r.front()));
  }

  CorpusItem item{Layout::from_valid(spec.schema, std::move(elements)), {}, {}};
  std::set<Guideline> grid;
  for (const auto& e : item.layout.elements()) {
    if (!e.valid) continue;
    const Box bx = element_box(s, e);
    grid.insert({Axis::X, bx.x_min});
    grid.insert({Axis::X, bx.x_max});
    grid.insert({Axis::Y, bx.y_min});
    grid.insert({Axis::Y, bx.y_max});
  }
  item.grid.assign(grid.begin(), grid.end());
  item.prompt = synthesize_prompt(item.layout, spec.prompt_style, mix_seed(item_seed, 7));
  return item;
}

Corpus generate_corpus(const SynthSpec& spec) {
  Corpus out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) out.push_back(generate_layout(spec, mix_seed(spec.seed, i)));
  return out;
}

bool parents_precede_children(const Layout& layout) {
  const auto& s = layout.schema();
  const auto valid = layout.valid_elements();
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const Box a = element_box(s, valid[i]);
    for (std::size_t j = i + 1; j < valid.size(); ++j) {
      const Box c = element_box(s, valid[j]);
      const bool encloses = c.x_min <= a.x_min && c.y_min <= a.y_min && c.x_max >= a.x_max && c.y_max >= a.y_max;
      if (encloses && !(a == c)) return false;
    }
  }
  return true;
}

IngestReport ingest_lines(const std::vector<std::string>& lines, const SchemaPtr& schema, int source_resolution) {
  IngestReport report;
  const auto& s = *schema;
  const int res = s.resolution();
  const std::size_t coords[4] = {s.x_min_index(), s.y_min_index(), s.x_max_index(), s.y_max_index()};
  for (const auto& line : lines) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      const int src = rec.value("resolution", source_resolution > 0 ? source_resolution : res);
      if (src <= 0) throw ValidationError("resolution must be positive");
      const auto& els = rec.at("elements");
      std::vector<Element> valid;
      for (const auto& el : els) {
        if (!el.value("valid", true)) continue;
        Element e;
        e.valid = true;
        e.values.assign(s.attribute_count(), 0);
        for (std::size_t i = 0; i < s.attribute_count(); ++i) {
          const auto& name = s.attributes()[i].name;
          if (!el.contains(name)) {
            if (i == s.class_index() || std::find(std::begin(coords), std::end(coords), i) != std::end(coords))
              throw ValidationError("missing " + name);
            continue;
          }
          e.values[i] = static_cast<int>(std::floor(el.at(name).get<double>()));
        }
        for (auto c : coords) {
          const double v = el.at(s.attributes()[c].name).get<double>();
          e.values[c] = std::clamp(static_cast<int>(std::floor(v * res / src)), 0, res - 1);
        }
        valid.push_back(std::move(e));
      }
      if (valid.size() > static_cast<std::size_t>(s.capacity())) {
        ++report.dropped_oversize;
        continue;
      }
      report.layouts.push_back(Layout::from_valid(schema, std::move(valid)));
    } catch (const std::exception&) {
      ++report.malformed;
    }
  }
  return report;
}

IngestReport ingest(const std::string& path, const SchemaPtr& schema, int source_resolution) {
  std::ifstream f(path);
  if (!f) throw MissingArtifactError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(std::move(line));
  return ingest_lines(lines, schema, source_resolution);
}

DatasetStats stats(const std::vector<Layout>& layouts, int num_classes) {
  DatasetStats out;
  out.class_frequency.assign(static_cast<std::size_t>(num_classes), 0);
  out.layouts = layouts.size();
  for (const auto& l : layouts) {
    ++out.element_count_histogram[l.valid_count()];
    const auto counts = count_classes(l);
    for (std::size_t k = 0; k < counts.size() && k < out.class_frequency.size(); ++k)
      out.class_frequency[k] += static_cast<std::size_t>(counts[k]);
  }
  return out;
}

json stats_to_json(const DatasetStats& st, const AttributeSchema& schema) {
  json hist = json::object();
  for (const auto& [n, c] : st.element_count_histogram) hist[std::to_string(n)] = c;
  json classes = json::object();
  for (std::size_t k = 0; k < st.class_frequency.size(); ++k)
    classes[schema.class_name(static_cast<int>(k))] = st.class_frequency[k];
  return {{"layouts", st.layouts}, {"element_count_histogram", hist}, {"class_frequency", classes}};
}

Split split_corpus(const Corpus& corpus, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction >= 0.0 && eval_fraction <= 1.0))
    throw ValidationError("eval fraction must lie in [0, 1]", "/eval_fraction");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_eval = static_cast<std::size_t>(std::lround(eval_fraction * static_cast<double>(corpus.size())));
  Split out;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_eval ? out.eval : out.train).push_back(corpus[order[i]]);
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream layouts(dir + "/layouts.jsonl"), prompts(dir + "/prompts.jsonl"), grids(dir + "/grids.jsonl");
  if (!layouts || !prompts || !grids) throw std::runtime_error("cannot write corpus to " + dir);
  for (const auto& item : corpus) {
    layouts << layout_to_json(item.layout).dump() << '\n';
    prompts << prompt_to_json(item.prompt).dump() << '\n';
    grids << guidelines_to_json(item.grid).dump() << '\n';
  }
}

Corpus load_corpus(const std::string& dir, const SchemaPtr& schema) {
  std::ifstream layouts(dir + "/layouts.jsonl");
  if (!layouts) throw MissingArtifactError("corpus not found: " + dir + "/layouts.jsonl");
  std::ifstream prompts(dir + "/prompts.jsonl");
  std::ifstream grids(dir + "/grids.jsonl");
  Corpus out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(layouts, line)) {
    if (line.empty()) continue;
    const std::string where = "/layouts/" + std::to_string(n++);
    CorpusItem item{layout_from_json(json::parse(line), schema, where), {}, {}};
    std::string pl;
    if (prompts && std::getline(prompts, pl) && !pl.empty()) {
      const auto pj = json::parse(pl);
      if (!pj.empty()) item.prompt = prompt_from_json(pj, where + "/prompt");
    }
    std::string gl;
    if (grids && std::getline(grids, gl) && !gl.empty()) item.grid = guidelines_from_json(json::parse(gl));
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace colay
