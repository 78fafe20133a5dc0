#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "colay/conditions.hpp"
#include "colay/json_io.hpp"
#include "colay/render.hpp"

namespace colay {

using FeatureVector = std::vector<float>;

// Raster -> fixed-length embedding. Implementations must be deterministic.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureVector extract(const Raster& raster) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::uint64_t hash() const = 0;
  // Raster size layouts are rendered at before extraction.
  virtual int input_size() const { return 64; }
};

// Three stride-2 3x3 convolutions (16, 32, 64 channels, ReLU) with fixed
// seeded He-normal weights, followed by global average pooling.
class RandomConvFeatureExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvFeatureExtractor(std::uint64_t seed = 20240501);
  FeatureVector extract(const Raster& raster) const override;
  std::size_t dim() const override { return 64; }
  std::uint64_t hash() const override;

 private:
  struct Conv {
    int in = 0, out = 0;
    std::vector<float> weight;  // out x in x 3 x 3
    std::vector<float> bias;
  };
  std::uint64_t seed_;
  std::vector<Conv> layers_;
};

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::vector<float> encode(const Prompt& p) const = 0;
};

// Smoothed tf-idf over a fitted vocabulary; out-of-vocabulary words ignored.
class TfidfSentenceEncoder final : public SentenceEncoder {
 public:
  TfidfSentenceEncoder() = default;
  explicit TfidfSentenceEncoder(const std::vector<Prompt>& corpus);
  std::vector<float> encode(const Prompt& p) const override;
  std::size_t dim() const noexcept { return idf_.size(); }
  json to_json() const;
  static TfidfSentenceEncoder from_json(const json& j);

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<float> idf_;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

FeatureVector layout_features(const Layout& layout, const FeatureExtractor& fx);

// Retrieval pool for the cycle-similarity metrics.
struct EvalCorpus {
  std::vector<Layout> layouts;
  std::vector<Prompt> prompts;
  std::vector<FeatureVector> features;
  std::vector<std::vector<float>> sentence_vectors;
  std::uint64_t extractor_hash = 0;

  std::size_t size() const noexcept { return layouts.size(); }

  static EvalCorpus build(std::vector<Layout> layouts, std::vector<Prompt> prompts,
                          const FeatureExtractor& fx, const SentenceEncoder& se);
  // layouts.jsonl, prompts.jsonl, features.bin, sentvecs.bin
  void save(const std::string& dir) const;
  // Throws ValidationError if features were made by a different extractor.
  static EvalCorpus load(const std::string& dir, const SchemaPtr& schema, const FeatureExtractor& fx);
};

struct FidResult {
  double value = 0.0;
  bool regularized = false;  // covariance product needed eps*I
};

FidResult fid(const std::vector<FeatureVector>& real, const std::vector<FeatureVector>& generated);
FidResult fid(const std::vector<Raster>& real, const std::vector<Raster>& generated, const FeatureExtractor& fx);

double cyc_sim_p(const Prompt& prompt, const Layout& generated, const EvalCorpus& corpus, std::size_t k,
                 const FeatureExtractor& fx, const SentenceEncoder& se);
double cyc_sim_l(const Prompt& prompt, const Layout& generated, const EvalCorpus& corpus, std::size_t k,
                 const FeatureExtractor& fx, const SentenceEncoder& se);

// Vector-level cores of the two cycle metrics.
double cyc_sim_p(std::span<const float> prompt_vec, std::span<const float> gen_features, const EvalCorpus& corpus,
                 std::size_t k);
double cyc_sim_l(std::span<const float> prompt_vec, std::span<const float> gen_features, const EvalCorpus& corpus,
                 std::size_t k);

double c_usage(const std::vector<int>& requested, const Layout& generated);

// Normalized L1 over the four coordinates (/4) plus 1 for a class mismatch.
double element_distance(const AttributeSchema& schema, const Element& a, const Element& b);
double design_distance(const Layout& given, const Layout& generated);

double g_usage(const std::vector<Guideline>& requested, const Layout& generated);

// Condition-satisfaction metrics of one generated layout. A metric is empty
// when its condition is absent or has nothing to score (zero counts, no
// given elements, no guidelines).
struct ConditionScores {
  std::optional<double> c_usage;
  std::optional<double> design_distance;
  std::optional<double> g_usage;
};

ConditionScores score_conditions(const ConditionSet& cs, const Layout& generated);

}  // namespace colay
