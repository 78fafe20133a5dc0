#include "colay/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "colay/datasets.hpp"
#include "colay/error.hpp"

namespace colay {
namespace {

constexpr std::uint64_t kExtractorVersion = 1;

struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;
  float& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
  float at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
};

// Top-k indices by descending score; ties go to the lower index.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

void check_k(const EvalCorpus& corpus, std::size_t k) {
  if (corpus.size() == 0) throw ValidationError("evaluation corpus is empty", "/corpus");
  if (k == 0 || k > corpus.size())
    throw ValidationError("k must lie in [1, " + std::to_string(corpus.size()) + "]", "/k");
}

void write_matrix(const std::string& path, const char magic[4], std::uint64_t tag,
                  const std::vector<std::vector<float>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const std::uint64_t n = rows.size();
  const std::uint64_t dim = rows.empty() ? 0 : rows.front().size();
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&tag), sizeof(tag));
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  f.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  for (const auto& r : rows) f.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(dim * sizeof(float)));
}

std::vector<std::vector<float>> read_matrix(const std::string& path, const char magic[4], std::uint64_t& tag) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("missing " + path);
  char m[4];
  std::uint64_t n = 0, dim = 0;
  f.read(m, 4);
  f.read(reinterpret_cast<char*>(&tag), sizeof(tag));
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  f.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!f || std::memcmp(m, magic, 4) != 0) throw ValidationError("corrupt matrix file " + path);
  std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
  for (auto& r : rows) f.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(dim * sizeof(float)));
  if (!f) throw ValidationError("truncated matrix file " + path);
  return rows;
}

}  // namespace

RandomConvFeatureExtractor::RandomConvFeatureExtractor(std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  const int channels[4] = {3, 16, 32, 64};
  for (int l = 0; l < 3; ++l) {
    Conv c;
    c.in = channels[l];
    c.out = channels[l + 1];
    std::normal_distribution<float> w(0.0f, std::sqrt(2.0f / static_cast<float>(c.in * 9)));
    c.weight.resize(static_cast<std::size_t>(c.out) * c.in * 9);
    for (auto& x : c.weight) x = w(rng);
    std::normal_distribution<float> b(0.0f, 0.05f);
    c.bias.resize(static_cast<std::size_t>(c.out));
    for (auto& x : c.bias) x = b(rng);
    layers_.push_back(std::move(c));
  }
}

std::uint64_t RandomConvFeatureExtractor::hash() const {
  return (seed_ * 0x9e3779b97f4a7c15ull) ^ (kExtractorVersion << 56) ^ 0x636f6e76ull;
}

FeatureVector RandomConvFeatureExtractor::extract(const Raster& raster) const {
  constexpr int kSize = 64;
  Tensor3 x{3, kSize, kSize, std::vector<float>(3 * kSize * kSize)};
  for (int y = 0; y < kSize; ++y) {
    const int sy = std::min(raster.height - 1, (2 * y + 1) * raster.height / (2 * kSize));
    for (int xx = 0; xx < kSize; ++xx) {
      const int sx = std::min(raster.width - 1, (2 * xx + 1) * raster.width / (2 * kSize));
      const auto p = raster.pixel(sx, sy);
      for (int c = 0; c < 3; ++c) x.at(c, y, xx) = static_cast<float>(p[c]) / 127.5f - 1.0f;
    }
  }
  for (const auto& conv : layers_) {
    Tensor3 y{conv.out, x.h / 2, x.w / 2, {}};
    y.v.assign(static_cast<std::size_t>(y.c) * y.h * y.w, 0.0f);
    for (int o = 0; o < conv.out; ++o) {
      for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox) {
          float acc = conv.bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < conv.in; ++i) {
            const float* w = &conv.weight[(static_cast<std::size_t>(o) * conv.in + i) * 9];
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = 2 * oy + ky - 1;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = 2 * ox + kx - 1;
                if (ix < 0 || ix >= x.w) continue;
                acc += w[ky * 3 + kx] * x.at(i, iy, ix);
              }
            }
          }
          y.at(o, oy, ox) = std::max(0.0f, acc);
        }
      }
    }
    x = std::move(y);
  }
  FeatureVector out(static_cast<std::size_t>(x.c), 0.0f);
  const float inv = 1.0f / static_cast<float>(x.h * x.w);
  for (int c = 0; c < x.c; ++c) {
    float s = 0.0f;
    for (int y = 0; y < x.h; ++y)
      for (int xx = 0; xx < x.w; ++xx) s += x.at(c, y, xx);
    out[static_cast<std::size_t>(c)] = s * inv;
  }
  return out;
}

TfidfSentenceEncoder::TfidfSentenceEncoder(const std::vector<Prompt>& corpus) {
  std::map<std::string, std::size_t> df;
  for (const auto& p : corpus) {
    const auto toks = p.tokens();
    for (const auto& t : std::set<std::string>(toks.begin(), toks.end())) ++df[t];
  }
  const double n = static_cast<double>(corpus.size());
  for (const auto& [word, count] : df) {
    index_[word] = idf_.size();
    idf_.push_back(static_cast<float>(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0));
  }
}

std::vector<float> TfidfSentenceEncoder::encode(const Prompt& p) const {
  std::vector<float> v(idf_.size(), 0.0f);
  for (const auto& t : p.tokens()) {
    auto it = index_.find(t);
    if (it != index_.end()) v[it->second] += 1.0f;
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= idf_[i];
  return v;
}

json TfidfSentenceEncoder::to_json() const {
  json words = json::array();
  std::vector<std::string> by_index(idf_.size());
  for (const auto& [w, i] : index_) by_index[i] = w;
  return {{"words", by_index}, {"idf", idf_}};
}

TfidfSentenceEncoder TfidfSentenceEncoder::from_json(const json& j) {
  TfidfSentenceEncoder e;
  const auto words = j.at("words").get<std::vector<std::string>>();
  e.idf_ = j.at("idf").get<std::vector<float>>();
  for (std::size_t i = 0; i < words.size(); ++i) e.index_[words[i]] = i;
  return e;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("cosine similarity of vectors with different lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

FeatureVector layout_features(const Layout& layout, const FeatureExtractor& fx) {
  return fx.extract(render(layout, fx.input_size(), fx.input_size()));
}

EvalCorpus EvalCorpus::build(std::vector<Layout> layouts, std::vector<Prompt> prompts, const FeatureExtractor& fx,
                             const SentenceEncoder& se) {
  if (layouts.size() != prompts.size()) throw ValidationError("layouts and prompts differ in length", "/corpus");
  EvalCorpus c;
  c.extractor_hash = fx.hash();
  c.features.reserve(layouts.size());
  c.sentence_vectors.reserve(prompts.size());
  for (const auto& l : layouts) c.features.push_back(layout_features(l, fx));
  for (const auto& p : prompts) c.sentence_vectors.push_back(se.encode(p));
  c.layouts = std::move(layouts);
  c.prompts = std::move(prompts);
  return c;
}

void EvalCorpus::save(const std::string& dir) const {
  Corpus items;
  for (std::size_t i = 0; i < layouts.size(); ++i) items.push_back({layouts[i], prompts[i], {}});
  save_corpus(items, dir);
  write_matrix(dir + "/features.bin", "CLYF", extractor_hash, features);
  write_matrix(dir + "/sentvecs.bin", "CLYS", 0, sentence_vectors);
}

EvalCorpus EvalCorpus::load(const std::string& dir, const SchemaPtr& schema, const FeatureExtractor& fx) {
  EvalCorpus c;
  for (auto& item : load_corpus(dir, schema)) {
    c.layouts.push_back(std::move(item.layout));
    c.prompts.push_back(std::move(item.prompt));
  }
  std::uint64_t tag = 0;
  c.features = read_matrix(dir + "/features.bin", "CLYF", tag);
  if (tag != fx.hash()) throw ValidationError("corpus features were computed with a different extractor", "/corpus");
  c.extractor_hash = tag;
  c.sentence_vectors = read_matrix(dir + "/sentvecs.bin", "CLYS", tag);
  if (c.features.size() != c.layouts.size() || c.sentence_vectors.size() != c.layouts.size())
    throw ValidationError("corpus feature count does not match layouts", "/corpus");
  return c;
}

FidResult fid(const std::vector<FeatureVector>& real, const std::vector<FeatureVector>& generated) {
  if (real.empty() || generated.empty()) throw ValidationError("FID needs non-empty feature sets");
  const auto dim = static_cast<Eigen::Index>(real.front().size());
  auto fit = [dim](const std::vector<FeatureVector>& xs, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), dim);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (static_cast<Eigen::Index>(xs[i].size()) != dim) throw ValidationError("feature dimension mismatch");
      for (Eigen::Index d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(i), d) = xs[i][static_cast<std::size_t>(d)];
    }
    mu = m.colwise().mean().transpose();
    const Eigen::MatrixXd centred = m.rowwise() - mu.transpose();
    const double denom = xs.size() > 1 ? static_cast<double>(xs.size() - 1) : 1.0;
    cov = centred.transpose() * centred / denom;
  };
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2;
  fit(real, mu1, s1);
  fit(generated, mu2, s2);

  FidResult out;
  auto min_eig = [](const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  };
  const double scale = std::max({1.0, s1.diagonal().maxCoeff(), s2.diagonal().maxCoeff()});
  if (min_eig(s1) <= 1e-12 * scale || min_eig(s2) <= 1e-12 * scale) {
    const Eigen::MatrixXd eps = 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
    s1 += eps;
    s2 += eps;
    out.regularized = true;
  }
  // tr sqrt(S1 S2) = tr sqrt(R S2 R) with R = S1^{1/2}, which is symmetric PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1);
  const Eigen::VectorXd root = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd r = e1.eigenvectors() * root.asDiagonal() * e1.eigenvectors().transpose();
  const Eigen::MatrixXd m = r * s2 * r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  out.value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  if (out.value < 0.0 && out.value > -1e-9) out.value = 0.0;
  return out;
}

FidResult fid(const std::vector<Raster>& real, const std::vector<Raster>& generated, const FeatureExtractor& fx) {
  std::vector<FeatureVector> a, b;
  a.reserve(real.size());
  b.reserve(generated.size());
  for (const auto& r : real) a.push_back(fx.extract(r));
  for (const auto& g : generated) b.push_back(fx.extract(g));
  return fid(a, b);
}

double cyc_sim_p(std::span<const float> prompt_vec, std::span<const float> gen_features, const EvalCorpus& corpus,
                 std::size_t k) {
  check_k(corpus, k);
  std::vector<double> visual(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) visual[i] = cosine_similarity(gen_features, corpus.features[i]);
  double sum = 0.0;
  const auto top = top_k(visual, k);
  for (auto i : top) sum += cosine_similarity(prompt_vec, corpus.sentence_vectors[i]);
  return sum / static_cast<double>(top.size());
}

double cyc_sim_l(std::span<const float> prompt_vec, std::span<const float> gen_features, const EvalCorpus& corpus,
                 std::size_t k) {
  check_k(corpus, k);
  std::vector<double> textual(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) textual[i] = cosine_similarity(prompt_vec, corpus.sentence_vectors[i]);
  double sum = 0.0;
  const auto top = top_k(textual, k);
  for (auto i : top) sum += cosine_similarity(gen_features, corpus.features[i]);
  return sum / static_cast<double>(top.size());
}

double cyc_sim_p(const Prompt& prompt, const Layout& generated, const EvalCorpus& corpus, std::size_t k,
                 const FeatureExtractor& fx, const SentenceEncoder& se) {
  const auto pv = se.encode(prompt);
  const auto gf = layout_features(generated, fx);
  return cyc_sim_p(pv, gf, corpus, k);
}

double cyc_sim_l(const Prompt& prompt, const Layout& generated, const EvalCorpus& corpus, std::size_t k,
                 const FeatureExtractor& fx, const SentenceEncoder& se) {
  const auto pv = se.encode(prompt);
  const auto gf = layout_features(generated, fx);
  return cyc_sim_l(pv, gf, corpus, k);
}

double c_usage(const std::vector<int>& requested, const Layout& generated) {
  const auto got = count_classes(generated);
  if (requested.size() != got.size())
    throw ValidationError("class count has " + std::to_string(requested.size()) + " entries, expected " +
                              std::to_string(got.size()),
                          "/class_count");
  long total = 0;
  long missing = 0;
  for (std::size_t k = 0; k < requested.size(); ++k) {
    if (requested[k] < 0) throw ValidationError("class counts must be non-negative", "/class_count/" + std::to_string(k));
    total += requested[k];
    missing += std::max(0, requested[k] - got[k]);
  }
  if (total == 0) throw ValidationError("C-Usage is undefined for an all-zero class count", "/class_count");
  return 1.0 - static_cast<double>(missing) / static_cast<double>(total);
}

double element_distance(const AttributeSchema& s, const Element& a, const Element& b) {
  const Box ba = element_box(s, a);
  const Box bb = element_box(s, b);
  const double res = s.resolution();
  const double coords = (std::abs(ba.x_min - bb.x_min) + std::abs(ba.y_min - bb.y_min) +
                         std::abs(ba.x_max - bb.x_max) + std::abs(ba.y_max - bb.y_max)) /
                        res;
  return 0.25 * coords + (element_class(s, a) == element_class(s, b) ? 0.0 : 1.0);
}

double design_distance(const Layout& given, const Layout& generated) {
  const auto& s = given.schema();
  const auto want = given.valid_elements();
  if (want.empty()) throw ValidationError("design distance needs at least one given element", "/given_design");
  const auto have = generated.valid_elements();
  double sum = 0.0;
  for (const auto& e : want) {
    double best = 2.0;
    for (const auto& g : have) best = std::min(best, element_distance(s, e, g));
    sum += best;
  }
  return sum / static_cast<double>(want.size());
}

double g_usage(const std::vector<Guideline>& requested, const Layout& generated) {
  const std::set<Guideline> want(requested.begin(), requested.end());
  if (want.empty()) throw ValidationError("G-Usage needs at least one guideline", "/guidelines");
  std::set<Guideline> have;
  for (const auto& w : extract_guidelines(generated)) have.insert(w.guideline);
  std::size_t hit = 0;
  for (const auto& g : want) hit += have.count(g);
  return static_cast<double>(hit) / static_cast<double>(want.size());
}

ConditionScores score_conditions(const ConditionSet& cs, const Layout& generated) {
  ConditionScores out;
  if (cs.class_count && std::accumulate(cs.class_count->begin(), cs.class_count->end(), 0) > 0)
    out.c_usage = c_usage(*cs.class_count, generated);
  if (cs.given_design && cs.given_design->valid_count() > 0)
    out.design_distance = design_distance(*cs.given_design, generated);
  if (cs.guidelines && !cs.guidelines->empty()) out.g_usage = g_usage(*cs.guidelines, generated);
  return out;
}

}  // namespace colay
