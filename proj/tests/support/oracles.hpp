#pragma once

// Independent reference implementations used to cross-check the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "colay/conditions.hpp"
#include "colay/layout.hpp"
#include "colay/metrics.hpp"

namespace colay::testing {

inline double plain_cosine(const std::vector<float>& a, const std::vector<float>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += (long double)a[i] * b[i];
    na += (long double)a[i] * a[i];
    nb += (long double)b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return double(dot / std::sqrt(na * nb));
}

// Item i is retrieved when fewer than k items outrank it; an item outranks i
// if it is strictly more similar, or equally similar with a smaller index.
inline std::vector<bool> retrieved_by_rank(const std::vector<double>& sim, std::size_t k) {
  std::vector<bool> in(sim.size(), false);
  for (std::size_t i = 0; i < sim.size(); ++i) {
    std::size_t better = 0;
    for (std::size_t j = 0; j < sim.size(); ++j)
      if (sim[j] > sim[i] || (sim[j] == sim[i] && j < i)) ++better;
    in[i] = better < k;
  }
  return in;
}

inline double brute_cycsim(const std::vector<std::vector<float>>& query_space, const std::vector<float>& query,
                           const std::vector<std::vector<float>>& score_space, const std::vector<float>& score_ref,
                           std::size_t k) {
  std::vector<double> sim;
  for (const auto& v : query_space) sim.push_back(plain_cosine(query, v));
  const auto in = retrieved_by_rank(sim, k);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i]) {
      sum += plain_cosine(score_ref, score_space[i]);
      ++n;
    }
  return sum / double(n);
}

inline double brute_c_usage(const std::vector<int>& want, const Layout& gen) {
  std::vector<int> have(want.size(), 0);
  for (const auto& e : gen.valid_elements()) have[static_cast<std::size_t>(element_class(gen.schema(), e))] += 1;
  double total = 0, miss = 0;
  for (std::size_t k = 0; k < want.size(); ++k) {
    total += want[k];
    if (want[k] > have[k]) miss += want[k] - have[k];
  }
  return 1.0 - miss / total;
}

inline double brute_chamfer(const Layout& given, const Layout& gen) {
  const auto& s = given.schema();
  const double res = s.resolution();
  double sum = 0.0;
  int n = 0;
  for (const auto& a : given.valid_elements()) {
    double best = 2.0;
    for (const auto& b : gen.valid_elements()) {
      double d = 0.0;
      for (auto idx : {s.x_min_index(), s.y_min_index(), s.x_max_index(), s.y_max_index()})
        d += std::abs(a.values[idx] - b.values[idx]) / res / 4.0;
      if (a.values[s.class_index()] != b.values[s.class_index()]) d += 1.0;
      best = std::min(best, d);
    }
    sum += best;
    ++n;
  }
  return sum / n;
}

inline double brute_g_usage(const std::vector<Guideline>& want, const Layout& gen) {
  const auto& s = gen.schema();
  std::set<std::pair<int, int>> have;
  for (const auto& e : gen.valid_elements()) {
    have.insert({0, e.values[s.x_min_index()]});
    have.insert({0, e.values[s.x_max_index()]});
    have.insert({1, e.values[s.y_min_index()]});
    have.insert({1, e.values[s.y_max_index()]});
  }
  std::set<std::pair<int, int>> w;
  for (const auto& g : want) w.insert({int(g.axis), g.position});
  double hit = 0;
  for (const auto& g : w) hit += have.count(g);
  return hit / double(w.size());
}

// Principal square root by the Denman-Beavers iteration; valid for matrices
// with positive real spectrum, such as a product of two SPD matrices.
inline Eigen::MatrixXd denman_beavers_sqrt(const Eigen::MatrixXd& a, int iterations = 100) {
  Eigen::MatrixXd y = a;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < iterations; ++i) {
    const Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    const Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    y = y_next;
    z = z_next;
  }
  return y;
}

// Frechet distance from sample statistics, with the unsymmetrized product.
inline double brute_fid(const std::vector<std::vector<float>>& a, const std::vector<std::vector<float>>& b) {
  const auto dim = static_cast<Eigen::Index>(a.front().size());
  auto stats = [dim](const std::vector<std::vector<float>>& xs, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = Eigen::VectorXd::Zero(dim);
    for (const auto& x : xs)
      for (Eigen::Index d = 0; d < dim; ++d) mu(d) += x[std::size_t(d)];
    mu /= double(xs.size());
    cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& x : xs)
      for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) cov(i, j) += (x[std::size_t(i)] - mu(i)) * (x[std::size_t(j)] - mu(j));
    cov /= double(xs.size() - 1);
  };
  Eigen::VectorXd m1, m2;
  Eigen::MatrixXd c1, c2;
  stats(a, m1, c1);
  stats(b, m2, c2);
  const Eigen::MatrixXd root = denman_beavers_sqrt(c1 * c2);
  return (m1 - m2).squaredNorm() + c1.trace() + c2.trace() - 2.0 * root.trace();
}

}  // namespace colay::testing
