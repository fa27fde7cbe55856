// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "chaincraft/pattern.hpp"
#include "chaincraft/rng.hpp"
#include "chaincraft/sum.hpp"

namespace chaincraft {

// Dense symmetric matrix, row-major, 0-based.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  SymMatrix() = default;
  explicit SymMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  double frobenius2() const {
    CompensatedSum s;
    for (double v : a) s += v * v;
    return s.value();
  }
  bool symmetric(double tol = 0.0) const {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
  }
};

inline constexpr std::size_t kMaxSampleDim = 4096;
inline constexpr std::size_t kMaxMcDim = 512;

// Z_ij = b_ij g_ij with g_ij iid standard normal on i <= j, mirrored.
inline SymMatrix sample_matrix(const Pattern& p, CounterRng& rng) {
  const std::size_t n = p.dim();
  if (n > kMaxSampleDim) throw std::invalid_argument("sample_matrix: dimension above " + std::to_string(kMaxSampleDim));
  SymMatrix z(n);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i; j <= n; ++j) {
      const double g = rng.normal();
      const double b2 = p(i, j);
      const double v = b2 > 0.0 ? std::sqrt(b2) * g : 0.0;
      z(i - 1, j - 1) = v;
      z(j - 1, i - 1) = v;
    }
  return z;
}

// Cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops below tol * ||Z||_F.
inline std::vector<double> eigenvalues(SymMatrix z, double tol = 1e-10, int max_sweeps = 100) {
  const std::size_t n = z.n;
  if (!z.symmetric(1e-12)) throw std::invalid_argument("eigenvalues: matrix is not symmetric");
  const double fro = std::sqrt(z.frobenius2());
  auto off2 = [&] {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * z(i, j) * z(i, j);
    return s.value();
  };
  for (int sweep = 0; sweep < max_sweeps && fro > 0.0; ++sweep) {
    if (std::sqrt(off2()) < tol * fro) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = z(p, q);
        if (apq == 0.0) continue;
        const double theta = (z(q, q) - z(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double zkp = z(k, p), zkq = z(k, q);
          z(k, p) = c * zkp - s * zkq;
          z(k, q) = s * zkp + c * zkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double zpk = z(p, k), zqk = z(q, k);
          z(p, k) = c * zpk - s * zqk;
          z(q, k) = s * zpk + c * zqk;
        }
        z(p, q) = z(q, p) = 0.0;
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = z(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

// Largest |eigenvalue|.
inline double operator_norm(const SymMatrix& z) {
  double m = 0.0;
  for (double e : eigenvalues(z)) m = std::max(m, std::fabs(e));
  return m;
}

inline double max_column_norm(const SymMatrix& z) {
  double best = 0.0;
  for (std::size_t j = 0; j < z.n; ++j) {
    CompensatedSum s;
    for (std::size_t i = 0; i < z.n; ++i) s += z(i, j) * z(i, j);
    best = std::max(best, std::sqrt(s.value()));
  }
  return best;
}

struct SampleBatch {
  std::string pattern_id;
  std::size_t trials = 0;
  std::vector<double> op_norms;
  std::vector<double> col_max_norms;
  std::uint64_t seed = 0;
};

struct McSummary {
  SampleBatch batch;
  double mean_op = 0.0, se_op = 0.0;
  double mean_col = 0.0, se_col = 0.0;
  bool samplewise_ok = true;  // ||Z|| >= max column norm on every trial
};

inline void mean_and_se(const std::vector<double>& x, double& mean, double& se) {
  mean = se = 0.0;
  if (x.empty()) return;
  CompensatedSum s;
  for (double v : x) s += v;
  mean = s.value() / static_cast<double>(x.size());
  if (x.size() < 2) return;
  CompensatedSum q;
  for (double v : x) q += (v - mean) * (v - mean);
  se = std::sqrt(q.value() / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

// Trial k uses stream split(k) of the seed, so results do not depend on the thread count.
inline McSummary mc_norms(const Pattern& p, std::size_t trials, std::uint64_t seed, unsigned threads = 0) {
  if (p.dim() > kMaxMcDim) throw std::invalid_argument("mc_norms: dimension above " + std::to_string(kMaxMcDim));
  McSummary out;
  SampleBatch& b = out.batch;
  b.pattern_id = p.id();
  b.trials = trials;
  b.seed = seed;
  b.op_norms.assign(trials, 0.0);
  b.col_max_norms.assign(trials, 0.0);
  const CounterRng root(seed);
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      CounterRng r = root.split(k);
      const SymMatrix z = sample_matrix(p, r);
      b.op_norms[k] = operator_norm(z);
      b.col_max_norms[k] = max_column_norm(z);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, trials / 64)));
  if (threads <= 1) {
    run(0, trials);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back(run, trials * w / threads, trials * (w + 1) / threads);
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < trials; ++k)
    if (b.op_norms[k] < b.col_max_norms[k] * (1.0 - 1e-9)) out.samplewise_ok = false;
  mean_and_se(b.op_norms, out.mean_op, out.se_op);
  mean_and_se(b.col_max_norms, out.mean_col, out.se_col);
  return out;
}

inline void write_batch_csv(std::ostream& os, const SampleBatch& b) {
  os << "trial,op_norm,col_max_norm\n";
  os.precision(17);
  for (std::size_t k = 0; k < b.trials; ++k) os << k << ',' << b.op_norms[k] << ',' << b.col_max_norms[k] << '\n';
}

// max_i sqrt(sum_j b^2_ij) + max_i sqrt(ln(i+1)) b_{sigma(i)(1)}.
inline double norm_proxy(const Pattern& p) {
  const auto c = detail::constant_with_log(p, [](double x) { return std::log(x); });
  return c.rowNormMax + c.logTermMax;
}

// Same with log2, the form the constant C uses.
inline double norm_proxy_log2(const Pattern& p) {
  const auto c = detail::constant_with_log(p, [](double x) { return std::log2(x); });
  return c.rowNormMax + c.logTermMax;
}

// ---------------------------------------------------------------------------
// exact gamma_2 on tiny spaces

struct FiniteMetricSpace {
  std::size_t n = 0;
  std::vector<double> d;  // n x n
  bool triangle = false;  // whether the triangle inequality was asserted

  double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }

  static FiniteMetricSpace from_matrix(std::size_t n, std::vector<double> d, bool require_triangle = false) {
    if (d.size() != n * n) throw std::invalid_argument("metric space: expected n*n distances");
    FiniteMetricSpace s{n, std::move(d), require_triangle};
    for (std::size_t i = 0; i < n; ++i) {
      if (s(i, i) != 0.0) throw std::invalid_argument("metric space: nonzero diagonal");
      for (std::size_t j = 0; j < n; ++j) {
        if (!(s(i, j) >= 0.0) || !std::isfinite(s(i, j))) throw std::invalid_argument("metric space: bad distance");
        if (s(i, j) != s(j, i)) throw std::invalid_argument("metric space: not symmetric");
      }
    }
    if (require_triangle)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k)
            if (s(i, k) > s(i, j) + s(j, k) * (1.0 + 1e-12)) throw std::invalid_argument("metric space: triangle inequality fails");
    return s;
  }

  FiniteMetricSpace scaled(double c) const {
    FiniteMetricSpace s = *this;
    for (double& v : s.d) v *= c;
    return s;
  }
};

inline constexpr std::size_t kMaxOracleSize = 8;

struct Gamma2Result {
  double value = 0.0;
  std::vector<std::vector<std::size_t>> sequence;  // A_0, A_1, ... up to the first level equal to T
};

namespace detail {

inline double set_distance(const FiniteMetricSpace& s, std::size_t t, std::uint32_t mask) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < s.n; ++a)
    if (mask >> a & 1u) best = std::min(best, s(t, a));
  return best;
}

inline std::vector<std::size_t> members(std::uint32_t mask, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < n; ++a)
    if (mask >> a & 1u) out.push_back(a);
  return out;
}

// Exhaustive search over A_0 (singletons) and A_1 (nonempty sets of size <= 4); A_h = T for h >= 2, and also for
// h = 1 when n <= 4. term(h, dist) gives the level term; sup runs over `targets`.
template <class Term>
Gamma2Result oracle_search(const FiniteMetricSpace& s, std::uint32_t targets, Term term) {
  if (s.n == 0) throw std::invalid_argument("gamma2: empty space");
  if (s.n > kMaxOracleSize) throw std::invalid_argument("gamma2: exhaustive oracle needs n <= 8");
  const std::uint32_t all = (1u << s.n) - 1u;
  if (targets == 0) targets = all;
  Gamma2Result best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> level1;
  if (s.n <= 4) {
    level1.push_back(all);
  } else {
    for (std::uint32_t m = 1; m <= all; ++m)
      if (__builtin_popcount(m) <= 4) level1.push_back(m);
  }
  for (std::size_t a0 = 0; a0 < s.n; ++a0)
    for (std::uint32_t m1 : level1) {
      double sup = 0.0;
      for (std::size_t t = 0; t < s.n; ++t) {
        if (!(targets >> t & 1u)) continue;
        sup = std::max(sup, term(0, s(t, a0)) + term(1, set_distance(s, t, m1)));
      }
      if (sup < best.value) {
        best.value = sup;
        best.sequence = {{a0}, members(m1, s.n)};
        if (m1 != all) best.sequence.push_back(members(all, s.n));
      }
    }
  if (s.n == 1) best.sequence = {{0}};
  return best;
}

}  // namespace detail

// inf over admissible sequences of sup_t sum_h 2^{h/2} d(t, A_h); `targets` (bitmask, 0 = all) restricts the sup.
inline Gamma2Result gamma2_exact(const FiniteMetricSpace& s, std::uint32_t targets = 0) {
  return detail::oracle_search(s, targets, [](int h, double d) { return h == 0 ? d : std::sqrt(2.0) * d; });
}

// inf over admissible sequences of sup_t sum_h 2^h d(t, A_h)^2.
inline double weak_series_exact(const FiniteMetricSpace& s, std::uint32_t targets = 0) {
  return detail::oracle_search(s, targets, [](int h, double d) { return std::ldexp(d * d, h); }).value;
}

}  // namespace chaincraft
