#include "tcl/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcl::averaging {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (rhs.n_ != n_) throw std::invalid_argument("matrix size mismatch");
  Matrix out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < n_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < n_; ++j) out(i, j) += a * rhs(k, j);
    }
  }
  return out;
}

std::vector<double> Matrix::operator*(std::span<const double> v) const {
  if (v.size() != n_) throw std::invalid_argument("vector size mismatch");
  std::vector<double> out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) acc += (*this)(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> Matrix::row_sums() const {
  std::vector<double> sums(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) sums[i] += (*this)(i, j);
  }
  return sums;
}

double Matrix::max_abs_diff(const Matrix& other) const {
  if (other.n_ != n_) throw std::invalid_argument("matrix size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    worst = std::max(worst, std::abs(data_[i] - other.data_[i]));
  }
  return worst;
}

ExtendedTimingVector extend(const TimingVector& v) {
  ExtendedTimingVector e{v.x, v.period};
  if (!v.x.empty()) e.x.push_back(v.x.front() + v.period);
  return e;
}

TimingVector reduce(const ExtendedTimingVector& v) {
  TimingVector t{v.x, v.period};
  if (!t.x.empty()) t.x.pop_back();
  for (double& xi : t.x) {
    xi = std::fmod(xi, v.period);
    if (xi < 0.0) xi += v.period;
  }
  return t;
}

Matrix build_gamma(std::size_t n) {
  if (n < 2) throw std::invalid_argument("build_gamma: need N >= 2");
  Matrix g(n + 1);
  g(0, 0) = 1.0;
  g(n, n) = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    g(i, i - 1) = 0.5;
    g(i, i + 1) = 0.5;
  }
  return g;
}

std::vector<double> gamma_eigvec(std::size_t n) {
  if (n < 2) throw std::invalid_argument("gamma_eigvec: need N >= 2");
  std::vector<double> g(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    g[j] = 1.0 - static_cast<double>(j) / static_cast<double>(n);
  }
  return g;
}

Matrix gamma_limit(std::size_t n) {
  const auto g = gamma_eigvec(n);
  Matrix m(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    m(i, 0) = g[i];
    m(i, n) = 1.0 - g[i];
  }
  return m;
}

Matrix gamma_power(std::size_t n, std::uint64_t k) {
  Matrix base = build_gamma(n);
  Matrix result = Matrix::identity(n + 1);
  while (k > 0) {
    if (k & 1u) result = result * base;
    k >>= 1u;
    if (k > 0) base = base * base;
  }
  return result;
}

TimingVector fixed_point(std::size_t n, double period) {
  if (n < 2) throw std::invalid_argument("fixed_point: need N >= 2");
  if (!(period > 0.0)) throw std::invalid_argument("fixed_point: period <= 0");
  TimingVector v;
  v.period = period;
  v.x.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    v.x[j] = period * static_cast<double>(j) / static_cast<double>(n);
  }
  return v;
}

void step_map(std::span<const double> from, std::span<double> to) {
  const std::size_t last = from.size() - 1;
  to[0] = from[0];
  to[last] = from[last];
  for (std::size_t i = 1; i < last; ++i) to[i] = 0.5 * (from[i - 1] + from[i + 1]);
}

ExtendedTimingVector iterate_map(ExtendedTimingVector x, std::uint64_t steps) {
  if (x.x.size() < 3) throw std::invalid_argument("iterate_map: need N >= 2");
  std::vector<double> scratch(x.x.size());
  for (std::uint64_t k = 0; k < steps; ++k) {
    step_map(x.x, scratch);
    x.x.swap(scratch);
  }
  return x;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

ConvergenceResult converge(const ExtendedTimingVector& x0,
                           const ConvergenceOptions& options) {
  const std::size_t n = x0.devices();
  if (n < 2) throw std::invalid_argument("converge: need N >= 2");
  const auto target = extend(fixed_point(n, x0.period));

  ConvergenceResult r;
  r.final = x0;
  std::vector<double> scratch(x0.x.size());
  const double tol = options.step_tolerance * x0.period;
  if (options.record_history) {
    r.history.push_back(sup_distance(r.final.x, target.x));
  }
  while (r.iterations < options.max_iterations) {
    step_map(r.final.x, scratch);
    const double moved = sup_distance(scratch, r.final.x);
    r.final.x.swap(scratch);
    ++r.iterations;
    if (options.record_history) {
      r.history.push_back(sup_distance(r.final.x, target.x));
    }
    if (moved < tol) {
      r.converged = true;
      break;
    }
  }
  r.distance_to_fixed_point = sup_distance(r.final.x, target.x);
  return r;
}

ExtendedTimingVector random_anchored_start(std::size_t n, double period,
                                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, period);
  ExtendedTimingVector x;
  x.period = period;
  x.x.resize(n + 1);
  x.x.front() = 0.0;
  x.x.back() = period;
  for (std::size_t i = 1; i < n; ++i) x.x[i] = u(rng);
  return x;
}

double interior_spectral_radius(std::size_t n, std::size_t iterations) {
  if (n < 2) throw std::invalid_argument("interior_spectral_radius: need N >= 2");
  if (n == 2) return 0.0;  // single interior node maps onto the anchors only
  // Vectors vanishing at both ends form an invariant subspace of G.
  std::vector<double> v(n + 1, 0.0), w(n + 1);
  for (std::size_t i = 1; i < n; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  auto norm = [](const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
  };
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    // Two applications per round: the spectrum is symmetric about zero, so
    // the single-step ratio oscillates while the two-step ratio converges.
    step_map(v, w);
    step_map(w, v);
    const double nv = norm(v);
    if (nv == 0.0) return 0.0;
    estimate = nv;
    for (double& x : v) x /= nv;
  }
  return std::sqrt(estimate);
}

}  // namespace tcl::averaging
