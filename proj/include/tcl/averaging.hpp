#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

// Linear analysis of the enforced-switch timing update. With N devices the
// timings are extended by a fictitious (N+1)-th entry holding the wrapped
// first timing, and one round of neighbour averaging becomes x <- G x with
// G the (N+1)x(N+1) matrix built by build_gamma().

namespace tcl::averaging {

/// Dense row-major square matrix. Analysis sizes stay small (N <= 1024).
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  static Matrix identity(std::size_t n);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * n_ + c];
  }

  Matrix operator*(const Matrix& rhs) const;
  std::vector<double> operator*(std::span<const double> v) const;

  std::vector<double> row_sums() const;
  double max_abs_diff(const Matrix& other) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct TimingVector {
  std::vector<double> x;  // switch timings in [0, period)
  double period = 1.0;
};

/// Timings plus the wrapped copy of the first one in the last slot.
struct ExtendedTimingVector {
  std::vector<double> x;  // size N+1, x.back() == x.front() + period
  double period = 1.0;

  std::size_t devices() const { return x.empty() ? 0 : x.size() - 1; }
};

ExtendedTimingVector extend(const TimingVector& v);
TimingVector reduce(const ExtendedTimingVector& v);

/// Averaging matrix for N >= 2 devices; throws std::invalid_argument otherwise.
Matrix build_gamma(std::size_t n);

/// gamma[j] = 1 - j/N for j = 0..N. Both gamma and 1-gamma are fixed by G.
std::vector<double> gamma_eigvec(std::size_t n);

/// Matrix with gamma as first column, 1-gamma as last, zeros elsewhere.
Matrix gamma_limit(std::size_t n);

/// G^k by repeated squaring.
Matrix gamma_power(std::size_t n, std::uint64_t k);

/// Evenly spaced timings 0, T/N, ..., T(N-1)/N.
TimingVector fixed_point(std::size_t n, double period);

/// Applies the averaging map `steps` times without materialising G.
ExtendedTimingVector iterate_map(ExtendedTimingVector x, std::uint64_t steps);

/// One application of the map.
void step_map(std::span<const double> from, std::span<double> to);

double sup_distance(std::span<const double> a, std::span<const double> b);

struct ConvergenceOptions {
  std::uint64_t max_iterations = 1'000'000;
  double step_tolerance = 1e-13;  // relative to the period
  bool record_history = false;
};

struct ConvergenceResult {
  ExtendedTimingVector final;
  std::uint64_t iterations = 0;
  bool converged = false;
  double distance_to_fixed_point = 0.0;  // sup-norm, absolute
  std::vector<double> history;           // distance after each iteration (k >= 0)
};

/// Iterates until successive iterates differ by less than the tolerance or
/// the cap is reached.
ConvergenceResult converge(const ExtendedTimingVector& x0,
                           const ConvergenceOptions& options = {});

/// Random anchored start: x[0] = 0, x[N] = T, interior uniform on [0, T).
ExtendedTimingVector random_anchored_start(std::size_t n, double period,
                                           std::mt19937_64& rng);

/// Magnitude of the dominant eigenvalue of G restricted to vectors with zero
/// first and last entries (the complement of span{gamma, 1-gamma}), estimated
/// by power iteration. Expected value cos(pi/N).
double interior_spectral_radius(std::size_t n, std::size_t iterations = 4000);

}  // namespace tcl::averaging
