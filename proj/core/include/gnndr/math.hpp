#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "gnndr/errors.hpp"

namespace gnndr {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

/// Standard normal CDF, evaluated through erfc. Absolute error is at the
/// level of the libm erfc (well below 1e-12 everywhere).
double std_normal_cdf(double t);

/// Inverse of std_normal_cdf on (0,1). Bisection refined to ~1e-13.
double std_normal_quantile(double q);

/// Nodes/weights for the Hermite weight exp(-t^2) on the real line:
/// sum_i w_i f(t_i) ~ integral exp(-t^2) f(t) dt, so sum_i w_i = sqrt(pi).
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;    // descending, symmetric about 0
  std::vector<double> weights;  // positive, symmetric
};

/// Gauss-Hermite rule of the given order (1..128). Rules are computed once
/// by Newton refinement of the recurrence and cached per order.
const QuadratureRule& gauss_hermite(int order);

/// Deterministic stream-splittable generator. Identical (seed, stream_id)
/// reproduces the identical draw sequence; distinct stream_ids give
/// statistically independent streams. Gaussians come from an explicit
/// Box-Muller on 53-bit uniforms so the sequence does not depend on the
/// standard library's unspecified distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  /// Uniform on (0,1].
  double uniform();

  /// Real standard normal.
  double normal();

  /// Scalar CN(0, var): real and imaginary parts each N(0, var/2).
  cplx complex_normal(double var);

  /// Child stream, independent of the parent and of other child ids.
  Rng substream(std::uint64_t id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. vector of mean[i] + CN(0, var) entries. Requires var > 0.
CVec sample_cn(Rng& rng, const CVec& mean, double var);

/// Solves (scale * u u^H + sigma2 I) x = rhs exactly via Sherman-Morrison.
/// Requires sigma2 > 0 and a non-singular update (throws
/// numerical-singularity when 1 + scale |u|^2 / sigma2 is ~ 0).
CVec rank1_inverse_apply(double scale, const CVec& u, double sigma2, const CVec& rhs);

/// Dense Hermitian matrix, column-major, for small p (LMMSE gram matrices).
class HermMatrix {
 public:
  HermMatrix() = default;
  explicit HermMatrix(int n) : n_(n), a_(static_cast<size_t>(n) * n) {}

  int dim() const { return n_; }
  cplx& at(int r, int c) { return a_[static_cast<size_t>(c) * n_ + r]; }
  const cplx& at(int r, int c) const { return a_[static_cast<size_t>(c) * n_ + r]; }

  double trace_real() const;
  void add_diagonal(double d);

 private:
  int n_ = 0;
  std::vector<cplx> a_;
};

/// Solves A x = b for Hermitian positive definite A by Cholesky.
/// Throws numerical-singularity when a pivot is not strictly positive.
CVec hermitian_solve(HermMatrix a, CVec b);

namespace detail {
std::uint64_t splitmix64(std::uint64_t x);
}

}  // namespace gnndr
