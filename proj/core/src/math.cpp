#include "gnndr/math.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace gnndr {

double std_normal_cdf(double t) {
  return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

double std_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(Errc::invalid_argument, "std_normal_quantile: q must be in (0,1)");
  }
  // Bracket generously, then bisect. 100 halvings of [-40,40] reach ~1e-22,
  // far below the 1e-13 target; the loop exits early on interval collapse.
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (std_normal_cdf(mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14 * (1.0 + std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

namespace {

QuadratureRule build_gauss_hermite(int n) {
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const int m = (n + 1) / 2;
  double z = 0.0;
  std::vector<double> roots(m, 0.0);

  for (int i = 0; i < m; ++i) {
    // Initial guesses from the classical asymptotics of the largest roots,
    // then marching inward from previously found roots.
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * roots[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * roots[1];
    } else {
      z = 2.0 * z - roots[i - 2];
    }

    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      // Orthonormal Hermite recurrence for the weight exp(-z^2).
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(Errc::numerical_singularity, "gauss_hermite: Newton refinement stalled");
    }
    roots[i] = z;

    const double w = 2.0 / (pp * pp);
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_hermite(int order) {
  if (order < 1 || order > 128) {
    throw Error(Errc::invalid_argument, "gauss_hermite: order must be in [1,128]");
  }
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, build_gauss_hermite(order)).first;
  }
  return it->second;
}

namespace detail {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id & 0xFFFFFFFFu),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  eng_.seed(seq);
}

double Rng::uniform() {
  // 53-bit mantissa draw mapped to (0,1]: never 0, so log(u) is finite.
  return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

cplx Rng::complex_normal(double var) {
  if (var < 0.0) {
    throw Error(Errc::invalid_argument, "complex_normal: variance must be >= 0");
  }
  if (var == 0.0) return {0.0, 0.0};
  const double u1 = uniform();
  const double u2 = uniform();
  // |z|^2 ~ Exp(var), uniform phase: one complex draw per uniform pair.
  const double r = std::sqrt(-var * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

Rng Rng::substream(std::uint64_t id) const {
  const std::uint64_t child = detail::splitmix64(stream_ ^ detail::splitmix64(id));
  return Rng(seed_, child);
}

CVec sample_cn(Rng& rng, const CVec& mean, double var) {
  if (!(var > 0.0)) {
    throw Error(Errc::invalid_argument, "sample_cn: variance must be > 0");
  }
  CVec out(mean.size());
  for (size_t i = 0; i < mean.size(); ++i) {
    out[i] = mean[i] + rng.complex_normal(var);
  }
  return out;
}

CVec rank1_inverse_apply(double scale, const CVec& u, double sigma2, const CVec& rhs) {
  if (u.size() != rhs.size()) {
    throw Error(Errc::invalid_argument, "rank1_inverse_apply: size mismatch");
  }
  if (!(sigma2 > 0.0)) {
    throw Error(Errc::invalid_argument, "rank1_inverse_apply: sigma2 must be > 0");
  }
  double u2 = 0.0;
  cplx uy = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    u2 += std::norm(u[i]);
    uy += std::conj(u[i]) * rhs[i];
  }
  // (c u u^H + s I)^{-1} = (1/s)(I - c u u^H / (s + c |u|^2))
  const double denom = sigma2 + scale * u2;
  if (!(std::abs(denom) > 1e-300)) {
    throw Error(Errc::numerical_singularity, "rank1_inverse_apply: singular update");
  }
  const cplx coef = scale * uy / denom;
  CVec out(rhs.size());
  for (size_t i = 0; i < rhs.size(); ++i) {
    out[i] = (rhs[i] - coef * u[i]) / sigma2;
  }
  return out;
}

double HermMatrix::trace_real() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += at(i, i).real();
  return t;
}

void HermMatrix::add_diagonal(double d) {
  for (int i = 0; i < n_; ++i) at(i, i) += d;
}

CVec hermitian_solve(HermMatrix a, CVec b) {
  const int n = a.dim();
  if (static_cast<int>(b.size()) != n) {
    throw Error(Errc::invalid_argument, "hermitian_solve: size mismatch");
  }
  // In-place Cholesky A = L L^H, then forward/back substitution.
  for (int j = 0; j < n; ++j) {
    double d = a.at(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(a.at(j, k));
    if (!(d > 0.0)) {
      throw Error(Errc::numerical_singularity, "hermitian_solve: matrix not positive definite");
    }
    const double ljj = std::sqrt(d);
    a.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cplx s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= a.at(i, k) * std::conj(a.at(j, k));
      a.at(i, j) = s / ljj;
    }
  }
  for (int i = 0; i < n; ++i) {
    cplx s = b[i];
    for (int k = 0; k < i; ++k) s -= a.at(i, k) * b[k];
    b[i] = s / a.at(i, i).real();
  }
  for (int i = n - 1; i >= 0; --i) {
    cplx s = b[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(a.at(k, i)) * b[k];
    b[i] = s / a.at(i, i).real();
  }
  return b;
}

}  // namespace gnndr
