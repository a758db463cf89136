#pragma once

#include <functional>

#include "gnndr/channel.hpp"
#include "gnndr/math.hpp"

namespace gnndr {

/// Conditional-mean decomposition of the input given (y, v):
/// omega = E[|x|^2 | y,v] - |E[x | y,v]|^2, clamped at 0 against roundoff.
struct PosteriorMoments {
  cplx mean;
  double second_moment;
  double omega;
};

/// Unquantized linear observation y = s x + z: the posterior is Gaussian,
/// mean = P s^H y / (sigma2 + P|s|^2) and omega = P sigma2 / (sigma2 + P|s|^2).
PosteriorMoments moments_closed_form_gaussian(const CVec& s, double sigma2, double power,
                                              const CVec& y);

/// Generic tensor Gauss-Hermite engine: moments of x ~ CN(0, power) under an
/// arbitrary nonnegative likelihood L(x). Substituting x = sqrt(P)(t1 + j t2)
/// absorbs the prior into the Hermite weight. Throws degenerate-posterior
/// when the normalizer vanishes (an impossible observation).
PosteriorMoments moments_from_likelihood(double power, const QuadratureRule& rule,
                                         const std::function<double(cplx)>& likelihood);

/// Posterior moments for a one-bit LinearNoState observation pattern y
/// (entries +-1 +-j), state s, with the spec's dither folded in.
PosteriorMoments moments_onebit_quadrature(const ChannelSpec& spec, const GaussianInputSpec& input,
                                           const CVec& y, const CVec& s,
                                           const QuadratureRule& rule);

/// Same machinery for fading channels with per-use known state (v = s).
PosteriorMoments onebit_moments_with_state(const ChannelSpec& spec, const GaussianInputSpec& input,
                                           const CVec& y, const CVec& s,
                                           const QuadratureRule& rule);

/// Gaussian posterior of the state given a pilot observation v:
/// s | v ~ CN(shat, var I) with shat = eta^2 x_p^* v / (eta^2 |x_p|^2 + sigma2).
struct PilotPosterior {
  CVec shat;
  double var;
};

PilotPosterior pilot_posterior(const ChannelSpec& spec, const GaussianInputSpec& input,
                               const CVec& v);

/// Self-normalized importance sampling for pilot-CSI posterior moments:
/// draws s ~ p(s|v), weights by the observation likelihood p(y|s) via the
/// rank-1 marginal, and mixes the per-state Gaussian moments. Throws
/// unstable-weights when the effective sample size drops below 10.
PosteriorMoments moments_pilot_snis(const ChannelSpec& spec, const GaussianInputSpec& input,
                                    const CVec& y, const CVec& v, std::size_t n_s, Rng& rng);

/// Exhaustive one-bit alphabet summary for a known state: pattern pmf
/// P(y|s) and posterior moments per pattern, from one tensor quadrature
/// sweep. The basis of every deterministic one-bit evaluation.
struct OneBitTable {
  int antennas = 0;
  std::vector<double> pmf;               // size 4^p, sums to 1 up to quadrature error
  std::vector<PosteriorMoments> moments; // entries with pmf ~ 0 carry mean 0, omega = P
  double mmse = 0.0;                     // sum_y pmf(y) omega(y)
};

OneBitTable onebit_enumerate(const ChannelSpec& spec, const GaussianInputSpec& input,
                             const CVec& s, const QuadratureRule& rule);

/// E[omega(y,v) | v] with a cross-check against P - E[|E[x|y,v]|^2 | v]
/// (total-variance identity; disagreement beyond 3 std errs throws
/// invalid-state). Exhaustive for one-bit channels with known state,
/// closed form for unquantized linear observations, Monte Carlo otherwise.
struct OmegaMean {
  double value;
  double std_err;
  double cross_check;
  std::size_t n_samples;
};

OmegaMean conditional_omega_mean(const ChannelSpec& spec, const GaussianInputSpec& input,
                                 const CVec& v, std::size_t n, Rng& rng,
                                 std::size_t n_s = 4096, int quad_order = 48);

/// First and second conditional output moments and the LMMSE residual:
/// cross = E[x^* y | v], gram = E[y y^H | v], lmmse = P - cross^H gram^{-1} cross.
struct LmmseStats {
  CVec cross;
  HermMatrix gram;
  double lmmse;
};

LmmseStats lmmse_stats(const ChannelSpec& spec, const GaussianInputSpec& input, const CVec& v,
                       std::size_t n, Rng& rng, int quad_order = 48);

}  // namespace gnndr
