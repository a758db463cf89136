#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "gnndr/estimators.hpp"

namespace gnndr {

/// Decoder knowledge models: Opt uses the full per-observation posterior,
/// Csf only channel-level statistics, Csi per-state conditional statistics,
/// Lin the per-state linear (Bussgang) statistics.
enum class DecoderVariant { Opt, Csf, Csi, Lin };

inline constexpr std::array<DecoderVariant, 4> kAllVariants = {
    DecoderVariant::Opt, DecoderVariant::Csf, DecoderVariant::Csi, DecoderVariant::Lin};

const char* variant_name(DecoderVariant v);
std::optional<DecoderVariant> variant_from_name(std::string_view name);

struct GmiEstimate {
  DecoderVariant variant = DecoderVariant::Opt;
  double nats = 0.0;
  double std_err = 0.0;
  std::size_t n_samples = 0;  // top-level draws behind the estimate; 0 = closed form
  std::size_t clamped = 0;    // omega values clamped at the 1e-12 floor before a log
  std::size_t clamp_base = 0; // omega values inspected

  double bits() const;
  double clamped_fraction() const;
};

struct SampleSizes {
  std::size_t n = 20000;      // flat joint draws
  std::size_t n_outer = 128;  // state / side-information draws
  std::size_t n_inner = 128;  // observation draws per side-information draw
  std::size_t n_s = 4096;     // posterior state draws (SNIS, pilot LMMSE)
  int quad_order = 48;
};

/// The four GMI functionals. Dispatch by channel family:
///  - Gaussian LinearNoState: closed forms (no sampling).
///  - one-bit with known fixed state, p <= 8: exhaustive pattern sums.
///  - perfect-CSI fading: exact per-state values, MC over the state.
///  - pilot CSI: nested MC with SNIS posterior moments.
GmiEstimate gmi_opt(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng);
GmiEstimate gmi_csf(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng);
GmiEstimate gmi_csi(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng);
GmiEstimate gmi_lin(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng);

/// Common-random-numbers evaluation: every requested variant consumes the
/// same draw table, so the Jensen orderings opt >= csi >= csf hold exactly
/// on the empirical sample, not just in expectation.
std::vector<GmiEstimate> gmi_cohort(const ChannelSpec& spec, const GaussianInputSpec& input,
                                    const std::vector<DecoderVariant>& variants,
                                    const SampleSizes& sizes, Rng& rng);

/// Per-observation metric coefficients: the decoding metric accumulates
/// |g(y,v) - f(y,v) x|^2 per channel use. coeffs returns the (g, f) pair.
struct GnndrFunctions {
  DecoderVariant variant = DecoderVariant::Opt;
  std::function<std::pair<cplx, cplx>(const CVec& y, const CVec& v)> coeffs;
};

/// Builds the variant's processing/scaling functions for a channel. May run
/// calibration Monte Carlo at construction (Csf scaling, pilot statistics);
/// per-observation evaluation cost depends on the family (table lookups for
/// fixed one-bit channels, quadrature or SNIS otherwise).
GnndrFunctions gnndr_functions(DecoderVariant variant, const ChannelSpec& spec,
                               const GaussianInputSpec& input, const SampleSizes& sizes, Rng& rng);

/// GMI achieved by an arbitrary fixed (g,f) pair under the i.i.d. Gaussian
/// ensemble: maximizes
///   theta E|g-fx|^2 - E[ theta|g|^2/(1-theta|f|^2 P) ] + E[ log(1-theta|f|^2 P) ]
/// over theta < 0 by a log-spaced scan plus golden-section refinement.
/// Throws invalid-function when the maximizer sits at the large-|theta|
/// bracket end of a non-flat objective.
GmiEstimate gmi_fixed_gf(const ChannelSpec& spec, const GaussianInputSpec& input,
                         const GnndrFunctions& fns, std::size_t n, Rng& rng);

/// (P - lmmse)/lmmse for the conditional linear model given v.
double bussgang_snr(const ChannelSpec& spec, const GaussianInputSpec& input, const CVec& v,
                    std::size_t n, Rng& rng);

/// MC estimate of the conditional decomposition residual correlation
/// E[(E[x^* y|v]/P) x w^H(v) | v] with w = y - (E[x^* y|v]/P) x; exact value
/// is the zero matrix. max_abs is the largest entry magnitude, std_err its
/// standard error.
struct ResidualCheck {
  double max_abs;
  double std_err;
  std::size_t n_samples;
};

ResidualCheck bussgang_residual_check(const ChannelSpec& spec, const GaussianInputSpec& input,
                                      const CVec& v, std::size_t n, Rng& rng);

}  // namespace gnndr
