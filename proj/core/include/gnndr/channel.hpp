#pragma once

#include <cstdint>
#include <vector>

#include "gnndr/math.hpp"

namespace gnndr {

/// i.i.d. CN(0, power) codebook/input ensemble.
struct GaussianInputSpec {
  double power = 1.0;

  void validate() const;
};

enum class Variant { LinearNoState, FadingPerfectCsi, FadingPilotCsi };

enum class QuantizerKind { None, OneBit, OneBitDithered };

struct Quantizer {
  QuantizerKind kind = QuantizerKind::None;
  double alpha = 0.0;  // dither amplitude factor, OneBitDithered only
};

/// State-dependent memoryless channel y = s x + z observed through an
/// optional per-component one-bit quantizer, with receiver side information
/// v that is empty (LinearNoState), the state itself (FadingPerfectCsi), or
/// a noisy pilot observation y_p = x_p s + z_p (FadingPilotCsi).
struct ChannelSpec {
  Variant variant = Variant::LinearNoState;
  int antennas = 1;
  double noise_power = 1.0;   // sigma^2, per receive component
  double fading_power = 1.0;  // eta^2, per state entry (fading variants)
  CVec fixed_s;               // LinearNoState gain vector, size == antennas
  cplx pilot = {1.0, 0.0};    // x_p (FadingPilotCsi)
  Quantizer quantizer;

  void validate() const;
};

/// One generative draw: input x, state s, side information v, observation y.
struct ChannelUse {
  cplx x;
  CVec s;
  CVec v;
  CVec y;
};

struct DitherVector {
  CVec b;
};

/// Deterministic dither b_i = alpha sqrt(P/2) s_i t_i with Phi(t_i) = i/(p+1).
/// Requires LinearNoState with a OneBitDithered quantizer.
DitherVector dither_vector(const ChannelSpec& spec, const GaussianInputSpec& input);

/// Joint draw of (x, s, v, y). Draw order is fixed (x, state, pilot noise,
/// observation noise) so a (seed, stream) pair pins the entire use.
ChannelUse sample_use(const ChannelSpec& spec, const GaussianInputSpec& input, Rng& rng);

/// Same, but the input symbol is supplied by the caller (codeword symbols in
/// the link simulator). `dither` must be the precomputed dither for dithered
/// specs and empty otherwise.
ChannelUse sample_use_given_x(const ChannelSpec& spec, const GaussianInputSpec& input, cplx x,
                              Rng& rng, const CVec& dither);

/// Number of one-bit sign patterns, 4^antennas. Throws capacity-exceeded
/// beyond 8 antennas (the exhaustive-alphabet paths stop being viable).
std::size_t onebit_pattern_count(int antennas);

/// Pattern index from a +-1 +-j observation: bit 2i set iff Re(y_i) < 0,
/// bit 2i+1 set iff Im(y_i) < 0.
std::size_t onebit_pattern_index(const CVec& y);

/// Inverse of onebit_pattern_index.
CVec onebit_pattern_signs(std::size_t index, int antennas);

/// Conditional pmf over all 4^p sign patterns given input x and state s:
/// P(y | x, s) = prod_i Phi(sqrt(2) y_i^R (Re(s_i x) + b_i^R)/sigma)
///                      Phi(sqrt(2) y_i^I (Im(s_i x) + b_i^I)/sigma).
/// `dither` empty means zero dither.
std::vector<double> conditional_output_pmf_onebit(const ChannelSpec& spec,
                                                  const GaussianInputSpec& input, cplx x,
                                                  const CVec& s, const CVec& dither);

}  // namespace gnndr
