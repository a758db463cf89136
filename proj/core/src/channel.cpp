#include "gnndr/channel.hpp"

#include <cmath>

namespace gnndr {

namespace {

// sgn(0) := +1 by convention, matching the quantizer definition.
inline double sgn(double t) { return t >= 0.0 ? 1.0 : -1.0; }

inline cplx quantize_onebit(cplx u) { return {sgn(u.real()), sgn(u.imag())}; }

}  // namespace

void GaussianInputSpec::validate() const {
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw Error(Errc::invalid_argument, "input power must be positive and finite");
  }
}

void ChannelSpec::validate() const {
  if (antennas < 1 || antennas > 64) {
    throw Error(Errc::invalid_argument, "antennas must be in [1,64]");
  }
  if (!(noise_power > 0.0) || !std::isfinite(noise_power)) {
    throw Error(Errc::invalid_argument, "noise_power must be positive and finite");
  }
  if (variant == Variant::LinearNoState) {
    if (static_cast<int>(fixed_s.size()) != antennas) {
      throw Error(Errc::invalid_argument, "fixed_s must have one entry per antenna");
    }
  } else {
    if (!(fading_power > 0.0) || !std::isfinite(fading_power)) {
      throw Error(Errc::invalid_argument, "fading_power must be positive and finite");
    }
    if (!fixed_s.empty()) {
      throw Error(Errc::invalid_argument, "fixed_s only applies to LinearNoState");
    }
  }
  if (variant == Variant::FadingPilotCsi && std::norm(pilot) == 0.0) {
    throw Error(Errc::invalid_argument, "pilot symbol must be nonzero");
  }
  if (quantizer.kind == QuantizerKind::OneBitDithered) {
    if (variant != Variant::LinearNoState) {
      throw Error(Errc::invalid_argument, "dithered quantizer requires LinearNoState");
    }
    if (!(quantizer.alpha >= 0.0) || !std::isfinite(quantizer.alpha)) {
      throw Error(Errc::invalid_argument, "dither alpha must be finite and >= 0");
    }
  }
}

DitherVector dither_vector(const ChannelSpec& spec, const GaussianInputSpec& input) {
  spec.validate();
  input.validate();
  if (spec.variant != Variant::LinearNoState ||
      spec.quantizer.kind != QuantizerKind::OneBitDithered) {
    throw Error(Errc::invalid_state, "dither_vector requires LinearNoState + OneBitDithered");
  }
  const int p = spec.antennas;
  DitherVector d;
  d.b.resize(p);
  const double amp = spec.quantizer.alpha * std::sqrt(input.power / 2.0);
  for (int i = 0; i < p; ++i) {
    const double t = std_normal_quantile(static_cast<double>(i + 1) / (p + 1));
    d.b[i] = amp * t * spec.fixed_s[i];
  }
  return d;
}

ChannelUse sample_use_given_x(const ChannelSpec& spec, const GaussianInputSpec& input, cplx x,
                              Rng& rng, const CVec& dither) {
  const int p = spec.antennas;
  ChannelUse use;
  use.x = x;

  switch (spec.variant) {
    case Variant::LinearNoState:
      use.s = spec.fixed_s;
      break;
    case Variant::FadingPerfectCsi:
      use.s.resize(p);
      for (int i = 0; i < p; ++i) use.s[i] = rng.complex_normal(spec.fading_power);
      use.v = use.s;
      break;
    case Variant::FadingPilotCsi:
      use.s.resize(p);
      for (int i = 0; i < p; ++i) use.s[i] = rng.complex_normal(spec.fading_power);
      use.v.resize(p);
      for (int i = 0; i < p; ++i) {
        use.v[i] = spec.pilot * use.s[i] + rng.complex_normal(spec.noise_power);
      }
      break;
  }

  use.y.resize(p);
  for (int i = 0; i < p; ++i) {
    cplx u = use.s[i] * x + rng.complex_normal(spec.noise_power);
    if (spec.quantizer.kind != QuantizerKind::None) {
      if (!dither.empty()) u += dither[i];
      u = quantize_onebit(u);
    }
    use.y[i] = u;
  }
  return use;
}

ChannelUse sample_use(const ChannelSpec& spec, const GaussianInputSpec& input, Rng& rng) {
  spec.validate();
  input.validate();
  const cplx x = rng.complex_normal(input.power);
  CVec b;
  if (spec.quantizer.kind == QuantizerKind::OneBitDithered) {
    b = dither_vector(spec, input).b;
  }
  return sample_use_given_x(spec, input, x, rng, b);
}

std::size_t onebit_pattern_count(int antennas) {
  if (antennas < 1) {
    throw Error(Errc::invalid_argument, "antennas must be >= 1");
  }
  if (antennas > 8) {
    throw Error(Errc::capacity_exceeded, "exhaustive one-bit paths support at most 8 antennas");
  }
  return std::size_t{1} << (2 * antennas);
}

std::size_t onebit_pattern_index(const CVec& y) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].real() < 0.0) idx |= std::size_t{1} << (2 * i);
    if (y[i].imag() < 0.0) idx |= std::size_t{1} << (2 * i + 1);
  }
  return idx;
}

CVec onebit_pattern_signs(std::size_t index, int antennas) {
  CVec y(antennas);
  for (int i = 0; i < antennas; ++i) {
    const double re = (index >> (2 * i)) & 1 ? -1.0 : 1.0;
    const double im = (index >> (2 * i + 1)) & 1 ? -1.0 : 1.0;
    y[i] = {re, im};
  }
  return y;
}

std::vector<double> conditional_output_pmf_onebit(const ChannelSpec& spec,
                                                  const GaussianInputSpec& input, cplx x,
                                                  const CVec& s, const CVec& dither) {
  input.validate();
  if (spec.quantizer.kind == QuantizerKind::None) {
    throw Error(Errc::invalid_state, "conditional_output_pmf_onebit requires a one-bit quantizer");
  }
  const int p = spec.antennas;
  if (static_cast<int>(s.size()) != p) {
    throw Error(Errc::invalid_argument, "state dimension must match antennas");
  }
  const std::size_t count = onebit_pattern_count(p);
  const double inv_sig = std::sqrt(2.0 / spec.noise_power);

  // Per antenna, the four (sign_R, sign_I) probabilities; pattern pmf is the
  // product across antennas.
  std::vector<double> comp(static_cast<std::size_t>(p) * 4);
  for (int i = 0; i < p; ++i) {
    cplx a = s[i] * x;
    if (!dither.empty()) a += dither[i];
    const double pr = std_normal_cdf(inv_sig * a.real());
    const double pi = std_normal_cdf(inv_sig * a.imag());
    comp[i * 4 + 0] = pr * pi;                  // (+,+)
    comp[i * 4 + 1] = (1.0 - pr) * pi;          // (-,+)
    comp[i * 4 + 2] = pr * (1.0 - pi);          // (+,-)
    comp[i * 4 + 3] = (1.0 - pr) * (1.0 - pi);  // (-,-)
  }

  std::vector<double> pmf(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    double prob = 1.0;
    for (int i = 0; i < p; ++i) {
      prob *= comp[i * 4 + ((idx >> (2 * i)) & 3)];
    }
    pmf[idx] = prob;
  }
  return pmf;
}

}  // namespace gnndr
