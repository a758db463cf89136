#include "gnndr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gnndr {

namespace {

constexpr double kTinyMass = 1e-250;  // pattern mass below this carries no usable posterior

void require_state_dim(const ChannelSpec& spec, const CVec& s, const char* who) {
  if (static_cast<int>(s.size()) != spec.antennas) {
    throw Error(Errc::invalid_argument, std::string(who) + ": state dimension mismatch");
  }
}

void require_csi_shape(const ChannelSpec& spec, const CVec& v, const char* who) {
  const std::size_t want =
      spec.variant == Variant::LinearNoState ? 0 : static_cast<std::size_t>(spec.antennas);
  if (v.size() != want) {
    throw Error(Errc::invalid_argument, std::string(who) + ": side-information shape mismatch");
  }
}

void require_sign_pattern(const CVec& y, const char* who) {
  for (const cplx& c : y) {
    if (std::abs(std::abs(c.real()) - 1.0) > 1e-12 || std::abs(std::abs(c.imag()) - 1.0) > 1e-12) {
      throw Error(Errc::invalid_argument,
                  std::string(who) + ": observation is not a +-1 +-j sign pattern");
    }
  }
}

CVec spec_dither(const ChannelSpec& spec, const GaussianInputSpec& input) {
  if (spec.quantizer.kind == QuantizerKind::OneBitDithered) {
    return dither_vector(spec, input).b;
  }
  return {};
}

PosteriorMoments onebit_pattern_moments(const GaussianInputSpec& input, double sigma2,
                                        const CVec& s, const CVec& b, const CVec& y,
                                        const QuadratureRule& rule) {
  const double inv_sig = std::sqrt(2.0 / sigma2);
  const int p = static_cast<int>(s.size());
  return moments_from_likelihood(input.power, rule, [&](cplx x) {
    double like = 1.0;
    for (int i = 0; i < p; ++i) {
      cplx a = s[i] * x;
      if (!b.empty()) a += b[i];
      like *= std_normal_cdf(inv_sig * y[i].real() * a.real());
      like *= std_normal_cdf(inv_sig * y[i].imag() * a.imag());
    }
    return like;
  });
}

}  // namespace

PosteriorMoments moments_closed_form_gaussian(const CVec& s, double sigma2, double power,
                                              const CVec& y) {
  if (s.size() != y.size()) {
    throw Error(Errc::invalid_argument, "moments_closed_form_gaussian: dimension mismatch");
  }
  if (!(sigma2 > 0.0) || !(power > 0.0)) {
    throw Error(Errc::invalid_argument, "moments_closed_form_gaussian: sigma2, power must be > 0");
  }
  double s2 = 0.0;
  cplx sy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s2 += std::norm(s[i]);
    sy += std::conj(s[i]) * y[i];
  }
  const double denom = sigma2 + power * s2;
  PosteriorMoments m;
  m.mean = power * sy / denom;
  m.omega = power * sigma2 / denom;
  m.second_moment = m.omega + std::norm(m.mean);
  return m;
}

PosteriorMoments moments_from_likelihood(double power, const QuadratureRule& rule,
                                         const std::function<double(cplx)>& likelihood) {
  if (!(power > 0.0)) {
    throw Error(Errc::invalid_argument, "moments_from_likelihood: power must be > 0");
  }
  const double sp = std::sqrt(power);
  double den = 0.0, sx2 = 0.0;
  cplx sx = 0.0;
  for (int i = 0; i < rule.order; ++i) {
    const double ti = rule.nodes[i];
    const double wi = rule.weights[i];
    for (int j = 0; j < rule.order; ++j) {
      const cplx x{sp * ti, sp * rule.nodes[j]};
      const double wl = wi * rule.weights[j] * likelihood(x);
      den += wl;
      sx += wl * x;
      sx2 += wl * std::norm(x);
    }
  }
  if (!(den > 1e-300)) {
    throw Error(Errc::degenerate_posterior, "moments_from_likelihood: normalizer vanished");
  }
  PosteriorMoments m;
  m.mean = sx / den;
  m.second_moment = sx2 / den;
  m.omega = std::max(0.0, m.second_moment - std::norm(m.mean));
  return m;
}

PosteriorMoments moments_onebit_quadrature(const ChannelSpec& spec, const GaussianInputSpec& input,
                                           const CVec& y, const CVec& s,
                                           const QuadratureRule& rule) {
  spec.validate();
  input.validate();
  if (spec.variant != Variant::LinearNoState || spec.quantizer.kind == QuantizerKind::None) {
    throw Error(Errc::invalid_state, "moments_onebit_quadrature: need quantized LinearNoState");
  }
  require_state_dim(spec, s, "moments_onebit_quadrature");
  require_sign_pattern(y, "moments_onebit_quadrature");
  if (y.size() != s.size()) {
    throw Error(Errc::invalid_argument, "moments_onebit_quadrature: y/s dimension mismatch");
  }
  return onebit_pattern_moments(input, spec.noise_power, s, spec_dither(spec, input), y, rule);
}

PosteriorMoments onebit_moments_with_state(const ChannelSpec& spec, const GaussianInputSpec& input,
                                           const CVec& y, const CVec& s,
                                           const QuadratureRule& rule) {
  spec.validate();
  input.validate();
  if (spec.variant != Variant::FadingPerfectCsi || spec.quantizer.kind == QuantizerKind::None) {
    throw Error(Errc::invalid_state, "onebit_moments_with_state: need quantized FadingPerfectCsi");
  }
  require_state_dim(spec, s, "onebit_moments_with_state");
  require_sign_pattern(y, "onebit_moments_with_state");
  return onebit_pattern_moments(input, spec.noise_power, s, {}, y, rule);
}

PilotPosterior pilot_posterior(const ChannelSpec& spec, const GaussianInputSpec& input,
                               const CVec& v) {
  spec.validate();
  input.validate();
  if (spec.variant != Variant::FadingPilotCsi) {
    throw Error(Errc::invalid_state, "pilot_posterior requires FadingPilotCsi");
  }
  require_csi_shape(spec, v, "pilot_posterior");
  const double denom = spec.fading_power * std::norm(spec.pilot) + spec.noise_power;
  PilotPosterior post;
  post.var = spec.fading_power * spec.noise_power / denom;
  post.shat.resize(v.size());
  const cplx coef = spec.fading_power * std::conj(spec.pilot) / denom;
  for (std::size_t i = 0; i < v.size(); ++i) post.shat[i] = coef * v[i];
  return post;
}

PosteriorMoments moments_pilot_snis(const ChannelSpec& spec, const GaussianInputSpec& input,
                                    const CVec& y, const CVec& v, std::size_t n_s, Rng& rng) {
  spec.validate();
  input.validate();
  if (spec.variant != Variant::FadingPilotCsi || spec.quantizer.kind != QuantizerKind::None) {
    throw Error(Errc::not_implemented, "moments_pilot_snis: unquantized FadingPilotCsi only");
  }
  if (n_s < 10) {
    throw Error(Errc::invalid_argument, "moments_pilot_snis: n_s must be >= 10");
  }
  require_csi_shape(spec, v, "moments_pilot_snis");
  if (y.size() != v.size()) {
    throw Error(Errc::invalid_argument, "moments_pilot_snis: y/v dimension mismatch");
  }

  const PilotPosterior post = pilot_posterior(spec, input, v);
  const double P = input.power;
  const double sig2 = spec.noise_power;
  const int p = spec.antennas;

  // Proposal is the exact state posterior p(s|v); the weight is the
  // observation likelihood p(y|s) through its rank-1 marginal
  //   y | s ~ CN(0, P s s^H + sigma2 I),
  // reduced with Sherman-Morrison. Constant factors cancel on normalization.
  // Accumulate in one pass, rescaling by the running log-weight maximum so
  // escalated calls (n_s in the millions) stay O(1) in memory.
  double lw_max = -1e300;
  double wsum = 0.0, w2sum = 0.0, second = 0.0;
  cplx mean = 0.0;
  for (std::size_t k = 0; k < n_s; ++k) {
    double s2 = 0.0;
    cplx sy = 0.0;
    for (int i = 0; i < p; ++i) {
      const cplx s_i = post.shat[i] + rng.complex_normal(post.var);
      s2 += std::norm(s_i);
      sy += std::conj(s_i) * y[i];
    }
    const double denom = sig2 + P * s2;
    const double lw = P * std::norm(sy) / (sig2 * denom) - std::log(denom);
    if (lw > lw_max) {
      const double scale = std::exp(lw_max - lw);
      wsum *= scale;
      w2sum *= scale * scale;
      mean *= scale;
      second *= scale;
      lw_max = lw;
    }
    const double w = std::exp(lw - lw_max);
    const cplx m_k = P * sy / denom;
    const double omega_k = P * sig2 / denom;
    wsum += w;
    w2sum += w * w;
    mean += w * m_k;
    second += w * (omega_k + std::norm(m_k));
  }
  const double ess = wsum * wsum / w2sum;
  if (!(ess >= 10.0)) {
    throw Error(Errc::unstable_weights, "moments_pilot_snis: effective sample size below 10");
  }
  PosteriorMoments m;
  m.mean = mean / wsum;
  m.second_moment = second / wsum;
  m.omega = std::max(0.0, m.second_moment - std::norm(m.mean));
  return m;
}

OneBitTable onebit_enumerate(const ChannelSpec& spec, const GaussianInputSpec& input,
                             const CVec& s, const QuadratureRule& rule) {
  spec.validate();
  input.validate();
  if (spec.quantizer.kind == QuantizerKind::None) {
    throw Error(Errc::invalid_state, "onebit_enumerate requires a one-bit quantizer");
  }
  require_state_dim(spec, s, "onebit_enumerate");
  const int p = spec.antennas;
  const std::size_t count = onebit_pattern_count(p);
  const CVec b = spec_dither(spec, input);
  const double P = input.power;
  const double sp = std::sqrt(P);
  const double inv_sig = std::sqrt(2.0 / spec.noise_power);

  std::vector<double> den(count, 0.0), sx2(count, 0.0);
  std::vector<cplx> sx(count, cplx{0.0, 0.0});
  std::vector<double> comp(static_cast<std::size_t>(p) * 4);

  // One sweep over the tensor grid; per node the per-antenna sign
  // probabilities are shared by all 4^p patterns.
  for (int i = 0; i < rule.order; ++i) {
    for (int j = 0; j < rule.order; ++j) {
      const cplx x{sp * rule.nodes[i], sp * rule.nodes[j]};
      const double w = rule.weights[i] * rule.weights[j];
      for (int a = 0; a < p; ++a) {
        cplx g = s[a] * x;
        if (!b.empty()) g += b[a];
        const double pr = std_normal_cdf(inv_sig * g.real());
        const double pi = std_normal_cdf(inv_sig * g.imag());
        comp[a * 4 + 0] = pr * pi;
        comp[a * 4 + 1] = (1.0 - pr) * pi;
        comp[a * 4 + 2] = pr * (1.0 - pi);
        comp[a * 4 + 3] = (1.0 - pr) * (1.0 - pi);
      }
      const double x2 = std::norm(x);
      for (std::size_t idx = 0; idx < count; ++idx) {
        double prob = 1.0;
        for (int a = 0; a < p; ++a) prob *= comp[a * 4 + ((idx >> (2 * a)) & 3)];
        const double wl = w * prob;
        den[idx] += wl;
        sx[idx] += wl * x;
        sx2[idx] += wl * x2;
      }
    }
  }

  OneBitTable table;
  table.antennas = p;
  table.pmf.resize(count);
  table.moments.resize(count);
  double mmse = 0.0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    table.pmf[idx] = den[idx] / std::numbers::pi;
    PosteriorMoments& m = table.moments[idx];
    if (den[idx] > kTinyMass) {
      m.mean = sx[idx] / den[idx];
      m.second_moment = sx2[idx] / den[idx];
      m.omega = std::max(0.0, m.second_moment - std::norm(m.mean));
    } else {
      m.mean = 0.0;
      m.second_moment = P;
      m.omega = P;
    }
    mmse += table.pmf[idx] * m.omega;
  }
  table.mmse = mmse;
  return table;
}

OmegaMean conditional_omega_mean(const ChannelSpec& spec, const GaussianInputSpec& input,
                                 const CVec& v, std::size_t n, Rng& rng, std::size_t n_s,
                                 int quad_order) {
  spec.validate();
  input.validate();
  require_csi_shape(spec, v, "conditional_omega_mean");
  if (n < 1) {
    throw Error(Errc::invalid_argument, "conditional_omega_mean: n must be >= 1");
  }
  const double P = input.power;

  const bool quantized = spec.quantizer.kind != QuantizerKind::None;
  const CVec& known_s = spec.variant == Variant::LinearNoState ? spec.fixed_s : v;

  if (!quantized && spec.variant != Variant::FadingPilotCsi) {
    // omega(y,v) is the constant P sigma2/(sigma2 + P|s|^2) given the state.
    double s2 = 0.0;
    for (const cplx& c : known_s) s2 += std::norm(c);
    OmegaMean out;
    out.value = P * spec.noise_power / (spec.noise_power + P * s2);
    out.std_err = 0.0;
    out.cross_check = out.value;
    out.n_samples = n;
    return out;
  }

  if (quantized && spec.variant != Variant::FadingPilotCsi && spec.antennas <= 8) {
    const OneBitTable table = onebit_enumerate(spec, input, known_s, gauss_hermite(quad_order));
    double mean_m2 = 0.0;
    for (std::size_t idx = 0; idx < table.pmf.size(); ++idx) {
      mean_m2 += table.pmf[idx] * std::norm(table.moments[idx].mean);
    }
    OmegaMean out;
    out.value = table.mmse;
    out.std_err = 0.0;
    out.cross_check = P - mean_m2;
    out.n_samples = table.pmf.size();
    if (std::abs(out.value - out.cross_check) > 1e-6 * P) {
      throw Error(Errc::invalid_state,
                  "conditional_omega_mean: total-variance cross-check failed (raise quad order)");
    }
    return out;
  }

  if (spec.variant == Variant::FadingPilotCsi && quantized) {
    throw Error(Errc::not_implemented, "conditional_omega_mean: quantized pilot CSI unsupported");
  }

  // Monte Carlo over y ~ p(y|v), omega via the per-observation estimator.
  double sum_o = 0.0, sum_o2 = 0.0, sum_m2 = 0.0, sum_sec = 0.0, sum_sec2 = 0.0;
  const QuadratureRule& rule = gauss_hermite(quad_order);
  CVec y(spec.antennas);
  for (std::size_t k = 0; k < n; ++k) {
    PosteriorMoments m;
    if (spec.variant == Variant::FadingPilotCsi) {
      const PilotPosterior post = pilot_posterior(spec, input, v);
      CVec s = sample_cn(rng, post.shat, post.var);
      const cplx x = rng.complex_normal(P);
      y.resize(spec.antennas);
      for (int i = 0; i < spec.antennas; ++i) {
        y[i] = s[i] * x + rng.complex_normal(spec.noise_power);
      }
      // Escalate on effective-sample-size collapse (tail observations);
      // the per-observation contract leaves raising n_s to the caller.
      // Seven quadruplings cover the worst draws seen at p=4, 20 dB.
      std::size_t ns = n_s;
      for (int attempt = 0;; ++attempt) {
        try {
          m = moments_pilot_snis(spec, input, y, v, ns, rng);
          break;
        } catch (const Error& e) {
          if (e.code() != Errc::unstable_weights || attempt >= 7) throw;
          ns *= 4;
        }
      }
    } else {
      // Quantized, state known, p > 8: sample a pattern and integrate it.
      const cplx x = rng.complex_normal(P);
      y.resize(spec.antennas);
      for (int i = 0; i < spec.antennas; ++i) {
        const cplx u = known_s[i] * x + rng.complex_normal(spec.noise_power);
        y[i] = {u.real() >= 0.0 ? 1.0 : -1.0, u.imag() >= 0.0 ? 1.0 : -1.0};
      }
      m = onebit_pattern_moments(input, spec.noise_power, known_s, spec_dither(spec, input), y,
                                 rule);
    }
    sum_o += m.omega;
    sum_o2 += m.omega * m.omega;
    sum_m2 += std::norm(m.mean);
    sum_sec += m.second_moment;
    sum_sec2 += m.second_moment * m.second_moment;
  }
  const double nn = static_cast<double>(n);
  OmegaMean out;
  out.value = sum_o / nn;
  out.std_err = n > 1 ? std::sqrt(std::max(0.0, sum_o2 / nn - out.value * out.value) / (nn - 1)) : 0.0;
  out.cross_check = P - sum_m2 / nn;
  out.n_samples = n;

  // Both estimates come from the same draws, so value - cross_check equals
  // mean(second_moment) - P; its standard error is that of the second moment.
  const double sec_mean = sum_sec / nn;
  const double sec_se =
      n > 1 ? std::sqrt(std::max(0.0, sum_sec2 / nn - sec_mean * sec_mean) / (nn - 1)) : 0.0;
  if (std::abs(sec_mean - P) > std::max(3.0 * sec_se, 1e-9 * P)) {
    throw Error(Errc::invalid_state, "conditional_omega_mean: total-variance cross-check failed");
  }
  return out;
}

LmmseStats lmmse_stats(const ChannelSpec& spec, const GaussianInputSpec& input, const CVec& v,
                       std::size_t n, Rng& rng, int quad_order) {
  spec.validate();
  input.validate();
  require_csi_shape(spec, v, "lmmse_stats");
  if (n < 2) {
    throw Error(Errc::invalid_argument, "lmmse_stats: n must be >= 2");
  }
  const double P = input.power;
  const double sig2 = spec.noise_power;
  const int p = spec.antennas;
  const bool quantized = spec.quantizer.kind != QuantizerKind::None;
  const CVec& known_s = spec.variant == Variant::LinearNoState ? spec.fixed_s : v;

  LmmseStats st;
  st.cross.assign(p, cplx{0.0, 0.0});
  st.gram = HermMatrix(p);

  if (!quantized && spec.variant != Variant::FadingPilotCsi) {
    // Exact: cross = P s, gram = P s s^H + sigma2 I.
    for (int i = 0; i < p; ++i) {
      st.cross[i] = P * known_s[i];
      for (int j = 0; j < p; ++j) {
        st.gram.at(i, j) = P * known_s[i] * std::conj(known_s[j]);
      }
      st.gram.at(i, i) += sig2;
    }
  } else if (quantized && spec.variant != Variant::FadingPilotCsi && p <= 8) {
    // Exhaustive output moments over the sign-pattern alphabet.
    const OneBitTable table = onebit_enumerate(spec, input, known_s, gauss_hermite(quad_order));
    for (std::size_t idx = 0; idx < table.pmf.size(); ++idx) {
      const double w = table.pmf[idx];
      if (w <= 0.0) continue;
      const CVec y = onebit_pattern_signs(idx, p);
      const cplx mc = std::conj(table.moments[idx].mean);
      for (int i = 0; i < p; ++i) {
        st.cross[i] += w * y[i] * mc;
        for (int j = 0; j <= i; ++j) {
          st.gram.at(i, j) += w * y[i] * std::conj(y[j]);
        }
      }
    }
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) st.gram.at(i, j) = std::conj(st.gram.at(j, i));
    }
  } else if (spec.variant == Variant::FadingPilotCsi && !quantized) {
    // MC over the state posterior; x and z are integrated analytically:
    // E[x^* y | s,v] = P s and E[y y^H | s,v] = P s s^H + sigma2 I.
    const PilotPosterior post = pilot_posterior(spec, input, v);
    CVec s_k(p);
    for (std::size_t k = 0; k < n; ++k) {
      for (int i = 0; i < p; ++i) s_k[i] = post.shat[i] + rng.complex_normal(post.var);
      for (int i = 0; i < p; ++i) {
        st.cross[i] += s_k[i];
        for (int j = 0; j <= i; ++j) st.gram.at(i, j) += s_k[i] * std::conj(s_k[j]);
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int i = 0; i < p; ++i) {
      st.cross[i] *= P * inv_n;
      for (int j = 0; j <= i; ++j) st.gram.at(i, j) *= P * inv_n;
      st.gram.at(i, i) += sig2;
      for (int j = i + 1; j < p; ++j) st.gram.at(i, j) = std::conj(st.gram.at(j, i));
    }
  } else if (quantized && spec.variant != Variant::FadingPilotCsi) {
    throw Error(Errc::not_implemented, "lmmse_stats: one-bit with more than 8 antennas");
  } else {
    throw Error(Errc::not_implemented, "lmmse_stats: quantized pilot CSI unsupported");
  }

  // Ridge at 1e-12 * trace/p guards near-singular sampled grams.
  HermMatrix reg = st.gram;
  reg.add_diagonal(1e-12 * reg.trace_real() / p);
  const CVec sol = hermitian_solve(reg, st.cross);
  double q = 0.0;
  for (int i = 0; i < p; ++i) q += (std::conj(st.cross[i]) * sol[i]).real();
  st.lmmse = std::min(std::max(P - q, 1e-12), P);
  return st;
}

}  // namespace gnndr
