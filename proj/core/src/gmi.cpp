#include "gnndr/gmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace gnndr {

namespace {

constexpr double kOmegaFloor = 1e-12;

enum class Family { GaussFixed, OneBitFixed, FadeGauss, FadeOneBit, PilotGauss, PilotOneBit };

Family classify(const ChannelSpec& spec) {
  const bool q = spec.quantizer.kind != QuantizerKind::None;
  switch (spec.variant) {
    case Variant::LinearNoState: return q ? Family::OneBitFixed : Family::GaussFixed;
    case Variant::FadingPerfectCsi: return q ? Family::FadeOneBit : Family::FadeGauss;
    case Variant::FadingPilotCsi: return q ? Family::PilotOneBit : Family::PilotGauss;
  }
  throw Error(Errc::invalid_argument, "unknown channel variant");
}

struct Welford {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;

  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - m * m);
    return std::sqrt(var / static_cast<double>(n - 1));
  }
};

double log_ratio_clamped(double power, double omega, std::size_t& clamped) {
  if (!(omega >= kOmegaFloor)) {
    omega = kOmegaFloor;
    ++clamped;
  }
  return std::log(power / omega);
}

double gauss_omega(double power, double sigma2, const CVec& s) {
  double s2 = 0.0;
  for (const cplx& c : s) s2 += std::norm(c);
  return power * sigma2 / (sigma2 + power * s2);
}

// Deterministic stream id from observation bytes: evaluators seeded this way
// are pure functions of (y, v), so decode results do not depend on the order
// or thread that evaluates them.
std::uint64_t observation_hash(const CVec& y, const CVec& v) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  const auto mix = [&h](double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    h = detail::splitmix64(h ^ u);
  };
  for (const cplx& c : y) {
    mix(c.real());
    mix(c.imag());
  }
  for (const cplx& c : v) {
    mix(c.real());
    mix(c.imag());
  }
  return h;
}

// SNIS throws unstable-weights when the effective sample size collapses,
// which a long cohort run will hit on tail observations (large |x| pushes
// the y-likelihood outside the pilot posterior's bulk). Per the estimator
// contract the caller raises n_s, so escalate 4x before giving up; the
// escalated estimate stays unbiased, it just spends more inner samples on
// the hard observation. Seven quadruplings cover the worst draws seen at
// p=4, 20 dB, where roughly one observation in 10^4 needs n_s in the
// millions before the weights stabilize.
PosteriorMoments pilot_snis_escalated(const ChannelSpec& spec, const GaussianInputSpec& input,
                                      const CVec& y, const CVec& v, std::size_t n_s, Rng& rng) {
  std::size_t ns = n_s;
  for (int attempt = 0;; ++attempt) {
    try {
      return moments_pilot_snis(spec, input, y, v, ns, rng);
    } catch (const Error& e) {
      if (e.code() != Errc::unstable_weights || attempt >= 7) throw;
      ns *= 4;
    }
  }
}

GmiEstimate make_estimate(DecoderVariant v, double nats, double se, std::size_t n,
                          std::size_t clamped, std::size_t base) {
  GmiEstimate e;
  e.variant = v;
  e.nats = nats;
  e.std_err = se;
  e.n_samples = n;
  e.clamped = clamped;
  e.clamp_base = base;
  return e;
}

}  // namespace

const char* variant_name(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::Opt: return "opt";
    case DecoderVariant::Csf: return "csf";
    case DecoderVariant::Csi: return "csi";
    case DecoderVariant::Lin: return "lin";
  }
  return "?";
}

std::optional<DecoderVariant> variant_from_name(std::string_view name) {
  for (DecoderVariant v : kAllVariants) {
    if (name == variant_name(v)) return v;
  }
  return std::nullopt;
}

double GmiEstimate::bits() const { return nats / 0.6931471805599453; }

double GmiEstimate::clamped_fraction() const {
  return clamp_base ? static_cast<double>(clamped) / static_cast<double>(clamp_base) : 0.0;
}

std::vector<GmiEstimate> gmi_cohort(const ChannelSpec& spec, const GaussianInputSpec& input,
                                    const std::vector<DecoderVariant>& variants,
                                    const SampleSizes& sizes, Rng& rng) {
  spec.validate();
  input.validate();
  if (variants.empty()) {
    throw Error(Errc::invalid_argument, "gmi_cohort: no variants requested");
  }
  const double P = input.power;
  const Family fam = classify(spec);
  const bool want_lin = std::find(variants.begin(), variants.end(), DecoderVariant::Lin) !=
                        variants.end();

  // Per-variant values filled by family-specific evaluation below.
  GmiEstimate opt, csf, csi, lin;

  switch (fam) {
    case Family::GaussFixed: {
      std::size_t clamped = 0;
      const double val = log_ratio_clamped(P, gauss_omega(P, spec.noise_power, spec.fixed_s),
                                           clamped);
      opt = make_estimate(DecoderVariant::Opt, val, 0.0, 0, clamped, 1);
      csf = make_estimate(DecoderVariant::Csf, val, 0.0, 0, clamped, 1);
      csi = make_estimate(DecoderVariant::Csi, val, 0.0, 0, clamped, 1);
      lin = make_estimate(DecoderVariant::Lin, val, 0.0, 0, clamped, 1);
      break;
    }

    case Family::OneBitFixed: {
      const OneBitTable table =
          onebit_enumerate(spec, input, spec.fixed_s, gauss_hermite(sizes.quad_order));
      double opt_val = 0.0;
      std::size_t clamped = 0, base = 0;
      for (std::size_t idx = 0; idx < table.pmf.size(); ++idx) {
        if (table.pmf[idx] <= 0.0) continue;
        ++base;
        opt_val += table.pmf[idx] * log_ratio_clamped(P, table.moments[idx].omega, clamped);
      }
      std::size_t c2 = 0;
      const double csf_val = log_ratio_clamped(P, table.mmse, c2);
      opt = make_estimate(DecoderVariant::Opt, opt_val, 0.0, table.pmf.size(), clamped, base);
      csf = make_estimate(DecoderVariant::Csf, csf_val, 0.0, table.pmf.size(), c2, 1);
      csi = csf;  // v is degenerate: conditional and unconditional stats coincide
      csi.variant = DecoderVariant::Csi;
      if (want_lin) {
        const LmmseStats st = lmmse_stats(spec, input, {}, 2, rng, sizes.quad_order);
        lin = make_estimate(DecoderVariant::Lin, std::log(P / st.lmmse), 0.0, table.pmf.size(), 0,
                            1);
      }
      break;
    }

    case Family::FadeGauss: {
      Welford wlog, womega;
      std::size_t clamped = 0;
      CVec s(spec.antennas);
      for (std::size_t k = 0; k < sizes.n; ++k) {
        for (int i = 0; i < spec.antennas; ++i) s[i] = rng.complex_normal(spec.fading_power);
        const double om = gauss_omega(P, spec.noise_power, s);
        wlog.add(log_ratio_clamped(P, om, clamped));
        womega.add(om);
      }
      opt = make_estimate(DecoderVariant::Opt, wlog.mean(), wlog.se(), wlog.n, clamped, wlog.n);
      csi = opt;
      csi.variant = DecoderVariant::Csi;
      lin = opt;
      lin.variant = DecoderVariant::Lin;
      std::size_t c2 = 0;
      const double om_bar = womega.mean();
      const double csf_val = log_ratio_clamped(P, om_bar, c2);
      csf = make_estimate(DecoderVariant::Csf, csf_val, womega.se() / om_bar, womega.n, c2, 1);
      break;
    }

    case Family::FadeOneBit: {
      const QuadratureRule& rule = gauss_hermite(sizes.quad_order);
      Welford wopt, wcsi, wlin, wmmse;
      std::size_t clamped = 0, base = 0, c_csi = 0;
      CVec s(spec.antennas);
      for (std::size_t j = 0; j < sizes.n_outer; ++j) {
        for (int i = 0; i < spec.antennas; ++i) s[i] = rng.complex_normal(spec.fading_power);
        const OneBitTable table = onebit_enumerate(spec, input, s, rule);
        double opt_j = 0.0;
        for (std::size_t idx = 0; idx < table.pmf.size(); ++idx) {
          if (table.pmf[idx] <= 0.0) continue;
          ++base;
          opt_j += table.pmf[idx] * log_ratio_clamped(P, table.moments[idx].omega, clamped);
        }
        wopt.add(opt_j);
        wcsi.add(log_ratio_clamped(P, table.mmse, c_csi));
        wmmse.add(table.mmse);
        if (want_lin) {
          const LmmseStats st = lmmse_stats(spec, input, s, 2, rng, sizes.quad_order);
          wlin.add(std::log(P / st.lmmse));
        }
      }
      opt = make_estimate(DecoderVariant::Opt, wopt.mean(), wopt.se(), wopt.n, clamped, base);
      csi = make_estimate(DecoderVariant::Csi, wcsi.mean(), wcsi.se(), wcsi.n, c_csi, wcsi.n);
      std::size_t c2 = 0;
      const double m_bar = wmmse.mean();
      csf = make_estimate(DecoderVariant::Csf, log_ratio_clamped(P, m_bar, c2),
                          wmmse.se() / m_bar, wmmse.n, c2, 1);
      if (want_lin) {
        lin = make_estimate(DecoderVariant::Lin, wlin.mean(), wlin.se(), wlin.n, 0, wlin.n);
      }
      break;
    }

    case Family::PilotGauss: {
      const bool want_nested =
          std::any_of(variants.begin(), variants.end(),
                      [](DecoderVariant v) { return v != DecoderVariant::Lin; });
      Welford w_opt_cluster, w_csi, w_omega_cluster, w_lin;
      std::size_t clamped = 0, base = 0, c_csi = 0;
      const std::size_t no = sizes.n_outer, ni = sizes.n_inner;
      CVec v(spec.antennas), y(spec.antennas);
      for (std::size_t j = 0; j < no; ++j) {
        for (int i = 0; i < spec.antennas; ++i) {
          const cplx si = rng.complex_normal(spec.fading_power);
          v[i] = spec.pilot * si + rng.complex_normal(spec.noise_power);
        }
        if (want_nested) {
          const PilotPosterior post = pilot_posterior(spec, input, v);
          double sum_log = 0.0, sum_omega = 0.0;
          for (std::size_t k = 0; k < ni; ++k) {
            const cplx x = rng.complex_normal(P);
            for (int i = 0; i < spec.antennas; ++i) {
              const cplx si = post.shat[i] + rng.complex_normal(post.var);
              y[i] = si * x + rng.complex_normal(spec.noise_power);
            }
            const PosteriorMoments m = pilot_snis_escalated(spec, input, y, v, sizes.n_s, rng);
            sum_log += log_ratio_clamped(P, m.omega, clamped);
            sum_omega += m.omega;
            ++base;
          }
          const double ni_d = static_cast<double>(ni);
          w_opt_cluster.add(sum_log / ni_d);
          w_omega_cluster.add(sum_omega / ni_d);
          w_csi.add(log_ratio_clamped(P, sum_omega / ni_d, c_csi));
        }
        if (want_lin) {
          const LmmseStats st = lmmse_stats(spec, input, v, sizes.n_s, rng, sizes.quad_order);
          w_lin.add(std::log(P / st.lmmse));
        }
      }
      opt = make_estimate(DecoderVariant::Opt, w_opt_cluster.mean(), w_opt_cluster.se(), no * ni,
                          clamped, base);
      csi = make_estimate(DecoderVariant::Csi, w_csi.mean(), w_csi.se(), no * ni, c_csi, w_csi.n);
      std::size_t c2 = 0;
      const double om_bar = w_omega_cluster.mean();
      csf = make_estimate(DecoderVariant::Csf, log_ratio_clamped(P, om_bar, c2),
                          w_omega_cluster.se() / om_bar, no * ni, c2, 1);
      if (want_lin) {
        lin = make_estimate(DecoderVariant::Lin, w_lin.mean(), w_lin.se(), no, 0, w_lin.n);
      }
      break;
    }

    case Family::PilotOneBit:
      throw Error(Errc::not_implemented, "gmi: quantized pilot CSI unsupported");
  }

  std::vector<GmiEstimate> out;
  out.reserve(variants.size());
  for (DecoderVariant v : variants) {
    switch (v) {
      case DecoderVariant::Opt: out.push_back(opt); break;
      case DecoderVariant::Csf: out.push_back(csf); break;
      case DecoderVariant::Csi: out.push_back(csi); break;
      case DecoderVariant::Lin: out.push_back(lin); break;
    }
  }
  return out;
}

GmiEstimate gmi_opt(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng) {
  return gmi_cohort(spec, input, {DecoderVariant::Opt}, sizes, rng)[0];
}

GmiEstimate gmi_csf(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng) {
  return gmi_cohort(spec, input, {DecoderVariant::Csf}, sizes, rng)[0];
}

GmiEstimate gmi_csi(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng) {
  return gmi_cohort(spec, input, {DecoderVariant::Csi}, sizes, rng)[0];
}

GmiEstimate gmi_lin(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng) {
  return gmi_cohort(spec, input, {DecoderVariant::Lin}, sizes, rng)[0];
}

namespace {

using MomentFn = std::function<PosteriorMoments(const CVec&, const CVec&)>;

MomentFn make_moment_fn(const ChannelSpec& spec, const GaussianInputSpec& input,
                        const SampleSizes& sizes, Rng& rng) {
  const double P = input.power;
  switch (classify(spec)) {
    case Family::GaussFixed: {
      const CVec s = spec.fixed_s;
      const double sig2 = spec.noise_power;
      return [s, sig2, P](const CVec& y, const CVec&) {
        return moments_closed_form_gaussian(s, sig2, P, y);
      };
    }
    case Family::FadeGauss: {
      const double sig2 = spec.noise_power;
      return [sig2, P](const CVec& y, const CVec& v) {
        return moments_closed_form_gaussian(v, sig2, P, y);
      };
    }
    case Family::OneBitFixed: {
      auto table = std::make_shared<OneBitTable>(
          onebit_enumerate(spec, input, spec.fixed_s, gauss_hermite(sizes.quad_order)));
      return [table](const CVec& y, const CVec&) {
        return table->moments[onebit_pattern_index(y)];
      };
    }
    case Family::FadeOneBit: {
      const int order = sizes.quad_order;
      return [spec, input, order](const CVec& y, const CVec& v) {
        return onebit_moments_with_state(spec, input, y, v, gauss_hermite(order));
      };
    }
    case Family::PilotGauss: {
      const Rng base = rng.substream(0x504f53544dULL);
      const std::size_t ns = sizes.n_s;
      return [spec, input, ns, base](const CVec& y, const CVec& v) {
        Rng r = base.substream(observation_hash(y, v));
        return pilot_snis_escalated(spec, input, y, v, ns, r);
      };
    }
    case Family::PilotOneBit:
      throw Error(Errc::not_implemented, "gnndr_functions: quantized pilot CSI unsupported");
  }
  throw Error(Errc::invalid_argument, "unknown channel family");
}

double channel_mmse(const ChannelSpec& spec, const GaussianInputSpec& input,
                    const SampleSizes& sizes, Rng& rng) {
  const double P = input.power;
  switch (classify(spec)) {
    case Family::GaussFixed:
      return gauss_omega(P, spec.noise_power, spec.fixed_s);
    case Family::OneBitFixed:
      return onebit_enumerate(spec, input, spec.fixed_s, gauss_hermite(sizes.quad_order)).mmse;
    case Family::FadeGauss: {
      Welford w;
      CVec s(spec.antennas);
      for (std::size_t k = 0; k < sizes.n; ++k) {
        for (int i = 0; i < spec.antennas; ++i) s[i] = rng.complex_normal(spec.fading_power);
        w.add(gauss_omega(P, spec.noise_power, s));
      }
      return w.mean();
    }
    case Family::FadeOneBit: {
      Welford w;
      const QuadratureRule& rule = gauss_hermite(sizes.quad_order);
      CVec s(spec.antennas);
      for (std::size_t j = 0; j < sizes.n_outer; ++j) {
        for (int i = 0; i < spec.antennas; ++i) s[i] = rng.complex_normal(spec.fading_power);
        w.add(onebit_enumerate(spec, input, s, rule).mmse);
      }
      return w.mean();
    }
    case Family::PilotGauss: {
      // Joint draws; omega via SNIS as everywhere else.
      Welford w;
      CVec v(spec.antennas), y(spec.antennas);
      const std::size_t n = std::max<std::size_t>(sizes.n_outer * sizes.n_inner, 1024);
      for (std::size_t k = 0; k < n; ++k) {
        for (int i = 0; i < spec.antennas; ++i) {
          const cplx si = rng.complex_normal(spec.fading_power);
          v[i] = spec.pilot * si + rng.complex_normal(spec.noise_power);
        }
        const PilotPosterior post = pilot_posterior(spec, input, v);
        const cplx x = rng.complex_normal(P);
        for (int i = 0; i < spec.antennas; ++i) {
          const cplx si = post.shat[i] + rng.complex_normal(post.var);
          y[i] = si * x + rng.complex_normal(spec.noise_power);
        }
        w.add(pilot_snis_escalated(spec, input, y, v, sizes.n_s, rng).omega);
      }
      return w.mean();
    }
    case Family::PilotOneBit:
      break;
  }
  throw Error(Errc::not_implemented, "channel mmse: unsupported family");
}

// E[omega(y,v)|v] as a function of v.
std::function<double(const CVec&)> make_omega_v_fn(const ChannelSpec& spec,
                                                   const GaussianInputSpec& input,
                                                   const SampleSizes& sizes, Rng& rng) {
  const double P = input.power;
  switch (classify(spec)) {
    case Family::GaussFixed: {
      const double om = gauss_omega(P, spec.noise_power, spec.fixed_s);
      return [om](const CVec&) { return om; };
    }
    case Family::FadeGauss: {
      const double sig2 = spec.noise_power;
      return [P, sig2](const CVec& v) { return gauss_omega(P, sig2, v); };
    }
    case Family::OneBitFixed: {
      const double mmse =
          onebit_enumerate(spec, input, spec.fixed_s, gauss_hermite(sizes.quad_order)).mmse;
      return [mmse](const CVec&) { return mmse; };
    }
    case Family::FadeOneBit: {
      const int order = sizes.quad_order;
      return [spec, input, order](const CVec& v) {
        return onebit_enumerate(spec, input, v, gauss_hermite(order)).mmse;
      };
    }
    case Family::PilotGauss: {
      const Rng base = rng.substream(0x43534956ULL);
      const std::size_t ni = std::max<std::size_t>(sizes.n_inner, 16);
      const std::size_t ns = sizes.n_s;
      const int order = sizes.quad_order;
      return [spec, input, ni, ns, order, base](const CVec& v) {
        Rng r = base.substream(observation_hash({}, v));
        return conditional_omega_mean(spec, input, v, ni, r, ns, order).value;
      };
    }
    case Family::PilotOneBit:
      break;
  }
  throw Error(Errc::not_implemented, "conditional omega: unsupported family");
}

double clamp_omega(double omega, double power) {
  return std::min(std::max(omega, kOmegaFloor), power - kOmegaFloor);
}

}  // namespace

GnndrFunctions gnndr_functions(DecoderVariant variant, const ChannelSpec& spec,
                               const GaussianInputSpec& input, const SampleSizes& sizes,
                               Rng& rng) {
  spec.validate();
  input.validate();
  const double P = input.power;
  GnndrFunctions fns;
  fns.variant = variant;

  switch (variant) {
    case DecoderVariant::Opt: {
      MomentFn mfn = make_moment_fn(spec, input, sizes, rng);
      fns.coeffs = [mfn, P](const CVec& y, const CVec& v) -> std::pair<cplx, cplx> {
        const PosteriorMoments m = mfn(y, v);
        const double om = clamp_omega(m.omega, P);
        const double w = P - om;
        return {m.mean / std::sqrt(w * om), cplx{std::sqrt(w) / (P * std::sqrt(om)), 0.0}};
      };
      break;
    }
    case DecoderVariant::Csf: {
      MomentFn mfn = make_moment_fn(spec, input, sizes, rng);
      Rng cal = rng.substream(0x43414cULL);
      const double mmse = channel_mmse(spec, input, sizes, cal);
      const double alpha = (P - clamp_omega(mmse, P)) / P;
      fns.coeffs = [mfn, alpha](const CVec& y, const CVec& v) -> std::pair<cplx, cplx> {
        return {mfn(y, v).mean, cplx{alpha, 0.0}};
      };
      break;
    }
    case DecoderVariant::Csi: {
      MomentFn mfn = make_moment_fn(spec, input, sizes, rng);
      auto ofn = make_omega_v_fn(spec, input, sizes, rng);
      fns.coeffs = [mfn, ofn, P](const CVec& y, const CVec& v) -> std::pair<cplx, cplx> {
        const double mv = clamp_omega(ofn(v), P);
        const double w = P - mv;
        const double sq = 1.0 / std::sqrt(w * mv);
        return {sq * mfn(y, v).mean, cplx{sq * w / P, 0.0}};
      };
      break;
    }
    case DecoderVariant::Lin: {
      // beta(v) = gram^{-1} cross; metric coefficients from the conditional
      // linear model. Pilot CSI has a closed form through the state
      // posterior; one-bit families use the exhaustive output stats.
      const Family fam = classify(spec);
      std::function<LmmseStats(const CVec&)> stats_fn;
      switch (fam) {
        case Family::GaussFixed: {
          auto st = std::make_shared<LmmseStats>(lmmse_stats(spec, input, {}, 2, rng,
                                                             sizes.quad_order));
          stats_fn = [st](const CVec&) { return *st; };
          break;
        }
        case Family::FadeGauss: {
          const SampleSizes sz = sizes;
          const ChannelSpec sp = spec;
          const GaussianInputSpec in = input;
          stats_fn = [sp, in, sz](const CVec& v) {
            Rng dummy(0);
            return lmmse_stats(sp, in, v, 2, dummy, sz.quad_order);
          };
          break;
        }
        case Family::OneBitFixed: {
          auto st = std::make_shared<LmmseStats>(lmmse_stats(spec, input, {}, 2, rng,
                                                             sizes.quad_order));
          stats_fn = [st](const CVec&) { return *st; };
          break;
        }
        case Family::FadeOneBit: {
          const SampleSizes sz = sizes;
          const ChannelSpec sp = spec;
          const GaussianInputSpec in = input;
          stats_fn = [sp, in, sz](const CVec& v) {
            Rng dummy(0);
            return lmmse_stats(sp, in, v, 2, dummy, sz.quad_order);
          };
          break;
        }
        case Family::PilotGauss: {
          const ChannelSpec sp = spec;
          const GaussianInputSpec in = input;
          stats_fn = [sp, in, P](const CVec& v) {
            const PilotPosterior post = pilot_posterior(sp, in, v);
            LmmseStats st;
            const int p = sp.antennas;
            st.cross.resize(p);
            for (int i = 0; i < p; ++i) st.cross[i] = P * post.shat[i];
            // gram = P shat shat^H + (P var + sigma2) I
            const double diag = P * post.var + sp.noise_power;
            st.gram = HermMatrix(p);
            for (int i = 0; i < p; ++i) {
              for (int j = 0; j < p; ++j) {
                st.gram.at(i, j) = P * post.shat[i] * std::conj(post.shat[j]);
              }
              st.gram.at(i, i) += diag;
            }
            double sh2 = 0.0;
            for (int i = 0; i < p; ++i) sh2 += std::norm(post.shat[i]);
            const double delta = P * P * sh2 / (diag + P * sh2);
            st.lmmse = std::min(std::max(P - delta, 1e-12), P);
            return st;
          };
          break;
        }
        case Family::PilotOneBit:
          throw Error(Errc::not_implemented, "gnndr_functions: quantized pilot CSI unsupported");
      }
      fns.coeffs = [stats_fn, P](const CVec& y, const CVec& v) -> std::pair<cplx, cplx> {
        const LmmseStats st = stats_fn(v);
        HermMatrix reg = st.gram;
        reg.add_diagonal(1e-12 * reg.trace_real() / reg.dim());
        const CVec beta = hermitian_solve(reg, st.cross);
        double delta = 0.0;
        cplx by = 0.0;
        for (std::size_t i = 0; i < st.cross.size(); ++i) {
          delta += (std::conj(st.cross[i]) * beta[i]).real();
          by += std::conj(beta[i]) * y[i];
        }
        delta = std::min(std::max(delta, kOmegaFloor), P - kOmegaFloor);
        const double q = 1.0 / std::sqrt(delta * (P - delta));
        return {q * by, cplx{q * delta / P, 0.0}};
      };
      break;
    }
  }
  return fns;
}

GmiEstimate gmi_fixed_gf(const ChannelSpec& spec, const GaussianInputSpec& input,
                         const GnndrFunctions& fns, std::size_t n, Rng& rng) {
  spec.validate();
  input.validate();
  if (n < 2) {
    throw Error(Errc::invalid_argument, "gmi_fixed_gf: n must be >= 2");
  }
  if (!fns.coeffs) {
    throw Error(Errc::invalid_function, "gmi_fixed_gf: empty coefficient callable");
  }
  const double P = input.power;

  CVec dither;
  if (spec.quantizer.kind == QuantizerKind::OneBitDithered) {
    dither = dither_vector(spec, input).b;
  }

  std::vector<double> a(n), gg(n), ffp(n);
  double ffp_mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const cplx x = rng.complex_normal(P);
    const ChannelUse use = sample_use_given_x(spec, input, x, rng, dither);
    const auto [g, f] = fns.coeffs(use.y, use.v);
    a[k] = std::norm(g - f * x);
    gg[k] = std::norm(g);
    ffp[k] = std::norm(f) * P;
    ffp_mean += ffp[k];
  }
  ffp_mean /= static_cast<double>(n);

  const auto objective = [&](double theta) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += theta * a[k] - theta * gg[k] / (1.0 - theta * ffp[k]) + std::log1p(-theta * ffp[k]);
    }
    return acc / static_cast<double>(n);
  };

  // Log-spaced scan of theta = -10^e over the spec bracket, then
  // golden-section refinement of e around the scan argmax.
  const double p_eff = std::max(ffp_mean, 1e-12);
  const double e_lo = -9.0;
  const double e_hi = std::max(std::log10(1e6 / p_eff), e_lo + 1.0);
  const int grid = 121;
  std::vector<double> vals(grid);
  int best = 0;
  for (int i = 0; i < grid; ++i) {
    const double e = e_lo + (e_hi - e_lo) * i / (grid - 1);
    vals[i] = objective(-std::pow(10.0, e));
    if (vals[i] > vals[best]) best = i;
  }
  const double spread = *std::max_element(vals.begin(), vals.end()) -
                        *std::min_element(vals.begin(), vals.end());
  double theta_star;
  double value;
  if (spread < 1e-12 * (1.0 + std::abs(vals[best]))) {
    // Flat objective (f == 0): the GMI degenerates to 0 at every theta.
    theta_star = -1.0;
    value = vals[best];
  } else if (best == grid - 1) {
    throw Error(Errc::invalid_function,
                "gmi_fixed_gf: maximizer at the large-|theta| bracket end; widen the bracket");
  } else if (best == 0) {
    // Supremum approached as theta -> 0-: the fixed pair achieves rate ~ 0.
    theta_star = -std::pow(10.0, e_lo);
    value = vals[best];
  } else {
    double lo = e_lo + (e_hi - e_lo) * (best - 1) / (grid - 1);
    double hi = e_lo + (e_hi - e_lo) * (best + 1) / (grid - 1);
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = objective(-std::pow(10.0, x1)), f2 = objective(-std::pow(10.0, x2));
    for (int it = 0; it < 200 && hi - lo > 4.3e-11; ++it) {
      if (f1 >= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = objective(-std::pow(10.0, x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = objective(-std::pow(10.0, x2));
      }
    }
    theta_star = -std::pow(10.0, 0.5 * (lo + hi));
    value = objective(theta_star);
  }

  Welford w;
  for (std::size_t k = 0; k < n; ++k) {
    w.add(theta_star * a[k] - theta_star * gg[k] / (1.0 - theta_star * ffp[k]) +
          std::log1p(-theta_star * ffp[k]));
  }
  GmiEstimate est = make_estimate(fns.variant, value, w.se(), n, 0, 0);
  return est;
}

double bussgang_snr(const ChannelSpec& spec, const GaussianInputSpec& input, const CVec& v,
                    std::size_t n, Rng& rng) {
  const LmmseStats st = lmmse_stats(spec, input, v, n, rng);
  return (input.power - st.lmmse) / st.lmmse;
}

ResidualCheck bussgang_residual_check(const ChannelSpec& spec, const GaussianInputSpec& input,
                                      const CVec& v, std::size_t n, Rng& rng) {
  spec.validate();
  input.validate();
  if (n < 16) {
    throw Error(Errc::invalid_argument, "bussgang_residual_check: n must be >= 16");
  }
  const double P = input.power;
  const int p = spec.antennas;
  Rng stats_rng = rng.substream(0x5354415453ULL);
  const LmmseStats st = lmmse_stats(spec, input, v, std::max<std::size_t>(n, 1024), stats_rng);

  const bool quantized = spec.quantizer.kind != QuantizerKind::None;
  CVec dither;
  if (spec.quantizer.kind == QuantizerKind::OneBitDithered) {
    dither = dither_vector(spec, input).b;
  }
  const bool pilot = spec.variant == Variant::FadingPilotCsi;
  PilotPosterior post;
  if (pilot) post = pilot_posterior(spec, input, v);
  const CVec& known_s = spec.variant == Variant::LinearNoState ? spec.fixed_s : v;

  std::vector<cplx> r(p, cplx{0.0, 0.0});
  std::vector<double> m2(p, 0.0);
  CVec s(p), y(p);
  for (std::size_t k = 0; k < n; ++k) {
    if (pilot) {
      for (int i = 0; i < p; ++i) s[i] = post.shat[i] + rng.complex_normal(post.var);
    } else {
      s = known_s;
    }
    const cplx x = rng.complex_normal(P);
    for (int i = 0; i < p; ++i) {
      cplx u = s[i] * x + rng.complex_normal(spec.noise_power);
      if (quantized) {
        if (!dither.empty()) u += dither[i];
        u = {u.real() >= 0.0 ? 1.0 : -1.0, u.imag() >= 0.0 ? 1.0 : -1.0};
      }
      y[i] = u;
    }
    for (int i = 0; i < p; ++i) {
      const cplx w = y[i] - (st.cross[i] / P) * x;
      const cplx t = x * std::conj(w);
      r[i] += t;
      m2[i] += std::norm(t);
    }
  }

  const double nn = static_cast<double>(n);
  double cross_max = 0.0;
  for (int i = 0; i < p; ++i) cross_max = std::max(cross_max, std::abs(st.cross[i]) / P);
  double r_max = 0.0, se_at_max = 0.0;
  for (int i = 0; i < p; ++i) {
    const cplx ri = r[i] / nn;
    const double var = std::max(0.0, m2[i] / nn - std::norm(ri));
    const double se = std::sqrt(var / nn);
    if (std::abs(ri) > r_max) {
      r_max = std::abs(ri);
      se_at_max = se;
    }
  }
  ResidualCheck out;
  out.max_abs = cross_max * r_max;
  out.std_err = cross_max * se_at_max;
  out.n_samples = n;
  return out;
}

}  // namespace gnndr
