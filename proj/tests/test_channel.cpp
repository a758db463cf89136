#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "gnndr/channel.hpp"
#include "oracles.hpp"

using gnndr::ChannelSpec;
using gnndr::ChannelUse;
using gnndr::cplx;
using gnndr::CVec;
using gnndr::Error;
using gnndr::Errc;
using gnndr::GaussianInputSpec;
using gnndr::QuantizerKind;
using gnndr::Rng;
using gnndr::Variant;

namespace {

ChannelSpec linear_spec(CVec s, double sigma2) {
  ChannelSpec spec;
  spec.variant = Variant::LinearNoState;
  spec.antennas = static_cast<int>(s.size());
  spec.noise_power = sigma2;
  spec.fixed_s = std::move(s);
  return spec;
}

}  // namespace

TEST_CASE("spec validation rejects malformed configurations") {
  GaussianInputSpec input;
  input.power = 0.0;
  CHECK_THROWS_AS(input.validate(), Error);
  input.power = -2.0;
  CHECK_THROWS_AS(input.validate(), Error);

  ChannelSpec spec = linear_spec({cplx{1, 0}}, 1.0);
  spec.antennas = 0;
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = linear_spec({cplx{1, 0}}, -1.0);
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = linear_spec({cplx{1, 0}, cplx{0, 1}}, 1.0);
  spec.antennas = 1;  // size mismatch
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = ChannelSpec{};
  spec.variant = Variant::FadingPerfectCsi;
  spec.fading_power = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = ChannelSpec{};
  spec.variant = Variant::FadingPilotCsi;
  spec.pilot = {0.0, 0.0};
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = ChannelSpec{};
  spec.variant = Variant::FadingPerfectCsi;
  spec.quantizer.kind = QuantizerKind::OneBitDithered;
  spec.quantizer.alpha = 1.0;
  try {
    spec.validate();
    FAIL("dithered quantizer outside LinearNoState must be rejected");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
  }

  spec = linear_spec({cplx{1, 0}}, 1.0);
  spec.quantizer.kind = QuantizerKind::OneBitDithered;
  spec.quantizer.alpha = -0.5;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("near-noiseless linear channel reproduces s x") {
  ChannelSpec spec = linear_spec({cplx{1, 0}, cplx{0, 0}}, 1e-12);
  GaussianInputSpec input;
  Rng rng(3, 0);
  for (int i = 0; i < 20; ++i) {
    const ChannelUse use = gnndr::sample_use(spec, input, rng);
    REQUIRE(use.y.size() == 2);
    CHECK(use.v.empty());
    CHECK(std::abs(use.y[0] - use.x) < 1e-5);
    CHECK(std::abs(use.y[1]) < 1e-5);
  }
}

TEST_CASE("one-bit outputs are sign pairs and pattern index round-trips") {
  for (int p : {1, 2, 4}) {
    ChannelSpec spec;
    spec.variant = Variant::LinearNoState;
    spec.antennas = p;
    spec.noise_power = 1.0;
    spec.fixed_s.assign(p, cplx{1.0, 0.0});
    spec.quantizer.kind = QuantizerKind::OneBit;
    GaussianInputSpec input;
    Rng rng(17, p);
    for (int i = 0; i < 50; ++i) {
      const ChannelUse use = gnndr::sample_use(spec, input, rng);
      for (const cplx& y : use.y) {
        CHECK(std::abs(std::abs(y.real()) - 1.0) < 1e-15);
        CHECK(std::abs(std::abs(y.imag()) - 1.0) < 1e-15);
      }
      const std::size_t idx = gnndr::onebit_pattern_index(use.y);
      CHECK(idx < gnndr::onebit_pattern_count(p));
      const CVec back = gnndr::onebit_pattern_signs(idx, p);
      REQUIRE(back.size() == use.y.size());
      for (int k = 0; k < p; ++k) CHECK(back[k] == use.y[k]);
    }
    // every index round-trips
    for (std::size_t idx = 0; idx < gnndr::onebit_pattern_count(p); ++idx) {
      CHECK(gnndr::onebit_pattern_index(gnndr::onebit_pattern_signs(idx, p)) == idx);
    }
  }
  CHECK(gnndr::onebit_pattern_count(1) == 4);
  CHECK(gnndr::onebit_pattern_count(2) == 16);
  CHECK_THROWS_AS(gnndr::onebit_pattern_count(9), Error);
  try {
    gnndr::onebit_pattern_count(9);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::capacity_exceeded);
  }
}

TEST_CASE("pilot side information has the modeled power") {
  ChannelSpec spec;
  spec.variant = Variant::FadingPilotCsi;
  spec.antennas = 2;
  spec.noise_power = 0.5;
  spec.fading_power = 2.0;
  spec.pilot = {1.0, 1.0};  // |x_p|^2 = 2
  GaussianInputSpec input;
  Rng rng(5, 0);
  const int n = 100000;
  double v_pow = 0.0;
  for (int i = 0; i < n; ++i) {
    const ChannelUse use = gnndr::sample_use(spec, input, rng);
    REQUIRE(use.v.size() == 2);
    REQUIRE(use.s.size() == 2);
    for (const cplx& v : use.v) v_pow += std::norm(v);
  }
  v_pow /= n;
  // E|v_i|^2 = eta^2 |x_p|^2 + sigma^2 = 2*2 + 0.5 = 4.5 per antenna
  CHECK(v_pow == doctest::Approx(2 * 4.5).epsilon(0.02));
}

TEST_CASE("dither vector construction") {
  GaussianInputSpec input;  // P = 1

  ChannelSpec p1 = linear_spec({cplx{1, 0}}, 1.0);
  p1.quantizer.kind = QuantizerKind::OneBitDithered;
  p1.quantizer.alpha = 1.0;
  const auto d1 = gnndr::dither_vector(p1, input);
  REQUIRE(d1.b.size() == 1);
  // Phi(t_1) = 1/2 so t_1 = 0: no dither for a single antenna
  CHECK(std::abs(d1.b[0]) < 1e-12);

  ChannelSpec p3 = linear_spec({cplx{1, 0}, cplx{1, 0}, cplx{1, 0}}, 1.0);
  p3.quantizer.kind = QuantizerKind::OneBitDithered;
  p3.quantizer.alpha = 0.8;
  const auto d3 = gnndr::dither_vector(p3, input);
  REQUIRE(d3.b.size() == 3);
  CHECK(std::abs(d3.b[1]) < 1e-12);            // t_2 = Phi^-1(1/2) = 0
  CHECK(std::abs(d3.b[0] + d3.b[2]) < 1e-12);  // t_1 = -t_3

  // p=2, alpha=1, P=2, s=(1,1): b_i = sqrt(P/2) t_i = t_i
  GaussianInputSpec p2in;
  p2in.power = 2.0;
  ChannelSpec p2 = linear_spec({cplx{1, 0}, cplx{1, 0}}, 1.0);
  p2.quantizer.kind = QuantizerKind::OneBitDithered;
  p2.quantizer.alpha = 1.0;
  const auto d2 = gnndr::dither_vector(p2, p2in);
  REQUIRE(d2.b.size() == 2);
  CHECK(std::abs(d2.b[0].real() - oracles::kQuantileOneThird) < 1e-9);
  CHECK(std::abs(d2.b[1].real() + oracles::kQuantileOneThird) < 1e-9);
  CHECK(std::abs(d2.b[0].imag()) < 1e-12);

  ChannelSpec plain = linear_spec({cplx{1, 0}}, 1.0);
  try {
    gnndr::dither_vector(plain, input);
    FAIL("expected invalid-state");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_state);
  }
}

TEST_CASE("one-bit conditional pmf properties") {
  GaussianInputSpec input;
  for (int p : {1, 2, 3}) {
    ChannelSpec spec;
    spec.variant = Variant::LinearNoState;
    spec.antennas = p;
    spec.noise_power = 1.0;
    spec.fixed_s.assign(p, cplx{0.9, -0.3});
    spec.quantizer.kind = QuantizerKind::OneBit;

    // x = 0, no dither: every component is a fair coin, pmf uniform
    const auto pmf0 = gnndr::conditional_output_pmf_onebit(spec, input, {0.0, 0.0}, spec.fixed_s, {});
    REQUIRE(pmf0.size() == gnndr::onebit_pattern_count(p));
    for (double q : pmf0) CHECK(q == doctest::Approx(1.0 / pmf0.size()).epsilon(1e-12));

    // generic x: pmf sums to one
    const auto pmf = gnndr::conditional_output_pmf_onebit(spec, input, {0.7, -1.1}, spec.fixed_s, {});
    CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double q : pmf) CHECK(q >= 0.0);
  }
}

TEST_CASE("one-bit pmf saturates for a huge input") {
  GaussianInputSpec input;
  ChannelSpec spec;
  spec.variant = Variant::LinearNoState;
  spec.antennas = 1;
  spec.noise_power = 1.0;
  spec.fixed_s = {cplx{1.0, 0.0}};
  spec.quantizer.kind = QuantizerKind::OneBit;
  const auto pmf = gnndr::conditional_output_pmf_onebit(spec, input, {50.0, 50.0}, spec.fixed_s, {});
  // (+1,+1) pattern has index 0
  CHECK(pmf[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-bit single-antenna marginal matches the normal cdf") {
  // s = 1, sigma^2 = 1, x = 1: P(y^R = +1) = Phi(sqrt(2) * 1 / 1) = Phi(sqrt 2)
  GaussianInputSpec input;
  ChannelSpec spec;
  spec.variant = Variant::LinearNoState;
  spec.antennas = 1;
  spec.noise_power = 1.0;
  spec.fixed_s = {cplx{1.0, 0.0}};
  spec.quantizer.kind = QuantizerKind::OneBit;
  const auto pmf = gnndr::conditional_output_pmf_onebit(spec, input, {1.0, 0.0}, spec.fixed_s, {});
  // index bit0 = Re sign, bit1 = Im sign; marginal over Im:
  const double p_re_pos = pmf[0] + pmf[2];
  CHECK(std::abs(p_re_pos - oracles::kPhiSqrt2) < 1e-12);
  // Im(s x) = 0: imaginary component is a fair coin
  CHECK(std::abs((pmf[0] + pmf[1]) - 0.5) < 1e-12);
}

TEST_CASE("fading draws have the configured power and respect x") {
  ChannelSpec spec;
  spec.variant = Variant::FadingPerfectCsi;
  spec.antennas = 1;
  spec.noise_power = 1.0;
  spec.fading_power = 3.0;
  GaussianInputSpec input;
  Rng rng(8, 0);
  const int n = 1000000;
  double s_pow = 0.0, x_pow = 0.0;
  for (int i = 0; i < n; ++i) {
    const ChannelUse use = gnndr::sample_use(spec, input, rng);
    s_pow += std::norm(use.s[0]);
    x_pow += std::norm(use.x);
    if (i < 100) {
      REQUIRE(use.v.size() == 1);
      CHECK(use.v[0] == use.s[0]);  // perfect CSI passes the state through
    }
  }
  CHECK(s_pow / n == doctest::Approx(3.0).epsilon(0.01));
  CHECK(x_pow / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("sample_use_given_x draws (s, v, noise) independently of x") {
  ChannelSpec spec;
  spec.variant = Variant::FadingPilotCsi;
  spec.antennas = 2;
  spec.noise_power = 0.7;
  spec.fading_power = 1.3;
  GaussianInputSpec input;
  Rng r1(99, 4), r2(99, 4);
  const ChannelUse a = gnndr::sample_use_given_x(spec, input, {1.0, 0.0}, r1, {});
  const ChannelUse b = gnndr::sample_use_given_x(spec, input, {-2.0, 0.5}, r2, {});
  REQUIRE(a.s.size() == b.s.size());
  for (size_t i = 0; i < a.s.size(); ++i) {
    CHECK(a.s[i] == b.s[i]);
    CHECK(a.v[i] == b.v[i]);
  }
  CHECK(a.x == cplx{1.0, 0.0});
  CHECK(b.x == cplx{-2.0, 0.5});
  // identical noise: y difference is exactly s (x_a - x_b)
  for (size_t i = 0; i < a.y.size(); ++i) {
    CHECK(std::abs((a.y[i] - b.y[i]) - a.s[i] * (a.x - b.x)) < 1e-12);
  }
}
