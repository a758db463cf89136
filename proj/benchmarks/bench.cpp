#include <benchmark/benchmark.h>

#include <cmath>

#include "gnndr/channel.hpp"
#include "gnndr/decoder.hpp"
#include "gnndr/estimators.hpp"
#include "gnndr/gmi.hpp"
#include "gnndr/math.hpp"

namespace {

using namespace gnndr;

ChannelSpec onebit_spec(int p, double snr_db) {
  ChannelSpec spec;
  spec.variant = Variant::LinearNoState;
  spec.antennas = p;
  spec.fixed_s.assign(p, cplx{1.0, 0.0});
  spec.noise_power = std::pow(10.0, -snr_db / 10.0);
  spec.quantizer.kind = QuantizerKind::OneBit;
  return spec;
}

ChannelSpec pilot_spec(int p, double snr_db) {
  ChannelSpec spec;
  spec.variant = Variant::FadingPilotCsi;
  spec.antennas = p;
  spec.fading_power = 1.0;
  spec.noise_power = std::pow(10.0, -snr_db / 10.0);
  spec.pilot = cplx{std::sqrt(0.5), std::sqrt(0.5)};
  return spec;
}

void BM_OneBitMoments(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const ChannelSpec spec = onebit_spec(p, 10.0);
  const GaussianInputSpec input;
  const QuadratureRule& rule = gauss_hermite(48);
  Rng rng(1, 0);
  const ChannelUse u = sample_use(spec, input, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(moments_onebit_quadrature(spec, input, u.y, spec.fixed_s, rule));
  }
}
BENCHMARK(BM_OneBitMoments)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_OneBitEnumerate(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const ChannelSpec spec = onebit_spec(p, 10.0);
  const GaussianInputSpec input;
  const QuadratureRule& rule = gauss_hermite(48);
  for (auto _ : state) {
    benchmark::DoNotOptimize(onebit_enumerate(spec, input, spec.fixed_s, rule));
  }
}
BENCHMARK(BM_OneBitEnumerate)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_PilotSnis(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const ChannelSpec spec = pilot_spec(p, 5.0);
  const GaussianInputSpec input;
  Rng rng(2, static_cast<std::uint64_t>(p));
  ChannelUse u = sample_use(spec, input, rng);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(moments_pilot_snis(spec, input, u.y, u.v, 16384, rng));
    } catch (const Error&) {
      state.PauseTiming();
      u = sample_use(spec, input, rng);
      state.ResumeTiming();
    }
  }
}
BENCHMARK(BM_PilotSnis)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_GmiOptOneBit(benchmark::State& state) {
  const ChannelSpec spec = onebit_spec(2, 10.0);
  const GaussianInputSpec input;
  SampleSizes sizes;
  for (auto _ : state) {
    Rng rng(3, 0);
    benchmark::DoNotOptimize(gmi_opt(spec, input, sizes, rng));
  }
}
BENCHMARK(BM_GmiOptOneBit)->Unit(benchmark::kMillisecond);

void BM_DecodeBlock(benchmark::State& state) {
  const ChannelSpec spec = onebit_spec(2, 10.0);
  const GaussianInputSpec input;
  SampleSizes sizes;
  Rng rng(4, 0);
  const GnndrFunctions fns = gnndr_functions(DecoderVariant::Opt, spec, input, sizes, rng);
  CodebookSpec cbspec;
  cbspec.block_length = 11;
  cbspec.message_count = 4096;
  const Codebook cb = draw_codebook(cbspec, input, rng);
  std::vector<ChannelUse> uses;
  for (std::size_t n = 0; n < cbspec.block_length; ++n) {
    uses.push_back(sample_use_given_x(spec, input, cb.codeword(0)[n], rng, CVec{}));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode(fns, uses, cb));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4096 * 11);
}
BENCHMARK(BM_DecodeBlock);

}  // namespace

BENCHMARK_MAIN();
