#pragma once

#include <cstdint>
#include <vector>

#include "gnndr/gmi.hpp"

namespace gnndr {

/// Random-codebook parameters. message_count == 0 derives M = ceil(e^{N R});
/// an explicit message_count overrides the rate (the realized rate is then
/// ln M / N). Desk-scale budget: N <= 1024, 2 <= M <= 2^14, and
/// M * N * trials <= 2^32 per simulation.
struct CodebookSpec {
  std::size_t block_length = 0;   // N
  double rate_nats = 0.0;         // R target, nats per channel use
  std::size_t message_count = 0;  // M override; 0 = derive from R
  std::uint64_t seed = 0;         // used by standalone draw_codebook

  void validate() const;
  std::size_t resolved_message_count() const;
  double realized_rate_nats() const;  // ln(M) / N
};

struct Codebook {
  std::size_t block_length = 0;
  std::size_t message_count = 0;
  CVec symbols;  // message-major, message_count * block_length entries

  const cplx* codeword(std::size_t m) const { return symbols.data() + m * block_length; }
};

/// i.i.d. CN(0, P) codebook; entries drawn codeword by codeword.
Codebook draw_codebook(const CodebookSpec& cb, const GaussianInputSpec& input, Rng& rng);

/// sum_n |g(y_n, v_n) - f(y_n, v_n) x_n|^2
double gnndr_metric(const GnndrFunctions& fns, const std::vector<ChannelUse>& uses,
                    const CVec& codeword);

struct TrialResult {
  std::size_t sent = 0;
  std::size_t decoded = 0;
  double metric_margin = 0.0;  // runner-up metric minus winner metric; >= 0
};

/// argmin_m of the accumulated metric; ties broken toward the lowest index.
/// The per-use (g, f) pairs are evaluated once and shared across codewords.
std::size_t decode(const GnndrFunctions& fns, const std::vector<ChannelUse>& uses,
                   const Codebook& cb, double* margin = nullptr);

struct BlerResult {
  std::size_t trials = 0;
  std::size_t errors = 0;
  double bler = 0.0;
  double wilson_lo = 0.0;  // 95% Wilson interval
  double wilson_hi = 0.0;
};

/// Fresh codebook per trial; per-trial Rng substreams make the result
/// independent of the thread count. The decoder functions are built once per
/// worker from a fixed calibration substream of rng.
BlerResult simulate_bler(const ChannelSpec& spec, const GaussianInputSpec& input,
                         DecoderVariant variant, const CodebookSpec& cb, const SampleSizes& sizes,
                         std::size_t trials, Rng& rng, int threads = 1);

}  // namespace gnndr
