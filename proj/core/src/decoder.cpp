#include "gnndr/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace gnndr {

namespace {
constexpr std::size_t kMaxBlockLength = 1024;
constexpr std::size_t kMaxMessages = std::size_t{1} << 14;
constexpr std::size_t kMaxWorkBudget = std::size_t{1} << 32;
constexpr double kWilsonZ = 1.959963985;
}  // namespace

void CodebookSpec::validate() const {
  if (block_length == 0) {
    throw Error(Errc::invalid_argument, "codebook: block_length must be positive");
  }
  if (block_length > kMaxBlockLength) {
    throw Error(Errc::capacity_exceeded, "codebook: block_length exceeds 1024");
  }
  if (message_count == 0 && !(rate_nats > 0.0 && std::isfinite(rate_nats))) {
    throw Error(Errc::invalid_argument, "codebook: need rate_nats > 0 or explicit message_count");
  }
  const std::size_t m = resolved_message_count();
  if (m < 2) {
    throw Error(Errc::invalid_argument, "codebook: fewer than 2 messages");
  }
  if (m > kMaxMessages) {
    throw Error(Errc::capacity_exceeded, "codebook: message count exceeds 2^14");
  }
}

std::size_t CodebookSpec::resolved_message_count() const {
  if (message_count > 0) return message_count;
  const double m = std::ceil(std::exp(static_cast<double>(block_length) * rate_nats));
  if (!(m >= 0.0) || m > 1e15) {
    throw Error(Errc::capacity_exceeded, "codebook: derived message count overflows");
  }
  return static_cast<std::size_t>(m);
}

double CodebookSpec::realized_rate_nats() const {
  return std::log(static_cast<double>(resolved_message_count())) /
         static_cast<double>(block_length);
}

Codebook draw_codebook(const CodebookSpec& cb, const GaussianInputSpec& input, Rng& rng) {
  cb.validate();
  input.validate();
  Codebook book;
  book.block_length = cb.block_length;
  book.message_count = cb.resolved_message_count();
  book.symbols.resize(book.block_length * book.message_count);
  for (cplx& c : book.symbols) c = rng.complex_normal(input.power);
  return book;
}

namespace {

std::vector<std::pair<cplx, cplx>> evaluate_coeffs(const GnndrFunctions& fns,
                                                   const std::vector<ChannelUse>& uses) {
  if (!fns.coeffs) {
    throw Error(Errc::invalid_function, "decode: empty coefficient callable");
  }
  std::vector<std::pair<cplx, cplx>> gf;
  gf.reserve(uses.size());
  for (const ChannelUse& u : uses) gf.push_back(fns.coeffs(u.y, u.v));
  return gf;
}

double metric_of(const std::vector<std::pair<cplx, cplx>>& gf, const cplx* codeword) {
  double acc = 0.0;
  for (std::size_t n = 0; n < gf.size(); ++n) {
    acc += std::norm(gf[n].first - gf[n].second * codeword[n]);
  }
  return acc;
}

}  // namespace

double gnndr_metric(const GnndrFunctions& fns, const std::vector<ChannelUse>& uses,
                    const CVec& codeword) {
  if (uses.size() != codeword.size()) {
    throw Error(Errc::invalid_argument, "gnndr_metric: length mismatch");
  }
  return metric_of(evaluate_coeffs(fns, uses), codeword.data());
}

std::size_t decode(const GnndrFunctions& fns, const std::vector<ChannelUse>& uses,
                   const Codebook& cb, double* margin) {
  if (cb.message_count == 0) {
    throw Error(Errc::invalid_argument, "decode: empty codebook");
  }
  if (uses.size() != cb.block_length) {
    throw Error(Errc::invalid_argument, "decode: observation/codebook length mismatch");
  }
  const auto gf = evaluate_coeffs(fns, uses);
  std::size_t best = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < cb.message_count; ++m) {
    const double d = metric_of(gf, cb.codeword(m));
    if (d < best_metric) {
      second = best_metric;
      best_metric = d;
      best = m;
    } else if (d < second) {
      second = d;
    }
  }
  if (margin) {
    *margin = cb.message_count > 1 ? second - best_metric : 0.0;
  }
  return best;
}

BlerResult simulate_bler(const ChannelSpec& spec, const GaussianInputSpec& input,
                         DecoderVariant variant, const CodebookSpec& cb, const SampleSizes& sizes,
                         std::size_t trials, Rng& rng, int threads) {
  spec.validate();
  input.validate();
  cb.validate();
  if (trials == 0) {
    throw Error(Errc::invalid_argument, "simulate_bler: trials must be >= 1");
  }
  const std::size_t n = cb.block_length;
  const std::size_t m_count = cb.resolved_message_count();
  if (m_count > kMaxWorkBudget / n || m_count * n > kMaxWorkBudget / trials) {
    throw Error(Errc::capacity_exceeded, "simulate_bler: M*N*trials exceeds 2^32");
  }

  CVec dither;
  if (spec.quantizer.kind == QuantizerKind::OneBitDithered) {
    dither = dither_vector(spec, input).b;
  }

  CodebookSpec resolved = cb;
  resolved.message_count = m_count;

  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::size_t>(
                                             trials, std::thread::hardware_concurrency()
                                                         ? std::thread::hardware_concurrency()
                                                         : 1))));

  const auto run_chunk = [&](std::size_t t0, std::size_t t1, std::size_t& errors_out) {
    Rng cal = rng.substream(0xB1E5ULL);
    const GnndrFunctions fns = gnndr_functions(variant, spec, input, sizes, cal);
    std::vector<ChannelUse> uses(n);
    std::size_t errors = 0;
    for (std::size_t t = t0; t < t1; ++t) {
      Rng tr = rng.substream(t + 0x10000ULL);  // ids below 0x10000 reserved for calibration
      const Codebook book = draw_codebook(resolved, input, tr);
      std::size_t sent = static_cast<std::size_t>(tr.uniform() * static_cast<double>(m_count));
      sent = std::min(sent, m_count - 1);
      const cplx* cw = book.codeword(sent);
      for (std::size_t k = 0; k < n; ++k) {
        uses[k] = sample_use_given_x(spec, input, cw[k], tr, dither);
      }
      if (decode(fns, uses, book) != sent) ++errors;
    }
    errors_out = errors;
  };

  std::vector<std::size_t> errs(static_cast<std::size_t>(workers), 0);
  if (workers == 1) {
    run_chunk(0, trials, errs[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t t0 = std::min(trials, static_cast<std::size_t>(w) * chunk);
      const std::size_t t1 = std::min(trials, t0 + chunk);
      pool.emplace_back(run_chunk, t0, t1, std::ref(errs[static_cast<std::size_t>(w)]));
    }
    for (std::thread& th : pool) th.join();
  }

  BlerResult out;
  out.trials = trials;
  for (std::size_t e : errs) out.errors += e;
  const double nn = static_cast<double>(trials);
  const double p = static_cast<double>(out.errors) / nn;
  out.bler = p;
  const double z2 = kWilsonZ * kWilsonZ;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half =
      kWilsonZ * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  out.wilson_lo = std::max(0.0, center - half);
  out.wilson_hi = std::min(1.0, center + half);
  return out;
}

}  // namespace gnndr
