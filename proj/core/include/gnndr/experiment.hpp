#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gnndr/decoder.hpp"

namespace gnndr {

enum class RunMode { Gmi, Sweep, Bler, DitherScan };

const char* mode_name(RunMode m);
std::optional<RunMode> mode_from_name(std::string_view name);

struct BlerConfig {
  CodebookSpec codebook;
  std::size_t trials = 100;
};

/// Declarative experiment description. channel.noise_power is not part of
/// the document: P is held fixed and sigma^2 = P / 10^(snr_db/10) is derived
/// per grid point.
struct ExperimentConfig {
  RunMode mode = RunMode::Gmi;
  std::uint64_t seed = 1;
  std::string output_path = "out.csv";
  ChannelSpec channel;
  GaussianInputSpec input;
  std::vector<double> snr_grid_db;
  std::vector<DecoderVariant> variants;  // canonical order, deduplicated
  SampleSizes samples;
  std::optional<BlerConfig> bler;
  std::vector<double> dither_grid;  // dither-scan mode; sorted ascending
  int threads = 1;

  void validate() const;  // throws Error(invalid-argument) with a one-line message
};

/// Parses the JSON experiment document. Unknown keys, malformed values, and
/// mode/field inconsistencies all throw Error(invalid-argument) whose what()
/// is a single line.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Serializes the config back to JSON; parse_config(serialize_config(c))
/// reproduces an equivalent config (manifest embeds this echo).
std::string serialize_config(const ExperimentConfig& cfg);

struct RunOutcome {
  int exit_code = 0;  // 0 = at least one grid point succeeded; 3 = all failed
  std::string csv_path;
  std::string manifest_path;
  std::size_t total_points = 0;
  std::size_t failed_points = 0;
  std::optional<double> best_alpha;  // dither-scan only
};

/// Executes the experiment, writing the CSV at cfg.output_path and the
/// manifest sidecar at cfg.output_path + ".manifest.json". Per-point
/// numerical errors become rows with nan values plus a manifest error code;
/// the run continues.
RunOutcome run_experiment(const ExperimentConfig& cfg);

}  // namespace gnndr
