#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "gnndr/experiment.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool has_seed = false;
  bool has_out = false;
  bool has_threads = false;
};

int run_mode(gnndr::RunMode mode, const CliArgs& args) {
  gnndr::ExperimentConfig cfg = gnndr::load_config_file(args.config_path);
  if (cfg.mode != mode) {
    throw gnndr::Error(gnndr::Errc::invalid_argument,
                       std::string("config: mode '") + gnndr::mode_name(cfg.mode) +
                           "' does not match subcommand '" + gnndr::mode_name(mode) + "'");
  }
  if (args.has_seed) cfg.seed = args.seed;
  if (args.has_out) cfg.output_path = args.out;
  if (args.has_threads) cfg.threads = args.threads;
  cfg.validate();
  const gnndr::RunOutcome outcome = gnndr::run_experiment(cfg);
  std::printf("wrote %s (%zu/%zu points ok)\n", outcome.csv_path.c_str(),
              outcome.total_points - outcome.failed_points, outcome.total_points);
  if (outcome.best_alpha) std::printf("best_alpha %.12g\n", *outcome.best_alpha);
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNNDR achievable-rate computation and link simulation"};
  app.require_subcommand(1);

  CliArgs args;
  gnndr::RunMode selected = gnndr::RunMode::Gmi;
  const auto add_mode = [&](gnndr::RunMode mode, const char* desc) {
    CLI::App* sub = app.add_subcommand(gnndr::mode_name(mode), desc);
    sub->add_option("--config", args.config_path, "JSON experiment document")->required();
    sub->add_option("--seed", args.seed, "override config seed");
    sub->add_option("--out", args.out, "override config output_path");
    sub->add_option("--threads", args.threads, "override config threads");
    sub->callback([&, mode, sub] {
      selected = mode;
      args.has_seed = sub->count("--seed") > 0;
      args.has_out = sub->count("--out") > 0;
      args.has_threads = sub->count("--threads") > 0;
    });
    return sub;
  };
  add_mode(gnndr::RunMode::Gmi, "GMI of the configured variants at one SNR point");
  add_mode(gnndr::RunMode::Sweep, "GMI sweep over the configured SNR grid");
  add_mode(gnndr::RunMode::Bler, "random-codebook block-error-rate simulation");
  add_mode(gnndr::RunMode::DitherScan, "GMI as a function of the dither amplitude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    return run_mode(selected, args);
  } catch (const gnndr::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.code_name(), e.what());
    return e.code() == gnndr::Errc::invalid_argument ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
