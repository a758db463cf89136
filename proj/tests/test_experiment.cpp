#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnndr/experiment.hpp"
#include "oracles.hpp"

#ifdef __unix__
#include <sys/wait.h>
#endif

using gnndr::DecoderVariant;
using gnndr::Error;
using gnndr::Errc;
using gnndr::ExperimentConfig;
using gnndr::RunMode;
using gnndr::RunOutcome;

namespace {

namespace fs = std::filesystem;

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "gnndr_test_experiment";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string gmi_config(const std::string& out, const std::string& extra = "") {
  return std::string(R"({"mode":"gmi","seed":5,"output_path":")") + out +
         R"(","channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},"snr_grid_db":[0])" +
         extra + "}";
}

void expect_config_error(const std::string& text) {
  try {
    gnndr::parse_config(text);
    FAIL("expected invalid-argument for: " << text);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
    const std::string what = e.what();
    CHECK(what.find('\n') == std::string::npos);
    CHECK(what.rfind("config: ", 0) == 0);
  }
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (RunMode m : {RunMode::Gmi, RunMode::Sweep, RunMode::Bler, RunMode::DitherScan}) {
    const auto back = gnndr::mode_from_name(gnndr::mode_name(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
  CHECK(!gnndr::mode_from_name("nope").has_value());
}

TEST_CASE("config defaults") {
  const auto cfg = gnndr::parse_config(gmi_config("out.csv"));
  CHECK(cfg.mode == RunMode::Gmi);
  CHECK(cfg.seed == 5);
  CHECK(cfg.input.power == 1.0);
  REQUIRE(cfg.variants.size() == 4);  // all four by default
  CHECK(cfg.variants[0] == DecoderVariant::Opt);
  CHECK(cfg.variants[3] == DecoderVariant::Lin);
  CHECK(cfg.samples.n == 20000);
  CHECK(cfg.samples.quad_order == 48);
  CHECK(cfg.threads == 1);

  const auto scan = gnndr::parse_config(
      R"({"mode":"dither-scan","output_path":"o.csv",
          "channel":{"variant":"linear-no-state","antennas":2,"fixed_s":[[1,0],[1,0]],
                     "quantizer":"one-bit-dithered"},
          "snr_grid_db":[10],"dither_grid":[0,0.5,1]})");
  REQUIRE(scan.variants.size() == 1);  // dither-scan defaults to opt only
  CHECK(scan.variants[0] == DecoderVariant::Opt);
  CHECK(scan.dither_grid == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("variant lists are canonicalized and deduplicated") {
  const auto cfg = gnndr::parse_config(
      gmi_config("o.csv", R"(,"variants":["lin","opt","lin","csf"])"));
  REQUIRE(cfg.variants.size() == 3);
  CHECK(cfg.variants[0] == DecoderVariant::Opt);
  CHECK(cfg.variants[1] == DecoderVariant::Csf);
  CHECK(cfg.variants[2] == DecoderVariant::Lin);
}

TEST_CASE("malformed configs raise single-line config errors") {
  expect_config_error("not json at all");
  expect_config_error("[1,2,3]");
  expect_config_error(R"({"mode":"warp"})");
  expect_config_error(R"({"mode":"gmi"})");  // missing channel
  expect_config_error(R"({"mode":"gmi","channel":{"variant":"linear-no-state"}})");  // no snr
  expect_config_error(gmi_config("o.csv", R"(,"bogus_key":1)"));
  expect_config_error(gmi_config("o.csv", R"(,"variants":["opt","nope"])"));
  expect_config_error(gmi_config("o.csv", R"(,"variants":[])"));
  expect_config_error(gmi_config("o.csv", R"(,"threads":0)"));
  expect_config_error(gmi_config("o.csv", R"(,"threads":500)"));
  expect_config_error(gmi_config("o.csv", R"(,"seed":1.5)"));
  expect_config_error(gmi_config("o.csv", R"(,"samples":{"n":1})"));
  expect_config_error(gmi_config("o.csv", R"(,"samples":{"n_s":4})"));
  expect_config_error(gmi_config("o.csv", R"(,"samples":{"weird":1})"));
  expect_config_error(gmi_config("o.csv", R"(,"quadrature_order":0)"));
  expect_config_error(gmi_config("o.csv", R"(,"quadrature_order":200)"));
  expect_config_error(gmi_config("o.csv", R"(,"input_power":0)"));
  expect_config_error(gmi_config("o.csv", R"(,"dither_grid":[0.5])"));  // wrong mode
  expect_config_error(
      gmi_config("o.csv", R"(,"bler":{"block_length":8,"message_count":4,"trials":10})"));
  // gmi mode wants exactly one snr point
  expect_config_error(
      R"({"mode":"gmi","output_path":"o.csv",
          "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
          "snr_grid_db":[0,10]})");
  // channel-level problems
  expect_config_error(
      R"({"mode":"gmi","output_path":"o.csv","channel":{"variant":"linear-no-state",
          "antennas":2,"fixed_s":[[1,0]]},"snr_grid_db":[0]})");
  expect_config_error(
      R"({"mode":"gmi","output_path":"o.csv","channel":{"variant":"fading-perfect-csi",
          "pilot":[1,0]},"snr_grid_db":[0]})");
  expect_config_error(
      R"({"mode":"gmi","output_path":"o.csv","channel":{"variant":"fading-perfect-csi",
          "quantizer":"one-bit-dithered","dither_alpha":1},"snr_grid_db":[0]})");
  expect_config_error(
      R"({"mode":"dither-scan","output_path":"o.csv",
          "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]],
                     "quantizer":"one-bit"},
          "snr_grid_db":[10],"dither_grid":[0,1]})");
  // bler mode needs its block
  expect_config_error(
      R"({"mode":"bler","output_path":"o.csv",
          "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
          "snr_grid_db":[0]})");
}

TEST_CASE("serialization is a fixed point of parse") {
  const std::vector<std::string> docs = {
      gmi_config("o.csv"),
      R"({"mode":"sweep","seed":9,"output_path":"s.csv",
          "channel":{"variant":"linear-no-state","antennas":2,
                     "fixed_s":[[0.72,0.27],[-0.31,0.56]],"quantizer":"one-bit"},
          "snr_grid_db":[-10,0,10],"variants":["opt","lin"],
          "samples":{"n":5000},"quadrature_order":32,"threads":2})",
      R"({"mode":"bler","output_path":"b.csv",
          "channel":{"variant":"fading-pilot-csi","antennas":1,"fading_power":2.0,
                     "pilot":[1,1]},
          "snr_grid_db":[5,10],
          "bler":{"block_length":16,"message_count":8,"trials":25},"variants":["opt"]})",
      R"({"mode":"dither-scan","output_path":"d.csv",
          "channel":{"variant":"linear-no-state","antennas":2,"fixed_s":[[1,0],[1,0]],
                     "quantizer":"one-bit-dithered","dither_alpha":0},
          "snr_grid_db":[10],"dither_grid":[0,0.25,0.5]})",
  };
  for (const std::string& doc : docs) {
    const ExperimentConfig cfg = gnndr::parse_config(doc);
    const std::string once = gnndr::serialize_config(cfg);
    const std::string twice = gnndr::serialize_config(gnndr::parse_config(once));
    CHECK(once == twice);
  }
}

TEST_CASE("gmi run emits one row per variant with the exact header") {
  const fs::path out = scratch() / "gmi_unit.csv";
  const auto cfg = gnndr::parse_config(gmi_config(out.string()));
  const RunOutcome rc = gnndr::run_experiment(cfg);
  CHECK(rc.exit_code == 0);
  CHECK(rc.total_points == 1);
  CHECK(rc.failed_points == 0);
  CHECK(rc.csv_path == out.string());

  const auto csv = oracles::read_csv(out.string());
  const std::vector<std::string> want_header = {"snr_db",    "variant",   "gmi_nats",
                                                "gmi_bits",  "std_err",   "n_samples",
                                                "clamped_fraction", "seed"};
  CHECK(csv.header == want_header);
  REQUIRE(csv.rows.size() == 4);
  // unit snr, |s| = 1: every variant sits at ln 2 in closed form
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(std::abs(csv.num(r, "gmi_nats") - oracles::kLn2) < 1e-9);
    CHECK(std::abs(csv.num(r, "gmi_bits") - 1.0) < 1e-9);
    CHECK(csv.num(r, "n_samples") == 0);
    CHECK(csv.cell(r, "seed") == "5");
    CHECK(csv.num(r, "snr_db") == 0);
  }
  CHECK(csv.cell(0, "variant") == "opt");
  CHECK(csv.cell(1, "variant") == "csf");
  CHECK(csv.cell(2, "variant") == "csi");
  CHECK(csv.cell(3, "variant") == "lin");

  // manifest shape
  const auto manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(manifest["artifact_version"] == "0.1.0");
  CHECK(manifest["mode"] == "gmi");
  CHECK(manifest["csv"] == out.string());
  CHECK(manifest["total_points"] == 1);
  CHECK(manifest["failed_points"] == 0);
  REQUIRE(manifest["points"].size() == 1);
  CHECK(manifest["points"][0]["error"].is_null());
  CHECK(manifest["points"][0]["estimates"].size() == 4);
  CHECK(manifest["points"][0]["estimates"][0]["variant"] == "opt");

  // the embedded config echo reproduces the run byte for byte
  const fs::path out2 = scratch() / "gmi_unit_echo.csv";
  ExperimentConfig echo = gnndr::parse_config(manifest["config"].dump());
  echo.output_path = out2.string();
  gnndr::run_experiment(echo);
  CHECK(slurp(out) == slurp(out2));
}

TEST_CASE("sweep rows are ordered and the posterior-matched rate grows into saturation") {
  const fs::path out = scratch() / "sweep_onebit.csv";
  std::ostringstream doc;
  doc << R"({"mode":"sweep","seed":3,"output_path":")" << out.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":2,
                    "fixed_s":[[0.72,0.27],[-0.31,0.56]],"quantizer":"one-bit"},
         "snr_grid_db":[)";
  for (int s = -10, first = 1; s <= 20; s += 2, first = 0) doc << (first ? "" : ",") << s;
  doc << R"(],"threads":2})";
  const auto cfg = gnndr::parse_config(doc.str());
  const RunOutcome rc = gnndr::run_experiment(cfg);
  CHECK(rc.exit_code == 0);
  CHECK(rc.total_points == 16);

  const auto csv = oracles::read_csv(out.string());
  REQUIRE(csv.rows.size() == 16 * 4);
  // The one-bit rate rises monotonically out of the noise-limited regime,
  // peaks (around 16 dB on this array), and eases off as the output alphabet
  // saturates: a little noise decorrelates the sign patterns. Assert strict
  // growth below the peak and sane saturation behavior above it.
  double prev_opt = -1.0;
  double last_opt = 0.0, peak_opt = 0.0;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    if (csv.cell(r, "variant") != "opt") continue;
    const double nats = csv.num(r, "gmi_nats");
    if (csv.num(r, "snr_db") <= 14.0) {
      CHECK(nats >= prev_opt - 1e-12);
      prev_opt = nats;
    }
    peak_opt = std::max(peak_opt, nats);
    last_opt = nats;
    CHECK(csv.num(r, "n_samples") == 16);  // exhaustive one-bit alphabet
  }
  CHECK(last_opt > 1.0);  // high-snr one-bit rate passes 1 nat on this array
  CHECK(last_opt > 0.9 * peak_opt);  // saturation, not collapse

  // reruns are byte-identical
  const std::string first = slurp(out);
  gnndr::run_experiment(cfg);
  CHECK(slurp(out) == first);
}

TEST_CASE("per-point failures are isolated and coded") {
  const fs::path out = scratch() / "partial.csv";
  std::ostringstream doc;
  doc << R"({"mode":"sweep","seed":2,"output_path":")" << out.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
         "snr_grid_db":[0,4000]})";
  const auto cfg = gnndr::parse_config(doc.str());
  const RunOutcome rc = gnndr::run_experiment(cfg);
  CHECK(rc.exit_code == 0);  // one good point keeps the run alive
  CHECK(rc.total_points == 2);
  CHECK(rc.failed_points == 1);

  const auto csv = oracles::read_csv(out.string());
  REQUIRE(csv.rows.size() == 8);
  CHECK(std::abs(csv.num(0, "gmi_nats") - oracles::kLn2) < 1e-9);
  CHECK(csv.cell(4, "gmi_nats") == "nan");
  CHECK(csv.cell(4, "n_samples") == "0");

  const auto manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(manifest["points"][0]["error"].is_null());
  CHECK(manifest["points"][1]["error"] == "invalid-argument");
  CHECK(manifest["points"][1]["error_detail"].is_string());

  // all points failing flips the exit code
  const fs::path out_all = scratch() / "allfail.csv";
  std::ostringstream bad;
  bad << R"({"mode":"sweep","seed":2,"output_path":")" << out_all.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
         "snr_grid_db":[4000,5000]})";
  const RunOutcome rc2 = gnndr::run_experiment(gnndr::parse_config(bad.str()));
  CHECK(rc2.exit_code == 3);
  CHECK(rc2.failed_points == 2);
}

TEST_CASE("thread count does not change the output") {
  const fs::path out1 = scratch() / "pilot_t1.csv";
  const fs::path out4 = scratch() / "pilot_t4.csv";
  const auto doc = [](const fs::path& out, int threads) {
    std::ostringstream ss;
    ss << R"({"mode":"sweep","seed":11,"output_path":")" << out.string() << R"(",
          "channel":{"variant":"fading-pilot-csi","antennas":1},
          "snr_grid_db":[0,5,10,15],
          "samples":{"n_outer":12,"n_inner":12,"n_s":64},"threads":)"
       << threads << "}";
    return ss.str();
  };
  gnndr::run_experiment(gnndr::parse_config(doc(out1, 1)));
  gnndr::run_experiment(gnndr::parse_config(doc(out4, 4)));
  CHECK(slurp(out1) == slurp(out4));
}

TEST_CASE("bler mode emits link statistics") {
  const fs::path out = scratch() / "bler.csv";
  std::ostringstream doc;
  doc << R"({"mode":"bler","seed":4,"output_path":")" << out.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
         "snr_grid_db":[6],"variants":["opt"],
         "bler":{"block_length":8,"message_count":16,"trials":20}})";
  const auto cfg = gnndr::parse_config(doc.str());
  const RunOutcome rc = gnndr::run_experiment(cfg);
  CHECK(rc.exit_code == 0);

  const auto csv = oracles::read_csv(out.string());
  const std::vector<std::string> want_header = {
      "snr_db", "variant",  "rate_nats", "block_length", "message_count", "trials",
      "errors", "bler",     "wilson_lo", "wilson_hi",    "seed"};
  CHECK(csv.header == want_header);
  REQUIRE(csv.rows.size() == 1);
  CHECK(std::abs(csv.num(0, "rate_nats") - std::log(16.0) / 8.0) < 1e-9);
  CHECK(csv.num(0, "block_length") == 8);
  CHECK(csv.num(0, "message_count") == 16);
  CHECK(csv.num(0, "trials") == 20);
  CHECK(csv.num(0, "errors") <= 20);
  CHECK(csv.num(0, "wilson_lo") <= csv.num(0, "bler") + 1e-12);
  CHECK(csv.num(0, "bler") <= csv.num(0, "wilson_hi") + 1e-12);
}

TEST_CASE("dither scan reports the best alpha") {
  const fs::path single = scratch() / "scan_single.csv";
  std::ostringstream one;
  one << R"({"mode":"dither-scan","seed":6,"output_path":")" << single.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":2,"fixed_s":[[1,0],[1,0]],
                    "quantizer":"one-bit-dithered"},
         "snr_grid_db":[10],"dither_grid":[0]})";
  const RunOutcome rc1 = gnndr::run_experiment(gnndr::parse_config(one.str()));
  REQUIRE(rc1.best_alpha.has_value());
  CHECK(*rc1.best_alpha == 0.0);

  const fs::path multi = scratch() / "scan_multi.csv";
  std::ostringstream many;
  many << R"({"mode":"dither-scan","seed":6,"output_path":")" << multi.string() << R"(",
         "channel":{"variant":"linear-no-state","antennas":2,"fixed_s":[[1,0],[1,0]],
                    "quantizer":"one-bit-dithered"},
         "snr_grid_db":[10],"dither_grid":[0,0.5,1.0]})";
  const RunOutcome rc2 = gnndr::run_experiment(gnndr::parse_config(many.str()));
  REQUIRE(rc2.best_alpha.has_value());

  const auto csv = oracles::read_csv(multi.string());
  CHECK(csv.header[0] == "alpha");
  REQUIRE(csv.rows.size() == 3);  // default opt-only in this mode
  double at_zero = 0.0, best = -1.0, best_alpha = 0.0;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const double nats = csv.num(r, "gmi_nats");
    if (csv.num(r, "alpha") == 0.0) at_zero = nats;
    if (nats > best) {
      best = nats;
      best_alpha = csv.num(r, "alpha");
    }
  }
  CHECK(best >= at_zero);
  CHECK(*rc2.best_alpha == best_alpha);

  const auto manifest = nlohmann::json::parse(slurp(multi.string() + ".manifest.json"));
  CHECK(manifest["best_alpha"] == best_alpha);
  CHECK(manifest["points"][0].contains("alpha"));
}

#if defined(GNNDR_CLI_PATH) && defined(__unix__)

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GNNDR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch();
  const fs::path good_cfg = dir / "cli_good.json";
  const fs::path good_out = dir / "cli_good.csv";
  std::ofstream(good_cfg) << gmi_config(good_out.string());
  CHECK(run_cli("gmi --config " + good_cfg.string()) == 0);
  CHECK(fs::exists(good_out));

  // config mode and subcommand must agree
  CHECK(run_cli("sweep --config " + good_cfg.string()) == 2);

  // missing config file
  CHECK(run_cli("gmi --config " + (dir / "missing.json").string()) == 2);

  // malformed document
  const fs::path bad_cfg = dir / "cli_bad.json";
  std::ofstream(bad_cfg) << "{ not json";
  CHECK(run_cli("gmi --config " + bad_cfg.string()) == 2);

  // every grid point failing -> 3
  const fs::path fail_cfg = dir / "cli_fail.json";
  const fs::path fail_out = dir / "cli_fail.csv";
  std::ofstream(fail_cfg)
      << R"({"mode":"sweep","output_path":")" << fail_out.string() << R"(",
            "channel":{"variant":"linear-no-state","antennas":1,"fixed_s":[[1,0]]},
            "snr_grid_db":[4000,5000]})";
  CHECK(run_cli("sweep --config " + fail_cfg.string()) == 3);

  // seed override from the command line still succeeds
  CHECK(run_cli("gmi --config " + good_cfg.string() + " --seed 77") == 0);

  // no subcommand
  CHECK(run_cli("") != 0);
}

#endif
