#include "gnndr/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace gnndr {

using nlohmann::json;

const char* mode_name(RunMode m) {
  switch (m) {
    case RunMode::Gmi: return "gmi";
    case RunMode::Sweep: return "sweep";
    case RunMode::Bler: return "bler";
    case RunMode::DitherScan: return "dither-scan";
  }
  return "?";
}

std::optional<RunMode> mode_from_name(std::string_view name) {
  for (RunMode m : {RunMode::Gmi, RunMode::Sweep, RunMode::Bler, RunMode::DitherScan}) {
    if (name == mode_name(m)) return m;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void config_error(const std::string& detail) {
  throw Error(Errc::invalid_argument, "config: " + detail);
}

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      config_error(std::string(where) + ": unknown key '" + it.key() + "'");
    }
  }
}

double get_number(const json& obj, const char* where, const char* key, double fallback,
                  bool required = false) {
  if (!obj.contains(key)) {
    if (required) config_error(std::string(where) + ": missing key '" + key + "'");
    return fallback;
  }
  if (!obj[key].is_number()) config_error(std::string(where) + ": '" + key + "' must be a number");
  return obj[key].get<double>();
}

std::size_t get_count(const json& obj, const char* where, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer() && !obj[key].is_number_unsigned())
    config_error(std::string(where) + ": '" + key + "' must be a nonnegative integer");
  if (obj[key].is_number_integer() && obj[key].get<long long>() < 0)
    config_error(std::string(where) + ": '" + key + "' must be a nonnegative integer");
  return obj[key].get<std::size_t>();
}

cplx get_complex(const json& v, const char* where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    config_error(std::string(where) + ": complex values are [re, im] pairs");
  return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<double> get_real_list(const json& obj, const char* where, const char* key) {
  std::vector<double> out;
  if (!obj.contains(key)) return out;
  if (!obj[key].is_array()) config_error(std::string(where) + ": '" + key + "' must be an array");
  for (const json& v : obj[key]) {
    if (!v.is_number()) config_error(std::string(where) + ": '" + key + "' entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

ChannelSpec parse_channel(const json& obj, double power) {
  if (!obj.is_object()) config_error("'channel' must be an object");
  check_keys(obj, "channel",
             {"variant", "antennas", "fixed_s", "fading_power", "pilot", "quantizer",
              "dither_alpha"});
  ChannelSpec ch;
  if (!obj.contains("variant") || !obj["variant"].is_string())
    config_error("channel: missing or non-string 'variant'");
  const std::string var = obj["variant"].get<std::string>();
  if (var == "linear-no-state") {
    ch.variant = Variant::LinearNoState;
  } else if (var == "fading-perfect-csi") {
    ch.variant = Variant::FadingPerfectCsi;
  } else if (var == "fading-pilot-csi") {
    ch.variant = Variant::FadingPilotCsi;
  } else {
    config_error("channel: unknown variant '" + var + "'");
  }
  ch.antennas = static_cast<int>(get_count(obj, "channel", "antennas", 1));
  ch.fading_power = get_number(obj, "channel", "fading_power", 1.0);
  if (obj.contains("fixed_s")) {
    if (!obj["fixed_s"].is_array()) config_error("channel: 'fixed_s' must be an array");
    for (const json& v : obj["fixed_s"]) ch.fixed_s.push_back(get_complex(v, "channel.fixed_s"));
  }
  if (ch.variant == Variant::FadingPilotCsi) {
    const double half = std::sqrt(power / 2.0);
    ch.pilot = obj.contains("pilot") ? get_complex(obj["pilot"], "channel.pilot")
                                     : cplx{half, half};
  } else if (obj.contains("pilot")) {
    config_error("channel: 'pilot' only applies to fading-pilot-csi");
  }
  const std::string q =
      obj.contains("quantizer")
          ? (obj["quantizer"].is_string()
                 ? obj["quantizer"].get<std::string>()
                 : (config_error("channel: 'quantizer' must be a string"), std::string{}))
          : "none";
  if (q == "none") {
    ch.quantizer.kind = QuantizerKind::None;
  } else if (q == "one-bit") {
    ch.quantizer.kind = QuantizerKind::OneBit;
  } else if (q == "one-bit-dithered") {
    ch.quantizer.kind = QuantizerKind::OneBitDithered;
  } else {
    config_error("channel: unknown quantizer '" + q + "'");
  }
  ch.quantizer.alpha = get_number(obj, "channel", "dither_alpha", 0.0);
  return ch;
}

std::string fmt_g(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json complex_json(const cplx& c) { return json::array({c.real(), c.imag()}); }

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    config_error("invalid JSON: " + msg);
  }
  if (!root.is_object()) config_error("document root must be an object");
  check_keys(root, "config",
             {"mode", "seed", "output_path", "channel", "input_power", "snr_grid_db", "variants",
              "samples", "quadrature_order", "bler", "dither_grid", "threads"});

  ExperimentConfig cfg;
  if (!root.contains("mode") || !root["mode"].is_string())
    config_error("missing or non-string 'mode'");
  const auto mode = mode_from_name(root["mode"].get<std::string>());
  if (!mode) config_error("unknown mode '" + root["mode"].get<std::string>() + "'");
  cfg.mode = *mode;

  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer() && !root["seed"].is_number_unsigned())
      config_error("'seed' must be an integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("output_path")) {
    if (!root["output_path"].is_string()) config_error("'output_path' must be a string");
    cfg.output_path = root["output_path"].get<std::string>();
  }
  cfg.input.power = get_number(root, "config", "input_power", 1.0);
  if (!root.contains("channel")) config_error("missing 'channel'");
  cfg.channel = parse_channel(root["channel"], cfg.input.power);

  cfg.snr_grid_db = get_real_list(root, "config", "snr_grid_db");
  cfg.dither_grid = get_real_list(root, "config", "dither_grid");
  std::sort(cfg.dither_grid.begin(), cfg.dither_grid.end());
  cfg.dither_grid.erase(std::unique(cfg.dither_grid.begin(), cfg.dither_grid.end()),
                        cfg.dither_grid.end());

  if (root.contains("variants")) {
    if (!root["variants"].is_array()) config_error("'variants' must be an array");
    std::array<bool, 4> seen{};
    for (const json& v : root["variants"]) {
      if (!v.is_string()) config_error("'variants' entries must be strings");
      const auto dv = variant_from_name(v.get<std::string>());
      if (!dv) config_error("unknown variant '" + v.get<std::string>() + "'");
      seen[static_cast<std::size_t>(*dv)] = true;
    }
    for (DecoderVariant v : kAllVariants) {
      if (seen[static_cast<std::size_t>(v)]) cfg.variants.push_back(v);
    }
  } else if (cfg.mode == RunMode::DitherScan) {
    cfg.variants = {DecoderVariant::Opt};
  } else {
    cfg.variants.assign(kAllVariants.begin(), kAllVariants.end());
  }

  if (root.contains("samples")) {
    const json& s = root["samples"];
    if (!s.is_object()) config_error("'samples' must be an object");
    check_keys(s, "samples", {"n", "n_outer", "n_inner", "n_s"});
    cfg.samples.n = get_count(s, "samples", "n", cfg.samples.n);
    cfg.samples.n_outer = get_count(s, "samples", "n_outer", cfg.samples.n_outer);
    cfg.samples.n_inner = get_count(s, "samples", "n_inner", cfg.samples.n_inner);
    cfg.samples.n_s = get_count(s, "samples", "n_s", cfg.samples.n_s);
  }
  cfg.samples.quad_order =
      static_cast<int>(get_count(root, "config", "quadrature_order",
                                 static_cast<std::size_t>(cfg.samples.quad_order)));

  if (root.contains("bler")) {
    const json& b = root["bler"];
    if (!b.is_object()) config_error("'bler' must be an object");
    check_keys(b, "bler", {"block_length", "rate_nats", "message_count", "trials"});
    BlerConfig bc;
    bc.codebook.block_length = get_count(b, "bler", "block_length", 0);
    bc.codebook.rate_nats = get_number(b, "bler", "rate_nats", 0.0);
    bc.codebook.message_count = get_count(b, "bler", "message_count", 0);
    bc.trials = get_count(b, "bler", "trials", 100);
    cfg.bler = bc;
  }

  cfg.threads = static_cast<int>(get_count(root, "config", "threads", 1));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  try {
    input.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (output_path.empty()) config_error("'output_path' must be nonempty");
  if (threads < 1 || threads > 256) config_error("'threads' must be in [1, 256]");
  if (variants.empty()) config_error("'variants' must be nonempty");
  if (snr_grid_db.empty()) config_error("'snr_grid_db' must be nonempty");
  for (double s : snr_grid_db) {
    if (!std::isfinite(s)) config_error("'snr_grid_db' entries must be finite");
  }
  if (mode == RunMode::Gmi && snr_grid_db.size() != 1)
    config_error("mode gmi expects exactly one snr_grid_db entry");
  if (mode == RunMode::DitherScan) {
    if (snr_grid_db.size() != 1) config_error("mode dither-scan expects one snr_grid_db entry");
    if (dither_grid.empty()) config_error("mode dither-scan requires a nonempty 'dither_grid'");
    if (channel.variant != Variant::LinearNoState ||
        channel.quantizer.kind != QuantizerKind::OneBitDithered)
      config_error("mode dither-scan requires a one-bit-dithered linear-no-state channel");
    for (double a : dither_grid) {
      if (!(a >= 0.0) || !std::isfinite(a)) config_error("'dither_grid' entries must be >= 0");
    }
  } else if (!dither_grid.empty()) {
    config_error("'dither_grid' only applies to mode dither-scan");
  }
  if (mode == RunMode::Bler) {
    if (!bler) config_error("mode bler requires a 'bler' block");
    try {
      bler->codebook.validate();
    } catch (const Error& e) {
      config_error(e.what());
    }
    if (bler->trials == 0) config_error("bler: 'trials' must be >= 1");
  } else if (bler) {
    config_error("'bler' block only applies to mode bler");
  }
  if (samples.n < 2 || samples.n_outer < 1 || samples.n_inner < 1 || samples.n_s < 16)
    config_error("samples: need n >= 2, n_outer >= 1, n_inner >= 1, n_s >= 16");
  if (samples.quad_order < 1 || samples.quad_order > 128)
    config_error("'quadrature_order' must be in [1, 128]");
  ChannelSpec shape = channel;
  shape.noise_power = 1.0;  // derived per grid point; validate the rest now
  try {
    shape.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  j["output_path"] = cfg.output_path;
  j["input_power"] = cfg.input.power;
  json ch;
  switch (cfg.channel.variant) {
    case Variant::LinearNoState: ch["variant"] = "linear-no-state"; break;
    case Variant::FadingPerfectCsi: ch["variant"] = "fading-perfect-csi"; break;
    case Variant::FadingPilotCsi: ch["variant"] = "fading-pilot-csi"; break;
  }
  ch["antennas"] = cfg.channel.antennas;
  if (!cfg.channel.fixed_s.empty()) {
    json s = json::array();
    for (const cplx& c : cfg.channel.fixed_s) s.push_back(complex_json(c));
    ch["fixed_s"] = s;
  }
  if (cfg.channel.variant != Variant::LinearNoState)
    ch["fading_power"] = cfg.channel.fading_power;
  if (cfg.channel.variant == Variant::FadingPilotCsi)
    ch["pilot"] = complex_json(cfg.channel.pilot);
  switch (cfg.channel.quantizer.kind) {
    case QuantizerKind::None: ch["quantizer"] = "none"; break;
    case QuantizerKind::OneBit: ch["quantizer"] = "one-bit"; break;
    case QuantizerKind::OneBitDithered:
      ch["quantizer"] = "one-bit-dithered";
      ch["dither_alpha"] = cfg.channel.quantizer.alpha;
      break;
  }
  j["channel"] = ch;
  j["snr_grid_db"] = cfg.snr_grid_db;
  json vars = json::array();
  for (DecoderVariant v : cfg.variants) vars.push_back(variant_name(v));
  j["variants"] = vars;
  j["samples"] = {{"n", cfg.samples.n},
                  {"n_outer", cfg.samples.n_outer},
                  {"n_inner", cfg.samples.n_inner},
                  {"n_s", cfg.samples.n_s}};
  j["quadrature_order"] = cfg.samples.quad_order;
  if (cfg.bler) {
    j["bler"] = {{"block_length", cfg.bler->codebook.block_length},
                 {"rate_nats", cfg.bler->codebook.rate_nats},
                 {"message_count", cfg.bler->codebook.message_count},
                 {"trials", cfg.bler->trials}};
  }
  if (!cfg.dither_grid.empty()) j["dither_grid"] = cfg.dither_grid;
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

namespace {

struct PointOutcome {
  std::string error;         // error code; empty = success
  std::string error_detail;  // one-line what()
  double wall_ms = 0.0;
  std::vector<GmiEstimate> estimates;
  std::vector<BlerResult> blers;  // bler mode, aligned with cfg.variants
};

double noise_for(double power, double snr_db) { return power / std::pow(10.0, snr_db / 10.0); }

void capture_error(PointOutcome& out, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    out.error = err->code_name();
  } else {
    out.error = "internal-error";
  }
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  out.error_detail = msg;
}

PointOutcome run_gmi_point(const ExperimentConfig& cfg, double snr_db, double alpha,
                           std::size_t index) {
  PointOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ChannelSpec ch = cfg.channel;
    ch.noise_power = noise_for(cfg.input.power, snr_db);
    if (cfg.mode == RunMode::DitherScan) ch.quantizer.alpha = alpha;
    Rng rng = Rng(cfg.seed).substream(1000 + index);
    out.estimates = gmi_cohort(ch, cfg.input, cfg.variants, cfg.samples, rng);
  } catch (const std::exception& e) {
    capture_error(out, e);
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

PointOutcome run_bler_point(const ExperimentConfig& cfg, double snr_db, std::size_t index) {
  PointOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ChannelSpec ch = cfg.channel;
    ch.noise_power = noise_for(cfg.input.power, snr_db);
    Rng base = Rng(cfg.seed).substream(1000 + index);
    for (std::size_t j = 0; j < cfg.variants.size(); ++j) {
      Rng rng = base.substream(j + 1);
      out.blers.push_back(simulate_bler(ch, cfg.input, cfg.variants[j], cfg.bler->codebook,
                                        cfg.samples, cfg.bler->trials, rng, cfg.threads));
    }
  } catch (const std::exception& e) {
    capture_error(out, e);
    out.blers.clear();
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool scan = cfg.mode == RunMode::DitherScan;
  const std::vector<double>& grid = scan ? cfg.dither_grid : cfg.snr_grid_db;
  const std::size_t n_points = grid.size();

  std::vector<PointOutcome> points(n_points);
  if (cfg.mode == RunMode::Bler) {
    for (std::size_t i = 0; i < n_points; ++i) points[i] = run_bler_point(cfg, grid[i], i);
  } else {
    const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n_points)));
    if (workers == 1) {
      for (std::size_t i = 0; i < n_points; ++i) {
        points[i] = run_gmi_point(cfg, scan ? cfg.snr_grid_db[0] : grid[i], grid[i], i);
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next.fetch_add(1); i < n_points; i = next.fetch_add(1)) {
            points[i] = run_gmi_point(cfg, scan ? cfg.snr_grid_db[0] : grid[i], grid[i], i);
          }
        });
      }
      for (std::thread& th : pool) th.join();
    }
  }

  // CSV, rows in grid order with the canonical variant order inside a point.
  std::ostringstream csv;
  const std::string seed_str = std::to_string(cfg.seed);
  if (cfg.mode == RunMode::Bler) {
    csv << "snr_db,variant,rate_nats,block_length,message_count,trials,errors,bler,wilson_lo,"
           "wilson_hi,seed\n";
    const std::size_t m_count = cfg.bler->codebook.resolved_message_count();
    const double rate = cfg.bler->codebook.realized_rate_nats();
    for (std::size_t i = 0; i < n_points; ++i) {
      for (std::size_t j = 0; j < cfg.variants.size(); ++j) {
        csv << fmt_g(grid[i]) << ',' << variant_name(cfg.variants[j]) << ',';
        if (points[i].error.empty()) {
          const BlerResult& b = points[i].blers[j];
          csv << fmt_g(rate) << ',' << cfg.bler->codebook.block_length << ',' << m_count << ','
              << b.trials << ',' << b.errors << ',' << fmt_g(b.bler) << ','
              << fmt_g(b.wilson_lo) << ',' << fmt_g(b.wilson_hi);
        } else {
          csv << fmt_g(rate) << ',' << cfg.bler->codebook.block_length << ',' << m_count << ','
              << cfg.bler->trials << ",0,nan,nan,nan";
        }
        csv << ',' << seed_str << '\n';
      }
    }
  } else {
    csv << (scan ? "alpha" : "snr_db")
        << ",variant,gmi_nats,gmi_bits,std_err,n_samples,clamped_fraction,seed\n";
    for (std::size_t i = 0; i < n_points; ++i) {
      for (std::size_t j = 0; j < cfg.variants.size(); ++j) {
        csv << fmt_g(grid[i]) << ',' << variant_name(cfg.variants[j]) << ',';
        if (points[i].error.empty()) {
          const GmiEstimate& e = points[i].estimates[j];
          csv << fmt_g(e.nats) << ',' << fmt_g(e.bits()) << ',' << fmt_g(e.std_err) << ','
              << e.n_samples << ',' << fmt_g(e.clamped_fraction());
        } else {
          csv << "nan,nan,nan,0,nan";
        }
        csv << ',' << seed_str << '\n';
      }
    }
  }

  RunOutcome outcome;
  outcome.csv_path = cfg.output_path;
  outcome.manifest_path = cfg.output_path + ".manifest.json";
  outcome.total_points = n_points;
  for (const PointOutcome& p : points) {
    if (!p.error.empty()) ++outcome.failed_points;
  }
  outcome.exit_code = (outcome.failed_points == n_points && n_points > 0) ? 3 : 0;

  if (scan) {
    // Lowest alpha wins ties; ranking follows the first configured variant.
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_points; ++i) {
      if (!points[i].error.empty()) continue;
      const double v = points[i].estimates[0].nats;
      if (v > best_val) {
        best_val = v;
        outcome.best_alpha = grid[i];
      }
    }
  }

  json manifest;
  manifest["artifact_version"] = "0.1.0";
  manifest["mode"] = mode_name(cfg.mode);
  manifest["csv"] = cfg.output_path;
  manifest["config"] = json::parse(serialize_config(cfg));
  manifest["total_points"] = outcome.total_points;
  manifest["failed_points"] = outcome.failed_points;
  if (outcome.best_alpha) manifest["best_alpha"] = *outcome.best_alpha;
  json pts = json::array();
  for (std::size_t i = 0; i < n_points; ++i) {
    json p;
    p[scan ? "alpha" : "snr_db"] = grid[i];
    p["wall_ms"] = points[i].wall_ms;
    p["error"] = points[i].error.empty() ? json(nullptr) : json(points[i].error);
    p["error_detail"] =
        points[i].error.empty() ? json(nullptr) : json(points[i].error_detail);
    if (!points[i].estimates.empty()) {
      json es = json::array();
      for (const GmiEstimate& e : points[i].estimates) {
        es.push_back({{"variant", variant_name(e.variant)},
                      {"n_samples", e.n_samples},
                      {"clamped", e.clamped},
                      {"clamp_base", e.clamp_base}});
      }
      p["estimates"] = es;
    }
    if (!points[i].blers.empty()) {
      json bs = json::array();
      for (std::size_t j = 0; j < points[i].blers.size(); ++j) {
        bs.push_back({{"variant", variant_name(cfg.variants[j])},
                      {"trials", points[i].blers[j].trials},
                      {"errors", points[i].blers[j].errors}});
      }
      p["results"] = bs;
    }
    pts.push_back(p);
  }
  manifest["points"] = pts;

  std::ofstream csv_out(cfg.output_path, std::ios::binary);
  if (!csv_out) config_error("cannot open output path '" + cfg.output_path + "'");
  csv_out << csv.str();
  csv_out.close();
  std::ofstream man_out(outcome.manifest_path, std::ios::binary);
  if (!man_out) config_error("cannot open output path '" + outcome.manifest_path + "'");
  man_out << manifest.dump(2) << '\n';
  man_out.close();
  return outcome;
}

}  // namespace gnndr
