// SPDX-License-Identifier: Apache-2.0
// Command-line front end: simulate | detect | bench | synth-recording.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "isac/config.hpp"
#include "isac/detector.hpp"
#include "isac/metrics.hpp"
#include "isac/periodogram.hpp"
#include "isac/recording.hpp"
#include "isac/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::string in_dir;
  std::string detector = "nomp";
  std::string scenario;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int trials = 100;
  int threads = 1;
  int peaks = 4;
};

isac::KeyValueConfig load_config(const Options& opt) {
  if (!opt.config_path.empty())
    return isac::KeyValueConfig::from_file(opt.config_path);
  return isac::KeyValueConfig::from_string("");
}

std::uint64_t resolve_seed(const Options& opt, const isac::KeyValueConfig& cfg) {
  if (opt.seed_given) return opt.seed;
  return cfg.get_u64("seed", std::uint64_t{1});
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

json truth_to_json(const isac::Scene& scene) {
  json j;
  j["noise_power"] = scene.noise_power;
  j["targets"] = json::array();
  for (const isac::TargetTruth& t : scene.targets)
    j["targets"].push_back({{"delay_s", t.delay},
                            {"doppler_hz", t.doppler},
                            {"gain_re", t.gain.real()},
                            {"gain_im", t.gain.imag()}});
  return j;
}

std::vector<isac::TargetTruth> truth_from_json(const json& j) {
  std::vector<isac::TargetTruth> out;
  for (const auto& t : j.at("targets"))
    out.push_back({t.at("delay_s").get<double>(),
                   t.at("doppler_hz").get<double>(),
                   {t.at("gain_re").get<double>(), t.at("gain_im").get<double>()}});
  return out;
}

int cmd_simulate(const Options& opt) {
  const isac::KeyValueConfig cfg = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const isac::GridConfig grid = isac::grid_from_config(cfg);
  const isac::ResourceSelection sel = isac::resources_from_config(cfg);
  const isac::Scene scene = isac::scene_from_config(cfg, grid);
  const isac::DetectorConfig det = isac::detector_from_config(cfg);

  const std::string path_name = cfg.get_string("synthesis.path", "direct");
  isac::SynthesisPath path;
  if (path_name == "direct")
    path = isac::SynthesisPath::direct;
  else if (path_name == "full_tx_rx")
    path = isac::SynthesisPath::full_tx_rx;
  else
    throw std::invalid_argument("config: synthesis.path must be direct or full_tx_rx");

  const isac::ResourceSet rs = isac::select_resources(
      grid, sel, isac::resource_seed_from_config(cfg, seed));
  const isac::CVec h = isac::synthesize_channel(scene, grid, rs, seed, path);

  fs::create_directories(opt.out_dir);
  isac::ChannelRecording rec;
  rec.data = isac::scatter(h, rs);
  rec.frame_len = grid.n_symbols;
  rec.subcarrier_spacing = grid.subcarrier_spacing;
  rec.symbol_duration = grid.symbol_duration;
  rec.carrier_freq = grid.carrier_freq;
  isac::save_recording(rec, (fs::path(opt.out_dir) / "measurement.chm").string(),
                       isac::RecordingFormat::raw_complex);
  isac::save_resources(rs, (fs::path(opt.out_dir) / "resources.json").string());
  write_text(fs::path(opt.out_dir) / "truth.json",
             truth_to_json(scene).dump(1) + "\n");
  isac::KeyValueConfig snap = isac::snapshot_config(grid, sel, scene, det, seed);
  snap.set("synthesis.path", path_name);
  std::ofstream snap_out(fs::path(opt.out_dir) / "config_snapshot.cfg");
  snap.write(snap_out);

  std::cout << "simulate: " << rs.size() << " occupied cells, "
            << scene.targets.size() << " targets, sigma2 = "
            << scene.noise_power << ", wrote " << opt.out_dir << "\n";
  return 0;
}

int cmd_detect(const Options& opt) {
  const fs::path in = opt.in_dir.empty() ? fs::path(opt.out_dir) : fs::path(opt.in_dir);
  isac::KeyValueConfig cfg =
      !opt.config_path.empty()
          ? isac::KeyValueConfig::from_file(opt.config_path)
          : isac::KeyValueConfig::from_file((in / "config_snapshot.cfg").string());
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const isac::GridConfig grid = isac::grid_from_config(cfg);
  const isac::DetectorConfig det = isac::detector_from_config(cfg);

  const isac::ResourceSet rs =
      isac::load_resources((in / "resources.json").string());
  if (rs.n_subcarriers != grid.n_subcarriers || rs.n_symbols != grid.n_symbols)
    throw isac::FormatError("detect: resources do not match the configured grid", 0);
  const isac::ChannelRecording rec = isac::load_recording(
      (in / "measurement.chm").string(), isac::RecordingFormat::raw_complex,
      grid.n_symbols);
  if (rec.n_subcarriers() != grid.n_subcarriers ||
      rec.n_symbols_total() != grid.n_symbols)
    throw isac::FormatError("detect: measurement does not match the configured grid", 0);
  const isac::CVec h = isac::compress(rec.data, rs);

  json out;
  out["detector"] = opt.detector;
  std::vector<isac::Detection> dets;
  if (opt.detector == "nomp" || opt.detector == "omp") {
    isac::DetectionResult r;
    if (opt.detector == "nomp") {
      r = isac::nomp_detect(h, grid, rs, det);
    } else {
      r = isac::omp_detect(h, grid, rs, det, {isac::OmpStop::Rule::cfar, 0});
    }
    dets = r.detections;
    out["threshold"] = r.threshold;
    out["iterations"] = r.iterations;
    out["truncated"] = r.truncated;
    out["last_peak_metric"] = r.last_peak_metric;
    out["residual_trace"] = r.residual_trace;
    std::ostringstream trace;
    trace << "iteration,residual_energy\n";
    trace.precision(17);
    for (std::size_t i = 0; i < r.residual_trace.size(); ++i)
      trace << i << ',' << r.residual_trace[i] << '\n';
    fs::create_directories(opt.out_dir);
    write_text(fs::path(opt.out_dir) / "residual_trace.csv", trace.str());
  } else if (opt.detector == "fft2d") {
    const isac::RangeDopplerMap map =
        isac::periodogram(h, grid, rs, det.oversampling);
    isac::PeakCriterion crit;
    crit.rule = isac::PeakCriterion::Rule::count;
    crit.count = opt.peaks;
    const isac::PeakSet peaks = isac::extract_peaks(map, crit);
    dets = peaks.detections;
    out["underfull"] = peaks.underfull;
    fs::create_directories(opt.out_dir);
    std::ofstream map_csv(fs::path(opt.out_dir) / "range_doppler_map.csv");
    isac::write_map_csv(map, map_csv);
  } else {
    throw std::invalid_argument("detect: unknown detector '" + opt.detector +
                                "' (use nomp, omp or fft2d)");
  }

  out["detections"] = json::array();
  for (const isac::Detection& d : dets) {
    const char* prov = d.provenance == isac::Provenance::coarse
                           ? "coarse"
                           : d.provenance == isac::Provenance::locally_refined
                                 ? "locally_refined"
                                 : "globally_refined";
    out["detections"].push_back(
        {{"delay_s", d.delay},
         {"doppler_hz", d.doppler},
         {"range_m", isac::delay_to_range(grid, d.delay)},
         {"velocity_mps", isac::doppler_to_velocity(grid, d.doppler)},
         {"gain_re", d.gain.real()},
         {"gain_im", d.gain.imag()},
         {"gain_abs", std::abs(d.gain)},
         {"provenance", prov}});
  }

  if (fs::exists(in / "truth.json")) {
    std::ifstream tin(in / "truth.json");
    json tj;
    tin >> tj;
    const std::vector<isac::TargetTruth> truths = truth_from_json(tj);
    const isac::Association assoc = isac::associate(dets, truths, grid);
    json aj;
    aj["matches"] = json::array();
    for (const isac::MatchRecord& m : assoc.matches)
      aj["matches"].push_back({{"truth", m.truth_index},
                               {"detection", m.detection_index},
                               {"delay_err_cells", m.delay_err_cells},
                               {"doppler_err_cells", m.doppler_err_cells}});
    aj["missed_truths"] = assoc.missed_truths;
    aj["false_detections"] = assoc.false_detections;
    aj["pod"] = truths.empty()
                    ? 0.0
                    : double(assoc.matches.size()) / double(truths.size());
    out["association"] = aj;
  }

  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "detections.json", out.dump(1) + "\n");
  isac::KeyValueConfig snap = isac::snapshot_config(
      grid, isac::resources_from_config(cfg),
      isac::Scene{{}, 0.0}, det, seed);
  std::ofstream snap_out(fs::path(opt.out_dir) / "detect_snapshot.cfg");
  snap.write(snap_out);
  std::cout << "detect: " << dets.size() << " detections with " << opt.detector
            << ", wrote " << opt.out_dir << "\n";
  return 0;
}

isac::ExperimentConfig experiment_from_config(const isac::KeyValueConfig& cfg) {
  isac::ExperimentConfig ec = isac::ExperimentConfig::make_default();
  if (cfg.has("grid.n_subcarriers") || cfg.has("grid.n_symbols"))
    ec.grid = isac::grid_from_config(cfg);
  if (cfg.has("resources.mode")) ec.resources = isac::resources_from_config(cfg);
  ec.nomp.oversampling = cfg.get_int("bench.nomp_oversampling", 4);
  ec.nomp.refinement_steps = cfg.get_int("bench.refinement_steps", 5);
  ec.omp.oversampling = cfg.get_int("bench.omp_oversampling", 4);
  ec.fft2d_oversampling = cfg.get_int("bench.fft2d_oversampling", 1);
  ec.pod_snr_db = cfg.get_double("bench.pod_snr_db", 25.0);
  ec.min_separation_cells = cfg.get_double("bench.min_separation_cells", 3.0);
  ec.separation_cells = cfg.get_double("bench.separation_cells", 0.5);
  ec.separation_axis = cfg.get_string("bench.separation_axis", "delay");
  ec.resolution_snr_db = cfg.get_double("bench.resolution_snr_db", 30.0);
  ec.resolution_occupancy = cfg.get_double("bench.resolution_occupancy", 1.0);
  ec.resolution_p_fa = cfg.get_double("bench.resolution_p_fa", 1e-3);
  ec.convergence_targets = cfg.get_int("bench.convergence_targets", 6);
  ec.convergence_snr_db = cfg.get_double("bench.convergence_snr_db", 40.0);
  ec.convergence_occupancy = cfg.get_double("bench.convergence_occupancy", 1.0);
  ec.convergence_p_fa = cfg.get_double("bench.convergence_p_fa", 1e-3);
  ec.timing_occupancy = cfg.get_double("bench.timing_occupancy", 0.01);
  ec.timing_reps = cfg.get_int("bench.timing_reps", 20);
  ec.include_oracle = cfg.get_bool("bench.include_oracle", false);
  return ec;
}

int cmd_bench(const Options& opt) {
  if (opt.scenario == "list" || opt.scenario.empty()) {
    for (const std::string& n : isac::scenario_names()) std::cout << n << "\n";
    return 0;
  }
  const isac::Scenario sc = isac::scenario_from_name(opt.scenario);
  const isac::KeyValueConfig cfg = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const isac::ExperimentConfig ec = experiment_from_config(cfg);
  const isac::ExperimentReport rep =
      isac::run_experiment(sc, ec, opt.trials, seed, opt.threads);

  fs::create_directories(opt.out_dir);
  std::ofstream jout(fs::path(opt.out_dir) / "report.json");
  rep.write_json(jout);
  std::ofstream cout_csv(fs::path(opt.out_dir) / "report.csv");
  rep.write_csv(cout_csv);
  std::cout << "bench: " << rep.scenario << " over " << rep.axis.size()
            << " axis points, " << opt.trials << " trials, wrote "
            << opt.out_dir << "\n";
  return 0;
}

int cmd_synth_recording(const Options& opt) {
  const isac::KeyValueConfig cfg = load_config(opt);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  isac::CarouselParams p;
  p.grid = isac::GridConfig::make(
      cfg.get_int("grid.n_subcarriers", 64),
      cfg.get_int("grid.n_symbols", 200),  // doubles as frame/block length
      cfg.get_double("grid.subcarrier_spacing_hz", 4.6875e6),
      cfg.get_double("grid.symbol_duration_s", 64e-6),
      cfg.get_double("grid.carrier_freq_hz", 5.9e9),
      cfg.get_double("grid.light_speed_mps", isac::kDefaultLightSpeed));
  p.n_symbols_total = cfg.get_int("carousel.n_symbols_total", 4000);
  p.radius_m = cfg.get_double("carousel.radius_m", 2.0);
  p.rpm = cfg.get_double("carousel.rpm", 20.0);
  p.base_delay_s = cfg.has("carousel.base_range_m")
                       ? isac::range_to_delay(p.grid, cfg.get_double("carousel.base_range_m"))
                       : cfg.get_double("carousel.base_delay_s", 0.0);
  p.phase0_rad = cfg.get_double("carousel.phase0_rad", 0.0);
  p.gain0 = std::polar(std::pow(10.0, cfg.get_double("carousel.gain0_db", 0.0) / 20.0), 0.0);
  p.gain1 = std::polar(std::pow(10.0, cfg.get_double("carousel.gain1_db", 0.0) / 20.0), 0.0);
  if (cfg.has("carousel.static_gain_db")) {
    p.static_gain = std::polar(
        std::pow(10.0, cfg.get_double("carousel.static_gain_db") / 20.0), 0.0);
    p.static_delay_s =
        cfg.has("carousel.static_range_m")
            ? isac::range_to_delay(p.grid, cfg.get_double("carousel.static_range_m"))
            : cfg.get_double("carousel.static_delay_s", 0.0);
  }
  p.noise_power = cfg.get_double("carousel.noise_sigma2", 0.0);
  p.seed = seed;

  const isac::ChannelRecording rec = isac::synth_carousel(p);
  fs::create_directories(opt.out_dir);
  isac::save_recording(rec, (fs::path(opt.out_dir) / "recording.chm").string(),
                       isac::RecordingFormat::raw_complex);

  json traj;
  traj["block_len"] = p.grid.n_symbols;
  traj["blocks"] = json::array();
  const int blocks = p.n_symbols_total / p.grid.n_symbols;
  for (int b = 0; b < blocks; ++b) {
    const auto truth = isac::carousel_block_truth(p, b, p.grid.n_symbols);
    traj["blocks"].push_back(
        {{"block", b},
         {"targets",
          {{{"delay_s", truth[0].delay}, {"doppler_hz", truth[0].doppler}},
           {{"delay_s", truth[1].delay}, {"doppler_hz", truth[1].doppler}}}}});
  }
  write_text(fs::path(opt.out_dir) / "trajectory.json", traj.dump(1) + "\n");
  std::cout << "synth-recording: " << rec.n_subcarriers() << " x "
            << rec.n_symbols_total() << " symbols, " << blocks
            << " blocks, wrote " << opt.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse OFDM delay-Doppler channel simulation and detection"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key = value config file");
    sub->add_option("--seed", opt.seed, "RNG seed")
        ->each([&](const std::string&) { opt.seed_given = true; });
    sub->add_option("--out", opt.out_dir, "output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "draw a scene and write a measurement");
  add_common(sim);
  CLI::App* det = app.add_subcommand("detect", "run a detector on a measurement");
  add_common(det);
  det->add_option("--in", opt.in_dir, "directory with simulate outputs");
  det->add_option("--detector", opt.detector, "nomp | omp | fft2d");
  det->add_option("--peaks", opt.peaks, "fft2d: number of peaks to extract");
  CLI::App* bench = app.add_subcommand("bench", "run a benchmark scenario");
  add_common(bench);
  bench->add_option("--scenario", opt.scenario, "scenario name, or 'list'");
  bench->add_option("--trials", opt.trials, "Monte-Carlo trials per axis point");
  bench->add_option("--threads", opt.threads, "worker threads");
  CLI::App* synth = app.add_subcommand("synth-recording",
                                       "synthesize a rotating-target recording");
  add_common(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(opt);
    if (det->parsed()) return cmd_detect(opt);
    if (bench->parsed()) return cmd_bench(opt);
    if (synth->parsed()) return cmd_synth_recording(opt);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const isac::FormatError& e) {
    std::cerr << "input error: " << e.what() << " (byte " << e.byte_offset
              << ")\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 4;
  }
}
