// SPDX-License-Identifier: Apache-2.0
// Monte-Carlo benchmark scenarios. Trials are indexed, seeded individually
// and written to preallocated slots, so results are identical for any
// thread count.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "isac/metrics.hpp"
#include "isac/periodogram.hpp"
#include "isac/scene.hpp"

namespace isac {

namespace {

template <typename F>
void parallel_trials(int trials, int threads, F&& fn) {
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, trials);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int t = next++; t < trials; t = next++) fn(t);
    });
  for (auto& th : pool) th.join();
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

cplx phase_gain(double magnitude, std::mt19937_64& rng) {
  return std::polar(magnitude, 2.0 * std::numbers::pi * uniform01(rng));
}

TargetTruth random_target(const GridConfig& g, double magnitude,
                          std::mt19937_64& rng) {
  TargetTruth t;
  t.delay = uniform01(rng) * g.delay_span();
  t.doppler = (uniform01(rng) - 0.5) * g.doppler_span();
  t.gain = phase_gain(magnitude, rng);
  return t;
}

// Redraws until the candidate sits at least min_cells away from all placed
// targets (circular Euclidean distance in cells).
TargetTruth separated_target(const GridConfig& g, double magnitude,
                             const std::vector<TargetTruth>& placed,
                             double min_cells, std::mt19937_64& rng) {
  for (int tries = 0; tries < 10000; ++tries) {
    TargetTruth t = random_target(g, magnitude, rng);
    bool ok = true;
    for (const TargetTruth& p : placed)
      ok = ok &&
           cell_distance(g, t.delay, t.doppler, p.delay, p.doppler) >= min_cells;
    if (ok) return t;
  }
  throw std::runtime_error("experiment: could not place separated targets");
}

struct MatchedFlags {
  std::vector<bool> matched;
};

MatchedFlags matched_truths(const std::vector<Detection>& dets,
                            const std::vector<TargetTruth>& truths,
                            const GridConfig& grid,
                            const AssociationGates& gates) {
  MatchedFlags f;
  f.matched.assign(truths.size(), false);
  for (const MatchRecord& m : associate(dets, truths, grid, gates).matches)
    f.matched[m.truth_index] = true;
  return f;
}


double rmse(const std::vector<double>& errors) {
  double s = 0.0;
  for (double e : errors) s += e * e;
  return errors.empty() ? 0.0 : std::sqrt(s / double(errors.size()));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

std::map<std::string, std::string> base_snapshot(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> s;
  auto put = [&](const std::string& k, double v) {
    s[k] = std::to_string(v);
  };
  put("grid.n_subcarriers", cfg.grid.n_subcarriers);
  put("grid.n_symbols", cfg.grid.n_symbols);
  put("grid.subcarrier_spacing_hz", cfg.grid.subcarrier_spacing);
  put("grid.symbol_duration_s", cfg.grid.symbol_duration);
  put("grid.carrier_freq_hz", cfg.grid.carrier_freq);
  s["resources.mode"] = cfg.resources.mode == ResourceMode::elementwise
                            ? "elementwise"
                            : "structured";
  put("resources.occupancy", cfg.resources.occupancy);
  put("resources.n_sub_used", cfg.resources.n_sub_used);
  put("resources.n_sym_used", cfg.resources.n_sym_used);
  put("nomp.oversampling", cfg.nomp.oversampling);
  put("nomp.refinement_steps", cfg.nomp.refinement_steps);
  put("nomp.false_alarm_prob", cfg.nomp.false_alarm_prob);
  put("omp.oversampling", cfg.omp.oversampling);
  put("fft2d.oversampling", cfg.fft2d_oversampling);
  put("gates.delay_cells", cfg.gates.delay_cells);
  put("gates.doppler_cells", cfg.gates.doppler_cells);
  return s;
}

ExperimentReport make_report(Scenario sc, const ExperimentConfig& cfg,
                             int trials, std::uint64_t seed, int threads,
                             std::string axis_name, std::vector<double> axis) {
  ExperimentReport rep;
  rep.scenario = scenario_name(sc);
  rep.axis_name = std::move(axis_name);
  rep.axis = std::move(axis);
  rep.trials = trials;
  rep.seed = seed;
  rep.threads = threads;
  rep.config_snapshot = base_snapshot(cfg);
  return rep;
}

// --- pod_vs_swpr ----------------------------------------------------------

ExperimentReport run_pod(const ExperimentConfig& cfg, int trials,
                         std::uint64_t seed, int threads) {
  ExperimentReport rep = make_report(Scenario::pod_vs_swpr, cfg, trials, seed,
                                     threads, "swpr_db", cfg.swpr_db);
  struct Outcome {
    bool w[3] = {false, false, false};  // nomp, omp, fft2d: weak matched
    bool s[3] = {false, false, false};
  };
  const char* names[3] = {"nomp", "omp", "fft2d"};
  std::vector<std::vector<double>> pod_w(3), pod_s(3), pod_w_se(3);

  for (std::size_t pi = 0; pi < cfg.swpr_db.size(); ++pi) {
    const double swpr = cfg.swpr_db[pi];
    std::vector<Outcome> out(trials);
    parallel_trials(trials, threads, [&](int t) {
      std::mt19937_64 rng(trial_seed(seed, pi, t));
      const ResourceSet rs = select_resources(cfg.grid, cfg.resources, rng());
      std::vector<TargetTruth> truths;
      truths.push_back(random_target(cfg.grid, 1.0, rng));
      truths.push_back(separated_target(cfg.grid,
                                        std::pow(10.0, -swpr / 20.0), truths,
                                        cfg.min_separation_cells, rng));
      Scene scene{truths, Scene::noise_power_for_snr(truths, cfg.pod_snr_db)};
      const CVec h = synthesize_channel(scene, cfg.grid, rs, rng());

      const auto flag = [&](const std::vector<Detection>& d, int which) {
        const MatchedFlags f = matched_truths(d, truths, cfg.grid, cfg.gates);
        out[t].s[which] = f.matched[0];
        out[t].w[which] = f.matched[1];
      };
      flag(nomp_detect(h, cfg.grid, rs, cfg.nomp).detections, 0);
      flag(omp_detect(h, cfg.grid, rs, cfg.omp,
                      {OmpStop::Rule::k_known, 2}).detections, 1);
      const RangeDopplerMap map =
          periodogram(h, cfg.grid, rs, cfg.fft2d_oversampling);
      PeakCriterion crit;
      crit.rule = PeakCriterion::Rule::count;
      crit.count = 2;
      flag(extract_peaks(map, crit).detections, 2);
    });
    for (int which = 0; which < 3; ++which) {
      double pw = 0, ps = 0;
      for (const Outcome& o : out) {
        pw += o.w[which];
        ps += o.s[which];
      }
      pw /= trials;
      ps /= trials;
      pod_w[which].push_back(pw);
      pod_s[which].push_back(ps);
      pod_w_se[which].push_back(std::sqrt(pw * (1.0 - pw) / trials));
    }
  }
  for (int which = 0; which < 3; ++which) {
    rep.series.push_back({names[which], "pod_weak", pod_w[which]});
    rep.series.push_back({names[which], "pod_weak_se", pod_w_se[which]});
    rep.series.push_back({names[which], "pod_strong", pod_s[which]});
  }
  return rep;
}

// --- rmse_vs_snr ----------------------------------------------------------

ExperimentReport run_rmse(const ExperimentConfig& cfg, int trials,
                          std::uint64_t seed, int threads) {
  if (cfg.resources.mode != ResourceMode::structured)
    throw std::invalid_argument(
        "rmse_vs_snr: bounds need structured resources (per-axis occupied counts)");
  ExperimentReport rep = make_report(Scenario::rmse_vs_snr, cfg, trials, seed,
                                     threads, "snr_db", cfg.snr_db);
  const int n_det = cfg.include_oracle ? 4 : 3;
  const char* names[4] = {"nomp", "omp", "fft2d", "oracle"};
  std::vector<std::vector<double>> r_rmse(n_det), v_rmse(n_det);
  std::vector<double> crb_r, crb_v;

  DetectorConfig nomp_cfg = cfg.nomp;
  nomp_cfg.min_detections = 1;  // always report the best candidate

  for (std::size_t pi = 0; pi < cfg.snr_db.size(); ++pi) {
    const double snr_db = cfg.snr_db[pi];
    struct Outcome {
      double re[4] = {0, 0, 0, 0};
      double ve[4] = {0, 0, 0, 0};
    };
    std::vector<Outcome> out(trials);
    parallel_trials(trials, threads, [&](int t) {
      std::mt19937_64 rng(trial_seed(seed, pi, t));
      const ResourceSet rs = select_resources(cfg.grid, cfg.resources, rng());
      TargetTruth truth = random_target(cfg.grid, 1.0, rng);
      Scene scene{{truth}, Scene::noise_power_for_snr({truth}, snr_db)};
      const CVec h = synthesize_channel(scene, cfg.grid, rs, rng());

      const auto record = [&](const std::vector<Detection>& dets, int which) {
        const Detection* best = nullptr;
        double best_d = 0.0;
        for (const Detection& d : dets) {
          const double dist = cell_distance(cfg.grid, d.delay, d.doppler,
                                            truth.delay, truth.doppler);
          if (!best || dist < best_d) {
            best = &d;
            best_d = dist;
          }
        }
        if (!best) return;  // cannot happen: every detector returns >= 1
        out[t].re[which] =
            cfg.grid.light_speed *
            wrap_delay_diff(cfg.grid, best->delay - truth.delay);
        out[t].ve[which] =
            0.5 * cfg.grid.wavelength *
            wrap_doppler_diff(cfg.grid, best->doppler - truth.doppler);
      };
      record(nomp_detect(h, cfg.grid, rs, nomp_cfg).detections, 0);
      record(omp_detect(h, cfg.grid, rs, cfg.omp,
                        {OmpStop::Rule::k_known, 1}).detections, 1);
      PeakCriterion crit;
      crit.count = 1;
      record(
          extract_peaks(periodogram(h, cfg.grid, rs, cfg.fft2d_oversampling),
                        crit).detections, 2);
      if (cfg.include_oracle)
        record({Detection{truth.delay, truth.doppler, truth.gain,
                          Provenance::coarse}}, 3);
    });
    for (int which = 0; which < n_det; ++which) {
      std::vector<double> re(trials), ve(trials);
      for (int t = 0; t < trials; ++t) {
        re[t] = out[t].re[which];
        ve[t] = out[t].ve[which];
      }
      r_rmse[which].push_back(rmse(re));
      v_rmse[which].push_back(rmse(ve));
    }
    CrbParams cp;
    cp.snr = std::pow(10.0, snr_db / 10.0);
    cp.n_subcarriers = cfg.grid.n_subcarriers;
    cp.n_symbols = cfg.grid.n_symbols;
    cp.n_sub_used = cfg.resources.n_sub_used;
    cp.n_sym_used = cfg.resources.n_sym_used;
    cp.subcarrier_spacing = cfg.grid.subcarrier_spacing;
    cp.symbol_duration = cfg.grid.symbol_duration;
    cp.carrier_freq = cfg.grid.carrier_freq;
    cp.light_speed = cfg.grid.light_speed;
    const CrbValues cv = crb(cp);
    crb_r.push_back(std::sqrt(cv.range_var));
    crb_v.push_back(std::sqrt(cv.velocity_var));
  }
  for (int which = 0; which < n_det; ++which) {
    rep.series.push_back({names[which], "rmse_range_m", r_rmse[which]});
    rep.series.push_back({names[which], "rmse_velocity_mps", v_rmse[which]});
  }
  rep.series.push_back({"crb", "rmse_range_m", crb_r});
  rep.series.push_back({"crb", "rmse_velocity_mps", crb_v});
  return rep;
}

// --- resolution_pair ------------------------------------------------------

ExperimentReport run_resolution(const ExperimentConfig& cfg, int trials,
                                std::uint64_t seed, int threads) {
  if (cfg.separation_axis != "delay" && cfg.separation_axis != "doppler")
    throw std::invalid_argument("resolution_pair: axis must be delay or doppler");
  ExperimentReport rep =
      make_report(Scenario::resolution_pair, cfg, trials, seed, threads,
                  "separation_cells", {cfg.separation_cells});
  struct Outcome {
    bool fine[3] = {false, false, false};  // both matched at 0.05 cells
    bool half[3] = {false, false, false};  // both matched at 0.5 cells
    int nomp_dets = 0;
  };
  std::vector<Outcome> out(trials);
  const AssociationGates fine_gates{0.05, 0.05};
  DetectorConfig det = cfg.nomp;
  det.false_alarm_prob = cfg.resolution_p_fa;
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = cfg.resolution_occupancy;
  parallel_trials(trials, threads, [&](int t) {
    std::mt19937_64 rng(trial_seed(seed, 0, t));
    const ResourceSet rs = select_resources(cfg.grid, sel, rng());
    TargetTruth a = random_target(cfg.grid, 1.0, rng);
    TargetTruth b = a;
    if (cfg.separation_axis == "delay")
      b.delay = wrap_delay(
          cfg.grid, a.delay + cfg.separation_cells * cfg.grid.delay_cell());
    else
      b.doppler = wrap_doppler(cfg.grid,
                               a.doppler + cfg.separation_cells *
                                               cfg.grid.doppler_cell());
    b.gain = phase_gain(1.0, rng);
    const std::vector<TargetTruth> truths{a, b};
    Scene scene{truths,
                Scene::noise_power_for_snr(truths, cfg.resolution_snr_db)};
    const CVec h = synthesize_channel(scene, cfg.grid, rs, rng());

    const auto score = [&](const std::vector<Detection>& dets, int which) {
      const MatchedFlags ff = matched_truths(dets, truths, cfg.grid, fine_gates);
      const MatchedFlags fh = matched_truths(dets, truths, cfg.grid, cfg.gates);
      out[t].fine[which] = ff.matched[0] && ff.matched[1];
      out[t].half[which] = fh.matched[0] && fh.matched[1];
    };
    const DetectionResult rn = nomp_detect(h, cfg.grid, rs, det);
    out[t].nomp_dets = int(rn.detections.size());
    score(rn.detections, 0);
    score(omp_detect(h, cfg.grid, rs, cfg.omp,
                     {OmpStop::Rule::k_known, 2}).detections, 1);
    PeakCriterion crit;
    crit.count = 2;
    score(extract_peaks(periodogram(h, cfg.grid, rs, cfg.fft2d_oversampling),
                        crit).detections, 2);
  });
  const char* names[3] = {"nomp", "omp", "fft2d"};
  for (int which = 0; which < 3; ++which) {
    double fine = 0, half = 0;
    for (const Outcome& o : out) {
      fine += o.fine[which];
      half += o.half[which];
    }
    rep.series.push_back({names[which], "resolved_rate", {fine / trials}});
    rep.series.push_back(
        {names[which], "resolved_rate_halfcell", {half / trials}});
  }
  double nd = 0, x2 = 0;
  for (const Outcome& o : out) {
    nd += o.nomp_dets;
    x2 += o.nomp_dets == 2 && o.fine[0];
  }
  rep.series.push_back({"nomp", "mean_detections", {nd / trials}});
  rep.series.push_back({"nomp", "exactly_two_rate", {x2 / trials}});
  return rep;
}

// --- convergence ----------------------------------------------------------

ExperimentReport run_convergence(const ExperimentConfig& cfg, int trials,
                                 std::uint64_t seed, int threads) {
  std::vector<double> axis;
  for (int g : cfg.convergence_oversampling) axis.push_back(double(g));
  ExperimentReport rep = make_report(Scenario::convergence, cfg, trials, seed,
                                     threads, "oversampling", axis);
  const int k = cfg.convergence_targets;
  std::vector<double> it_mean, it_max, extra_rate, match_rate, monotone_rate;
  for (std::size_t pi = 0; pi < axis.size(); ++pi) {
    struct Outcome {
      int iterations = 0;
      bool all_matched = false;
      bool monotone = false;
    };
    std::vector<Outcome> out(trials);
    DetectorConfig det = cfg.nomp;
    det.oversampling = cfg.convergence_oversampling[pi];
    det.max_detections = k + 4;
    det.false_alarm_prob = cfg.convergence_p_fa;
    ResourceSelection sel;
    sel.mode = ResourceMode::elementwise;
    sel.occupancy = cfg.convergence_occupancy;
    parallel_trials(trials, threads, [&](int t) {
      std::mt19937_64 rng(trial_seed(seed, pi, t));
      const ResourceSet rs = select_resources(cfg.grid, sel, rng());
      std::vector<TargetTruth> truths;
      for (int j = 0; j < k; ++j)
        truths.push_back(separated_target(cfg.grid, 1.0, truths,
                                          cfg.min_separation_cells, rng));
      Scene scene{truths,
                  Scene::noise_power_for_snr(truths, cfg.convergence_snr_db)};
      const CVec h = synthesize_channel(scene, cfg.grid, rs, rng());
      const DetectionResult r = nomp_detect(h, cfg.grid, rs, det);
      out[t].iterations = r.iterations;
      const MatchedFlags f =
          matched_truths(r.detections, truths, cfg.grid, cfg.gates);
      out[t].all_matched =
          std::all_of(f.matched.begin(), f.matched.end(), [](bool b) { return b; });
      bool mono = true;
      for (std::size_t i = 1; i < r.residual_trace.size(); ++i)
        mono = mono && r.residual_trace[i] < r.residual_trace[i - 1];
      out[t].monotone = mono;
    });
    double im = 0, ix = 0, ex = 0, ma = 0, mo = 0;
    for (const Outcome& o : out) {
      im += o.iterations;
      ix = std::max(ix, double(o.iterations));
      ex += o.iterations > k;
      ma += o.all_matched;
      mo += o.monotone;
    }
    it_mean.push_back(im / trials);
    it_max.push_back(ix);
    extra_rate.push_back(ex / trials);
    match_rate.push_back(ma / trials);
    monotone_rate.push_back(mo / trials);
  }
  rep.series.push_back({"nomp", "iterations_mean", it_mean});
  rep.series.push_back({"nomp", "iterations_max", it_max});
  rep.series.push_back({"nomp", "extra_detection_rate", extra_rate});
  rep.series.push_back({"nomp", "matched_all_rate", match_rate});
  rep.series.push_back({"nomp", "trace_monotone_rate", monotone_rate});
  return rep;
}

// --- timing ---------------------------------------------------------------

ExperimentReport run_timing(const ExperimentConfig& cfg, int reps,
                            std::uint64_t seed) {
  std::vector<double> axis;
  for (int s : cfg.timing_grid_sizes) axis.push_back(double(s));
  ExperimentReport rep = make_report(Scenario::timing, cfg,
                                     std::max(reps, cfg.timing_reps), seed, 1,
                                     "grid_size", axis);
  const int n_reps = std::max(reps, cfg.timing_reps);
  std::vector<double> fft_med, direct_med, speedup;
  for (std::size_t pi = 0; pi < axis.size(); ++pi) {
    const int size = cfg.timing_grid_sizes[pi];
    const GridConfig grid =
        GridConfig::make(size, size, cfg.grid.subcarrier_spacing,
                         cfg.grid.symbol_duration, cfg.grid.carrier_freq,
                         cfg.grid.light_speed);
    std::mt19937_64 rng(trial_seed(seed, pi, 0));
    ResourceSelection sel;
    sel.mode = ResourceMode::elementwise;
    sel.occupancy = cfg.timing_occupancy;
    const ResourceSet rs = select_resources(grid, sel, rng());
    std::vector<TargetTruth> truths;
    for (int j = 0; j < 3; ++j)
      truths.push_back(separated_target(grid, 1.0, truths, 3.0, rng));
    Scene scene{truths, Scene::noise_power_for_snr(truths, 20.0)};
    const CVec h = synthesize_channel(scene, grid, rs, rng());
    const DictionarySpec dict =
        DictionarySpec::make(grid, cfg.nomp.oversampling);
    const CorrelationWorkspace ws(grid, rs, dict);

    auto time_mode = [&](CorrelationMode mode) {
      coarse_detect(h, ws, mode);  // warm up plans and tables
      std::vector<double> secs(n_reps);
      for (int r = 0; r < n_reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        coarse_detect(h, ws, mode);
        const auto t1 = std::chrono::steady_clock::now();
        secs[r] = std::chrono::duration<double>(t1 - t0).count();
      }
      return median_of(std::move(secs));
    };
    const double tf = time_mode(CorrelationMode::fft);
    const double td = time_mode(CorrelationMode::direct);
    fft_med.push_back(tf);
    direct_med.push_back(td);
    speedup.push_back(td / tf);
  }
  rep.series.push_back({"fft", "coarse_seconds_median", fft_med});
  rep.series.push_back({"direct", "coarse_seconds_median", direct_med});
  rep.series.push_back({"fft", "speedup_vs_direct", speedup});
  return rep;
}

}  // namespace

ExperimentConfig ExperimentConfig::make_default() {
  ExperimentConfig c;
  c.grid = GridConfig::make(64, 64, 30e3, 35.677083e-6, 5.9e9);
  c.resources.mode = ResourceMode::structured;
  c.resources.n_sub_used = 16;
  c.resources.n_sym_used = 32;
  c.nomp.max_detections = 8;
  c.omp.max_detections = 8;
  return c;
}

ExperimentReport run_experiment(Scenario scenario, const ExperimentConfig& cfg,
                                int trials, std::uint64_t seed, int threads) {
  if (trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
  if (threads < 1) throw std::invalid_argument("experiment: threads must be >= 1");
  switch (scenario) {
    case Scenario::pod_vs_swpr:
      return run_pod(cfg, trials, seed, threads);
    case Scenario::rmse_vs_snr:
      return run_rmse(cfg, trials, seed, threads);
    case Scenario::resolution_pair:
      return run_resolution(cfg, trials, seed, threads);
    case Scenario::convergence:
      return run_convergence(cfg, trials, seed, threads);
    case Scenario::timing:
      return run_timing(cfg, trials, seed);  // timing is always sequential
  }
  throw std::invalid_argument("experiment: unknown scenario");
}

}  // namespace isac
