// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "isac/detector.hpp"
#include "isac/grid.hpp"
#include "isac/scene.hpp"

namespace isac {

/// Inputs of the closed-form single-target bounds. snr is linear
/// |beta|^2 / sigma^2, n_sub_used / n_sym_used are occupied counts per axis.
struct CrbParams {
  double snr = 1.0;
  int n_subcarriers = 0;   // N
  int n_symbols = 0;       // M
  int n_sub_used = 0;      // occupied subcarriers per symbol
  int n_sym_used = 0;      // occupied symbols
  double subcarrier_spacing = 0.0;
  double symbol_duration = 0.0;
  double carrier_freq = 0.0;
  double light_speed = kDefaultLightSpeed;
};

struct CrbValues {
  double range_var = 0.0;     // m^2
  double velocity_var = 0.0;  // (m/s)^2
};

/// Bounds scale as 1/snr and 1/(n^2 - 1), 1/(m^2 - 1). Throws when either
/// occupied count is < 2 or snr <= 0.
CrbValues crb(const CrbParams& p);

struct AssociationGates {
  double delay_cells = 0.5;
  double doppler_cells = 0.5;
};

struct MatchRecord {
  int truth_index = 0;
  int detection_index = 0;
  double delay_err = 0.0;        // seconds, circular
  double doppler_err = 0.0;      // Hz, circular
  double delay_err_cells = 0.0;
  double doppler_err_cells = 0.0;
};

struct Association {
  std::vector<MatchRecord> matches;
  std::vector<int> missed_truths;
  std::vector<int> false_detections;
};

/// Greedy nearest-first matching inside per-axis circular gates. Each truth
/// and each detection is used at most once; ties go to the earlier truth.
Association associate(const std::vector<Detection>& dets,
                      const std::vector<TargetTruth>& truths,
                      const GridConfig& grid,
                      const AssociationGates& gates = {});

enum class Scenario {
  pod_vs_swpr,
  rmse_vs_snr,
  resolution_pair,
  convergence,
  timing,
};

std::string scenario_name(Scenario s);
std::vector<std::string> scenario_names();
Scenario scenario_from_name(const std::string& name);

struct ExperimentConfig {
  GridConfig grid;                // desk-scale default, see make_default
  ResourceSelection resources;
  DetectorConfig nomp;
  DetectorConfig omp;
  int fft2d_oversampling = 1;
  AssociationGates gates;

  // pod_vs_swpr
  std::vector<double> swpr_db = {0, 5, 10, 15, 20, 25, 30};
  double pod_snr_db = 25.0;
  double min_separation_cells = 3.0;

  // rmse_vs_snr
  std::vector<double> snr_db = {0, 5, 10, 15, 20, 25, 30};
  double rmse_delay_span_cells = 0.0;   // 0: full unambiguous span
  bool include_oracle = false;          // truth passthrough, for harness tests

  // resolution_pair. Runs on a dense selection at a reduced round-wise
  // false-fire level for the same reason as convergence below: a spurious
  // third detection would spoil the exactly-two statistic by chance alone.
  double separation_cells = 0.5;
  std::string separation_axis = "delay";  // or "doppler"
  double resolution_snr_db = 30.0;
  double resolution_occupancy = 1.0;
  double resolution_p_fa = 1e-3;

  // convergence. The stop threshold is calibrated for |Omega_s| cells, so the
  // iteration-count study runs on a dense selection where the searched
  // dictionary and the occupied count agree, at a round-wise false-fire level
  // low enough that extra rounds are target-driven, not chance.
  int convergence_targets = 6;
  double convergence_snr_db = 40.0;
  std::vector<int> convergence_oversampling = {4, 1};
  double convergence_occupancy = 1.0;
  double convergence_p_fa = 1e-3;

  // timing
  std::vector<int> timing_grid_sizes = {64, 128, 256};
  double timing_occupancy = 0.01;
  int timing_reps = 20;

  static ExperimentConfig make_default();
};

struct Series {
  std::string detector;  // "nomp", "omp", "fft2d", "crb", "oracle"
  std::string metric;    // e.g. "pod_weak", "rmse_range_m", "iterations_mean"
  std::vector<double> values;  // one per axis point
};

struct ExperimentReport {
  std::string scenario;
  std::string axis_name;
  std::vector<double> axis;
  std::vector<Series> series;
  int trials = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, std::string> config_snapshot;
  // raw per-trial payloads for scenarios that need them (convergence traces)
  std::vector<std::string> notes;

  void write_json(std::ostream& out) const;
  void write_csv(std::ostream& out) const;
  const Series* find(const std::string& detector,
                     const std::string& metric) const;
};

ExperimentReport run_experiment(Scenario scenario, const ExperimentConfig& cfg,
                                int trials, std::uint64_t seed,
                                int threads = 1);

/// Stable per-trial RNG stream: identical results for any thread count.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t point,
                         std::uint64_t trial);

}  // namespace isac
