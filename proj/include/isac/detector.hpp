// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "isac/dictionary.hpp"
#include "isac/grid.hpp"

namespace isac {

enum class Provenance { coarse, locally_refined, globally_refined };

struct Detection {
  double delay = 0.0;
  double doppler = 0.0;
  cplx gain = {0.0, 0.0};
  Provenance provenance = Provenance::coarse;
};

enum class GlobalMode { block_diagonal, full_block };

struct DetectorConfig {
  int refinement_steps = 5;        // local Newton iterations per detection
  double false_alarm_prob = 1e-2;  // CFAR design point
  int oversampling = 4;            // dictionary gamma
  int max_detections = 32;
  int min_detections = 0;  // keep detecting below threshold until reached
  GlobalMode global_mode = GlobalMode::block_diagonal;
  bool step_guard = true;
  CorrelationMode correlation = CorrelationMode::fft;
  std::optional<double> max_range_m;       // search caps, optional
  std::optional<double> max_velocity_mps;
};

/// Single-target objective pieces at (delay, doppler, gain):
///   S = 2 Re{h_r^H a beta} - |beta|^2 ||a||^2
struct ObjectiveEval {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();  // d/d tau, d/d alpha
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

struct CoarseEstimate {
  Detection detection;
  double peak_metric = 0.0;  // |c_peak|^2 / (sigma2_hat ||a||^2)
  int delay_index = 0;
  int doppler_index = 0;
};

struct GlobalRefineInfo {
  bool accepted = false;
  double step_scale = 0.0;     // backtracking scale of the last accepted step
  int singular_blocks = 0;
  int cycles = 0;              // guarded cycles run before convergence
};

struct LsGains {
  CVec gains;
  bool rank_deficient = false;
};

enum class StopReason { threshold, max_detections, k_known, degenerate };

struct DetectionResult {
  std::vector<Detection> detections;
  std::vector<double> residual_trace;  // energy, starts at ||h_s||^2
  int iterations = 0;                  // detection rounds executed
  bool truncated = false;              // max_detections hit above threshold
  int singular_blocks = 0;
  double threshold = 0.0;          // CFAR value actually used
  double last_peak_metric = 0.0;   // metric that ended the loop
  bool rank_deficient = false;
  StopReason stop = StopReason::threshold;
};

/// CFAR threshold ln(n) - ln(-ln(1 - p_fa)). Throws on n < 1 or p_fa
/// outside (0, 1).
double cfar_threshold(std::int64_t n_resources, double p_fa);

/// Peak pick over the dictionary: argmax |c|^2 among allowed indices, ties
/// to the smallest linear index. gain = c_peak / ||a||^2.
CoarseEstimate coarse_detect(const CVec& residual,
                             const CorrelationWorkspace& ws,
                             CorrelationMode mode);

ObjectiveEval objective_derivatives(const Detection& det, const CVec& residual,
                                    const AtomModel& model);

/// Joint objective over K detections at fixed gains,
///   S = 2 Re{h^H A b} - b^H A^H A b,
/// with the 2K gradient and the 2K x 2K block Hessian (diagonal blocks as in
/// the single-target case, cross blocks coupling pairs of targets).
struct JointEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

JointEval joint_derivatives(const std::vector<Detection>& dets,
                            const CVec& measurement, const AtomModel& model);

/// Guarded Newton ascent of the single-target objective against a fixed
/// residual. Keeps gain matched to the position after every accepted step.
Detection refine_local(const Detection& det, const CVec& residual,
                       const AtomModel& model, int steps, bool guard = true);

/// One joint Newton step over all detections against the full measurement.
/// Accepted only if the LS-refit residual energy does not increase (guard),
/// with up to six halvings. Updates positions and gains in place.
GlobalRefineInfo refine_global(std::vector<Detection>& dets,
                               const CVec& measurement, const AtomModel& model,
                               GlobalMode mode, bool guard = true);

/// Least-squares gains for fixed positions (min-norm when rank deficient).
LsGains ls_gains(const std::vector<Detection>& dets, const CVec& measurement,
                 const AtomModel& model);

/// Newtonized OMP: coarse peak, local refinement, one global refinement
/// cycle and an LS gain refit per detection round, until the CFAR metric
/// drops below threshold.
DetectionResult nomp_detect(const CVec& measurement, const GridConfig& grid,
                            const ResourceSet& rs, const DetectorConfig& cfg);

struct OmpStop {
  enum class Rule { k_known, cfar } rule = Rule::cfar;
  int k = 0;
};

/// On-grid OMP over the same dictionary: peak pick, support grows by one
/// grid atom, LS refit over the accumulated support.
DetectionResult omp_detect(const CVec& measurement, const GridConfig& grid,
                           const ResourceSet& rs, const DetectorConfig& cfg,
                           OmpStop stop);

}  // namespace isac
