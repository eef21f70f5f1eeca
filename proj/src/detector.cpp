// SPDX-License-Identifier: Apache-2.0
#include "isac/detector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace isac {

double cfar_threshold(std::int64_t n_resources, double p_fa) {
  if (n_resources < 1)
    throw std::invalid_argument("cfar: need at least one resource element");
  if (!(p_fa > 0.0) || !(p_fa < 1.0))
    throw std::invalid_argument("cfar: false-alarm probability outside (0, 1)");
  return std::log(double(n_resources)) - std::log(-std::log1p(-p_fa));
}

CoarseEstimate coarse_detect(const CVec& residual,
                             const CorrelationWorkspace& ws,
                             CorrelationMode mode) {
  const CMat c = ws.correlate(residual, mode);
  const DictionarySpec& dict = ws.dictionary();
  const int n = ws.resources().size();

  double best = -1.0;
  int bp = 0, bq = 0;
  for (int q = 0; q < dict.n_doppler; ++q) {    // linear index p + q * N_g:
    for (int p = 0; p < dict.n_delay; ++p) {    // first maximum wins ties
      if (!dict.index_allowed(p, q)) continue;
      const double mag = std::norm(c(p, q));
      if (mag > best) {
        best = mag;
        bp = p;
        bq = q;
      }
    }
  }

  CoarseEstimate est;
  est.delay_index = bp;
  est.doppler_index = bq;
  est.detection.delay = dict.delay_grid[bp];
  est.detection.doppler = dict.doppler_grid[bq];
  est.detection.gain = c(bp, bq) / double(n);
  est.detection.provenance = Provenance::coarse;
  const double sigma2 = noise_power_estimate(residual);
  if (sigma2 > 0.0)
    est.peak_metric = best / (sigma2 * n);
  else
    est.peak_metric = best > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return est;
}

namespace {

double circular_cells(double x, double span, double cell) {
  double d = std::fmod(std::abs(x), span);
  d = std::min(d, span - d);
  return d / cell;
}

// Detections landing in the same resolution cell to 1e-3 are one target;
// keep the stronger gain. Returns true if anything was dropped.
bool merge_duplicates(std::vector<Detection>& dets, const GridConfig& grid) {
  bool dropped = false;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = i + 1; j < dets.size();) {
      const double dd = circular_cells(dets[i].delay - dets[j].delay,
                                       grid.delay_span(), grid.delay_cell());
      const double da =
          circular_cells(dets[i].doppler - dets[j].doppler,
                         grid.doppler_span(), grid.doppler_cell());
      if (dd < 1e-3 && da < 1e-3) {
        if (std::abs(dets[j].gain) > std::abs(dets[i].gain))
          std::swap(dets[i], dets[j]);
        dets.erase(dets.begin() + j);
        dropped = true;
      } else {
        ++j;
      }
    }
  }
  return dropped;
}

CVec rebuild_residual(const std::vector<Detection>& dets,
                      const CVec& measurement, const AtomModel& model) {
  CVec r = measurement;
  for (const Detection& d : dets)
    r -= d.gain * model.atom(d.delay, d.doppler);
  return r;
}

void apply_gains(std::vector<Detection>& dets, const LsGains& ls) {
  for (std::size_t j = 0; j < dets.size(); ++j) dets[j].gain = ls.gains[j];
}

}  // namespace

DetectionResult nomp_detect(const CVec& measurement, const GridConfig& grid,
                            const ResourceSet& rs, const DetectorConfig& cfg) {
  if (measurement.size() != rs.size())
    throw std::invalid_argument("detect: measurement length != occupied cells");
  const DictionarySpec dict = DictionarySpec::make(
      grid, cfg.oversampling, cfg.max_range_m, cfg.max_velocity_mps);
  const CorrelationWorkspace ws(grid, rs, dict);
  const AtomModel model(grid, rs);

  DetectionResult res;
  res.threshold = cfar_threshold(rs.size(), cfg.false_alarm_prob);
  res.residual_trace.push_back(measurement.squaredNorm());

  CVec residual = measurement;
  std::vector<Detection>& dets = res.detections;
  while (true) {
    const CoarseEstimate coarse =
        coarse_detect(residual, ws, cfg.correlation);
    res.last_peak_metric = coarse.peak_metric;
    // A residual at rounding scale relative to the input has no detectable
    // structure, but the scale-free metric can still fire on it; treat it
    // as below threshold. Double-precision refinement stalls near 5e-17 of
    // the input energy (the objective improvements drop below one ulp), so
    // anything under 1e-15 is numerical debris, not a target.
    const bool floor_hit =
        res.residual_trace.back() <= 1e-15 * res.residual_trace.front();
    const bool below = floor_hit || coarse.peak_metric <= res.threshold;
    if (below && int(dets.size()) >= cfg.min_detections) {
      res.stop = StopReason::threshold;
      break;
    }
    if (int(dets.size()) >= cfg.max_detections) {
      res.stop = StopReason::max_detections;
      res.truncated = !below;
      break;
    }
    ++res.iterations;

    dets.push_back(refine_local(coarse.detection, residual, model,
                                cfg.refinement_steps, cfg.step_guard));
    const GlobalRefineInfo info =
        refine_global(dets, measurement, model, cfg.global_mode,
                      cfg.step_guard);
    res.singular_blocks += info.singular_blocks;

    const LsGains ls = ls_gains(dets, measurement, model);
    res.rank_deficient = res.rank_deficient || ls.rank_deficient;
    apply_gains(dets, ls);
    const bool merged = merge_duplicates(dets, grid);
    if (merged) apply_gains(dets, ls_gains(dets, measurement, model));

    const double prev_energy = res.residual_trace.back();
    residual = rebuild_residual(dets, measurement, model);
    res.residual_trace.push_back(residual.squaredNorm());
    // A merged round that made no energy progress would reproduce the same
    // coarse pick forever; the detection count stalls, so max_detections
    // cannot end the loop.
    if (merged && residual.squaredNorm() >= prev_energy * (1.0 - 1e-12)) {
      res.stop = StopReason::degenerate;
      break;
    }
  }
  return res;
}

DetectionResult omp_detect(const CVec& measurement, const GridConfig& grid,
                           const ResourceSet& rs, const DetectorConfig& cfg,
                           OmpStop stop) {
  if (measurement.size() != rs.size())
    throw std::invalid_argument("detect: measurement length != occupied cells");
  if (stop.rule == OmpStop::Rule::k_known && stop.k < 0)
    throw std::invalid_argument("omp: negative target count");
  const DictionarySpec dict = DictionarySpec::make(
      grid, cfg.oversampling, cfg.max_range_m, cfg.max_velocity_mps);
  const CorrelationWorkspace ws(grid, rs, dict);
  const AtomModel model(grid, rs);

  DetectionResult res;
  res.threshold = cfar_threshold(rs.size(), cfg.false_alarm_prob);
  res.residual_trace.push_back(measurement.squaredNorm());

  CVec residual = measurement;
  std::vector<std::pair<int, int>> support;
  while (true) {
    if (stop.rule == OmpStop::Rule::k_known && int(support.size()) >= stop.k) {
      res.stop = StopReason::k_known;
      break;
    }
    const CoarseEstimate coarse =
        coarse_detect(residual, ws, cfg.correlation);
    res.last_peak_metric = coarse.peak_metric;
    const bool floor_hit =
        res.residual_trace.back() <= 1e-24 * res.residual_trace.front();
    if (stop.rule == OmpStop::Rule::cfar &&
        (floor_hit || coarse.peak_metric <= res.threshold) &&
        int(support.size()) >= cfg.min_detections) {
      res.stop = StopReason::threshold;
      break;
    }
    if (int(support.size()) >= cfg.max_detections) {
      res.stop = StopReason::max_detections;
      res.truncated = true;
      break;
    }
    const std::pair<int, int> pick{coarse.delay_index, coarse.doppler_index};
    bool repeat = false;
    for (const auto& s : support) repeat = repeat || s == pick;
    if (repeat) {  // numerically exhausted: same grid atom twice
      res.stop = StopReason::degenerate;
      break;
    }
    support.push_back(pick);
    ++res.iterations;

    res.detections.push_back(Detection{dict.delay_grid[pick.first],
                                       dict.doppler_grid[pick.second],
                                       cplx(0, 0), Provenance::coarse});
    const LsGains ls = ls_gains(res.detections, measurement, model);
    res.rank_deficient = res.rank_deficient || ls.rank_deficient;
    apply_gains(res.detections, ls);
    residual = rebuild_residual(res.detections, measurement, model);
    res.residual_trace.push_back(residual.squaredNorm());
  }
  return res;
}

}  // namespace isac
