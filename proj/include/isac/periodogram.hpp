// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <vector>

#include "isac/detector.hpp"
#include "isac/grid.hpp"

namespace isac {

/// Zero-padded 2-D FFT range-Doppler map. Rows follow increasing delay,
/// columns increasing Doppler (negative half first).
struct RangeDopplerMap {
  int oversampling = 1;
  int n_resources = 0;  // |Omega_s| used to build the map
  Eigen::MatrixXd magnitudes;       // squared magnitudes |Abar^H h|^2
  std::vector<double> delay_axis;   // strictly increasing
  std::vector<double> doppler_axis; // strictly increasing, spans +-1/(2 T_o)
};

RangeDopplerMap periodogram(const CVec& measurement, const GridConfig& grid,
                            const ResourceSet& rs, int oversampling);

struct PeakCriterion {
  enum class Rule { count, threshold } rule = Rule::count;
  int count = 1;
  double threshold = 0.0;  // on squared magnitude
};

struct PeakSet {
  std::vector<Detection> detections;  // provenance coarse, real gains
  bool underfull = false;             // fewer maxima than requested
};

/// Greedy local maxima with a one-bin periodic guard zone, ties broken by
/// linear index. Gain magnitude is sqrt(mag) / |Omega_s|.
PeakSet extract_peaks(const RangeDopplerMap& map, const PeakCriterion& crit);

/// CSV rows delay,doppler,magnitude (header included).
void write_map_csv(const RangeDopplerMap& map, std::ostream& out);

}  // namespace isac
