// SPDX-License-Identifier: Apache-2.0
#include "isac/periodogram.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace isac {

RangeDopplerMap periodogram(const CVec& measurement, const GridConfig& grid,
                            const ResourceSet& rs, int oversampling) {
  const DictionarySpec dict = DictionarySpec::make(grid, oversampling);
  const CorrelationWorkspace ws(grid, rs, dict);
  const CMat c = ws.correlate(measurement, CorrelationMode::fft);

  const int ng = dict.n_delay, mg = dict.n_doppler;
  const int shift = (mg + 1) / 2;  // first column with a negative Doppler
  RangeDopplerMap map;
  map.oversampling = oversampling;
  map.n_resources = rs.size();
  map.magnitudes.resize(ng, mg);
  map.delay_axis = dict.delay_grid;
  map.doppler_axis.resize(mg);
  for (int j = 0; j < mg; ++j) {
    const int q = (j + shift) % mg;
    map.doppler_axis[j] = dict.doppler_grid[q];
    for (int p = 0; p < ng; ++p) map.magnitudes(p, j) = std::norm(c(p, q));
  }
  return map;
}

PeakSet extract_peaks(const RangeDopplerMap& map, const PeakCriterion& crit) {
  const int ng = static_cast<int>(map.magnitudes.rows());
  const int mg = static_cast<int>(map.magnitudes.cols());
  const auto& mag = map.magnitudes;
  auto wrap = [](int i, int n) { return (i % n + n) % n; };

  struct Candidate {
    double value;
    int p, q;
  };
  std::vector<Candidate> maxima;
  for (int q = 0; q < mg; ++q) {
    for (int p = 0; p < ng; ++p) {
      const double v = mag(p, q);
      if (v <= 0.0) continue;
      bool is_max = true;
      for (int dq = -1; dq <= 1 && is_max; ++dq)
        for (int dp = -1; dp <= 1 && is_max; ++dp) {
          if (dp == 0 && dq == 0) continue;
          is_max = v >= mag(wrap(p + dp, ng), wrap(q + dq, mg));
        }
      if (is_max) maxima.push_back({v, p, q});
    }
  }
  // Strongest first; exact ties resolve to the smaller linear index.
  std::sort(maxima.begin(), maxima.end(), [&](const Candidate& a,
                                              const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.p + std::int64_t(a.q) * ng < b.p + std::int64_t(b.q) * ng;
  });

  PeakSet out;
  std::vector<std::pair<int, int>> kept;
  for (const Candidate& c : maxima) {
    if (crit.rule == PeakCriterion::Rule::count &&
        int(kept.size()) >= crit.count)
      break;
    if (crit.rule == PeakCriterion::Rule::threshold && c.value < crit.threshold)
      break;
    bool guarded = false;  // one-bin periodic guard zone around accepted peaks
    for (const auto& k : kept) {
      const int dp = std::abs(c.p - k.first);
      const int dq = std::abs(c.q - k.second);
      if (std::min(dp, ng - dp) <= 1 && std::min(dq, mg - dq) <= 1)
        guarded = true;
    }
    if (guarded) continue;
    kept.push_back({c.p, c.q});
    Detection d;
    d.delay = map.delay_axis[c.p];
    d.doppler = map.doppler_axis[c.q];
    d.gain = std::sqrt(c.value) / double(map.n_resources);
    d.provenance = Provenance::coarse;
    out.detections.push_back(d);
  }
  out.underfull = crit.rule == PeakCriterion::Rule::count &&
                  int(out.detections.size()) < crit.count;
  return out;
}

void write_map_csv(const RangeDopplerMap& map, std::ostream& out) {
  out << "delay_s,doppler_hz,magnitude\n";
  out.precision(17);
  for (int q = 0; q < map.magnitudes.cols(); ++q)
    for (int p = 0; p < map.magnitudes.rows(); ++p)
      out << map.delay_axis[p] << ',' << map.doppler_axis[q] << ','
          << map.magnitudes(p, q) << '\n';
}

}  // namespace isac
