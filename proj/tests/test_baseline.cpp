// SPDX-License-Identifier: Apache-2.0
// 2D-FFT periodogram map against the direct-correlation oracle, peak
// extraction semantics and the CSV dump.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "isac/dictionary.hpp"
#include "isac/grid.hpp"
#include "isac/periodogram.hpp"
#include "isac/scene.hpp"

using namespace isac;

namespace {

GridConfig make_grid(int n, int m) {
  return GridConfig::make(n, m, 30e3, 35.677083e-6, 5.9e9);
}

ResourceSet sparse(const GridConfig& g, double eta, std::uint64_t seed) {
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = eta;
  return select_resources(g, sel, seed);
}

TargetTruth at_cells(const GridConfig& g, double delay_cells,
                     double doppler_cells, cplx gain) {
  TargetTruth t;
  t.delay = delay_cells * g.delay_cell();
  t.doppler = doppler_cells * g.doppler_cell();
  t.gain = gain;
  return t;
}

RangeDopplerMap blank_map(int ng, int mg, int n_res) {
  RangeDopplerMap m;
  m.oversampling = 1;
  m.n_resources = n_res;
  m.magnitudes = Eigen::MatrixXd::Zero(ng, mg);
  m.delay_axis.resize(ng);
  m.doppler_axis.resize(mg);
  for (int p = 0; p < ng; ++p) m.delay_axis[p] = p;
  for (int q = 0; q < mg; ++q) m.doppler_axis[q] = q - mg / 2;
  return m;
}

}  // namespace

TEST_CASE("full-grid on-grid target: unique peak, exact height and gain") {
  const GridConfig g = make_grid(32, 32);
  const ResourceSet rs = sparse(g, 1.0, 1);
  const double n = rs.size();
  Scene scene;
  scene.targets = {at_cells(g, 5, -7, std::polar(0.9, 1.1))};
  const CVec h = synthesize_channel(scene, g, rs, 1);

  const RangeDopplerMap map = periodogram(h, g, rs, 1);
  const double expect = std::norm(scene.targets[0].gain) * n * n;

  int peaks_above = 0;
  double best = 0.0;
  int bp = -1, bq = -1;
  for (int q = 0; q < map.magnitudes.cols(); ++q)
    for (int p = 0; p < map.magnitudes.rows(); ++p) {
      if (map.magnitudes(p, q) > 1e-6 * expect) ++peaks_above;
      if (map.magnitudes(p, q) > best) {
        best = map.magnitudes(p, q);
        bp = p;
        bq = q;
      }
    }
  CHECK(peaks_above == 1);  // DFT orthogonality on the full grid
  CHECK(best == doctest::Approx(expect).epsilon(1e-10));
  CHECK(map.delay_axis[bp] ==
        doctest::Approx(scene.targets[0].delay).epsilon(1e-12));
  CHECK(map.doppler_axis[bq] ==
        doctest::Approx(scene.targets[0].doppler).epsilon(1e-12));

  const PeakSet peaks = extract_peaks(map, {PeakCriterion::Rule::count, 1, 0});
  REQUIRE(peaks.detections.size() == 1);
  CHECK(!peaks.underfull);
  CHECK(std::abs(peaks.detections[0].gain) ==
        doctest::Approx(std::abs(scene.targets[0].gain)).epsilon(1e-9));
  CHECK(peaks.detections[0].provenance == Provenance::coarse);
}

TEST_CASE("map is the squared direct correlation, columns doppler-sorted") {
  const GridConfig g = make_grid(24, 16);
  const ResourceSet rs = sparse(g, 0.35, 4);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CVec h(rs.size());
  for (int i = 0; i < rs.size(); ++i) h[i] = cplx(gauss(rng), gauss(rng));

  const int gamma = 2;
  const RangeDopplerMap map = periodogram(h, g, rs, gamma);
  const DictionarySpec dict = DictionarySpec::make(g, gamma);
  const CorrelationWorkspace ws(g, rs, dict);
  const CMat c = ws.correlate(h, CorrelationMode::direct);

  REQUIRE(int(map.magnitudes.rows()) == dict.n_delay);
  REQUIRE(int(map.magnitudes.cols()) == dict.n_doppler);
  CHECK(map.delay_axis == dict.delay_grid);
  CHECK(map.n_resources == rs.size());
  CHECK(map.oversampling == gamma);

  for (int j = 0; j < dict.n_doppler; ++j) {
    int q = -1;  // map columns are a permutation of dictionary columns
    for (int k = 0; k < dict.n_doppler; ++k)
      if (dict.doppler_grid[k] == map.doppler_axis[j]) q = k;
    REQUIRE(q >= 0);
    for (int p = 0; p < dict.n_delay; ++p)
      CHECK(map.magnitudes(p, j) ==
            doctest::Approx(std::norm(c(p, q))).epsilon(1e-10));
  }
}

TEST_CASE("axes are strictly increasing and span the unambiguous intervals") {
  const GridConfig g = make_grid(16, 10);
  const ResourceSet rs = sparse(g, 0.5, 2);
  const CVec h = CVec::Ones(rs.size());
  const RangeDopplerMap map = periodogram(h, g, rs, 3);

  REQUIRE(map.delay_axis.size() == 48);
  REQUIRE(map.doppler_axis.size() == 30);
  for (std::size_t i = 1; i < map.delay_axis.size(); ++i)
    CHECK(map.delay_axis[i] > map.delay_axis[i - 1]);
  for (std::size_t i = 1; i < map.doppler_axis.size(); ++i)
    CHECK(map.doppler_axis[i] > map.doppler_axis[i - 1]);

  const double half = 0.5 * g.doppler_span();
  const double step = g.doppler_span() / 30;
  CHECK(map.delay_axis.front() == 0.0);
  CHECK(map.delay_axis.back() ==
        doctest::Approx(g.delay_span() - g.delay_span() / 48).epsilon(1e-12));
  CHECK(map.doppler_axis.front() == doctest::Approx(-half).epsilon(1e-12));
  CHECK(map.doppler_axis.back() ==
        doctest::Approx(half - step).epsilon(1e-12));
}

TEST_CASE("sparse sampling: true bin dominates, sidelobes stay bounded") {
  const GridConfig g = make_grid(64, 64);
  const ResourceSet rs = sparse(g, 0.25, 7);
  const double n = rs.size();
  Scene scene;
  scene.targets = {at_cells(g, 20, 13, std::polar(1.0, -0.4))};
  const CVec h = synthesize_channel(scene, g, rs, 1);

  const RangeDopplerMap map = periodogram(h, g, rs, 1);
  const double expect = std::norm(scene.targets[0].gain) * n * n;

  int bp = -1, bq = -1;
  double best = 0.0;
  for (int q = 0; q < map.magnitudes.cols(); ++q)
    for (int p = 0; p < map.magnitudes.rows(); ++p)
      if (map.magnitudes(p, q) > best) {
        best = map.magnitudes(p, q);
        bp = p;
        bq = q;
      }
  CHECK(best == doctest::Approx(expect).epsilon(1e-9));
  CHECK(map.delay_axis[bp] ==
        doctest::Approx(scene.targets[0].delay).epsilon(1e-9));
  CHECK(map.doppler_axis[bq] ==
        doctest::Approx(scene.targets[0].doppler).epsilon(1e-9));
  for (int q = 0; q < map.magnitudes.cols(); ++q)
    for (int p = 0; p < map.magnitudes.rows(); ++p)
      if (std::abs(p - bp) > 1 || std::abs(q - bq) > 1)
        CHECK(map.magnitudes(p, q) < 0.25 * best);  // random-set sidelobes
}

TEST_CASE("extract_peaks: tie order, plateau guard, wrap guard, underfull") {
  RangeDopplerMap m = blank_map(8, 6, 10);
  m.magnitudes(2, 1) = 4.0;
  m.magnitudes(6, 4) = 4.0;

  PeakSet two = extract_peaks(m, {PeakCriterion::Rule::count, 2, 0});
  REQUIRE(two.detections.size() == 2);
  CHECK(!two.underfull);
  // equal values: the smaller linear index p + q * ng comes first
  CHECK(two.detections[0].delay == m.delay_axis[2]);
  CHECK(two.detections[0].doppler == m.doppler_axis[1]);
  CHECK(two.detections[1].delay == m.delay_axis[6]);
  CHECK(std::abs(two.detections[0].gain) ==
        doctest::Approx(std::sqrt(4.0) / 10.0));

  // adjacent equal plateau: second point is inside the guard zone
  RangeDopplerMap plateau = blank_map(8, 6, 10);
  plateau.magnitudes(2, 1) = 4.0;
  plateau.magnitudes(3, 2) = 4.0;
  PeakSet guarded = extract_peaks(plateau, {PeakCriterion::Rule::count, 2, 0});
  REQUIRE(guarded.detections.size() == 1);
  CHECK(guarded.underfull);
  CHECK(guarded.detections[0].delay == plateau.delay_axis[2]);

  // the guard zone wraps periodically across both edges
  RangeDopplerMap wrapm = blank_map(8, 6, 10);
  wrapm.magnitudes(0, 0) = 5.0;
  wrapm.magnitudes(7, 5) = 5.0;
  PeakSet wrapped = extract_peaks(wrapm, {PeakCriterion::Rule::count, 2, 0});
  REQUIRE(wrapped.detections.size() == 1);
  CHECK(wrapped.underfull);
  CHECK(wrapped.detections[0].delay == wrapm.delay_axis[0]);

  // threshold rule: keeps everything at or above, no underfull flag
  PeakSet thr = extract_peaks(m, {PeakCriterion::Rule::threshold, 0, 4.0});
  CHECK(thr.detections.size() == 2);
  CHECK(!thr.underfull);
  PeakSet none = extract_peaks(m, {PeakCriterion::Rule::threshold, 0, 4.5});
  CHECK(none.detections.empty());
  CHECK(!none.underfull);
}

TEST_CASE("zero measurement produces a zero map and no peaks") {
  const GridConfig g = make_grid(16, 16);
  const ResourceSet rs = sparse(g, 0.5, 3);
  const CVec h = CVec::Zero(rs.size());
  const RangeDopplerMap map = periodogram(h, g, rs, 2);
  CHECK(map.magnitudes.maxCoeff() == 0.0);
  CHECK(map.magnitudes.minCoeff() == 0.0);
  const PeakSet peaks = extract_peaks(map, {PeakCriterion::Rule::count, 2, 0});
  CHECK(peaks.detections.empty());
  CHECK(peaks.underfull);
}

TEST_CASE("three separated targets at 30 dB: top-3 peaks identify all") {
  const GridConfig g = make_grid(64, 64);
  const ResourceSet rs = sparse(g, 0.5, 11);
  Scene scene;
  scene.targets = {at_cells(g, 12.3, 8.7, std::polar(1.0, 0.3)),
                   at_cells(g, 33.6, -19.2, std::polar(0.9, -1.2)),
                   at_cells(g, 52.9, 27.4, std::polar(0.8, 2.1))};
  scene.noise_power = Scene::noise_power_for_snr(scene.targets, 30.0);
  const CVec h = synthesize_channel(scene, g, rs, 5);

  const RangeDopplerMap map = periodogram(h, g, rs, 2);
  const PeakSet peaks = extract_peaks(map, {PeakCriterion::Rule::count, 3, 0});
  REQUIRE(peaks.detections.size() == 3);

  for (const TargetTruth& t : scene.targets) {
    bool found = false;
    for (const Detection& d : peaks.detections) {
      const double dd =
          std::abs(wrap_delay_diff(g, d.delay - t.delay)) / g.delay_cell();
      const double da = std::abs(wrap_doppler_diff(g, d.doppler - t.doppler)) /
                        g.doppler_cell();
      if (dd < 0.3 && da < 0.3) {
        found = true;
        // quarter-bin scalloping loss at most ~20% in amplitude
        CHECK(std::abs(d.gain) > 0.6 * std::abs(t.gain));
        CHECK(std::abs(d.gain) < 1.2 * std::abs(t.gain));
      }
    }
    CHECK(found);
  }
}

TEST_CASE("write_map_csv emits a header and one row per bin") {
  RangeDopplerMap m = blank_map(4, 3, 5);
  m.magnitudes(1, 2) = 2.5;
  std::ostringstream out;
  write_map_csv(m, out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "delay_s,doppler_hz,magnitude");
  int rows = 0;
  bool saw_value = false;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
    if (line.find("2.5") != std::string::npos) saw_value = true;
  }
  CHECK(rows == 12);
  CHECK(saw_value);
}
