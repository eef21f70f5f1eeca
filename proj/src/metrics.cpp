// SPDX-License-Identifier: Apache-2.0
#include "isac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace isac {

CrbValues crb(const CrbParams& p) {
  if (p.snr <= 0.0) throw std::invalid_argument("crb: snr must be positive");
  if (p.n_sub_used < 2 || p.n_sym_used < 2)
    throw std::invalid_argument("crb: bounds need at least 2 occupied indices per axis");
  if (p.n_subcarriers < 1 || p.n_symbols < 1 || p.subcarrier_spacing <= 0.0 ||
      p.symbol_duration <= 0.0 || p.carrier_freq <= 0.0)
    throw std::invalid_argument("crb: invalid grid parameters");
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  const double c2 = p.light_speed * p.light_speed;
  const double nm = double(p.n_subcarriers) * p.n_symbols;
  const double n2 = double(p.n_sub_used) * p.n_sub_used - 1.0;
  const double m2 = double(p.n_sym_used) * p.n_sym_used - 1.0;
  CrbValues v;
  v.range_var = 3.0 * c2 /
                (8.0 * pi2 * p.snr * nm * n2 * p.subcarrier_spacing *
                 p.subcarrier_spacing);
  v.velocity_var = 3.0 * c2 /
                   (8.0 * pi2 * p.snr * p.carrier_freq * p.carrier_freq * nm *
                    m2 * p.symbol_duration * p.symbol_duration);
  return v;
}

Association associate(const std::vector<Detection>& dets,
                      const std::vector<TargetTruth>& truths,
                      const GridConfig& grid, const AssociationGates& gates) {
  struct Pair {
    double dist;
    int t, d;
    double de, ae;
  };
  std::vector<Pair> pairs;
  for (int t = 0; t < int(truths.size()); ++t) {
    for (int d = 0; d < int(dets.size()); ++d) {
      const double de =
          wrap_delay_diff(grid, dets[d].delay - truths[t].delay);
      const double ae =
          wrap_doppler_diff(grid, dets[d].doppler - truths[t].doppler);
      const double dc = de / grid.delay_cell();
      const double ac = ae / grid.doppler_cell();
      if (std::abs(dc) > gates.delay_cells || std::abs(ac) > gates.doppler_cells)
        continue;
      pairs.push_back({std::hypot(dc, ac), t, d, de, ae});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.t != b.t) return a.t < b.t;
    return a.d < b.d;
  });

  Association out;
  std::vector<bool> t_used(truths.size(), false), d_used(dets.size(), false);
  for (const Pair& p : pairs) {
    if (t_used[p.t] || d_used[p.d]) continue;
    t_used[p.t] = true;
    d_used[p.d] = true;
    MatchRecord m;
    m.truth_index = p.t;
    m.detection_index = p.d;
    m.delay_err = p.de;
    m.doppler_err = p.ae;
    m.delay_err_cells = p.de / grid.delay_cell();
    m.doppler_err_cells = p.ae / grid.doppler_cell();
    out.matches.push_back(m);
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const MatchRecord& a, const MatchRecord& b) {
              return a.truth_index < b.truth_index;
            });
  for (int t = 0; t < int(truths.size()); ++t)
    if (!t_used[t]) out.missed_truths.push_back(t);
  for (int d = 0; d < int(dets.size()); ++d)
    if (!d_used[d]) out.false_detections.push_back(d);
  return out;
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::pod_vs_swpr: return "pod_vs_swpr";
    case Scenario::rmse_vs_snr: return "rmse_vs_snr";
    case Scenario::resolution_pair: return "resolution_pair";
    case Scenario::convergence: return "convergence";
    case Scenario::timing: return "timing";
  }
  throw std::invalid_argument("scenario: unknown value");
}

std::vector<std::string> scenario_names() {
  return {"pod_vs_swpr", "rmse_vs_snr", "resolution_pair", "convergence",
          "timing"};
}

Scenario scenario_from_name(const std::string& name) {
  for (int i = 0; i <= int(Scenario::timing); ++i)
    if (scenario_name(Scenario(i)) == name) return Scenario(i);
  throw std::invalid_argument("scenario: unknown name '" + name + "'");
}

const Series* ExperimentReport::find(const std::string& detector,
                                     const std::string& metric) const {
  for (const Series& s : series)
    if (s.detector == detector && s.metric == metric) return &s;
  return nullptr;
}

void ExperimentReport::write_json(std::ostream& out) const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["axis_name"] = axis_name;
  j["axis"] = axis;
  j["trials"] = trials;
  j["seed"] = seed;
  j["threads"] = threads;
  j["config"] = config_snapshot;
  j["notes"] = notes;
  j["series"] = nlohmann::json::array();
  for (const Series& s : series)
    j["series"].push_back({{"detector", s.detector},
                           {"metric", s.metric},
                           {"values", s.values}});
  out << j.dump(2) << '\n';
}

void ExperimentReport::write_csv(std::ostream& out) const {
  out.precision(17);
  out << axis_name;
  for (const Series& s : series) out << ',' << s.detector << '.' << s.metric;
  out << '\n';
  for (std::size_t i = 0; i < axis.size(); ++i) {
    out << axis[i];
    for (const Series& s : series)
      out << ',' << (i < s.values.size() ? s.values[i] : 0.0);
    out << '\n';
  }
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t point,
                         std::uint64_t trial) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  };
  return mix(mix(mix(seed) ^ point) ^ trial);
}

}  // namespace isac
