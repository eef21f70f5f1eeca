// SPDX-License-Identifier: Apache-2.0
#include "isac/scene.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace isac {

void Scene::validate(const GridConfig& grid) const {
  if (noise_power < 0.0)
    throw std::invalid_argument("scene: negative noise power");
  for (const TargetTruth& t : targets) {
    if (std::abs(t.gain) == 0.0)
      throw std::invalid_argument("scene: target with zero gain");
    if (t.delay < 0.0 || t.delay >= grid.delay_span())
      throw std::invalid_argument("scene: delay outside [0, 1/df)");
    const double half = 0.5 * grid.doppler_span();
    if (t.doppler < -half || t.doppler >= half)
      throw std::invalid_argument(
          "scene: doppler outside [-1/(2 T_o), 1/(2 T_o))");
  }
}

double Scene::noise_power_for_snr(const std::vector<TargetTruth>& targets,
                                  double snr_db) {
  if (targets.empty())
    throw std::invalid_argument("scene: SNR reference needs a target");
  double peak = 0.0;
  for (const TargetTruth& t : targets) peak = std::max(peak, std::norm(t.gain));
  return peak / std::pow(10.0, snr_db / 10.0);
}

ModSymbolGrid ModSymbolGrid::from_values(CVec values) {
  for (int i = 0; i < values.size(); ++i)
    if (std::abs(std::abs(values[i]) - 1.0) > 1e-9)
      throw std::invalid_argument("symbols: non unit-modulus entry");
  return ModSymbolGrid{std::move(values)};
}

ModSymbolGrid draw_qpsk(const ResourceSet& rs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> quad(0, 3);
  CVec x(rs.size());
  for (int i = 0; i < x.size(); ++i) {
    const double phi = std::numbers::pi * (0.25 + 0.5 * quad(rng));
    x[i] = cplx(std::cos(phi), std::sin(phi));
  }
  return ModSymbolGrid{std::move(x)};
}

CVec atom(const GridConfig& grid, const ResourceSet& rs, double delay,
          double doppler) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  CVec a(rs.size());
  for (int i = 0; i < rs.size(); ++i) {
    const double phase =
        -two_pi * rs.cells[i].subcarrier * grid.subcarrier_spacing * delay +
        two_pi * rs.cells[i].symbol * grid.symbol_duration * doppler;
    a[i] = cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

namespace {

void add_noise(CVec& h, double sigma2, std::mt19937_64& rng) {
  if (sigma2 == 0.0) return;
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * sigma2));
  for (int i = 0; i < h.size(); ++i) h[i] += cplx(gauss(rng), gauss(rng));
}

}  // namespace

CVec synthesize_channel(const Scene& scene, const GridConfig& grid,
                        const ResourceSet& rs, std::uint64_t seed,
                        SynthesisPath path) {
  scene.validate(grid);
  std::mt19937_64 rng(seed);
  CVec clean = CVec::Zero(rs.size());
  for (const TargetTruth& t : scene.targets)
    clean += t.gain * atom(grid, rs, t.delay, t.doppler);

  if (path == SynthesisPath::direct) {
    add_noise(clean, scene.noise_power, rng);
    return clean;
  }

  // full_tx_rx: modulate, receive with noise, demodulate by symbol division.
  ModSymbolGrid x = draw_qpsk(rs, rng());
  CVec received = clean.cwiseProduct(x.symbols);
  add_noise(received, scene.noise_power, rng);
  return received.cwiseQuotient(x.symbols);
}

}  // namespace isac
