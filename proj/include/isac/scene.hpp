// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "isac/grid.hpp"

namespace isac {

/// Ground-truth target: bi-static delay tau (s), Doppler alpha (Hz), complex
/// path gain beta.
struct TargetTruth {
  double delay = 0.0;
  double doppler = 0.0;
  cplx gain = {1.0, 0.0};
};

struct Scene {
  std::vector<TargetTruth> targets;
  double noise_power = 0.0;  // sigma^2 per occupied element

  /// Throws if a target leaves the unambiguous spans or has zero gain.
  void validate(const GridConfig& grid) const;
  /// sigma^2 that puts the strongest target at snr_db.
  static double noise_power_for_snr(const std::vector<TargetTruth>& targets,
                                    double snr_db);
};

/// Unit-modulus modulation symbols on the occupied set, ordered like rs.cells.
struct ModSymbolGrid {
  CVec symbols;
  /// Throws unless every entry has unit modulus (demodulation divides by the
  /// symbols, anything else would color the noise).
  static ModSymbolGrid from_values(CVec values);
};

/// Draws QPSK symbols on the occupied set. Deterministic per seed.
ModSymbolGrid draw_qpsk(const ResourceSet& rs, std::uint64_t seed);

/// Response vector a(tau, alpha) over the occupied set:
///   a[(n,m)] = exp(-j 2 pi n df tau) * exp(+j 2 pi m T_o alpha)
/// with ||a||^2 = |Omega_s|.
CVec atom(const GridConfig& grid, const ResourceSet& rs, double delay,
          double doppler);

enum class SynthesisPath {
  direct,      // sum of beta * atom plus noise
  full_tx_rx,  // modulate symbols, apply channel, demodulate
};

/// Noisy demodulated channel vector h_s for the scene. Deterministic per
/// seed; with noise_power == 0 no RNG noise draws happen.
CVec synthesize_channel(const Scene& scene, const GridConfig& grid,
                        const ResourceSet& rs, std::uint64_t seed,
                        SynthesisPath path = SynthesisPath::direct);

}  // namespace isac
