// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace isac {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kDefaultLightSpeed = 299792458.0;  // m/s

/// OFDM grid dimensions plus the physics constants every conversion needs.
struct GridConfig {
  int n_subcarriers = 0;             // N
  int n_symbols = 0;                 // M
  double subcarrier_spacing = 0.0;   // Hz
  double symbol_duration = 0.0;      // s, elementary symbol plus cyclic prefix
  double carrier_freq = 0.0;         // Hz
  double light_speed = kDefaultLightSpeed;
  double wavelength = 0.0;           // m, always light_speed / carrier_freq

  /// Validates and fills the derived wavelength. Throws std::invalid_argument.
  static GridConfig make(int n_subcarriers, int n_symbols,
                         double subcarrier_spacing, double symbol_duration,
                         double carrier_freq,
                         double light_speed = kDefaultLightSpeed);

  // Unambiguous spans and natural resolution cells.
  double delay_span() const { return 1.0 / subcarrier_spacing; }
  double doppler_span() const { return 1.0 / symbol_duration; }
  double delay_cell() const {
    return 1.0 / (n_subcarriers * subcarrier_spacing);
  }
  double doppler_cell() const { return 1.0 / (n_symbols * symbol_duration); }
  std::int64_t cell_count() const {
    return std::int64_t(n_subcarriers) * n_symbols;
  }
};

/// One occupied resource element: subcarrier index n, symbol index m (0-based).
struct Cell {
  int subcarrier = 0;
  int symbol = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Occupied subset of the grid, kept sorted ascending by (symbol, subcarrier).
/// The ordering fixes the element layout of every channel vector and atom.
struct ResourceSet {
  int n_subcarriers = 0;  // grid the cells live on
  int n_symbols = 0;
  std::vector<Cell> cells;

  int size() const { return static_cast<int>(cells.size()); }
  double occupancy() const {
    return double(cells.size()) / (double(n_subcarriers) * n_symbols);
  }
  /// Throws if cells are out of range, duplicated or misordered.
  void validate() const;
  static ResourceSet from_cells(int n_subcarriers, int n_symbols,
                                std::vector<Cell> cells);
};

enum class ResourceMode { elementwise, structured };

struct ResourceSelection {
  ResourceMode mode = ResourceMode::elementwise;
  double occupancy = 1.0;  // elementwise: fraction of cells, floor(eta*N*M)
  int n_sub_used = 0;      // structured: subcarriers per chosen symbol
  int n_sym_used = 0;      // structured: number of chosen symbols
};

/// Draws an occupied subset. Deterministic per seed.
ResourceSet select_resources(const GridConfig& grid,
                             const ResourceSelection& sel, std::uint64_t seed);

// Bi-static delay/Doppler to range/velocity and back.
double delay_to_range(const GridConfig& grid, double delay);
double range_to_delay(const GridConfig& grid, double range);
double doppler_to_velocity(const GridConfig& grid, double doppler);
double velocity_to_doppler(const GridConfig& grid, double velocity);

// Wrap into the principal spans: delay to [0, 1/df), doppler to
// [-1/(2T_o), 1/(2T_o)).
double wrap_delay(const GridConfig& grid, double delay);
double wrap_doppler(const GridConfig& grid, double doppler);

// Signed circular differences, wrapped into half-open [-span/2, span/2).
double wrap_delay_diff(const GridConfig& grid, double diff);
double wrap_doppler_diff(const GridConfig& grid, double diff);
/// Euclidean distance in resolution cells with both axes circular.
double cell_distance(const GridConfig& grid, double delay_a, double doppler_a,
                     double delay_b, double doppler_b);

/// Gathers the occupied entries of a full N x M grid into a vector ordered
/// like rs.cells.
CVec compress(const CMat& full, const ResourceSet& rs);
/// Scatters a vector ordered like rs.cells into a dense N x M grid (zeros
/// elsewhere).
CMat scatter(const CVec& values, const ResourceSet& rs);

}  // namespace isac
