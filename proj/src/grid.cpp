// SPDX-License-Identifier: Apache-2.0
#include "isac/grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace isac {

GridConfig GridConfig::make(int n_subcarriers, int n_symbols,
                            double subcarrier_spacing, double symbol_duration,
                            double carrier_freq, double light_speed) {
  if (n_subcarriers < 2 || n_symbols < 2)
    throw std::invalid_argument("grid: need at least 2 subcarriers and 2 symbols");
  if (subcarrier_spacing <= 0.0 || symbol_duration <= 0.0)
    throw std::invalid_argument("grid: spacing and duration must be positive");
  if (carrier_freq <= 0.0 || light_speed <= 0.0)
    throw std::invalid_argument("grid: carrier frequency and light speed must be positive");
  if (symbol_duration * subcarrier_spacing < 1.0 - 1e-12)
    throw std::invalid_argument(
        "grid: symbol duration must cover the elementary symbol 1/spacing");
  GridConfig g;
  g.n_subcarriers = n_subcarriers;
  g.n_symbols = n_symbols;
  g.subcarrier_spacing = subcarrier_spacing;
  g.symbol_duration = symbol_duration;
  g.carrier_freq = carrier_freq;
  g.light_speed = light_speed;
  g.wavelength = light_speed / carrier_freq;
  return g;
}

void ResourceSet::validate() const {
  if (n_subcarriers < 1 || n_symbols < 1)
    throw std::invalid_argument("resources: empty grid");
  if (cells.empty()) throw std::invalid_argument("resources: no occupied cells");
  const Cell* prev = nullptr;
  for (const Cell& c : cells) {
    if (c.subcarrier < 0 || c.subcarrier >= n_subcarriers || c.symbol < 0 ||
        c.symbol >= n_symbols)
      throw std::invalid_argument("resources: cell outside the grid");
    if (prev) {
      const bool ascending = prev->symbol < c.symbol ||
                             (prev->symbol == c.symbol &&
                              prev->subcarrier < c.subcarrier);
      if (!ascending)
        throw std::invalid_argument("resources: cells not strictly ascending");
    }
    prev = &c;
  }
}

ResourceSet ResourceSet::from_cells(int n_subcarriers, int n_symbols,
                                    std::vector<Cell> cells) {
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.symbol != b.symbol ? a.symbol < b.symbol
                                : a.subcarrier < b.subcarrier;
  });
  ResourceSet rs{n_subcarriers, n_symbols, std::move(cells)};
  rs.validate();
  return rs;
}

namespace {

// Draws k distinct values from 0..n-1, returned sorted.
std::vector<int> sample_without_replacement(int n, int k,
                                            std::mt19937_64& rng) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

ResourceSet select_resources(const GridConfig& grid,
                             const ResourceSelection& sel,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Cell> cells;
  if (sel.mode == ResourceMode::elementwise) {
    if (!(sel.occupancy > 0.0) || sel.occupancy > 1.0)
      throw std::invalid_argument("resources: occupancy must be in (0, 1]");
    const std::int64_t total = grid.cell_count();
    const std::int64_t count =
        static_cast<std::int64_t>(sel.occupancy * double(total));
    if (count < 1)
      throw std::invalid_argument("resources: occupancy resolves to zero cells");
    std::vector<int> idx = sample_without_replacement(
        static_cast<int>(total), static_cast<int>(count), rng);
    cells.reserve(idx.size());
    for (int i : idx)  // linear index m * N + n keeps (symbol, subcarrier) order
      cells.push_back({i % grid.n_subcarriers, i / grid.n_subcarriers});
  } else {
    if (sel.n_sub_used < 1 || sel.n_sym_used < 1)
      throw std::invalid_argument("resources: structured counts must be positive");
    if (sel.n_sub_used > grid.n_subcarriers ||
        sel.n_sym_used > grid.n_symbols)
      throw std::invalid_argument("resources: structured counts exceed the grid");
    std::vector<int> symbols =
        sample_without_replacement(grid.n_symbols, sel.n_sym_used, rng);
    cells.reserve(std::size_t(sel.n_sub_used) * sel.n_sym_used);
    for (int m : symbols) {
      std::vector<int> subs =
          sample_without_replacement(grid.n_subcarriers, sel.n_sub_used, rng);
      for (int n : subs) cells.push_back({n, m});
    }
  }
  ResourceSet rs{grid.n_subcarriers, grid.n_symbols, std::move(cells)};
  rs.validate();
  return rs;
}

double delay_to_range(const GridConfig& grid, double delay) {
  return grid.light_speed * delay;
}
double range_to_delay(const GridConfig& grid, double range) {
  return range / grid.light_speed;
}
double doppler_to_velocity(const GridConfig& grid, double doppler) {
  return doppler * grid.wavelength / 2.0;
}
double velocity_to_doppler(const GridConfig& grid, double velocity) {
  return 2.0 * velocity / grid.wavelength;
}

double wrap_delay(const GridConfig& grid, double delay) {
  const double span = grid.delay_span();
  double t = std::fmod(delay, span);
  if (t < 0.0) t += span;
  return t;
}

double wrap_doppler(const GridConfig& grid, double doppler) {
  const double span = grid.doppler_span();
  double a = std::fmod(doppler + 0.5 * span, span);
  if (a < 0.0) a += span;
  return a - 0.5 * span;
}

namespace {
double wrap_centered(double x, double span) {
  double d = std::fmod(x + 0.5 * span, span);
  if (d < 0.0) d += span;
  return d - 0.5 * span;
}
}  // namespace

double wrap_delay_diff(const GridConfig& grid, double diff) {
  return wrap_centered(diff, grid.delay_span());
}

double wrap_doppler_diff(const GridConfig& grid, double diff) {
  return wrap_centered(diff, grid.doppler_span());
}

double cell_distance(const GridConfig& grid, double delay_a, double doppler_a,
                     double delay_b, double doppler_b) {
  const double dd = wrap_delay_diff(grid, delay_a - delay_b) / grid.delay_cell();
  const double da =
      wrap_doppler_diff(grid, doppler_a - doppler_b) / grid.doppler_cell();
  return std::hypot(dd, da);
}

CVec compress(const CMat& full, const ResourceSet& rs) {
  CVec out(rs.size());
  for (int i = 0; i < rs.size(); ++i)
    out[i] = full(rs.cells[i].subcarrier, rs.cells[i].symbol);
  return out;
}

CMat scatter(const CVec& values, const ResourceSet& rs) {
  if (values.size() != rs.size())
    throw std::invalid_argument("scatter: value count != occupied cells");
  CMat full = CMat::Zero(rs.n_subcarriers, rs.n_symbols);
  for (int i = 0; i < rs.size(); ++i)
    full(rs.cells[i].subcarrier, rs.cells[i].symbol) = values[i];
  return full;
}

}  // namespace isac
