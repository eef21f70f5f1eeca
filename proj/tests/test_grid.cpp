// SPDX-License-Identifier: Apache-2.0
// Grid config, resource selection, unit conversions and wrap helpers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "isac/grid.hpp"

using namespace isac;

namespace {
GridConfig desk() { return GridConfig::make(64, 64, 30e3, 35.677083e-6, 5.9e9); }
}  // namespace

TEST_CASE("grid config validation and derived quantities") {
  const GridConfig g = desk();
  CHECK(g.wavelength == doctest::Approx(kDefaultLightSpeed / 5.9e9).epsilon(1e-12));
  CHECK(g.delay_span() == doctest::Approx(1.0 / 30e3).epsilon(1e-15));
  CHECK(g.doppler_span() == doctest::Approx(1.0 / 35.677083e-6).epsilon(1e-15));
  CHECK(g.delay_cell() == doctest::Approx(1.0 / (64 * 30e3)).epsilon(1e-15));
  CHECK(g.doppler_cell() ==
        doctest::Approx(1.0 / (64 * 35.677083e-6)).epsilon(1e-15));
  CHECK(g.cell_count() == 4096);

  CHECK_THROWS_AS(GridConfig::make(1, 64, 30e3, 35.677083e-6, 5.9e9),
                  std::invalid_argument);
  CHECK_THROWS_AS(GridConfig::make(64, 1, 30e3, 35.677083e-6, 5.9e9),
                  std::invalid_argument);
  CHECK_THROWS_AS(GridConfig::make(64, 64, 0.0, 35.677083e-6, 5.9e9),
                  std::invalid_argument);
  // symbol shorter than 1/df cannot carry a cyclic prefix
  CHECK_THROWS_AS(GridConfig::make(64, 64, 30e3, 1e-6, 5.9e9),
                  std::invalid_argument);
  CHECK_THROWS_AS(GridConfig::make(64, 64, 30e3, 35.677083e-6, 0.0),
                  std::invalid_argument);
  // T_o exactly 1/df (no CP) is legal
  CHECK_NOTHROW(GridConfig::make(64, 64, 30e3, 1.0 / 30e3, 5.9e9));
}

TEST_CASE("structured selection reproduces the reference occupancy") {
  const GridConfig g =
      GridConfig::make(1560, 280, 30e3, 35.677083e-6, 5.9e9);
  ResourceSelection sel;
  sel.mode = ResourceMode::structured;
  sel.n_sub_used = 78;
  sel.n_sym_used = 56;
  const ResourceSet rs = select_resources(g, sel, 7);
  CHECK(rs.size() == 4368);
  CHECK(rs.occupancy() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_NOTHROW(rs.validate());
  // exactly 56 distinct symbols, 78 distinct subcarriers in each
  std::set<int> symbols;
  for (const Cell& c : rs.cells) symbols.insert(c.symbol);
  CHECK(symbols.size() == 56);
  for (int m : symbols) {
    std::set<int> subs;
    for (const Cell& c : rs.cells)
      if (c.symbol == m) subs.insert(c.subcarrier);
    CHECK(subs.size() == 78);
  }
}

TEST_CASE("exhaustive selections cover the grid") {
  const GridConfig g = GridConfig::make(8, 8, 30e3, 35.677083e-6, 5.9e9);
  ResourceSelection full;
  full.mode = ResourceMode::structured;
  full.n_sub_used = 8;
  full.n_sym_used = 8;
  for (std::uint64_t seed : {1ull, 99ull}) {
    const ResourceSet rs = select_resources(g, full, seed);
    REQUIRE(rs.size() == 64);
    for (int i = 0; i < 64; ++i) {
      CHECK(rs.cells[i].subcarrier == i % 8);
      CHECK(rs.cells[i].symbol == i / 8);
    }
  }
  ResourceSelection ew;
  ew.mode = ResourceMode::elementwise;
  ew.occupancy = 1.0;
  CHECK(select_resources(g, ew, 3).size() == 64);
}

TEST_CASE("elementwise selection: count, ordering, determinism") {
  const GridConfig g = desk();
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = 0.1;
  const ResourceSet a = select_resources(g, sel, 42);
  const ResourceSet b = select_resources(g, sel, 42);
  const ResourceSet c = select_resources(g, sel, 43);
  CHECK(a.size() == int(std::floor(0.1 * 64 * 64)));
  CHECK(a.cells == b.cells);     // same seed, bit-identical
  CHECK(a.cells != c.cells);     // different seed differs w.h.p.
  // strict ascending (symbol, subcarrier) ordering, no duplicates
  for (int i = 1; i < a.size(); ++i) {
    const Cell &p = a.cells[i - 1], &q = a.cells[i];
    CHECK((q.symbol > p.symbol ||
           (q.symbol == p.symbol && q.subcarrier > p.subcarrier)));
  }
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("selection rejects empty or oversized requests") {
  const GridConfig g = desk();
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = 1e-9;  // floors to zero cells
  CHECK_THROWS_AS(select_resources(g, sel, 1), std::invalid_argument);
  sel.occupancy = 1.5;
  CHECK_THROWS_AS(select_resources(g, sel, 1), std::invalid_argument);
  ResourceSelection st;
  st.mode = ResourceMode::structured;
  st.n_sub_used = 65;
  st.n_sym_used = 8;
  CHECK_THROWS_AS(select_resources(g, st, 1), std::invalid_argument);
  st.n_sub_used = 8;
  st.n_sym_used = 0;
  CHECK_THROWS_AS(select_resources(g, st, 1), std::invalid_argument);
}

TEST_CASE("resource set invariants are enforced") {
  CHECK_THROWS_AS(ResourceSet::from_cells(4, 4, {}), std::invalid_argument);
  CHECK_THROWS_AS(ResourceSet::from_cells(4, 4, {{4, 0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ResourceSet::from_cells(4, 4, {{0, 0}, {0, 0}}),
                  std::invalid_argument);
  // from_cells sorts; validate accepts the result
  const ResourceSet rs =
      ResourceSet::from_cells(4, 4, {{2, 1}, {0, 0}, {1, 1}});
  CHECK(rs.cells == std::vector<Cell>{{0, 0}, {1, 1}, {2, 1}});
}

TEST_CASE("range/velocity conversions match the reference point") {
  // lambda = c/f_c with c = 2.998e8: v = 30 m/s -> alpha = 2 v / lambda
  const GridConfig g =
      GridConfig::make(64, 64, 30e3, 35.677083e-6, 5.9e9, 2.998e8);
  CHECK(delay_to_range(g, 0.0) == 0.0);
  CHECK(doppler_to_velocity(g, 0.0) == 0.0);
  const double alpha = velocity_to_doppler(g, 30.0);
  CHECK(alpha == doctest::Approx(1180.7871914609739).epsilon(1e-12));
  CHECK(alpha == doctest::Approx(1181.1).epsilon(5e-4));
  CHECK(doppler_to_velocity(g, alpha) == doctest::Approx(30.0).epsilon(1e-12));
  const double tau = range_to_delay(g, 1500.0);
  CHECK(delay_to_range(g, tau) == doctest::Approx(1500.0).epsilon(1e-12));
  CHECK(delay_to_range(g, 1e-6) == doctest::Approx(2.998e2).epsilon(1e-12));
}

TEST_CASE("wrap helpers reduce into the principal spans") {
  const GridConfig g = desk();
  const double ds = g.delay_span(), as = g.doppler_span();
  CHECK(wrap_delay(g, ds + 1e-6) == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(wrap_delay(g, -1e-6) == doctest::Approx(ds - 1e-6).epsilon(1e-9));
  CHECK(wrap_delay(g, 0.0) == 0.0);
  CHECK(wrap_doppler(g, as / 2 + 10.0) ==
        doctest::Approx(-as / 2 + 10.0).epsilon(1e-9));
  CHECK(wrap_doppler(g, -as / 2) == doctest::Approx(-as / 2));
  // signed circular differences live in [-span/2, span/2)
  CHECK(wrap_delay_diff(g, ds - 1e-7) == doctest::Approx(-1e-7).epsilon(1e-6));
  CHECK(wrap_doppler_diff(g, as) == doctest::Approx(0.0).epsilon(1e-12));
  // distance is symmetric and periodic
  const double d1 = cell_distance(g, 1e-7, 100.0, 2e-7, -50.0);
  const double d2 = cell_distance(g, 2e-7, -50.0, 1e-7, 100.0);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  CHECK(cell_distance(g, 0.0, 0.0, ds, 0.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("compress/scatter round-trip is the identity") {
  const GridConfig g = GridConfig::make(16, 8, 30e3, 35.677083e-6, 5.9e9);
  ResourceSelection sel;
  sel.mode = ResourceMode::elementwise;
  sel.occupancy = 0.3;
  const ResourceSet rs = select_resources(g, sel, 5);
  CVec v(rs.size());
  for (int i = 0; i < rs.size(); ++i) v[i] = cplx(i + 0.5, -i);
  const CMat full = scatter(v, rs);
  REQUIRE(full.rows() == 16);
  REQUIRE(full.cols() == 8);
  CHECK((compress(full, rs) - v).norm() == 0.0);
  // everything off the occupied set is exactly zero
  double off_energy = full.squaredNorm() - v.squaredNorm();
  CHECK(off_energy == doctest::Approx(0.0).epsilon(1e-12));
}
