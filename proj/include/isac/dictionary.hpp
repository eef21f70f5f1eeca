// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "isac/grid.hpp"

struct fftw_plan_s;  // avoid dragging fftw3.h into every consumer

namespace isac {

/// Oversampled delay/Doppler search grid in FFT index order.
/// Delay row p maps to tau = p / (gamma N df); Doppler column q maps to
/// alpha = q / (gamma M T_o) wrapped into [-1/(2 T_o), 1/(2 T_o)).
struct DictionarySpec {
  int oversampling = 1;  // gamma
  int n_delay = 0;       // N_g = gamma * N
  int n_doppler = 0;     // M_g = gamma * M
  double delay_step = 0.0;
  double doppler_step = 0.0;
  std::vector<double> delay_grid;    // tau at row p
  std::vector<double> doppler_grid;  // wrapped alpha at column q
  // Physical caps restrict the argmax search, never the array layout.
  std::optional<double> max_delay;
  std::optional<double> max_doppler_abs;

  static DictionarySpec make(const GridConfig& grid, int oversampling,
                             std::optional<double> max_range_m = {},
                             std::optional<double> max_velocity_mps = {});

  bool index_allowed(int p, int q) const;
  std::int64_t linear_index(int p, int q) const {
    return std::int64_t(p) + std::int64_t(q) * n_delay;
  }
};

/// Cached per-resource-set geometry: angular rates used by atoms and all
/// their derivatives. Derivatives are elementwise products with these
/// weights, e.g. d a / d tau = (-j wn) .* a.
class AtomModel {
 public:
  AtomModel(const GridConfig& grid, const ResourceSet& rs);

  int size() const { return static_cast<int>(wn_.size()); }
  const Eigen::VectorXd& wn() const { return wn_; }  // 2 pi n df
  const Eigen::VectorXd& wm() const { return wm_; }  // 2 pi m T_o
  double sum_wn2() const { return sum_wn2_; }
  double sum_wm2() const { return sum_wm2_; }
  double sum_wnwm() const { return sum_wnwm_; }
  const GridConfig& grid() const { return grid_; }

  CVec atom(double delay, double doppler) const;

 private:
  GridConfig grid_;
  Eigen::VectorXd wn_, wm_;
  double sum_wn2_ = 0.0, sum_wm2_ = 0.0, sum_wnwm_ = 0.0;
};

enum class CorrelationMode { fft, direct };

/// Evaluates c = Abar^H h over the full dictionary. FFT mode scatters the
/// residual into a zero-padded N_g x M_g grid and runs two 1-D FFT passes;
/// direct mode multiplies precomputed phase tables. One workspace serves one
/// detection invocation; it is not safe to share across threads.
class CorrelationWorkspace {
 public:
  CorrelationWorkspace(const GridConfig& grid, const ResourceSet& rs,
                       DictionarySpec dict);
  ~CorrelationWorkspace();
  CorrelationWorkspace(const CorrelationWorkspace&) = delete;
  CorrelationWorkspace& operator=(const CorrelationWorkspace&) = delete;

  /// residual is ordered like the resource set. Returns the N_g x M_g
  /// correlation array in FFT index order.
  CMat correlate(const CVec& residual, CorrelationMode mode) const;

  const DictionarySpec& dictionary() const { return dict_; }
  const ResourceSet& resources() const { return rs_; }

 private:
  void ensure_direct_tables() const;

  GridConfig grid_;
  ResourceSet rs_;
  DictionarySpec dict_;
  fftw_plan_s* col_plan_ = nullptr;  // backward transform along subcarriers
  fftw_plan_s* row_plan_ = nullptr;  // forward transform along symbols
  mutable std::vector<cplx> buf_;    // N_g x M_g column-major
  mutable CMat tab_n_, tab_m_;       // direct-mode phase tables, built lazily
};

/// Noise power estimate from the residual: median(|h_i|^2) / ln 2.
double noise_power_estimate(const CVec& residual);

}  // namespace isac
