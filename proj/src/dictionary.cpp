// SPDX-License-Identifier: Apache-2.0
#include "isac/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace isac {

namespace {
// FFTW planning and plan destruction are not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

DictionarySpec DictionarySpec::make(const GridConfig& grid, int oversampling,
                                    std::optional<double> max_range_m,
                                    std::optional<double> max_velocity_mps) {
  if (oversampling < 1)
    throw std::invalid_argument("dictionary: oversampling must be >= 1");
  DictionarySpec d;
  d.oversampling = oversampling;
  d.n_delay = oversampling * grid.n_subcarriers;
  d.n_doppler = oversampling * grid.n_symbols;
  d.delay_step = grid.delay_span() / d.n_delay;
  d.doppler_step = grid.doppler_span() / d.n_doppler;
  d.delay_grid.resize(d.n_delay);
  for (int p = 0; p < d.n_delay; ++p) d.delay_grid[p] = p * d.delay_step;
  d.doppler_grid.resize(d.n_doppler);
  const double span = grid.doppler_span();
  for (int q = 0; q < d.n_doppler; ++q) {
    double a = q * d.doppler_step;
    if (a >= 0.5 * span) a -= span;  // wrap to [-span/2, span/2)
    d.doppler_grid[q] = a;
  }
  if (max_range_m) {
    if (*max_range_m <= 0.0)
      throw std::invalid_argument("dictionary: max range must be positive");
    d.max_delay = *max_range_m / grid.light_speed;
  }
  if (max_velocity_mps) {
    if (*max_velocity_mps <= 0.0)
      throw std::invalid_argument("dictionary: max velocity must be positive");
    d.max_doppler_abs = 2.0 * *max_velocity_mps / grid.wavelength;
  }
  if (d.max_delay && *d.max_delay < d.delay_step)
    throw std::invalid_argument("dictionary: max range excludes every point but zero delay");
  return d;
}

bool DictionarySpec::index_allowed(int p, int q) const {
  if (max_delay && delay_grid[p] > *max_delay) return false;
  if (max_doppler_abs && std::abs(doppler_grid[q]) > *max_doppler_abs)
    return false;
  return true;
}

AtomModel::AtomModel(const GridConfig& grid, const ResourceSet& rs)
    : grid_(grid) {
  rs.validate();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  wn_.resize(rs.size());
  wm_.resize(rs.size());
  for (int i = 0; i < rs.size(); ++i) {
    wn_[i] = two_pi * rs.cells[i].subcarrier * grid.subcarrier_spacing;
    wm_[i] = two_pi * rs.cells[i].symbol * grid.symbol_duration;
  }
  sum_wn2_ = wn_.squaredNorm();
  sum_wm2_ = wm_.squaredNorm();
  sum_wnwm_ = wn_.dot(wm_);
}

CVec AtomModel::atom(double delay, double doppler) const {
  CVec a(size());
  for (int i = 0; i < size(); ++i) {
    const double phase = -wn_[i] * delay + wm_[i] * doppler;
    a[i] = cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

CorrelationWorkspace::CorrelationWorkspace(const GridConfig& grid,
                                           const ResourceSet& rs,
                                           DictionarySpec dict)
    : grid_(grid), rs_(rs), dict_(std::move(dict)) {
  rs_.validate();
  if (dict_.n_delay != dict_.oversampling * grid.n_subcarriers ||
      dict_.n_doppler != dict_.oversampling * grid.n_symbols)
    throw std::invalid_argument("correlation: dictionary does not match grid");
  buf_.resize(std::size_t(dict_.n_delay) * dict_.n_doppler);

  std::lock_guard<std::mutex> lock(plan_mutex());
  auto* data = reinterpret_cast<fftw_complex*>(buf_.data());
  const int ng = dict_.n_delay, mg = dict_.n_doppler;
  // Subcarrier axis carries exp(+j 2 pi n p / N_g): an unnormalized inverse
  // transform. Symbol axis carries exp(-j 2 pi m q / M_g): a forward one.
  col_plan_ = fftw_plan_many_dft(1, &ng, mg, data, nullptr, 1, ng, data,
                                 nullptr, 1, ng, FFTW_BACKWARD, FFTW_ESTIMATE);
  row_plan_ = fftw_plan_many_dft(1, &mg, ng, data, nullptr, ng, 1, data,
                                 nullptr, ng, 1, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!col_plan_ || !row_plan_)
    throw std::runtime_error("correlation: FFT planning failed");
}

CorrelationWorkspace::~CorrelationWorkspace() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (col_plan_) fftw_destroy_plan(col_plan_);
  if (row_plan_) fftw_destroy_plan(row_plan_);
}

void CorrelationWorkspace::ensure_direct_tables() const {
  if (tab_n_.size() > 0) return;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int ng = dict_.n_delay, mg = dict_.n_doppler, k = rs_.size();
  tab_n_.resize(ng, k);
  tab_m_.resize(mg, k);
  for (int i = 0; i < k; ++i) {
    const int n = rs_.cells[i].subcarrier, m = rs_.cells[i].symbol;
    for (int p = 0; p < ng; ++p) {
      const double ph = two_pi * double(n) * p / ng;
      tab_n_(p, i) = cplx(std::cos(ph), std::sin(ph));
    }
    for (int q = 0; q < mg; ++q) {
      const double ph = -two_pi * double(m) * q / mg;
      tab_m_(q, i) = cplx(std::cos(ph), std::sin(ph));
    }
  }
}

CMat CorrelationWorkspace::correlate(const CVec& residual,
                                     CorrelationMode mode) const {
  if (residual.size() != rs_.size())
    throw std::invalid_argument("correlation: residual length != occupied cells");
  const int ng = dict_.n_delay, mg = dict_.n_doppler;

  if (mode == CorrelationMode::direct) {
    ensure_direct_tables();
    CMat c(ng, mg);
    for (int q = 0; q < mg; ++q) {
      const CVec w = tab_m_.row(q).transpose().cwiseProduct(residual);
      c.col(q) = tab_n_ * w;
    }
    return c;
  }

  std::fill(buf_.begin(), buf_.end(), cplx(0.0, 0.0));
  for (int i = 0; i < rs_.size(); ++i) {
    const std::size_t at = std::size_t(rs_.cells[i].subcarrier) +
                           std::size_t(rs_.cells[i].symbol) * ng;
    buf_[at] = residual[i];
  }
  fftw_execute(col_plan_);
  fftw_execute(row_plan_);
  return Eigen::Map<const CMat>(buf_.data(), ng, mg);
}

double noise_power_estimate(const CVec& residual) {
  std::vector<double> power(residual.size());
  for (int i = 0; i < residual.size(); ++i) power[i] = std::norm(residual[i]);
  const std::size_t mid = power.size() / 2;
  std::nth_element(power.begin(), power.begin() + mid, power.end());
  double med = power[mid];
  if (power.size() % 2 == 0) {
    // lower middle: largest element below the nth
    double lo = *std::max_element(power.begin(), power.begin() + mid);
    med = 0.5 * (med + lo);
  }
  return med / std::numbers::ln2;
}

}  // namespace isac
