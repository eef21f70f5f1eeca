// SPDX-License-Identifier: Apache-2.0
// Local and joint Newton refinement of the single/multi target objective
//   S(tau, alpha, beta) = 2 Re{h^H a beta} - |beta|^2 ||a||^2.
#include <cmath>
#include <limits>
#include <stdexcept>

#include "isac/detector.hpp"

namespace isac {

namespace {

constexpr int kMaxHalvings = 6;
// Guarded global refinement repeats its cycle until the joint residual stops
// improving. Close target pairs separate through these cycles, so the cap has
// to accommodate their slow tail; well-separated sets stop after one cycle.
constexpr int kMaxGlobalCycles = 2048;
constexpr double kGlobalCycleTol = 1e-10;

// |a^H h|^2 / ||a||^2: S with the gain eliminated.
double concentrated(const CVec& residual, const AtomModel& model, double delay,
                    double doppler) {
  return std::norm(model.atom(delay, doppler).dot(residual)) / model.size();
}

// Derivatives of the gain-eliminated objective G = |a^H h|^2 / ||a||^2, i.e.
// S with the per-step matched-gain update folded in. Its Hessian equals the
// fixed-gain S Hessian at the matched gain plus the rank-one term
// 2 Re{c_dot c_dot^H}/||a||^2; without that term the mean index phase of
// Omega_s dominates the curvature and Newton steps contract only linearly.
struct ConcentratedEval {
  double value = 0.0;
  cplx matched_gain;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

ConcentratedEval concentrated_derivatives(const CVec& h, const AtomModel& model,
                                          double delay, double doppler) {
  const CVec a = model.atom(delay, doppler);
  // c = a^H h; d conj(a)/d tau = +j wn conj(a), d conj(a)/d alpha = -j wm
  // conj(a), so the derivatives of c are weighted sums of t_i = conj(a_i) h_i.
  cplx c = 0, s_n = 0, s_m = 0, s_nn = 0, s_mm = 0, s_nm = 0;
  for (int i = 0; i < a.size(); ++i) {
    const cplx t = std::conj(a[i]) * h[i];
    const double wn = model.wn()[i], wm = model.wm()[i];
    c += t;
    s_n += wn * t;
    s_m += wm * t;
    s_nn += wn * wn * t;
    s_mm += wm * wm * t;
    s_nm += wn * wm * t;
  }
  const cplx ct = cplx(0, 1) * s_n;   // dc/d tau
  const cplx ca = cplx(0, -1) * s_m;  // dc/d alpha
  const double n = static_cast<double>(model.size());
  ConcentratedEval ev;
  ev.value = std::norm(c) / n;
  ev.matched_gain = c / n;
  ev.gradient[0] = 2.0 * std::real(std::conj(c) * ct) / n;
  ev.gradient[1] = 2.0 * std::real(std::conj(c) * ca) / n;
  ev.hessian(0, 0) = 2.0 * (std::real(std::conj(c) * -s_nn) + std::norm(ct)) / n;
  ev.hessian(1, 1) = 2.0 * (std::real(std::conj(c) * -s_mm) + std::norm(ca)) / n;
  ev.hessian(0, 1) =
      2.0 * (std::real(std::conj(c) * s_nm) + std::real(std::conj(ct) * ca)) / n;
  ev.hessian(1, 0) = ev.hessian(0, 1);
  return ev;
}

struct WeightedSums {
  cplx ah;   // a^H u
  cplx wn1;  // sum wn_i conj(u_i) a_i
  cplx wm1;
  cplx wn2;  // sum wn_i^2 conj(u_i) a_i
  cplx wm2;
  cplx wnwm;
};

WeightedSums weighted_sums(const CVec& u, const CVec& a,
                           const AtomModel& model) {
  WeightedSums s{};
  for (int i = 0; i < a.size(); ++i) {
    const cplx t = std::conj(u[i]) * a[i];
    const double wn = model.wn()[i], wm = model.wm()[i];
    s.ah += t;
    s.wn1 += wn * t;
    s.wm1 += wm * t;
    s.wn2 += wn * wn * t;
    s.wm2 += wm * wm * t;
    s.wnwm += wn * wm * t;
  }
  return s;
}

struct Step {
  Eigen::Vector2d dir = Eigen::Vector2d::Zero();  // candidate = x - s * dir
  bool newton = false;
};

// Gradient-ascent direction scaled so the full step moves cap_cells on the
// dominant axis.
Step gradient_step(const Eigen::Vector2d& g, const GridConfig& grid,
                   double cap_cells) {
  Step s;
  const double ct = grid.delay_cell(), ca = grid.doppler_cell();
  const double dominant = std::max(std::abs(g[0]) * ct, std::abs(g[1]) * ca);
  if (dominant <= 0.0 || !std::isfinite(dominant)) return s;
  const double kappa = cap_cells / dominant;
  s.dir = -kappa * Eigen::Vector2d(g[0] * ct * ct, g[1] * ca * ca);
  return s;
}

void wrap_into_spans(const GridConfig& grid, double& delay, double& doppler) {
  delay = wrap_delay(grid, delay);
  doppler = wrap_doppler(grid, doppler);
}

}  // namespace

ObjectiveEval objective_derivatives(const Detection& det, const CVec& residual,
                                    const AtomModel& model) {
  if (residual.size() != model.size())
    throw std::invalid_argument("objective: residual length != occupied cells");
  const CVec a = model.atom(det.delay, det.doppler);
  const cplx beta = det.gain;
  const CVec u = residual - a * beta;
  const WeightedSums s = weighted_sums(u, a, model);
  const double b2 = std::norm(beta);

  ObjectiveEval ev;
  ev.value = 2.0 * std::real(residual.dot(a) * beta) - b2 * model.size();
  // d a/d tau = -j wn .* a, d a/d alpha = +j wm .* a
  ev.gradient[0] = 2.0 * std::real(cplx(0, -1) * s.wn1 * beta);
  ev.gradient[1] = 2.0 * std::real(cplx(0, 1) * s.wm1 * beta);
  ev.hessian(0, 0) = -2.0 * std::real(s.wn2 * beta) - 2.0 * b2 * model.sum_wn2();
  ev.hessian(1, 1) = -2.0 * std::real(s.wm2 * beta) - 2.0 * b2 * model.sum_wm2();
  ev.hessian(0, 1) = 2.0 * std::real(s.wnwm * beta) + 2.0 * b2 * model.sum_wnwm();
  ev.hessian(1, 0) = ev.hessian(0, 1);
  return ev;
}

Detection refine_local(const Detection& det, const CVec& residual,
                       const AtomModel& model, int steps, bool guard) {
  if (steps < 0) throw std::invalid_argument("refine_local: negative steps");
  if (residual.size() != model.size())
    throw std::invalid_argument("refine_local: residual length != occupied");
  const GridConfig& grid = model.grid();
  Detection cur = det;
  ConcentratedEval ev =
      concentrated_derivatives(residual, model, cur.delay, cur.doppler);

  for (int it = 0; it < steps; ++it) {
    const Eigen::Matrix2d& h = ev.hessian;
    const double deth = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    const bool neg_definite = h(0, 0) < 0.0 && deth > 0.0;

    Step primary;
    if (neg_definite) {
      primary.dir = Eigen::Vector2d(
          (h(1, 1) * ev.gradient[0] - h(0, 1) * ev.gradient[1]) / deth,
          (h(0, 0) * ev.gradient[1] - h(1, 0) * ev.gradient[0]) / deth);
      primary.newton = true;
    } else {
      primary = gradient_step(ev.gradient, grid, 0.25);
    }
    if (!primary.dir.allFinite() || primary.dir.isZero(0.0)) break;

    if (!guard) {
      cur.delay -= primary.dir[0];
      cur.doppler -= primary.dir[1];
      wrap_into_spans(grid, cur.delay, cur.doppler);
    } else {
      bool accepted = false;
      Step attempt = primary;
      for (int round = 0; round < 2 && !accepted; ++round) {
        double scale = 1.0;
        for (int t = 0; t <= kMaxHalvings; ++t, scale *= 0.5) {
          double cd = cur.delay - scale * attempt.dir[0];
          double ca = cur.doppler - scale * attempt.dir[1];
          wrap_into_spans(grid, cd, ca);
          const double g_new = concentrated(residual, model, cd, ca);
          if (g_new > ev.value) {
            cur.delay = cd;
            cur.doppler = ca;
            accepted = true;
            break;
          }
        }
        if (!accepted && attempt.newton) {
          // Newton step never improved: retry with a small gradient step.
          attempt = gradient_step(ev.gradient, grid, 0.125);
          if (!attempt.dir.allFinite() || attempt.dir.isZero(0.0)) break;
        } else {
          break;
        }
      }
      if (!accepted) break;  // local optimum at this resolution
    }
    ev = concentrated_derivatives(residual, model, cur.delay, cur.doppler);
    cur.gain = ev.matched_gain;
  }
  cur.provenance = Provenance::locally_refined;
  return cur;
}

LsGains ls_gains(const std::vector<Detection>& dets, const CVec& measurement,
                 const AtomModel& model) {
  LsGains out;
  const int k = static_cast<int>(dets.size());
  if (k == 0) {
    out.gains = CVec(0);
    return out;
  }
  CMat a(model.size(), k);
  for (int j = 0; j < k; ++j)
    a.col(j) = model.atom(dets[j].delay, dets[j].doppler);
  Eigen::CompleteOrthogonalDecomposition<CMat> cod(a);
  out.gains = cod.solve(measurement);
  out.rank_deficient = cod.rank() < k;
  return out;
}

JointEval joint_derivatives(const std::vector<Detection>& dets,
                            const CVec& measurement, const AtomModel& model) {
  const int k = static_cast<int>(dets.size());
  const int n = model.size();
  JointEval ev;
  ev.gradient = Eigen::VectorXd::Zero(2 * k);
  ev.hessian = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  if (k == 0) return ev;

  CMat a(n, k);
  CVec b(k);
  for (int j = 0; j < k; ++j) {
    a.col(j) = model.atom(dets[j].delay, dets[j].doppler);
    b[j] = dets[j].gain;
  }
  const CVec u = measurement - a * b;
  ev.value = measurement.squaredNorm() - u.squaredNorm();

  Eigen::VectorXd& g = ev.gradient;
  Eigen::MatrixXd& h = ev.hessian;
  for (int j = 0; j < k; ++j) {
    const WeightedSums s = weighted_sums(u, a.col(j), model);
    const double b2 = std::norm(b[j]);
    g[2 * j] = 2.0 * std::real(cplx(0, -1) * s.wn1 * b[j]);
    g[2 * j + 1] = 2.0 * std::real(cplx(0, 1) * s.wm1 * b[j]);
    h(2 * j, 2 * j) =
        -2.0 * std::real(s.wn2 * b[j]) - 2.0 * b2 * model.sum_wn2();
    h(2 * j + 1, 2 * j + 1) =
        -2.0 * std::real(s.wm2 * b[j]) - 2.0 * b2 * model.sum_wm2();
    h(2 * j, 2 * j + 1) =
        2.0 * std::real(s.wnwm * b[j]) + 2.0 * b2 * model.sum_wnwm();
    h(2 * j + 1, 2 * j) = h(2 * j, 2 * j + 1);
  }
  // Cross-target coupling: d2 S/dx_k dx_l = -2 Re{(da_k beta_k)^H (da_l beta_l)}
  for (int j = 0; j < k; ++j) {
    for (int l = j + 1; l < k; ++l) {
      cplx cn2 = 0, cm2 = 0, cnm = 0;
      for (int i = 0; i < n; ++i) {
        const cplx t = std::conj(a(i, j)) * a(i, l);
        const double wn = model.wn()[i], wm = model.wm()[i];
        cn2 += wn * wn * t;
        cm2 += wm * wm * t;
        cnm += wn * wm * t;
      }
      const cplx bb = std::conj(b[j]) * b[l];
      h(2 * j, 2 * l) = -2.0 * std::real(bb * cn2);
      h(2 * j, 2 * l + 1) = 2.0 * std::real(bb * cnm);
      h(2 * j + 1, 2 * l) = 2.0 * std::real(bb * cnm);
      h(2 * j + 1, 2 * l + 1) = -2.0 * std::real(bb * cm2);
      h(2 * l, 2 * j) = h(2 * j, 2 * l);
      h(2 * l + 1, 2 * j) = h(2 * j, 2 * l + 1);
      h(2 * l, 2 * j + 1) = h(2 * j + 1, 2 * l);
      h(2 * l + 1, 2 * j + 1) = h(2 * j + 1, 2 * l + 1);
    }
  }
  return ev;
}

GlobalRefineInfo refine_global(std::vector<Detection>& dets,
                               const CVec& measurement, const AtomModel& model,
                               GlobalMode mode, bool guard) {
  GlobalRefineInfo info;
  const int k = static_cast<int>(dets.size());
  if (k == 0) return info;
  const int n = model.size();
  const GridConfig& grid = model.grid();

  if (mode == GlobalMode::block_diagonal) {
    // Cyclic per-target updates holding the others fixed: one guarded Newton
    // step per diagonal 2x2 block against the target's own residual, with the
    // matched-gain refresh folded in (same step map as refine_local). Guarded
    // cycles repeat while the joint residual keeps improving; the unguarded
    // variant applies the raw one-cycle update.
    CVec r = measurement;
    std::vector<CVec> atoms(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      atoms[j] = model.atom(dets[j].delay, dets[j].doppler);
      r -= dets[j].gain * atoms[j];
    }
    double energy = r.squaredNorm();
    const int max_cycles = guard ? kMaxGlobalCycles : 1;
    for (int cyc = 0; cyc < max_cycles; ++cyc) {
      bool cycle_accepted = false;
      for (int j = 0; j < k; ++j) {
        const CVec rj = r + dets[j].gain * atoms[j];
        const ConcentratedEval ev =
            concentrated_derivatives(rj, model, dets[j].delay, dets[j].doppler);
        const Eigen::Matrix2d& h = ev.hessian;
        const double det2 = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
        // det scale in the block's own mixed units
        const double det_scale =
            std::abs(h(0, 0) * h(1, 1)) + h(0, 1) * h(0, 1);
        if (!std::isfinite(det2) || std::abs(det2) <= 1e-12 * det_scale) {
          ++info.singular_blocks;  // skip this target's sub-step
          continue;
        }
        const Eigen::Vector2d dir(
            (h(1, 1) * ev.gradient[0] - h(0, 1) * ev.gradient[1]) / det2,
            (h(0, 0) * ev.gradient[1] - h(1, 0) * ev.gradient[0]) / det2);
        if (!dir.allFinite() || dir.isZero(0.0)) continue;

        double nd = 0, na = 0, scale = 1.0;
        bool accepted = false;
        for (int t = 0; t <= kMaxHalvings; ++t, scale *= 0.5) {
          nd = dets[j].delay - scale * dir[0];
          na = dets[j].doppler - scale * dir[1];
          wrap_into_spans(grid, nd, na);
          if (!guard || concentrated(rj, model, nd, na) > ev.value) {
            accepted = true;
            break;
          }
        }
        if (!accepted) continue;  // own objective cannot improve: keep as is
        dets[j].delay = nd;
        dets[j].doppler = na;
        atoms[j] = model.atom(nd, na);
        dets[j].gain = atoms[j].dot(rj) / double(n);
        r = rj - dets[j].gain * atoms[j];
        info.accepted = true;
        info.step_scale = scale;
        cycle_accepted = true;
      }
      ++info.cycles;
      const double e = r.squaredNorm();
      if (!cycle_accepted || e >= energy * (1.0 - kGlobalCycleTol)) break;
      energy = e;
    }
    for (Detection& d : dets) d.provenance = Provenance::globally_refined;
    return info;
  }

  // full_block: the complete 2K x 2K fixed-gain system with the matched-gain
  // refresh curvature folded into each diagonal block (the same rank-one
  // correction as the local step), solved jointly. Guarded cycles repeat
  // while the joint residual keeps improving.
  const int max_cycles = guard ? kMaxGlobalCycles : 1;
  double energy = std::numeric_limits<double>::infinity();
  for (int cyc = 0; cyc < max_cycles; ++cyc) {
    JointEval ev = joint_derivatives(dets, measurement, model);
    {
      CMat a(n, k);
      CVec b(k);
      for (int j = 0; j < k; ++j) {
        a.col(j) = model.atom(dets[j].delay, dets[j].doppler);
        b[j] = dets[j].gain;
      }
      const CVec u = measurement - a * b;
      for (int j = 0; j < k; ++j) {
        cplx s_n = 0, s_m = 0;
        for (int i = 0; i < n; ++i) {
          const cplx t = std::conj(a(i, j)) * (u[i] + a(i, j) * b[j]);
          s_n += model.wn()[i] * t;
          s_m += model.wm()[i] * t;
        }
        const cplx ct = cplx(0, 1) * s_n, ca = cplx(0, -1) * s_m;
        Eigen::Matrix2d corr;
        corr << std::norm(ct), std::real(std::conj(ct) * ca),
            std::real(std::conj(ct) * ca), std::norm(ca);
        ev.hessian.block<2, 2>(2 * j, 2 * j) += (2.0 / n) * corr;
      }
    }
    const Eigen::VectorXd& g = ev.gradient;
    const Eigen::MatrixXd& h = ev.hessian;

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(2 * k);
    std::vector<int> active;
    for (int j = 0; j < k; ++j) {
      const double h00 = h(2 * j, 2 * j), h01 = h(2 * j, 2 * j + 1),
                   h11 = h(2 * j + 1, 2 * j + 1);
      const double det2 = h00 * h11 - h01 * h01;
      // det scale in the block's own mixed units
      const double det_scale = std::abs(h00 * h11) + h01 * h01;
      if (!std::isfinite(det2) || std::abs(det2) <= 1e-12 * det_scale)
        ++info.singular_blocks;  // skip this target's sub-step
      else
        active.push_back(j);
    }
    if (!active.empty()) {
      const int ka = static_cast<int>(active.size());
      // Precondition by the cell sizes: tau is in seconds and alpha in Hz, so
      // raw Hessian entries differ by many orders of magnitude.
      Eigen::MatrixXd hs(2 * ka, 2 * ka);
      Eigen::VectorXd gs(2 * ka), d(2 * ka);
      for (int x = 0; x < ka; ++x) {
        d[2 * x] = grid.delay_cell();
        d[2 * x + 1] = grid.doppler_cell();
        gs.segment<2>(2 * x) = g.segment<2>(2 * active[x]);
        for (int y = 0; y < ka; ++y)
          hs.block<2, 2>(2 * x, 2 * y) =
              h.block<2, 2>(2 * active[x], 2 * active[y]);
      }
      hs = d.asDiagonal() * hs * d.asDiagonal();
      const Eigen::VectorXd ys =
          hs.ldlt().solve((d.array() * gs.array()).matrix());
      const Eigen::VectorXd da = (d.array() * ys.array()).matrix();
      if (da.allFinite())
        for (int x = 0; x < ka; ++x)
          delta.segment<2>(2 * active[x]) = da.segment<2>(2 * x);
    }

    auto candidate_at = [&](double scale) {
      std::vector<Detection> cand = dets;
      for (int j = 0; j < k; ++j) {
        cand[j].delay -= scale * delta[2 * j];
        cand[j].doppler -= scale * delta[2 * j + 1];
        wrap_into_spans(grid, cand[j].delay, cand[j].doppler);
      }
      return cand;
    };
    auto residual_energy = [&](std::vector<Detection>& cand) {
      const LsGains ls = ls_gains(cand, measurement, model);
      CMat ac(n, k);
      for (int j = 0; j < k; ++j)
        ac.col(j) = model.atom(cand[j].delay, cand[j].doppler);
      for (int j = 0; j < k; ++j) cand[j].gain = ls.gains[j];
      return (measurement - ac * ls.gains).squaredNorm();
    };

    ++info.cycles;
    if (!guard) {
      std::vector<Detection> cand = candidate_at(1.0);
      residual_energy(cand);
      dets = std::move(cand);
      info.accepted = true;
      info.step_scale = 1.0;
      break;
    }
    std::vector<Detection> base = dets;
    const double j_old = residual_energy(base);
    bool cycle_accepted = false;
    double j_new = j_old;
    double scale = 1.0;
    for (int t = 0; t <= kMaxHalvings; ++t, scale *= 0.5) {
      std::vector<Detection> cand = candidate_at(scale);
      j_new = residual_energy(cand);
      if (j_new <= j_old * (1.0 + 1e-12)) {
        dets = std::move(cand);
        info.accepted = true;
        info.step_scale = scale;
        cycle_accepted = true;
        break;
      }
    }
    if (!cycle_accepted) {
      dets = std::move(base);  // keep LS-refit gains
      break;
    }
    if (j_new >= energy * (1.0 - kGlobalCycleTol)) break;
    if (delta.isZero(0.0)) break;  // no direction; gains were refreshed
    energy = j_new;
  }
  for (Detection& d : dets) d.provenance = Provenance::globally_refined;
  return info;
}

}  // namespace isac
