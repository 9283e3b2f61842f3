#include <algorithm>
#include <cmath>

#include "bsca_internal.hpp"
#include "cplan/errors.hpp"

namespace cplan {

namespace detail {

AlignedGains aligned_gains(const Scenario& s, const Plan& p) {
  const int N = p.slots(), K = s.K();
  const Propagation pr = s.propagation();
  AlignedGains a;
  a.g_ar.resize(N, K);
  a.g_j.resize(N, K);
  a.g_cross.resize(N);
  for (int n = 0; n < N; ++n) {
    const Vec3& qr = p.traj_r.positions[n];
    ArrayResponse ar = array_responses(qr, s.ap, s.ues, s.irs, pr.wavelength());
    std::vector<cd> h(K);
    for (int k = 0; k < K; ++k) {
      h[k] = cascaded_base_gain(qr, s.ap, s.ues[k], pr);
      a.g_j(n, k) = std::norm(direct_gain(p.traj_j.positions[n], s.ues[k], pr));
    }
    a.g_cross[n].resize(K, K);
    for (int k = 0; k < K; ++k) {
      CVec phi = closed_form_phases(ar.e_a, ar.e_k[k]);
      for (int m = 0; m < K; ++m) a.g_cross[n](k, m) = std::norm(effective_gain(ar.e_a, ar.e_k[m], phi, h[m]));
      a.g_ar(n, k) = a.g_cross[n](k, k);
    }
  }
  return a;
}

Vec slot_power(const Scenario& s, const Plan& p) {
  Vec P(p.slots());
  for (int n = 0; n < p.slots(); ++n)
    P[n] = propulsion_power(p.traj_r.velocities[n], s.propulsion) +
           propulsion_power(p.traj_j.velocities[n], s.propulsion);
  return P;
}

std::pair<double, double> reference_powers(const Scenario& s) {
  return {std::min(s.p_tot / (4.0 * s.horizon), s.p_a_max),
          std::min(s.p_tot / (2.0 * s.horizon), s.p_j_max)};
}

bool plan_feasible(const Scenario& s, const Plan& p, double* mAEE) {
  CovertnessReport r = evaluate_mAEE(p, s);
  if (mAEE) *mAEE = r.mAEE;
  return r.feasible();
}

SolverOptions block_options(const Scenario& s, const SolverOptions& base) {
  SolverOptions o = base;
  o.gap_tol = std::min(base.gap_tol, s.optimizer.gap_tol);
  o.feas_tol = std::max(base.feas_tol, s.optimizer.feas_tol);
  return o;
}

}  // namespace detail

SchedulingProblem scheduling_problem(const Scenario& s, const Plan& p) {
  const int N = p.slots(), K = s.K();
  detail::AlignedGains g = detail::aligned_gains(s, p);
  const Vec P = detail::slot_power(s, p);
  const auto [ref_a, ref_j] = detail::reference_powers(s);
  SchedulingProblem sp;
  sp.eps = s.epsilon;
  sp.A.resize(N, K);
  sp.B.resize(N, K);
  for (int n = 0; n < N; ++n) {
    const bool idle = p.p_a[n] <= 0.0;
    const double pa = idle ? ref_a : p.p_a[n];
    const double pj = idle ? ref_j : p.p_j[n];
    for (int k = 0; k < K; ++k) {
      sp.A(n, k) = rate_lower_bound(pa, pj, g.g_ar(n, k), g.g_j(n, k), s.noise[k], s.bandwidth) /
                   (P[n] * N);
      double z = 1.0;
      for (int m = 0; m < K; ++m)
        if (m != k) z = std::min(z, min_detection_error(pa, pj, g.g_cross[n](k, m), g.g_j(n, m)).zeta);
      sp.B(n, k) = z;
    }
  }
  return sp;
}

PowerProblem power_problem(const Scenario& s, const Plan& p) {
  const int N = p.slots(), K = s.K();
  const Gains g = compute_gains(s, p);
  const Vec P = detail::slot_power(s, p);
  PowerProblem pp;
  pp.K = K;
  pp.p_a_max = s.p_a_max;
  pp.p_j_max = s.p_j_max;
  pp.sum_budget = s.p_tot / s.slot;
  pp.eps = s.epsilon;
  pp.tol = s.optimizer.eps_power;
  pp.max_iter = s.optimizer.max_inner;
  pp.slots.resize(N);
  for (int n = 0; n < N; ++n) {
    PowerSlot& ps = pp.slots[n];
    ps.ue = p.scheduled(n);
    if (ps.ue < 0) continue;
    ps.weight = detail::rate_weight(s, P[n]);
    ps.g_bob = g.g_ar(n, ps.ue);
    ps.g_jam = g.g_j(n, ps.ue);
    ps.noise = s.noise[ps.ue];
    for (int m = 0; m < K; ++m)
      if (m != ps.ue) ps.warden_ratio.push_back(g.g_ar(n, m) / g.g_j(n, m));
  }
  return pp;
}

double power_objective(const PowerProblem& p, const Vec& p_a, const Vec& p_j) {
  if (p.K == 0) return 0.0;
  std::vector<double> acc(p.K, 0.0);
  for (size_t n = 0; n < p.slots.size(); ++n) {
    const PowerSlot& s = p.slots[n];
    if (s.ue < 0) continue;
    acc[s.ue] += s.weight * std::log1p(p_a[n] * s.g_bob / (0.5 * p_j[n] * s.g_jam + s.noise));
  }
  return *std::min_element(acc.begin(), acc.end());
}

namespace {

bool powers_feasible(const PowerProblem& p, const Vec& pa, const Vec& pj) {
  double sum = 0.0;
  for (size_t n = 0; n < p.slots.size(); ++n) {
    if (pa[n] < 0 || pj[n] < 0 || pa[n] > p.p_a_max * (1 + 1e-12) || pj[n] > p.p_j_max * (1 + 1e-12))
      return false;
    for (double r : p.slots[n].warden_ratio)
      if (pa[n] * r > p.eps * pj[n] * (1 + 1e-12)) return false;
    sum += pa[n] + pj[n];
  }
  return sum <= p.sum_budget * (1 + 1e-9) + 1e-15;
}

}  // namespace

PowerResult optimize_powers(const PowerProblem& p, const Vec& p_a0, const Vec& p_j0,
                            const SolverOptions& opt) {
  const int N = static_cast<int>(p.slots.size());
  if (p_a0.size() != N || p_j0.size() != N) throw ShapeError("power warm start size differs from slot count");
  PowerResult res;
  res.p_a = Vec::Zero(N);
  res.p_j = Vec::Zero(N);
  std::vector<std::vector<int>> by_ue(p.K);
  for (int n = 0; n < N; ++n)
    if (p.slots[n].ue >= 0) {
      by_ue[p.slots[n].ue].push_back(n);
      res.p_a[n] = std::clamp(p_a0[n], 0.0, p.p_a_max);
      res.p_j[n] = std::clamp(p_j0[n], 0.0, p.p_j_max);
    }
  if (p.sum_budget <= 0.0 || p.p_a_max <= 0.0) {
    res.p_a.setZero();
    res.p_j.setZero();
    res.value = power_objective(p, res.p_a, res.p_j);
    return res;
  }
  const bool start_ok = powers_feasible(p, res.p_a, res.p_j);
  double cur = start_ok ? power_objective(p, res.p_a, res.p_j) : -kInf;
  res.value = start_ok ? cur : 0.0;
  for (const auto& v : by_ue)
    if (v.empty()) {
      res.message = "a UE has no scheduled slot; max-min objective is fixed at 0";
      return res;
    }

  double wmax = 0.0;
  for (const auto& s : p.slots) wmax = std::max(wmax, s.weight);
  const double scale = cur > 0 ? 1.0 / cur : (wmax > 0 ? 1.0 / wmax : 1.0);

  Vec pa_lo = res.p_a, pj_lo = res.p_j;
  for (int n = 0; n < N; ++n) {
    if (p.slots[n].ue < 0) continue;
    pa_lo[n] = std::clamp(pa_lo[n] * (1 - 1e-4), 1e-9 * p.p_a_max, p.p_a_max * (1 - 1e-6));
    pj_lo[n] = std::clamp(pj_lo[n] * (1 - 1e-5), 1e-9 * p.p_j_max, p.p_j_max * (1 - 1e-6));
  }

  for (int it = 0; it < p.max_iter; ++it) {
    detail::Builder b;
    std::vector<int> ia(N, -1), ij(N, -1), is(N, -1);
    Affine budget(-p.sum_budget);
    for (int n = 0; n < N; ++n) {
      const PowerSlot& s = p.slots[n];
      if (s.ue < 0) continue;
      const std::string tag = std::to_string(n);
      ia[n] = b.var("p_a" + tag, pa_lo[n], 0.0, p.p_a_max);
      ij[n] = b.var("p_j" + tag, pj_lo[n], 0.0, p.p_j_max);
      budget.add(ia[n], 1.0).add(ij[n], 1.0);
      const double w = s.weight * scale;
      const double cj = 0.5 * s.g_jam / s.noise, ca = s.g_bob / s.noise;
      const double v_lo = 1.0 + cj * pj_lo[n];
      ConvexFunc g;
      if (p.surrogate == PowerSurrogate::SinrSlack) {
        // rate <= w ln(1 + t0 t), where t0 t bounds the SINR c_a p_a / (1 + c_j p_j).
        // The product t p_j is bounded above by its AM-GM majorant at (1, p_j_lo).
        const double t0 = ca * pa_lo[n] / v_lo;
        const double t_start = 1.0 - 1e-6;
        int isnr = b.var("t" + tag, t_start, 0.0);
        ConvexFunc sinr;
        sinr.lin = (Affine::var(isnr) - Affine::var(ia[n], ca / t0)) * (1.0 / v_lo);
        sinr.terms.push_back(Term::sq_sum(0.5 * cj * pj_lo[n] / v_lo,
                                          {Affine::var(isnr), Affine::var(ij[n], 1.0 / pj_lo[n])}));
        b.prog.add_le("sinr" + tag, std::move(sinr));
        const double f_lo = w * std::log1p(t0 * t_start);
        is[n] = b.var("s" + tag, f_lo - 1e-9 * (1.0 + std::abs(f_lo)));
        g.lin = Affine::var(is[n]);
        g.terms.push_back(Term::neg_log(w, Affine(1.0) + Affine::var(isnr, t0)));
      } else {
        // ln(1 + (p_a g + p_j g_j / 2) / noise) - ln(1 + p_j g_j / (2 noise)), second log linearized.
        const double f_lo = std::log1p(ca * pa_lo[n] + cj * pj_lo[n]) - std::log(v_lo);
        is[n] = b.var("s" + tag, w * f_lo - 1e-9 * (1.0 + std::abs(w * f_lo)));
        g.lin = Affine::var(is[n]) + w * (std::log(v_lo) - 1.0 + (Affine(1.0) + Affine::var(ij[n], cj)) * (1.0 / v_lo));
        g.terms.push_back(Term::neg_log(w, Affine(1.0) + Affine::var(ia[n], ca) + Affine::var(ij[n], cj)));
      }
      b.prog.add_le("rate" + tag, std::move(g));
      for (size_t m = 0; m < s.warden_ratio.size(); ++m)
        if (s.warden_ratio[m] > 0)
          b.prog.add_le("covert" + tag + "_" + std::to_string(m),
                        Affine::var(ia[n], s.warden_ratio[m] / p.eps) - Affine::var(ij[n]));
    }
    b.prog.add_le("budget", budget);
    Vec x = b.start();
    double psi0 = kInf;
    std::vector<Affine> served(p.K);
    for (int k = 0; k < p.K; ++k) {
      for (int n : by_ue[k]) served[k].add(is[n], 1.0);
      psi0 = std::min(psi0, served[k].eval(x));
    }
    int psi = b.var("psi", psi0 - 1e-9 * (1.0 + std::abs(psi0)));
    for (int k = 0; k < p.K; ++k) b.prog.add_le("ue" + std::to_string(k), Affine::var(psi) - served[k]);
    b.prog.maximize(Affine::var(psi));
    Solution sol = solve(b.prog, b.start(), opt);
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIter) {
      res.ok = false;
      res.message = std::string("power subproblem ") + to_string(sol.status) + ": " + sol.message;
      break;
    }
    Vec na = Vec::Zero(N), nj = Vec::Zero(N);
    for (int n = 0; n < N; ++n)
      if (ia[n] >= 0) {
        na[n] = std::clamp(sol.x[ia[n]], 0.0, p.p_a_max);
        nj[n] = std::clamp(sol.x[ij[n]], 0.0, p.p_j_max);
      }
    if (!powers_feasible(p, na, nj)) {
      res.ok = false;
      res.message = "power subproblem returned an infeasible point";
      break;
    }
    const double val = power_objective(p, na, nj);
    res.surrogate.push_back(sol.x[psi] / scale);
    if (val < cur) break;
    const double gain = val - cur;
    res.p_a = na;
    res.p_j = nj;
    res.value = val;
    const bool first = !std::isfinite(cur);
    cur = val;
    pa_lo = na;
    pj_lo = nj;
    if (!first && gain <= p.tol * std::abs(cur)) break;
  }
  return res;
}

// ---- joint power and scheduling ---------------------------------------------

namespace {

Plan with_schedule(const Scenario& s, const Plan& base, const Eigen::MatrixXi& alpha, const Vec& pa,
                   const Vec& pj) {
  Plan q = base;
  q.alpha = alpha;
  q.p_a = pa;
  q.p_j = pj;
  for (int n = 0; n < q.slots(); ++n)
    if (q.scheduled(n) < 0) q.p_a[n] = q.p_j[n] = 0.0;
  apply_closed_form_beamforming(s, q);
  return q;
}

// Fixes the schedule, aligns the phases and re-optimizes the powers.
Plan finish_schedule(const Scenario& s, const Plan& base, const Eigen::MatrixXi& alpha, const Vec& pa,
                     const Vec& pj, const SolverOptions& opt) {
  Plan q = with_schedule(s, base, alpha, pa, pj);
  const auto [ref_a, ref_j] = detail::reference_powers(s);
  Vec a0 = q.p_a, j0 = q.p_j;
  for (int n = 0; n < q.slots(); ++n)
    if (q.scheduled(n) >= 0 && a0[n] <= 0) {
      a0[n] = ref_a;
      j0[n] = ref_j;
    }
  PowerResult pr = optimize_powers(power_problem(s, q), a0, j0, opt);
  q.p_a = pr.p_a;
  q.p_j = pr.p_j;
  return q;
}

}  // namespace

JointResult joint_power_scheduling(const Scenario& s, const Plan& p, const PenaltySchedule& pen,
                                   const SolverOptions& opt_in) {
  const SolverOptions opt = detail::block_options(s, opt_in);
  const int N = p.slots(), K = s.K();
  const detail::AlignedGains g = detail::aligned_gains(s, p);
  const Vec P = detail::slot_power(s, p);

  // Sequential reference: schedule, then powers.
  SchedulingResult sr = optimize_scheduling(scheduling_problem(s, p), pen);
  Plan seq = finish_schedule(s, p, sr.alpha, p.p_a, p.p_j, opt);
  double seq_val = 0.0;
  const bool seq_ok = detail::plan_feasible(s, seq, &seq_val);

  JointResult out;
  auto keep_sequential = [&] {
    out.alpha = seq_ok ? seq.alpha : p.alpha;
    out.p_a = seq_ok ? seq.p_a : p.p_a;
    out.p_j = seq_ok ? seq.p_j : p.p_j;
    out.value = seq_ok ? seq_val : evaluate_mAEE(p, s).mAEE;
    out.used_joint = false;
  };
  if (N == 0 || K == 0 || s.p_tot <= 0) {
    keep_sequential();
    return out;
  }

  // Expansion point: the sequential design, strictly inside every bound.
  Mat a_lo = Mat::Zero(N, K);
  Vec pa_lo(N), pj_lo(N);
  const auto [ref_a, ref_j] = detail::reference_powers(s);
  for (int n = 0; n < N; ++n) {
    const bool idle = seq.p_a[n] <= 0;
    pa_lo[n] = std::clamp((idle ? ref_a : seq.p_a[n]) * 0.999, 1e-9, s.p_a_max * (1 - 1e-6));
    pj_lo[n] = std::clamp((idle ? ref_j : seq.p_j[n]) * 0.9995, 1e-9, s.p_j_max * (1 - 1e-6));
    for (int k = 0; k < K; ++k) a_lo(n, k) = 0.9 * seq.alpha(n, k) + 0.1 / (K + 1);
  }
  // Scale total power so the budget is slack at the expansion point.
  const double budget = s.p_tot / s.slot;
  if (double used = pa_lo.sum() + pj_lo.sum(); used >= budget) {
    pa_lo *= 0.999 * budget / used;
    pj_lo *= 0.999 * budget / used;
  }

  double wmax = 0.0;
  for (int n = 0; n < N; ++n) wmax = std::max(wmax, detail::rate_weight(s, P[n]));
  const double scale = seq_val > 0 ? 1.0 / seq_val : 1.0 / wmax;

  auto rate_parts = [&](int n, int k) {
    const double cj = 0.5 * g.g_j(n, k) / s.noise[k], ca = g.g_ar(n, k) / s.noise[k];
    return std::pair{ca, cj};
  };
  Mat w_lo(N, K);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      auto [ca, cj] = rate_parts(n, k);
      w_lo(n, k) = std::log1p(ca * pa_lo[n] + cj * pj_lo[n]) - std::log1p(cj * pj_lo[n]);
    }

  double mu = 0.0;
  Mat alpha_best = a_lo;
  for (int it = 0; it < 60; ++it) {
    detail::Builder b;
    std::vector<int> ia(N), ij(N);
    Eigen::MatrixXi ialpha(N, K);
    Affine budget_row(-budget);
    for (int n = 0; n < N; ++n) {
      ia[n] = b.var("p_a" + std::to_string(n), pa_lo[n], 0.0, s.p_a_max);
      ij[n] = b.var("p_j" + std::to_string(n), pj_lo[n], 0.0, s.p_j_max);
      budget_row.add(ia[n], 1.0).add(ij[n], 1.0);
    }
    b.prog.add_le("budget", budget_row);
    std::vector<Affine> served(K);
    Affine penalty(0.0);
    for (int n = 0; n < N; ++n) {
      Affine slot(-1.0);
      const double wn = detail::rate_weight(s, P[n]) * scale;
      for (int k = 0; k < K; ++k) {
        const std::string tag = std::to_string(n) + "_" + std::to_string(k);
        int a = b.var("alpha" + tag, a_lo(n, k), 0.0);
        ialpha(n, k) = a;
        slot.add(a, 1.0);
        penalty.add(a, 1.0 - 2.0 * a_lo(n, k));
        penalty.constant += a_lo(n, k) * a_lo(n, k);
        auto [ca, cj] = rate_parts(n, k);
        const double v_lo = 1.0 + cj * pj_lo[n];
        int w = b.var("w" + tag, w_lo(n, k) - 1e-9);
        ConvexFunc rate;
        rate.lin = Affine::var(w) + (std::log(v_lo) - 1.0) + (Affine(1.0) + Affine::var(ij[n], cj)) * (1.0 / v_lo);
        rate.terms.push_back(Term::neg_log(1.0, Affine(1.0) + Affine::var(ia[n], ca) + Affine::var(ij[n], cj)));
        b.prog.add_le("rate" + tag, std::move(rate));
        // z <= concave lower bound of alpha * w
        const double sp0 = a_lo(n, k) + w_lo(n, k);
        const BilinearBounds bb = bilinear_bounds(a_lo(n, k), w_lo(n, k) - 1e-9, a_lo(n, k), w_lo(n, k));
        int z = b.var("z" + tag, bb.lower - 1e-9);
        ConvexFunc prod;
        prod.lin = Affine::var(z) - 0.25 * (2.0 * sp0 * (Affine::var(a) + Affine::var(w)) - sp0 * sp0);
        prod.terms.push_back(Term::sq_sum(0.25, {Affine::var(a) - Affine::var(w)}));
        b.prog.add_le("prod" + tag, std::move(prod));
        served[k].add(z, wn);
        // Covert when served; relaxed by the largest possible excess otherwise.
        for (int m = 0; m < K; ++m) {
          if (m == k) continue;
          const double r = g.g_cross[n](k, m) / (s.epsilon * g.g_j(n, m));
          if (r <= 0) continue;
          const double big = r * s.p_a_max;
          b.prog.add_le("covert" + tag + "_" + std::to_string(m),
                        Affine::var(ia[n], r) - Affine::var(ij[n]) + Affine::var(a, big) - big);
        }
      }
      b.prog.add_le("slot" + std::to_string(n), slot);
    }
    Vec x = b.start();
    double psi0 = kInf;
    for (int k = 0; k < K; ++k) psi0 = std::min(psi0, served[k].eval(x));
    int psi = b.var("psi", psi0 - 1e-6);
    for (int k = 0; k < K; ++k) b.prog.add_le("ue" + std::to_string(k), Affine::var(psi) - served[k]);
    Affine obj = Affine::var(psi);
    if (mu > 0) {
      int eta = b.var("eta", std::max(0.0, penalty.eval(x)) + 1.0, 0.0);
      b.prog.add_le("penalty", penalty - Affine::var(eta));
      obj += Affine::var(eta, -mu);
    }
    b.prog.maximize(obj);
    Solution sol = solve(b.prog, b.start(), opt);
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIter) break;
    Mat a_new(N, K);
    double eta = 0.0;
    for (int n = 0; n < N; ++n) {
      pa_lo[n] = sol.x[ia[n]];
      pj_lo[n] = sol.x[ij[n]];
    }
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        a_new(n, k) = std::clamp(sol.x[ialpha(n, k)], 0.0, 1.0);
        auto [ca, cj] = rate_parts(n, k);
        w_lo(n, k) = std::log1p(ca * pa_lo[n] + cj * pj_lo[n]) - std::log1p(cj * pj_lo[n]);
      }
    eta = (a_new.array() * (1.0 - a_new.array())).sum();
    const double change = (a_new - a_lo).norm();
    a_lo = a_new;
    alpha_best = a_new;
    if (mu == 0.0) {
      out.surrogate.push_back(sol.x[psi] / scale);
      const size_t h = out.surrogate.size();
      if (h >= 2 && out.surrogate[h - 1] - out.surrogate[h - 2] <= s.optimizer.eps_power * std::abs(out.surrogate[h - 1]))
        mu = pen.init;
      if (h >= static_cast<size_t>(s.optimizer.max_inner)) mu = pen.init;
    } else {
      if (eta <= 1e-6) break;
      if (mu >= pen.max && change < 1e-7) break;
      mu = std::min(pen.max, mu * pen.growth);
    }
  }

  // Round: largest A * alpha per slot among covert options, lowest index on ties.
  const SchedulingProblem sp = scheduling_problem(s, p);
  Eigen::MatrixXi alpha = Eigen::MatrixXi::Zero(N, K);
  for (int n = 0; n < N; ++n) {
    int best = -1;
    double bv = -1.0;
    for (int k = 0; k < K; ++k) {
      double z = 1.0;
      for (int m = 0; m < K; ++m)
        if (m != k) z = std::min(z, min_detection_error(pa_lo[n], pj_lo[n], g.g_cross[n](k, m), g.g_j(n, m)).zeta);
      if (z < 1.0 - s.epsilon) continue;
      double v = sp.A(n, k) * alpha_best(n, k);
      if (v > bv) {
        bv = v;
        best = k;
      }
    }
    if (best >= 0) alpha(n, best) = 1;
  }
  Plan joint = finish_schedule(s, p, alpha, pa_lo, pj_lo, opt);
  // Drop slots whose covert check fails under the joint powers, then re-verify.
  {
    CovertCheck c = covertness_check(joint, compute_gains(s, joint), s.epsilon);
    if (!c.passed()) {
      for (int n : c.failing) alpha.row(n).setZero();
      joint = finish_schedule(s, p, alpha, pa_lo, pj_lo, opt);
    }
  }
  double joint_val = 0.0;
  const bool joint_ok = detail::plan_feasible(s, joint, &joint_val);
  if (joint_ok && (!seq_ok || joint_val > seq_val)) {
    out.alpha = joint.alpha;
    out.p_a = joint.p_a;
    out.p_j = joint.p_j;
    out.value = joint_val;
    out.used_joint = true;
  } else {
    keep_sequential();
  }
  return out;
}

}  // namespace cplan
