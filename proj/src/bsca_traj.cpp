#include <algorithm>
#include <cmath>
#include <numbers>

#include "bsca_internal.hpp"
#include "cplan/errors.hpp"

namespace cplan {

namespace {

using std::numbers::pi;

// Trajectory variables of one UAV: horizontal positions of the interior
// slots plus the final velocity; the endpoints stay at the station.
struct Layout {
  int N = 0;
  double dt = 0.0;
  std::vector<int> ix;  // x index per slot, y at ix + 1; -1 for fixed slots
  int vlast = -1;
  std::vector<Vec3> fixed;

  Affine coord(int n, int d) const {
    if (d == 2 || ix[n] < 0) return Affine(fixed[n][d]);
    return Affine::var(ix[n] + d);
  }
  std::vector<Affine> pos_minus(int n, const Vec3& o) const {
    return {coord(n, 0) - o.x(), coord(n, 1) - o.y(), coord(n, 2) - o.z()};
  }
  std::vector<Affine> vel(int n) const {
    if (n == N - 1) return {Affine::var(vlast), Affine::var(vlast + 1)};
    return {(coord(n + 1, 0) - coord(n, 0)) * (1.0 / dt), (coord(n + 1, 1) - coord(n, 1)) * (1.0 / dt)};
  }
  Trajectory read(const Vec& x) const {
    Trajectory t;
    t.positions = fixed;
    for (int n = 0; n < N; ++n)
      if (ix[n] >= 0) {
        t.positions[n].x() = x[ix[n]];
        t.positions[n].y() = x[ix[n] + 1];
      }
    t.velocities.resize(N);
    for (int n = 0; n + 1 < N; ++n) t.velocities[n] = (t.positions[n + 1] - t.positions[n]) / dt;
    t.velocities[N - 1] = Vec3(x[vlast], x[vlast + 1], 0.0);
    return t;
  }
};

Layout add_uav(detail::Builder& b, const Scenario& s, const Trajectory& cur, const FlightLimits& lim,
               const Trajectory& other, const std::string& who) {
  Layout L;
  L.N = cur.size();
  L.dt = s.slot;
  L.fixed = cur.positions;
  L.ix.assign(L.N, -1);
  for (int n = 1; n + 1 < L.N; ++n) {
    L.ix[n] = b.var(who + ".x" + std::to_string(n), cur.positions[n].x());
    b.var(who + ".y" + std::to_string(n), cur.positions[n].y());
  }
  L.vlast = b.var(who + ".vx_last", cur.velocities[L.N - 1].x());
  b.var(who + ".vy_last", cur.velocities[L.N - 1].y());

  const double H = cur.positions[0].z();
  const double zone = std::sqrt(s.permitted_radius * s.permitted_radius + H * H);
  const double D2 = s.safety_distance * s.safety_distance;
  for (int n = 0; n < L.N; ++n) {
    const std::string tag = who + std::to_string(n);
    b.prog.add_soc("speed" + tag, L.vel(n), Affine(lim.v_max));
    if (n + 1 < L.N) {
      auto v0 = L.vel(n), v1 = L.vel(n + 1);
      b.prog.add_soc("accel" + tag, {v1[0] - v0[0], v1[1] - v0[1]}, Affine(lim.a_max));
    }
    if (L.ix[n] < 0) continue;
    b.prog.add_soc("zone" + tag, L.pos_minus(n, s.ap), Affine(zone));
    if (D2 > 0) {
      // |q - q_o|^2 >= |q_lo - q_o|^2 + 2 (q_lo - q_o)^T (q - q_lo)
      const Vec3 d = cur.positions[n] - other.positions[n];
      Affine lin(D2 - d.squaredNorm());
      auto rows = L.pos_minus(n, cur.positions[n]);
      for (int c = 0; c < 3; ++c) lin += (-2.0 * d[c]) * rows[c];
      b.prog.add_le("separation" + tag, lin * (1.0 / D2));
    }
  }
  return L;
}

// Lower bound 1/t^2 <= t^2 + 2 c2 |v|^2 linearized at (t_lo, v_lo); t >= the
// induced-power factor. Returns t's index.
int add_induced_slack(detail::Builder& b, const std::string& name, const std::vector<Affine>& v,
                      const Vec3& v_lo, const PropulsionConstants& c) {
  const double s2 = v_lo.head<2>().squaredNorm();
  const double t_lo = std::sqrt(std::sqrt(1.0 + c.c2 * c.c2 * s2 * s2) - c.c2 * s2);
  int t = b.var(name, t_lo * (1.0 + 1e-7), 0.0);
  ConvexFunc g;
  g.lin = Affine::var(t, -2.0 * t_lo) + t_lo * t_lo + 2.0 * c.c2 * s2;
  for (int d = 0; d < 2; ++d) g.lin += (-4.0 * c.c2 * v_lo[d]) * v[d];
  g.terms.push_back(Term::power(1.0, Affine::var(t), -2.0));
  b.prog.add_le(name + ".lb", std::move(g));
  return t;
}

struct SlotTerm {
  int n = -1;
  int ue = -1;
  int s = -1;
};

// s <= 2 gamma tau - gamma^2 g(v, t) / P_s where g is the slot's propulsion
// power with the other UAV's share fixed at `p_other`.
void add_fp_slot(detail::Builder& b, SlotTerm& st, const std::string& tag, int tau, double f_lo,
                 const std::vector<Affine>& v, int t, double t_lo_power, double p_other,
                 const PropulsionConstants& c, double Ps) {
  const double g_lo = (t_lo_power + p_other) / Ps;
  const double gamma = fp_gamma_update(std::max(f_lo, 0.0), g_lo);
  st.s = b.var("s" + tag, 0.0);
  ConvexFunc g;
  g.lin = Affine::var(st.s) + Affine::var(tau, -2.0 * gamma) +
          (gamma * gamma / Ps) * (Affine(c.P_o + p_other) + Affine::var(t, c.P_i));
  g.terms.push_back(Term::sq_sum(gamma * gamma * c.P_o * c.c0 / Ps, v));
  g.terms.push_back(Term::radial(gamma * gamma * c.c1 / Ps, v, 3.0, 0.0));
  const Vec x = b.start();
  const double rest = g.eval(x) - x[st.s];
  b.x0[st.s] = -rest - 1e-9 * (1.0 + std::abs(rest));
  b.prog.add_le("fp" + tag, std::move(g));
}

// psi <= scale * (1/N) sum of the UE's slot terms, for every UE.
int add_maxmin(detail::Builder& b, const std::vector<SlotTerm>& terms, int K, int N, double scale) {
  std::vector<Affine> served(K);
  std::vector<bool> has(K, false);
  for (const auto& st : terms) {
    served[st.ue].add(st.s, scale / N);
    has[st.ue] = true;
  }
  const Vec x = b.start();
  double psi0 = kInf;
  for (int k = 0; k < K; ++k) psi0 = std::min(psi0, served[k].eval(x));
  int psi = b.var("psi", psi0 - 1e-9 * (1.0 + std::abs(psi0)));
  for (int k = 0; k < K; ++k) b.prog.add_le("ue" + std::to_string(k), Affine::var(psi) - served[k]);
  b.prog.maximize(Affine::var(psi));
  return psi;
}

Trajectory blend(const Trajectory& a, const Trajectory& c, double th) {
  Trajectory t = a;
  for (int n = 0; n < a.size(); ++n) {
    t.positions[n] = (1 - th) * a.positions[n] + th * c.positions[n];
    t.velocities[n] = (1 - th) * a.velocities[n] + th * c.velocities[n];
  }
  t.positions.front() = a.positions.front();
  t.positions.back() = a.positions.back();
  return t;
}

struct Subproblem {
  detail::Builder b;
  Layout layout;
  int psi = -1;
  double to_bits = 1.0;  // psi * to_bits is the surrogate mAEE in bits/J
  std::string skip;
};

// True when every UE has a slot that carries data.
bool all_served(const Scenario& s, const Plan& p) {
  std::vector<bool> has(s.K(), false);
  for (int n = 0; n < p.slots(); ++n)
    if (int k = p.scheduled(n); k >= 0 && p.p_a[n] > 0) has[k] = true;
  return std::all_of(has.begin(), has.end(), [](bool v) { return v; });
}

Subproblem build_ucj(const Scenario& s, const Plan& p, double cur_val) {
  Subproblem sp;
  auto& b = sp.b;
  const int N = p.slots(), K = s.K();
  const Propagation pr = s.propagation();
  const double lambda = pr.wavelength(), rho = pr.rho, kappa = pr.kappa;
  const double G0 = std::pow(lambda / (4.0 * pi), 2);
  const Gains g = compute_gains(s, p);
  const auto& c = s.propulsion;
  const double Ps = c.P_o + c.P_i;
  sp.layout = add_uav(b, s, p.traj_j, s.limits_j, p.traj_r, "j");
  std::vector<SlotTerm> terms;
  for (int n = 0; n < N; ++n) {
    const int k = p.scheduled(n);
    if (k < 0 || p.p_a[n] <= 0) continue;
    const std::string tag = std::to_string(n);
    const Vec3& q = p.traj_j.positions[n];
    const double B = p.p_a[n] * g.g_ar(n, k) / s.noise[k];
    const double C = 0.5 * p.p_j[n] * G0 / s.noise[k];
    const Vec3 dk = q - s.ues[k];
    const double d_lo = dk.norm();
    const double w_lo = std::exp(-kappa * d_lo) / std::pow(d_lo, rho);
    const double f_lo = std::log1p(B / (1.0 + C * w_lo));
    Affine f_lin(f_lo);
    if (C > 0) {
      int v = b.var("v" + tag, 1.0 - 1e-7, 0.0);
      int w = b.var("w" + tag, 1.0 + 1e-6, 0.0);
      ConvexFunc dist;
      dist.lin = Affine(dk.squaredNorm() / (d_lo * d_lo));
      auto rows = sp.layout.pos_minus(n, s.ues[k]);
      for (int d = 0; d < 3; ++d) dist.lin += (-2.0 * dk[d] / (d_lo * d_lo)) * rows[d];
      dist.terms.push_back(Term::sq_sum(1.0, {Affine::var(v)}));
      b.prog.add_le("dist" + tag, std::move(dist));
      ConvexFunc gain;
      gain.lin = Affine::var(v, -kappa * d_lo) + kappa * d_lo;
      gain.terms.push_back(Term::neg_log(1.0, Affine::var(w)));
      gain.terms.push_back(Term::neg_log(rho, Affine::var(v)));
      b.prog.add_le("gain" + tag, std::move(gain));
      const double fp = -B * C / ((1.0 + C * w_lo) * (1.0 + C * w_lo + B));
      f_lin += (fp * w_lo) * (Affine::var(w) - 1.0);
    }
    int tau = b.sqrt_epigraph("tau" + tag, f_lin);
    auto vel = sp.layout.vel(n);
    int t = add_induced_slack(b, "t" + tag, vel, p.traj_j.velocities[n], c);
    SlotTerm st{n, k, -1};
    add_fp_slot(b, st, tag, tau, f_lo, vel, t, propulsion_power(p.traj_j.velocities[n], c),
                propulsion_power(p.traj_r.velocities[n], c), c, Ps);
    terms.push_back(st);
    // Warden detection, exact in the jammer position.
    for (int m = 0; m < K; ++m) {
      if (m == k) continue;
      const double leak = p.p_a[n] * g.g_ar(n, m);
      if (leak <= 0 || p.p_j[n] <= 0) continue;
      const double Gamma = s.epsilon * p.p_j[n] * G0 / leak;
      ConvexFunc cov;
      cov.lin = Affine(-1.0);
      cov.terms.push_back(Term::radial(1.0 / Gamma, sp.layout.pos_minus(n, s.ues[m]), rho, kappa));
      b.prog.add_le("covert" + tag + "_" + std::to_string(m), std::move(cov));
    }
  }
  const double scale = cur_val > 0 ? s.bandwidth / std::log(2.0) / Ps / cur_val : 1.0;
  sp.psi = add_maxmin(b, terms, K, N, scale);
  sp.to_bits = s.bandwidth / std::log(2.0) / Ps / scale;
  return sp;
}

Subproblem build_uirs(const Scenario& s, const Plan& p, double cur_val) {
  Subproblem sp;
  auto& b = sp.b;
  const int N = p.slots(), K = s.K();
  const Propagation pr = s.propagation();
  const double lambda = pr.wavelength(), rho = pr.rho, kappa = pr.kappa;
  const double Gr = lambda * lambda / (64.0 * pi * pi * pi);
  const Gains g = compute_gains(s, p);
  const auto& c = s.propulsion;
  const double Ps = c.P_o + c.P_i;
  sp.layout = add_uav(b, s, p.traj_r, s.limits_r, p.traj_j, "r");
  std::vector<SlotTerm> terms;
  for (int n = 0; n < N; ++n) {
    const int k = p.scheduled(n);
    if (k < 0 || p.p_a[n] <= 0) continue;
    const std::string tag = std::to_string(n);
    const Vec3& q = p.traj_r.positions[n];
    ArrayResponse ar = array_responses(q, s.ap, s.ues, s.irs, lambda);
    auto factor = [&](int m) { return std::norm(effective_gain(ar.e_a, ar.e_k[m], p.phi[n], 1.0)); };
    const double d1 = (q - s.ap).norm(), d2 = (q - s.ues[k]).norm();
    const double a = p.p_a[n] * factor(k) * Gr / (0.5 * p.p_j[n] * g.g_j(n, k) + s.noise[k]);
    int x = b.var("x" + tag, 1.0 + 1e-7, 0.0);
    int y = b.var("y" + tag, 1.0 + 1e-7, 0.0);
    b.prog.add_soc("hop_a" + tag, sp.layout.pos_minus(n, s.ap), Affine::var(x, d1));
    b.prog.add_soc("hop_k" + tag, sp.layout.pos_minus(n, s.ues[k]), Affine::var(y, d2));
    const double f_lo = upsilon(d1, d2, a, kappa, rho);
    auto [gx, gy] = upsilon_gradient(d1, d2, a, kappa, rho);
    Affine f_lb = Affine(f_lo) + (gx * d1) * (Affine::var(x) - 1.0) + (gy * d2) * (Affine::var(y) - 1.0);
    int tau = b.sqrt_epigraph("tau" + tag, f_lb);
    auto vel = sp.layout.vel(n);
    int t = add_induced_slack(b, "t" + tag, vel, p.traj_r.velocities[n], c);
    SlotTerm st{n, k, -1};
    add_fp_slot(b, st, tag, tau, f_lo, vel, t, propulsion_power(p.traj_r.velocities[n], c),
                propulsion_power(p.traj_j.velocities[n], c), c, Ps);
    terms.push_back(st);
    // Warden detection with the array factor frozen at the expansion point;
    // distances enter through supporting-hyperplane lower bounds.
    const Vec3 u1 = (q - s.ap) / d1;
    for (int m = 0; m < K; ++m) {
      if (m == k) continue;
      const double Fm = factor(m);
      if (Fm * p.p_a[n] <= 0 || p.p_j[n] * g.g_j(n, m) <= 0) continue;
      const double dm = (q - s.ues[m]).norm();
      const Vec3 um = (q - s.ues[m]) / dm;
      const double Lambda = std::log(p.p_a[n] * Fm * Gr / (s.epsilon * p.p_j[n] * g.g_j(n, m)));
      auto r1 = sp.layout.pos_minus(n, s.ap), rm = sp.layout.pos_minus(n, s.ues[m]);
      Affine l1, lm;
      for (int d = 0; d < 3; ++d) {
        l1 += (u1[d] / d1) * r1[d];
        lm += (um[d] / dm) * rm[d];
      }
      ConvexFunc cov;
      cov.lin = (-kappa * d1) * l1 + (-kappa * dm) * lm + (Lambda - rho * std::log(d1) - rho * std::log(dm));
      cov.terms.push_back(Term::neg_log(rho, l1));
      cov.terms.push_back(Term::neg_log(rho, lm));
      b.prog.add_le("covert" + tag + "_" + std::to_string(m), std::move(cov));
    }
  }
  const double scale = cur_val > 0 ? s.bandwidth / std::log(2.0) / Ps / cur_val : 1.0;
  sp.psi = add_maxmin(b, terms, K, N, scale);
  sp.to_bits = s.bandwidth / std::log(2.0) / Ps / scale;
  return sp;
}

TrajectoryResult run_trajectory_block(const Scenario& s, const Plan& p, bool uirs,
                                      const SolverOptions& opt_in) {
  const SolverOptions opt = detail::block_options(s, opt_in);
  TrajectoryResult res;
  res.traj = uirs ? p.traj_r : p.traj_j;
  Plan cur = p;
  double cur_val = 0.0;
  if (!detail::plan_feasible(s, cur, &cur_val)) {
    res.ok = false;
    res.message = "warm start is infeasible";
    res.value = cur_val;
    return res;
  }
  res.value = cur_val;
  if (!all_served(s, cur)) {
    res.message = "a UE carries no data; max-min objective is fixed at 0";
    return res;
  }
  const double tol = uirs ? s.optimizer.eps_uirs : s.optimizer.eps_ucj;
  for (int it = 0; it < s.optimizer.max_inner; ++it) {
    Subproblem sp = uirs ? build_uirs(s, cur, cur_val) : build_ucj(s, cur, cur_val);
    Solution sol = solve(sp.b.prog, sp.b.start(), opt);
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIter) {
      res.ok = false;
      res.message = std::string("trajectory subproblem ") + to_string(sol.status) + ": " + sol.message;
      break;
    }
    const double eta = sol.x[sp.psi] * sp.to_bits;
    const Trajectory cand = sp.layout.read(sol.x);
    const Trajectory& old = uirs ? cur.traj_r : cur.traj_j;
    // Backtrack toward the warm start until the exact checks pass and the
    // true objective does not drop.
    double step = 0.0;
    for (double theta = 1.0; theta >= 1.0 / 128; theta *= 0.5) {
      Plan q = cur;
      (uirs ? q.traj_r : q.traj_j) = blend(old, cand, theta);
      if (uirs) apply_closed_form_beamforming(s, q);
      double val = 0.0;
      if (detail::plan_feasible(s, q, &val) && val >= cur_val) {
        step = theta;
        cur = std::move(q);
        cur_val = val;
        break;
      }
    }
    if (step == 0.0) {
      res.message = "no improving feasible step";
      break;
    }
    res.changed = true;
    if (step < 1.0) {
      res.message = "step shortened to " + std::to_string(step);
      break;
    }
    const double prev = res.eta.empty() ? -kInf : res.eta.back();
    res.eta.push_back(eta);
    if (std::isfinite(prev) && std::abs(eta - prev) <= tol * std::abs(eta)) break;
  }
  res.traj = uirs ? cur.traj_r : cur.traj_j;
  res.value = cur_val;
  return res;
}

}  // namespace

TrajectoryResult optimize_ucj_trajectory(const Scenario& s, const Plan& p, const SolverOptions& opt) {
  return run_trajectory_block(s, p, false, opt);
}

TrajectoryResult optimize_uirs_trajectory(const Scenario& s, const Plan& p, const SolverOptions& opt) {
  return run_trajectory_block(s, p, true, opt);
}

}  // namespace cplan
