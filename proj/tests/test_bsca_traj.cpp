#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "cplan/bsca.hpp"
#include "cplan/errors.hpp"
#include "test_util.hpp"

using namespace cplan;

namespace {

// Desk with a shorter horizon; UEs keep their seeded layout.
Scenario short_desk(double horizon) {
  Scenario s = testutil::load_config("desk.cfg");
  s.horizon = horizon;
  finalize_scenario(s);
  return s;
}

// Desk physics with explicit UEs and a short horizon.
Scenario toy_scenario(double horizon, double slot, std::vector<Vec3> ues, double p_tot) {
  Scenario s = testutil::load_config("desk.cfg");
  s.horizon = horizon;
  s.slot = slot;
  s.placement.reset();
  s.ues = std::move(ues);
  s.p_tot = p_tot;
  finalize_scenario(s);
  return s;
}

Trajectory hover(const Vec3& q, int N) {
  Trajectory t;
  t.positions.assign(N, q);
  t.velocities.assign(N, Vec3::Zero());
  return t;
}

// Hovering plan with a fixed schedule and signal power at half the covert bound.
Plan toy_plan(const Scenario& s, const std::vector<int>& schedule, double p_j) {
  const int N = s.slots;
  Plan p;
  p.alpha = Eigen::MatrixXi::Zero(N, s.K());
  for (int n = 0; n < N; ++n)
    if (schedule[n] >= 0) p.alpha(n, schedule[n]) = 1;
  p.traj_r = hover(s.station_r, N);
  p.traj_j = hover(s.station_j, N);
  p.p_j = Vec::Constant(N, p_j);
  p.p_a = Vec::Constant(N, 1.0);
  apply_closed_form_beamforming(s, p);
  Gains g = compute_gains(s, p);
  for (int n = 0; n < N; ++n) {
    int k = p.scheduled(n);
    double worst = 0.0;
    for (int m = 0; m < s.K(); ++m)
      if (m != k) worst = std::max(worst, g.g_ar(n, m) / (p_j * g.g_j(n, m)));
    p.p_a[n] = k < 0 ? 0.0 : std::min(s.p_a_max, 0.5 * s.epsilon / worst);
  }
  const double room = 0.9 * s.p_tot / s.slot - p.p_j.sum();
  REQUIRE(room > 0.0);
  if (p.p_a.sum() > room) p.p_a *= room / p.p_a.sum();
  return p;
}

// Three-slot trajectory through `mid` with the last velocity chosen to
// minimize propulsion power inside the acceleration limit.
Trajectory three_slot(const Vec3& station, const Vec3& mid, const Scenario& s, const FlightLimits& lim) {
  Trajectory t;
  t.positions = {station, mid, station};
  Vec3 v1 = (mid - station) / s.slot, v2 = -v1;
  double best = min_power_speed(s.propulsion, lim.v_max);
  double speed = std::clamp(best, std::max(0.0, v2.norm() - lim.a_max), std::min(lim.v_max, v2.norm() + lim.a_max));
  Vec3 dir = v2.norm() > 0 ? Vec3(v2 / v2.norm()) : Vec3::UnitX();
  t.velocities = {v1, v2, speed * dir};
  return t;
}

// Best feasible mAEE over the free waypoint on a 1 m grid.
double grid_oracle(const Scenario& s, const Plan& base, bool uirs) {
  const Vec3 station = uirs ? s.station_r : s.station_j;
  const FlightLimits& lim = uirs ? s.limits_r : s.limits_j;
  const int R = static_cast<int>(std::floor(lim.a_max * s.slot / 2.0));
  double best = 0.0;
  for (int i = -R; i <= R; ++i)
    for (int j = -R; j <= R; ++j) {
      if (i * i + j * j > R * R) continue;
      Plan q = base;
      (uirs ? q.traj_r : q.traj_j) = three_slot(station, station + Vec3(i, j, 0), s, lim);
      if (uirs) apply_closed_form_beamforming(s, q);
      CovertnessReport r = evaluate_mAEE(q, s);
      if (r.feasible()) best = std::max(best, r.mAEE);
    }
  return best;
}

bool nondecreasing(const std::vector<double>& v, double tol) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - tol * std::abs(v[i - 1])) return false;
  return true;
}

void check_flight(const Scenario& s, const Plan& p) {
  CHECK(check_flight_constraints(p.traj_r, s.limits_r, s.station_r, s.ap, s.permitted_radius,
                                 s.altitude_r(), s.slot)
            .empty());
  CHECK(check_flight_constraints(p.traj_j, s.limits_j, s.station_j, s.ap, s.permitted_radius,
                                 s.altitude_j(), s.slot)
            .empty());
  CHECK(check_separation(p.traj_r, p.traj_j, s.safety_distance).empty());
}

const std::vector<Vec3> kToyUes = {Vec3(150, 40, 0), Vec3(60, -120, 0)};

}  // namespace

TEST_CASE("UCJ trajectory on a three-slot toy matches a grid search") {
  Scenario s = toy_scenario(30, 10, kToyUes, 8);
  Plan p = toy_plan(s, {0, 1, 0}, 0.1);
  REQUIRE(evaluate_mAEE(p, s).feasible());
  TrajectoryResult r = optimize_ucj_trajectory(s, p);
  REQUIRE(r.ok);
  Plan moved = p;
  moved.traj_j = r.traj;
  CHECK(evaluate_mAEE(moved, s).feasible());
  double oracle = grid_oracle(s, p, false);
  MESSAGE("block " << r.value << " grid " << oracle);
  CHECK(std::abs(r.value - oracle) <= 0.02 * oracle);
  CHECK(nondecreasing(r.eta, 1e-9));
}

TEST_CASE("UIRS trajectory on a three-slot toy matches a grid search") {
  Scenario s = toy_scenario(30, 10, kToyUes, 8);
  Plan p = toy_plan(s, {0, 1, 0}, 0.1);
  REQUIRE(evaluate_mAEE(p, s).feasible());
  TrajectoryResult r = optimize_uirs_trajectory(s, p);
  REQUIRE(r.ok);
  Plan moved = p;
  moved.traj_r = r.traj;
  apply_closed_form_beamforming(s, moved);
  CHECK(evaluate_mAEE(moved, s).feasible());
  double oracle = grid_oracle(s, p, true);
  MESSAGE("block " << r.value << " grid " << oracle);
  CHECK(std::abs(r.value - oracle) <= 0.02 * oracle);
  CHECK(nondecreasing(r.eta, 1e-9));
}

TEST_CASE("trajectory blocks on the desk scenario") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);
  const double start = evaluate_mAEE(p, s).mAEE;

  TrajectoryResult j = optimize_ucj_trajectory(s, p);
  REQUIRE(j.ok);
  CHECK(nondecreasing(j.eta, 1e-9));
  Plan pj = p;
  pj.traj_j = j.traj;
  CovertnessReport rj = evaluate_mAEE(pj, s);
  CHECK(rj.feasible());
  CHECK(rj.mAEE >= start - 1e-9 * start);
  CHECK(rj.mAEE == doctest::Approx(j.value).epsilon(1e-12));
  check_flight(s, pj);

  TrajectoryResult r = optimize_uirs_trajectory(s, pj);
  REQUIRE(r.ok);
  CHECK(nondecreasing(r.eta, 1e-9));
  Plan pr = pj;
  pr.traj_r = r.traj;
  apply_closed_form_beamforming(s, pr);
  CovertnessReport rr = evaluate_mAEE(pr, s);
  CHECK(rr.feasible());
  CHECK(rr.mAEE >= rj.mAEE - 1e-9 * rj.mAEE);
  check_flight(s, pr);
}

TEST_CASE("UIRS block is stationary at its fixed point") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);
  double prev = evaluate_mAEE(p, s).mAEE;
  for (int round = 0; round < 30; ++round) {
    TrajectoryResult r = optimize_uirs_trajectory(s, p);
    REQUIRE(r.ok);
    p.traj_r = r.traj;
    apply_closed_form_beamforming(s, p);
    const double moved = std::abs(r.value - prev);
    prev = r.value;
    if (!r.changed || moved <= 1e-6 * r.value) break;
  }
  TrajectoryResult once = optimize_uirs_trajectory(s, p);
  REQUIRE(once.ok);
  CHECK(std::abs(once.value - prev) <= 1e-6 * prev);
}

TEST_CASE("joint power and scheduling on a two-slot toy") {
  Scenario s = toy_scenario(0.2, 0.1, kToyUes, 0.25);
  Plan base = toy_plan(s, {0, 1}, 0.5);
  REQUIRE(evaluate_mAEE(base, s).feasible());
  JointResult jr = joint_power_scheduling(s, base, PenaltySchedule{});

  Plan out = base;
  out.alpha = jr.alpha;
  out.p_a = jr.p_a;
  out.p_j = jr.p_j;
  apply_closed_form_beamforming(s, out);
  CovertnessReport rep = evaluate_mAEE(out, s);
  CHECK(rep.feasible());
  CHECK(rep.mAEE == doctest::Approx(jr.value).epsilon(1e-12));

  // Brute force: both orders of the two UEs, each slot on a 200 x 200 grid
  // over its covert-feasible powers, energy budget shared.
  const int res = 200;
  const double budget = s.p_tot / s.slot;
  double brute = 0.0;
  for (const auto& order : std::vector<std::vector<int>>{{0, 1}, {1, 0}}) {
    Plan q = toy_plan(s, order, 0.5);
    Gains g = compute_gains(s, q);
    Vec P = evaluate_mAEE(q, s).power;
    struct Pt {
      double e, v;
    };
    std::vector<std::vector<Pt>> grids(2);
    for (int n = 0; n < 2; ++n) {
      int k = order[n], m = 1 - k;
      double ratio = g.g_ar(n, m) / g.g_j(n, m);
      for (int i = 0; i <= res; ++i) {
        double pj = s.p_j_max * i / res;
        double top = std::min(s.p_a_max, s.epsilon * pj / ratio);
        for (int j = 0; j <= res; ++j) {
          double pa = top * j / res;
          double rate = s.bandwidth * std::log2(1.0 + pa * g.g_ar(n, k) / (0.5 * pj * g.g_j(n, k) + s.noise[k]));
          grids[n].push_back({pa + pj, rate / (s.slots * P[n])});
        }
      }
    }
    auto& b = grids[1];
    std::sort(b.begin(), b.end(), [](const Pt& x, const Pt& y) { return x.e < y.e; });
    std::vector<double> prefix(b.size());
    double run = 0.0;
    for (size_t i = 0; i < b.size(); ++i) prefix[i] = run = std::max(run, b[i].v);
    for (const Pt& a : grids[0]) {
      auto it = std::upper_bound(b.begin(), b.end(), budget - a.e, [](double e, const Pt& x) { return e < x.e; });
      if (it != b.begin()) brute = std::max(brute, std::min(a.v, prefix[it - b.begin() - 1]));
    }
  }
  MESSAGE("joint " << jr.value << " brute force " << brute);
  CHECK(std::abs(jr.value - brute) <= 0.02 * brute);
  CHECK(nondecreasing(jr.surrogate, 1e-9));
}

TEST_CASE("joint design never loses to the sequential design") {
  Scenario s = short_desk(3.0);
  Plan p = initial_feasible_plan(s);
  JointResult jr = joint_power_scheduling(s, p, PenaltySchedule{});

  SchedulingResult sr = optimize_scheduling(scheduling_problem(s, p), PenaltySchedule{});
  Plan seq = p;
  seq.alpha = sr.alpha;
  for (int n = 0; n < seq.slots(); ++n)
    if (seq.scheduled(n) < 0) seq.p_a[n] = seq.p_j[n] = 0.0;
  apply_closed_form_beamforming(s, seq);
  PowerResult pw = optimize_powers(power_problem(s, seq), seq.p_a, seq.p_j);
  seq.p_a = pw.p_a;
  seq.p_j = pw.p_j;
  CovertnessReport rs = evaluate_mAEE(seq, s);
  REQUIRE(rs.feasible());
  CHECK(jr.value >= rs.mAEE * (1 - 1e-6));
  CHECK(nondecreasing(jr.surrogate, 1e-9));
}

TEST_CASE("outer loop history is monotone") {
  Scenario s = short_desk(3.0);
  for (Mode m : {Mode::JTCD, Mode::CD, Mode::TD, Mode::IFTR}) {
    BscaOptions o;
    o.mode = m;
    BscaResult r = run_bsca(s, o);
    INFO(to_string(m));
    REQUIRE(!r.history.empty());
    CHECK(static_cast<int>(r.history.size()) <= s.optimizer.max_outer + 1);
    std::vector<double> v;
    for (auto& h : r.history) v.push_back(h.mAEE);
    CHECK(nondecreasing(v, 1e-9));
    CovertnessReport rep = evaluate_mAEE(r.plan, s);
    CHECK(rep.feasible());
    CHECK(rep.mAEE == doctest::Approx(v.back()).epsilon(1e-9));
    if (m == Mode::IFTR) CHECK(r.history.size() == 1);
  }
}
