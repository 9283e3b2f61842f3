#include "cplan/bsca.hpp"

#include <chrono>
#include <optional>
#include <cmath>
#include <iomanip>

#include "bsca_internal.hpp"
#include "cplan/errors.hpp"

namespace cplan {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::JTCD: return "JTCD";
    case Mode::CD: return "CD";
    case Mode::TD: return "TD";
    case Mode::IFTR: return "IFTR";
  }
  return "?";
}

const char* to_string(BeamformingMode m) {
  return m == BeamformingMode::ClosedForm ? "closed-form" : "rm-sca";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::JTCD, Mode::CD, Mode::TD, Mode::IFTR})
    if (s == to_string(m)) return m;
  throw ParameterError("unknown mode '" + s + "' (JTCD, CD, TD, IFTR)");
}

BeamformingMode parse_beamforming(const std::string& s) {
  if (s == "closed-form") return BeamformingMode::ClosedForm;
  if (s == "rm-sca") return BeamformingMode::RmSca;
  throw ParameterError("unknown beamforming mode '" + s + "' (closed-form, rm-sca)");
}

namespace {

HistoryRow history_row(int it, const CovertnessReport& r) {
  HistoryRow h;
  h.iteration = it;
  h.mAEE = r.mAEE;
  h.mACT = r.mACT;
  h.APC = r.APC;
  return h;
}

// Newly served slots without power get the initial plan's levels, scaled
// down together when that would exceed the energy budget.
void power_new_slots(const Scenario& s, Plan& p) {
  const auto [ref_a, ref_j] = detail::reference_powers(s);
  for (int n = 0; n < p.slots(); ++n) {
    if (p.scheduled(n) < 0) {
      p.p_a[n] = p.p_j[n] = 0.0;
    } else if (p.p_a[n] <= 0) {
      p.p_a[n] = ref_a;
      p.p_j[n] = ref_j;
    }
  }
  const double e = energy_used(s, p.p_a, p.p_j);
  if (e > s.p_tot && e > 0) {
    p.p_a *= s.p_tot / e * (1 - 1e-12);
    p.p_j *= s.p_tot / e * (1 - 1e-12);
  }
}

void rm_sca_phases(const Scenario& s, Plan& p, const PenaltySchedule& pen, const SolverOptions& opt) {
  apply_closed_form_beamforming(s, p);
  for (int n = 0; n < p.slots(); ++n) {
    if (p.scheduled(n) < 0 || p.p_a[n] <= 0) continue;
    RmScaResult r = rm_sca_beamforming(beamforming_slot(s, p, n), p.phi[n], pen, 30, opt);
    p.phi[n] = r.phi;
  }
}

}  // namespace

BscaResult run_bsca(const Scenario& s, const BscaOptions& opts) {
  BscaResult out;
  Plan plan = initial_feasible_plan(s);
  CovertnessReport rep = evaluate_mAEE(plan, s);
  if (!rep.feasible())
    throw InfeasibleError(rep.violations.front().constraint, "initial plan fails validation");
  out.history.push_back(history_row(0, rep));
  double cur = rep.mAEE;
  if (opts.mode == Mode::IFTR) {
    out.plan = plan;
    out.converged = true;
    return out;
  }

  const auto& o = s.optimizer;
  const PenaltySchedule pen{o.penalty_init, o.penalty_growth, o.penalty_max};
  SolverOptions sopt;
  sopt.gap_tol = o.gap_tol;
  sopt.feas_tol = o.feas_tol;
  const bool comm = opts.mode == Mode::JTCD || opts.mode == Mode::CD;
  const bool traj = opts.mode == Mode::JTCD || opts.mode == Mode::TD;

  int consecutive_failures = 0;
  for (int it = 1; it <= o.max_outer; ++it) {
    const double prev = cur;
    HistoryRow row;
    int attempted = 0, failed = 0;
    auto log = [&](const std::string& msg) {
      out.events.push_back("iteration " + std::to_string(it) + ": " + msg);
    };
    // Runs one block; `fn` returns a candidate plan or nothing on failure.
    auto block = [&](const std::string& name, auto&& fn) {
      auto t0 = std::chrono::steady_clock::now();
      ++attempted;
      try {
        std::optional<Plan> cand = fn();
        if (!cand) {
          ++failed;
          log(name + " failed");
        } else {
          double val = 0.0;
          if (detail::plan_feasible(s, *cand, &val) && val >= cur) {
            plan = std::move(*cand);
            cur = val;
          } else {
            log(name + " rejected (no feasible improvement)");
          }
        }
      } catch (const PlannerError& e) {
        ++failed;
        log(name + " failed: " + e.what());
      }
      row.block_ms.emplace_back(
          name, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    };

    if (comm && opts.joint_power_scheduling) {
      block("joint", [&]() -> std::optional<Plan> {
        JointResult j = joint_power_scheduling(s, plan, pen, sopt);
        Plan q = plan;
        q.alpha = j.alpha;
        q.p_a = j.p_a;
        q.p_j = j.p_j;
        apply_closed_form_beamforming(s, q);
        if (j.used_joint) log("joint design kept over sequential");
        return q;
      });
    } else if (comm) {
      block("scheduling", [&]() -> std::optional<Plan> {
        SchedulingResult r = optimize_scheduling(scheduling_problem(s, plan), pen, opts.bnb_nodes);
        if (!r.binary) log("scheduling penalty stalled; rounded relaxation used");
        Plan q = plan;
        q.alpha = r.alpha;
        power_new_slots(s, q);
        apply_closed_form_beamforming(s, q);
        return q;
      });
      block("powers", [&]() -> std::optional<Plan> {
        PowerResult r = optimize_powers(power_problem(s, plan), plan.p_a, plan.p_j, sopt);
        if (!r.ok) log("powers: " + r.message);
        Plan q = plan;
        q.p_a = r.p_a;
        q.p_j = r.p_j;
        return q;
      });
    }
    if (traj) {
      block("ucj", [&]() -> std::optional<Plan> {
        TrajectoryResult r = optimize_ucj_trajectory(s, plan, sopt);
        if (!r.ok) return std::nullopt;
        Plan q = plan;
        q.traj_j = r.traj;
        return q;
      });
      block("uirs", [&]() -> std::optional<Plan> {
        TrajectoryResult r = optimize_uirs_trajectory(s, plan, sopt);
        if (!r.ok) return std::nullopt;
        Plan q = plan;
        q.traj_r = r.traj;
        apply_closed_form_beamforming(s, q);
        return q;
      });
    }
    block("phi", [&]() -> std::optional<Plan> {
      Plan q = plan;
      if (opts.beamforming == BeamformingMode::RmSca)
        rm_sca_phases(s, q, pen, sopt);
      else
        apply_closed_form_beamforming(s, q);
      return q;
    });

    rep = evaluate_mAEE(plan, s);
    HistoryRow h = history_row(it, rep);
    h.block_ms = row.block_ms;
    out.history.push_back(h);
    cur = rep.mAEE;

    consecutive_failures = failed == attempted ? consecutive_failures + 1 : 0;
    if (consecutive_failures >= 2) {
      std::string diag;
      for (const auto& e : out.events) diag += "\n  " + e;
      throw PlannerError("solver", "every block failed in two consecutive iterations:" + diag);
    }
    const double frac = prev > 0 ? (cur - prev) / prev : (cur > 0 ? kInf : 0.0);
    if (frac < o.eps_outer) {
      out.converged = true;
      break;
    }
  }
  out.plan = plan;
  return out;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& h, bool with_times) {
  os << "iteration,mAEE,mACT_bits,APC_watts,block_times_ms\n" << std::setprecision(17);
  for (const auto& r : h) {
    os << r.iteration << ',' << r.mAEE << ',' << r.mACT << ',' << r.APC << ',';
    for (size_t i = 0; with_times && i < r.block_ms.size(); ++i)
      os << (i ? ";" : "") << r.block_ms[i].first << '=' << std::setprecision(6) << r.block_ms[i].second
         << std::setprecision(17);
    os << '\n';
  }
}

void write_timings_csv(std::ostream& os, const std::vector<HistoryRow>& h) {
  os << "iteration,block,ms\n" << std::setprecision(6);
  for (const auto& r : h)
    for (const auto& [name, ms] : r.block_ms) os << r.iteration << ',' << name << ',' << ms << '\n';
}

}  // namespace cplan
