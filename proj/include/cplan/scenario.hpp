#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cplan/channel.hpp"
#include "cplan/kinematics.hpp"
#include "cplan/solver.hpp"

namespace cplan {

// Random UE layout: area-uniform over an annulus around the AP.
struct UePlacement {
  int count = 0;
  std::uint64_t seed = 0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  bool operator==(const UePlacement&) const = default;
};

// Tolerances and penalty schedules of the block-SCA optimizer.
struct OptimizerSettings {
  double eps_outer = 0.1;
  double eps_ucj = 1e-3;
  double eps_uirs = 1e-3;
  double eps_power = 1e-3;
  int max_outer = 10;
  int max_inner = 10;
  double gap_tol = 1e-6;
  double feas_tol = 1e-8;
  double penalty_init = 1e-3;
  double penalty_growth = 5.0;
  double penalty_max = 1e6;
  bool operator==(const OptimizerSettings&) const = default;
};

struct Scenario {
  // geometry
  Vec3 ap = Vec3::Zero();
  std::vector<Vec3> ues;
  std::optional<UePlacement> placement;  // set when `ues` was generated
  Vec3 station_r = Vec3(100, 0, 50);
  Vec3 station_j = Vec3(80, 0, 50);
  double permitted_radius = 250.0;

  // kinematics
  double horizon = 30.0;
  double slot = 0.1;
  int slots = 300;
  FlightLimits limits_r;
  FlightLimits limits_j;
  double safety_distance = 10.0;

  // power
  double p_a_max = 1.0;
  double p_j_max = 1.0;
  double p_tot = 40.0;
  double bandwidth = 0.5e9;
  double noise_dbm = -180.0;
  std::vector<double> noise;  // watts per UE

  // atmosphere
  AtmosphereParams atmosphere;
  std::optional<double> kappa_target;  // calibrates humidity at 0.3 THz
  double kappa = 0.0;                  // derived
  std::string kappa_warning;
  double path_loss_exponent = 2.0;

  IrsGeometry irs;
  PropulsionConstants propulsion;
  double epsilon = 0.01;
  OptimizerSettings optimizer;

  int K() const { return static_cast<int>(ues.size()); }
  int L() const { return irs.size(); }
  double altitude_r() const { return station_r.z(); }
  double altitude_j() const { return station_j.z(); }
  Propagation propagation() const { return {atmosphere.f_c, kappa, path_loss_exponent}; }
};

constexpr double kCalibrationFrequency = 0.3e12;

// Parses the INI-style config. Throws SchemaError with a field path for
// malformed or unknown keys and ConstraintError for violated invariants.
Scenario load_scenario(const std::string& text);
std::string serialize_scenario(const Scenario& s);
bool same_scenario(const Scenario& a, const Scenario& b);

// Recomputes derived fields (N, noise in watts, kappa, UE positions) and
// checks every invariant.
void finalize_scenario(Scenario& s);

std::vector<Vec3> place_ues(std::uint64_t seed, int count, double r1, double r2, const Vec3& center);

struct Plan {
  Eigen::MatrixXi alpha;      // N x K, binary
  Vec p_a;                    // N
  Vec p_j;                    // N, peak AN power
  std::vector<CVec> phi;      // N x L reflection coefficients
  Trajectory traj_r;
  Trajectory traj_j;

  int slots() const { return static_cast<int>(p_a.size()); }
  // Index of the scheduled UE in slot n (0-based), or -1.
  int scheduled(int n) const;
};

// Throws ShapeError when the plan dimensions do not match the scenario.
void check_plan_shape(const Scenario& s, const Plan& p);

// Schedule binary with at most one UE per slot, |phi| <= 1, power limits and
// the energy budget. Returns human-readable violations.
std::vector<Violation> check_communication_constraints(const Scenario& s, const Plan& p);

// Phases aligned to each slot's scheduled UE; unit coefficients when empty.
void apply_closed_form_beamforming(const Scenario& s, Plan& p);

Plan initial_feasible_plan(const Scenario& s);

// plan.csv: slot, ue (1-based, 0 when empty), powers, then position and
// velocity of both UAVs. phases.csv: slot, element, amplitude, phase_rad,
// re, im. Numbers use the shortest round-trip form, so reading back gives
// the same doubles.
void write_plan_csv(std::ostream& os, const Plan& p);
void write_phases_csv(std::ostream& os, const Plan& p);
// Throws ShapeError when the files do not match the scenario's N, K or L.
Plan read_plan_csv(const Scenario& s, const std::string& plan_csv, const std::string& phases_csv);

// Energy budget: slot * sum_n (p_a[n] + p_j[n]) <= p_tot.
double energy_used(const Scenario& s, const Vec& p_a, const Vec& p_j);

}  // namespace cplan
