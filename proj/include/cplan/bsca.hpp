#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cplan/covert.hpp"
#include "cplan/scenario.hpp"
#include "cplan/solver.hpp"

namespace cplan {

// ---- surrogate building blocks ------------------------------------------

// gamma = sqrt(f) / g, the maximizer of 2 gamma sqrt(f) - gamma^2 g.
double fp_gamma_update(double f_lb, double g_up);
double fp_surrogate(double gamma, double f, double g);

// ln(1 + a exp(-b (x + y)) / (x^c y^c)) and its first-order expansion at
// (x_lo, y_lo), which is a global lower bound since the function is convex.
double upsilon(double x, double y, double a, double b, double c);
double upsilon_lower_bound(double x, double y, double x_lo, double y_lo, double a, double b,
                           double c);
// d/dx and d/dy of upsilon at (x, y).
std::pair<double, double> upsilon_gradient(double x, double y, double a, double b, double c);

struct BilinearBounds {
  double lower = 0.0;
  double upper = 0.0;
};
// Concave lower and convex upper bounds of x*y, both tight at (x_lo, y_lo).
BilinearBounds bilinear_bounds(double x, double y, double x_lo, double y_lo);

struct PenaltySchedule {
  double init = 1e-3;
  double growth = 5.0;
  double max = 1e6;
};

// ---- scheduling ----------------------------------------------------------

struct SchedulingProblem {
  Mat A;  // N x K, objective contribution when UE k is served in slot n (>= 0)
  Mat B;  // N x K, minimum warden detection error if UE k is served in slot n
  double eps = 0.01;
  bool allowed(int n, int k) const { return B(n, k) >= 1.0 - eps - 1e-12; }
};

struct SchedulingResult {
  Eigen::MatrixXi alpha;
  double value = 0.0;  // min_k sum_n A(n,k) alpha(n,k)
  bool binary = false;  // penalty drove the relaxation to a binary point
  bool exact = false;   // branch and bound closed the gap
  int lp_solves = 0;
};

// Penalty-SCA on the LP relaxation, rounding, then branch and bound over
// the relaxation with at most `node_budget` nodes.
SchedulingResult optimize_scheduling(const SchedulingProblem& p, const PenaltySchedule& pen,
                                     int node_budget = 256);

double schedule_value(const Mat& A, const Eigen::MatrixXi& alpha);

// ---- powers ---------------------------------------------------------------

struct PowerSlot {
  int ue = -1;           // scheduled UE, -1 when empty
  double weight = 0.0;   // multiplies the rate in nats
  double g_bob = 0.0;    // cascaded gain at the scheduled UE
  double g_jam = 0.0;    // jammer gain at the scheduled UE
  double noise = 1.0;
  std::vector<double> warden_ratio;  // g_arm / g_jm per warden
};

// LogDifference keeps the jamming log term and linearizes it; each step can
// only lower p_j by about p_j * SINR. SinrSlack bounds the SINR through a
// majorized product and moves p_j geometrically.
enum class PowerSurrogate { SinrSlack, LogDifference };

struct PowerProblem {
  std::vector<PowerSlot> slots;
  int K = 0;
  double p_a_max = 1.0;
  double p_j_max = 1.0;
  double sum_budget = 0.0;  // sum_n (p_a + p_j) <= sum_budget
  double eps = 0.01;
  double tol = 1e-3;
  int max_iter = 10;
  PowerSurrogate surrogate = PowerSurrogate::SinrSlack;
};

struct PowerResult {
  Vec p_a;
  Vec p_j;
  double value = 0.0;  // min over UEs of the weighted rate sum
  std::vector<double> surrogate;  // per SCA iteration
  bool ok = true;
  std::string message;
};

double power_objective(const PowerProblem& p, const Vec& p_a, const Vec& p_j);
PowerResult optimize_powers(const PowerProblem& p, const Vec& p_a0, const Vec& p_j0,
                            const SolverOptions& opt = {});

// ---- beamforming ----------------------------------------------------------

CVec closed_form_beamforming(const Vec3& q_r, const Vec3& q_a, const Vec3& q_k,
                             const IrsGeometry& irs, double wavelength);

// One slot of the lifted beamforming problem: maximize tr(A W) subject to
// diag(W) <= 1, W psd and c_m tr(B_m W) <= eps for every warden m.
struct BeamformingSlot {
  CVec a;                    // tr(A W) = |a^H u|^2 for W = u u^H
  std::vector<CVec> b;       // one per warden
  std::vector<double> c;     // covert coefficients
  double eps = 0.01;
};

struct SdrResult {
  CMat W;
  double value = 0.0;
  bool ok = false;
};

BeamformingSlot beamforming_slot(const Scenario& s, const Plan& p, int n);
SdrResult sdr_beamforming(const BeamformingSlot& slot, const SolverOptions& opt = {});

struct RmScaResult {
  CVec phi;            // reflection coefficients, |phi_l| <= 1
  double value = 0.0;  // |a^H phi|^2
  std::vector<double> psi;  // rank penalty slack per iteration
  std::vector<double> mu;
  bool rank_one = false;
  bool fallback = false;
  int iterations = 0;
};

RmScaResult rm_sca_beamforming(const BeamformingSlot& slot, const CVec& closed_form,
                               const PenaltySchedule& pen, int max_iter = 30,
                               const SolverOptions& opt = {});

// ---- trajectories -----------------------------------------------------------

struct TrajectoryResult {
  Trajectory traj;
  std::vector<double> eta;  // surrogate optimum per inner iteration
  double value = 0.0;       // true mAEE after the update
  bool ok = true;
  bool changed = false;
  std::string message;
};

TrajectoryResult optimize_ucj_trajectory(const Scenario& s, const Plan& p, const SolverOptions& opt = {});
TrajectoryResult optimize_uirs_trajectory(const Scenario& s, const Plan& p, const SolverOptions& opt = {});

// ---- joint power and scheduling ---------------------------------------------

struct JointResult {
  Eigen::MatrixXi alpha;
  Vec p_a;
  Vec p_j;
  double value = 0.0;
  std::vector<double> surrogate;
  bool used_joint = false;  // false when the sequential design was better
};

JointResult joint_power_scheduling(const Scenario& s, const Plan& p, const PenaltySchedule& pen,
                                   const SolverOptions& opt = {});

// ---- plan-level blocks --------------------------------------------------------

// Coefficients of the scheduling problem for a plan: A is the energy
// efficiency of serving k in slot n with aligned beamforming, B its minimum
// detection error.
SchedulingProblem scheduling_problem(const Scenario& s, const Plan& p);
PowerProblem power_problem(const Scenario& s, const Plan& p);

enum class Mode { JTCD, CD, TD, IFTR };
enum class BeamformingMode { ClosedForm, RmSca };
const char* to_string(Mode m);
const char* to_string(BeamformingMode m);
Mode parse_mode(const std::string& s);
BeamformingMode parse_beamforming(const std::string& s);

struct BscaOptions {
  Mode mode = Mode::JTCD;
  BeamformingMode beamforming = BeamformingMode::ClosedForm;
  bool joint_power_scheduling = false;
  int bnb_nodes = 16;
};

struct HistoryRow {
  int iteration = 0;
  double mAEE = 0.0;
  double mACT = 0.0;
  double APC = 0.0;
  std::vector<std::pair<std::string, double>> block_ms;
};

struct BscaResult {
  Plan plan;
  std::vector<HistoryRow> history;
  std::vector<std::string> events;
  bool converged = false;
};

BscaResult run_bsca(const Scenario& s, const BscaOptions& opts = {});

// Wall times make the block_times_ms column differ between runs; leave it
// empty when the file must be reproducible.
void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& h, bool with_times = true);
void write_timings_csv(std::ostream& os, const std::vector<HistoryRow>& h);

}  // namespace cplan
