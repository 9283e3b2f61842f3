#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cplan/scenario.hpp"

namespace cplan {

double rate_lower_bound(double p_a, double p_j_peak, double g_ark, double g_jk, double noise,
                        double bandwidth);

struct DetectionContext {
  double p_a = 0.0;
  double p_j_peak = 0.0;
  double g_arm = 0.0;
  double g_jm = 0.0;
  double noise = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  // p_j_peak g_jm >= p_a g_arm; otherwise a warden can reach zero error.
  bool nontrivial() const { return p_j_peak * g_jm >= p_a * g_arm; }
  double chi1() const { return p_a * g_arm + noise; }
  double chi2() const { return p_j_peak * g_jm + noise; }
  double chi3() const { return p_a * g_arm + p_j_peak * g_jm + noise; }
};

struct DetectionError {
  double p_fa = 0.0;
  double p_md = 0.0;
  double zeta = 0.0;
  bool zero_error_achievable = false;
};

// Exact false-alarm and missed-detection rates of the radiometer at the
// context's threshold with uniformly distributed jamming power.
DetectionError detection_error_piecewise(const DetectionContext& d);

struct MinDetection {
  double zeta = 1.0;
  bool zero_error_achievable = false;
};

// 1 - p_a g_arm / (p_j g_jm), clamped to [0, 1].
MinDetection min_detection_error(double p_a, double p_j_peak, double g_arm, double g_jm);

struct EmpiricalDetection {
  double p_fa = 0.0;
  double p_md = 0.0;
  long long trials = 0;
};

// Monte-Carlo radiometer. Trials are split into fixed-size blocks seeded
// from (seed, block index), so results do not depend on `workers`.
EmpiricalDetection mc_detection_oracle(const DetectionContext& d, long long trials,
                                       std::uint64_t seed, int workers = 1);

// Per-slot channel power gains for every UE.
struct Gains {
  Mat g_ar;        // N x K, cascaded gain with the plan's reflection coefficients
  Mat g_ar_bound;  // N x K, L^2 |h~|^2 (all elements aligned)
  Mat g_j;         // N x K, jammer to UE
  Mat dist_ra;     // N x 1, |q_r - q_a|
  Mat dist_rk;     // N x K
  Mat dist_jk;     // N x K
};

Gains compute_gains(const Scenario& s, const Plan& p);

struct CovertCheck {
  Vec margin;  // min over wardens of zeta* minus (1 - eps); eps for empty slots
  Vec zeta_min;
  std::vector<int> failing;  // 0-based slots with margin below -1e-9
  bool vacuous = false;      // fewer than two UEs
  bool passed() const { return failing.empty(); }
};

constexpr double kCovertTol = 1e-9;

CovertCheck covertness_check(const Plan& p, const Gains& g, double eps);

struct CovertnessReport {
  Mat zeta_star;  // N x K, warden m's zeta* for the scheduled UE; NaN for m == k
  Vec zeta_min;   // N
  Vec margin;     // N
  Mat rate_lb;    // N x K, bits/s
  Vec rate_served;  // N, rate of the scheduled UE, 0 when empty
  Vec power;      // N, P_f,r + P_f,j in watts
  Vec ee;         // K, per-UE average energy efficiency in bits/J
  Vec throughput; // K, per-UE average covert throughput in bits/s
  double mAEE = 0.0;
  double mACT = 0.0;
  double APC = 0.0;
  bool covert_ok = true;
  bool vacuous = false;
  std::vector<Violation> violations;  // every validator, C1-C7
  bool feasible() const { return violations.empty(); }
};

CovertnessReport evaluate_mAEE(const Plan& p, const Scenario& s);

// mAEE recomputed from the raw report fields and the plan's schedule.
double recompute_mAEE(const CovertnessReport& r, const Plan& p);

void write_report_json(std::ostream& os, const CovertnessReport& r);
void write_report_csv(std::ostream& os, const CovertnessReport& r);

}  // namespace cplan
