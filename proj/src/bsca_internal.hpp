#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cplan/bsca.hpp"

namespace cplan::detail {

// Gains for serving UE k in slot n with the phases aligned to k.
struct AlignedGains {
  Mat g_ar;                  // N x K, gain at k
  std::vector<Mat> g_cross;  // per slot, K x K: (k, m) gain at UE m when aligned to k
  Mat g_j;                   // N x K, jammer gain
};

AlignedGains aligned_gains(const Scenario& s, const Plan& p);

// P_r + P_j in every slot.
Vec slot_power(const Scenario& s, const Plan& p);

// Converts a rate in nats/s/Hz in slot n to that slot's share of the
// per-UE average energy efficiency in bits/J.
inline double rate_weight(const Scenario& s, double power) {
  return s.bandwidth / std::log(2.0) / (s.slots * power);
}

// Powers the initial plan uses; substituted for empty slots when pricing a
// candidate schedule.
std::pair<double, double> reference_powers(const Scenario& s);

// True when every validator passes.
bool plan_feasible(const Scenario& s, const Plan& p, double* mAEE = nullptr);

// Accumulates variable values next to a program so the warm start stays
// aligned with the variable indices.
struct Builder {
  ConvexProgram prog;
  std::vector<double> x0;
  int var(const std::string& name, double value, double lb = -kInf, double ub = kInf) {
    int i = prog.add_var(name, lb, ub);
    x0.push_back(value);
    return i;
  }
  // tau <= sqrt(a), started just below sqrt(a) at the current point.
  int sqrt_epigraph(const std::string& name, const Affine& a) {
    const double value = std::sqrt(std::max(a.eval(start()), 0.0)) * (1.0 - 1e-6);
    int i = prog.add_sqrt_epigraph(name, a);
    x0.push_back(value);
    return i;
  }
  Vec start() const { return Vec::Map(x0.data(), static_cast<Eigen::Index>(x0.size())); }
};

SolverOptions block_options(const Scenario& s, const SolverOptions& base);

}  // namespace cplan::detail
