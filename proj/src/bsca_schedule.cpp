#include <algorithm>
#include <cmath>
#include <functional>

#include "cplan/bsca.hpp"
#include "cplan/errors.hpp"

namespace cplan {

double fp_gamma_update(double f_lb, double g_up) {
  if (!(g_up > 0.0)) throw ParameterError("fp_gamma_update: g must be positive");
  if (f_lb < 0.0) throw ParameterError("fp_gamma_update: f must be nonnegative");
  return std::sqrt(f_lb) / g_up;
}

double fp_surrogate(double gamma, double f, double g) {
  return 2.0 * gamma * std::sqrt(std::max(f, 0.0)) - gamma * gamma * g;
}

namespace {

void check_upsilon_domain(double x, double y, double a, double b, double c) {
  if (!(x > 0.0 && y > 0.0)) throw ParameterError("upsilon: x and y must be positive");
  if (a < 0.0 || b < 0.0 || c < 0.0) throw ParameterError("upsilon: a, b, c must be nonnegative");
}

// Exponent z with upsilon = ln(1 + e^z).
double upsilon_exponent(double x, double y, double a, double b, double c) {
  return std::log(a) - b * (x + y) - c * (std::log(x) + std::log(y));
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double logistic(double z) { return z > 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

double upsilon(double x, double y, double a, double b, double c) {
  check_upsilon_domain(x, y, a, b, c);
  if (a == 0.0) return 0.0;
  return softplus(upsilon_exponent(x, y, a, b, c));
}

std::pair<double, double> upsilon_gradient(double x, double y, double a, double b, double c) {
  check_upsilon_domain(x, y, a, b, c);
  if (a == 0.0) return {0.0, 0.0};
  const double s = logistic(upsilon_exponent(x, y, a, b, c));
  return {-(b + c / x) * s, -(b + c / y) * s};
}

double upsilon_lower_bound(double x, double y, double x_lo, double y_lo, double a, double b,
                           double c) {
  check_upsilon_domain(x, y, a, b, c);
  auto [gx, gy] = upsilon_gradient(x_lo, y_lo, a, b, c);
  return upsilon(x_lo, y_lo, a, b, c) + gx * (x - x_lo) + gy * (y - y_lo);
}

BilinearBounds bilinear_bounds(double x, double y, double x_lo, double y_lo) {
  // xy = ((x+y)^2 - (x-y)^2) / 4; linearize the subtracted or the added square.
  const double sp = x + y, sm = x - y, sp0 = x_lo + y_lo, sm0 = x_lo - y_lo;
  BilinearBounds b;
  b.lower = 0.25 * (sp0 * sp0 + 2.0 * sp0 * (sp - sp0) - sm * sm);
  b.upper = 0.25 * (sp * sp - sm0 * sm0 - 2.0 * sm0 * (sm - sm0));
  return b;
}

double schedule_value(const Mat& A, const Eigen::MatrixXi& alpha) {
  if (A.cols() == 0) return 0.0;
  double best = kInf;
  for (int k = 0; k < A.cols(); ++k) {
    double acc = 0.0;
    for (int n = 0; n < A.rows(); ++n) acc += A(n, k) * alpha(n, k);
    best = std::min(best, acc);
  }
  return best;
}

namespace {

// Per-slot state during the search: -2 free, -1 empty, k fixed to UE k.
constexpr int kFree = -2;

struct Relaxation {
  Mat alpha;  // N x K
  double psi = -kInf;
  bool ok = false;
};

class Scheduler {
 public:
  Scheduler(const SchedulingProblem& p) : p_(p), N_(static_cast<int>(p.A.rows())), K_(static_cast<int>(p.A.cols())) {
    double amax = p.A.size() ? p.A.maxCoeff() : 0.0;
    scale_ = amax > 0 ? 1.0 / amax : 1.0;
    opt_.gap_tol = 1e-10;
  }

  // LP relaxation with the linearized binary penalty when alpha_lo is given.
  Relaxation relax(const std::vector<int>& fix, double mu, const Mat* alpha_lo) {
    ++solves;
    ConvexProgram prog;
    std::vector<double> x0;
    Mat idx = Mat::Constant(N_, K_, -1);
    Vec fixed_sum = Vec::Zero(K_);
    for (int n = 0; n < N_; ++n) {
      if (fix[n] >= 0) fixed_sum[fix[n]] += scale_ * p_.A(n, fix[n]);
      if (fix[n] != kFree) continue;
      int opts = 0;
      for (int k = 0; k < K_; ++k) opts += p_.allowed(n, k);
      Affine row(-1.0);
      for (int k = 0; k < K_; ++k) {
        if (!p_.allowed(n, k)) continue;
        int v = prog.add_var("a" + std::to_string(n) + "_" + std::to_string(k), 0.0);
        idx(n, k) = v;
        x0.push_back(1.0 / (opts + 1));
        row.add(v, 1.0);
      }
      if (opts) prog.add_le("slot" + std::to_string(n), row);
    }
    Vec x = Vec::Map(x0.data(), x0.size());
    double psi0 = kInf;
    std::vector<Affine> served(K_);
    for (int k = 0; k < K_; ++k) {
      served[k] = Affine(fixed_sum[k]);
      for (int n = 0; n < N_; ++n)
        if (idx(n, k) >= 0) served[k].add(static_cast<int>(idx(n, k)), scale_ * p_.A(n, k));
      psi0 = std::min(psi0, served[k].eval(x));
    }
    int psi = prog.add_var("psi");
    Affine obj = Affine::var(psi);
    std::vector<double> xs(x0);
    xs.push_back(psi0 - 1.0);
    for (int k = 0; k < K_; ++k) prog.add_le("ue" + std::to_string(k), Affine::var(psi) - served[k]);
    if (alpha_lo && mu > 0) {
      int eta = prog.add_var("eta", 0.0);
      Affine pen(0.0);
      for (int n = 0; n < N_; ++n)
        for (int k = 0; k < K_; ++k) {
          if (idx(n, k) < 0) continue;
          double lo = (*alpha_lo)(n, k);
          pen.add(static_cast<int>(idx(n, k)), 1.0 - 2.0 * lo);
          pen.constant += lo * lo;
        }
      prog.add_le("penalty", pen - Affine::var(eta));
      x = Vec::Map(xs.data(), xs.size());
      xs.push_back(std::max(0.0, pen.eval(x)) + 1.0);
      obj += Affine::var(eta, -mu);
    }
    prog.maximize(obj);
    Solution sol = solve(prog, Vec::Map(xs.data(), xs.size()), opt_);
    Relaxation r;
    r.alpha = Mat::Zero(N_, K_);
    for (int n = 0; n < N_; ++n) {
      if (fix[n] >= 0) r.alpha(n, fix[n]) = 1.0;
      for (int k = 0; k < K_; ++k)
        if (idx(n, k) >= 0) r.alpha(n, k) = std::clamp(sol.x[static_cast<int>(idx(n, k))], 0.0, 1.0);
    }
    r.ok = sol.status == SolveStatus::Optimal || sol.status == SolveStatus::MaxIter;
    r.psi = sol.x[psi];
    return r;
  }

  Eigen::MatrixXi round(const Mat& a) const {
    Eigen::MatrixXi out = Eigen::MatrixXi::Zero(N_, K_);
    for (int n = 0; n < N_; ++n) {
      int best = -1;
      double bv = -1.0;
      for (int k = 0; k < K_; ++k) {
        if (!p_.allowed(n, k)) continue;
        double v = p_.A(n, k) * a(n, k);
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      if (best >= 0) out(n, best) = 1;
    }
    return out;
  }

  double value(const Eigen::MatrixXi& a) const { return schedule_value(p_.A, a); }

  // Depth-first branch and bound over slots with more than one option.
  bool branch_and_bound(std::vector<int> fix, Eigen::MatrixXi& best, double& best_val, int budget) {
    bool complete = true;
    int nodes = 0;
    std::function<void(std::vector<int>&)> visit = [&](std::vector<int>& f) {
      if (nodes >= budget) {
        complete = false;
        return;
      }
      ++nodes;
      Relaxation r = relax(f, 0.0, nullptr);
      if (!r.ok) return;
      if (r.psi / scale_ <= best_val + 1e-9 * std::max(1.0, std::abs(best_val))) return;
      Eigen::MatrixXi cand = round(r.alpha);
      double cv = value(cand);
      if (cv > best_val) {
        best_val = cv;
        best = cand;
      }
      int slot = -1;
      double most = 2.0;
      for (int n = 0; n < N_; ++n) {
        if (f[n] != kFree) continue;
        double m = r.alpha.row(n).maxCoeff();
        if (m < most) {
          most = m;
          slot = n;
        }
      }
      if (slot < 0) return;
      std::vector<int> order;
      for (int k = 0; k < K_; ++k)
        if (p_.allowed(slot, k)) order.push_back(k);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return r.alpha(slot, a) > r.alpha(slot, b); });
      for (int k : order) {
        f[slot] = k;
        visit(f);
        f[slot] = kFree;
      }
    };
    visit(fix);
    return complete;
  }

  int N() const { return N_; }
  int K() const { return K_; }
  int solves = 0;

 private:
  const SchedulingProblem& p_;
  int N_, K_;
  double scale_;
  SolverOptions opt_;
};

}  // namespace

SchedulingResult optimize_scheduling(const SchedulingProblem& p, const PenaltySchedule& pen,
                                     int node_budget) {
  const int N = static_cast<int>(p.A.rows()), K = static_cast<int>(p.A.cols());
  if (p.B.rows() != N || p.B.cols() != K) throw ShapeError("scheduling coefficient shapes differ");
  if ((p.A.array() < 0).any()) throw ParameterError("scheduling objective coefficients must be nonnegative");
  SchedulingResult res;
  res.alpha = Eigen::MatrixXi::Zero(N, K);
  if (N == 0 || K == 0) {
    res.binary = res.exact = true;
    return res;
  }
  Scheduler sch(p);

  // Slots with at most one covert option are decided up front: serving never
  // lowers the max-min objective.
  std::vector<int> fix(N, kFree);
  bool any_free = false;
  for (int n = 0; n < N; ++n) {
    int opts = 0, only = -1;
    for (int k = 0; k < K; ++k)
      if (p.allowed(n, k)) {
        ++opts;
        only = k;
      }
    if (opts == 0) fix[n] = -1;
    else if (opts == 1) fix[n] = only;
    else any_free = true;
  }
  if (!any_free) {
    for (int n = 0; n < N; ++n)
      if (fix[n] >= 0) res.alpha(n, fix[n]) = 1;
    res.value = schedule_value(p.A, res.alpha);
    res.binary = res.exact = true;
    return res;
  }

  Relaxation r = sch.relax(fix, 0.0, nullptr);
  Mat lo = r.alpha;
  double mu = pen.init;
  for (int it = 0; it < 200; ++it) {
    Relaxation q = sch.relax(fix, mu, &lo);
    if (!q.ok) break;
    double eta = (q.alpha.array() * (1.0 - q.alpha.array())).sum();
    double change = (q.alpha - lo).norm();
    lo = q.alpha;
    if (eta <= 1e-6) {
      res.binary = true;
      break;
    }
    if (mu >= pen.max && change < 1e-7) break;
    mu = std::min(pen.max, mu * pen.growth);
  }
  res.alpha = sch.round(lo);
  res.value = schedule_value(p.A, res.alpha);
  Eigen::MatrixXi plain = sch.round(r.alpha);
  if (double v = schedule_value(p.A, plain); v > res.value) {
    res.alpha = plain;
    res.value = v;
  }
  res.exact = sch.branch_and_bound(fix, res.alpha, res.value, node_budget);
  res.lp_solves = sch.solves;
  return res;
}

}  // namespace cplan
