#include "cplan/covert.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <thread>

#include "cplan/errors.hpp"

namespace cplan {

double rate_lower_bound(double p_a, double p_j_peak, double g_ark, double g_jk, double noise,
                        double bandwidth) {
  if (!(noise > 0.0)) throw ParameterError("noise power must be positive");
  if (p_a < 0 || p_j_peak < 0 || g_ark < 0 || g_jk < 0)
    throw ParameterError("powers and gains must be nonnegative");
  return bandwidth * std::log2(1.0 + p_a * g_ark / (0.5 * p_j_peak * g_jk + noise));
}

namespace {

// P(U <= x) for U uniform on [0, width]; a point mass at 0 when width == 0.
double uniform_cdf(double x, double width) {
  if (width <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
  return std::clamp(x / width, 0.0, 1.0);
}

}  // namespace

DetectionError detection_error_piecewise(const DetectionContext& d) {
  if (std::isnan(d.threshold)) throw ParameterError("detection threshold not set");
  const double spread = d.p_j_peak * d.g_jm;
  const double signal = d.p_a * d.g_arm;
  DetectionError e;
  // FA: spread*U + noise >= threshold; MD: signal + spread*U + noise <= threshold.
  if (spread > 0.0) {
    e.p_fa = 1.0 - uniform_cdf(d.threshold - d.noise, spread);
    e.p_md = uniform_cdf(d.threshold - signal - d.noise, spread);
  } else {
    e.p_fa = d.noise >= d.threshold ? 1.0 : 0.0;
    e.p_md = signal + d.noise <= d.threshold ? 1.0 : 0.0;
  }
  e.zeta = e.p_fa + e.p_md;
  e.zero_error_achievable = !d.nontrivial();
  return e;
}

MinDetection min_detection_error(double p_a, double p_j_peak, double g_arm, double g_jm) {
  const double signal = p_a * g_arm, spread = p_j_peak * g_jm;
  if (signal <= 0.0) return {1.0, false};
  if (spread <= 0.0 || spread < signal) return {0.0, true};
  return {std::clamp(1.0 - signal / spread, 0.0, 1.0), false};
}

EmpiricalDetection mc_detection_oracle(const DetectionContext& d, long long trials,
                                       std::uint64_t seed, int workers) {
  if (std::isnan(d.threshold)) throw ParameterError("detection threshold not set");
  constexpr long long kBlock = 1 << 16;
  const long long blocks = (trials + kBlock - 1) / kBlock;
  std::vector<long long> fa(blocks, 0), md(blocks, 0);
  const double signal = d.p_a * d.g_arm;

  auto run_block = [&](long long b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0.0, d.p_j_peak);
    const long long n = std::min(kBlock, trials - b * kBlock);
    long long f = 0, m = 0;
    for (long long i = 0; i < n; ++i) {
      // Independent jamming draws under each hypothesis.
      double h0 = u(rng) * d.g_jm + d.noise;
      double h1 = signal + u(rng) * d.g_jm + d.noise;
      f += h0 >= d.threshold;
      m += h1 <= d.threshold;
    }
    fa[b] = f;
    md[b] = m;
  };

  workers = std::max(1, std::min<int>(workers, static_cast<int>(blocks)));
  if (workers == 1) {
    for (long long b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (long long b = w; b < blocks; b += workers) run_block(b);
      });
    for (auto& t : pool) t.join();
  }
  EmpiricalDetection out;
  out.trials = trials;
  long long f = 0, m = 0;
  for (long long b = 0; b < blocks; ++b) {
    f += fa[b];
    m += md[b];
  }
  out.p_fa = static_cast<double>(f) / trials;
  out.p_md = static_cast<double>(m) / trials;
  return out;
}

Gains compute_gains(const Scenario& s, const Plan& p) {
  check_plan_shape(s, p);
  const int N = p.slots(), K = s.K(), L = s.L();
  const Propagation pr = s.propagation();
  Gains g;
  g.g_ar.resize(N, K);
  g.g_ar_bound.resize(N, K);
  g.g_j.resize(N, K);
  g.dist_ra.resize(N, 1);
  g.dist_rk.resize(N, K);
  g.dist_jk.resize(N, K);
  for (int n = 0; n < N; ++n) {
    const Vec3& qr = p.traj_r.positions[n];
    const Vec3& qj = p.traj_j.positions[n];
    ArrayResponse ar = array_responses(qr, s.ap, s.ues, s.irs, pr.wavelength());
    g.dist_ra(n, 0) = (qr - s.ap).norm();
    for (int k = 0; k < K; ++k) {
      cd h = cascaded_base_gain(qr, s.ap, s.ues[k], pr);
      g.g_ar(n, k) = std::norm(effective_gain(ar.e_a, ar.e_k[k], p.phi[n], h));
      g.g_ar_bound(n, k) = static_cast<double>(L) * L * std::norm(h);
      g.g_j(n, k) = std::norm(direct_gain(qj, s.ues[k], pr));
      g.dist_rk(n, k) = (qr - s.ues[k]).norm();
      g.dist_jk(n, k) = (qj - s.ues[k]).norm();
    }
  }
  return g;
}

CovertCheck covertness_check(const Plan& p, const Gains& g, double eps) {
  const int N = p.slots(), K = static_cast<int>(g.g_ar.cols());
  if (g.g_ar.rows() != N) throw ShapeError("gains and plan slot counts differ");
  CovertCheck c;
  c.margin = Vec::Constant(N, eps);
  c.zeta_min = Vec::Ones(N);
  c.vacuous = K < 2;
  for (int n = 0; n < N; ++n) {
    int k = p.scheduled(n);
    if (k < 0) continue;
    double z = 1.0;
    for (int m = 0; m < K; ++m)
      if (m != k) z = std::min(z, min_detection_error(p.p_a[n], p.p_j[n], g.g_ar(n, m), g.g_j(n, m)).zeta);
    c.zeta_min[n] = z;
    c.margin[n] = z - (1.0 - eps);
    if (c.margin[n] < -kCovertTol) c.failing.push_back(n);
  }
  return c;
}

CovertnessReport evaluate_mAEE(const Plan& p, const Scenario& s) {
  const Gains g = compute_gains(s, p);
  const int N = p.slots(), K = s.K();
  CovertnessReport r;
  r.zeta_star = Mat::Constant(N, K, std::numeric_limits<double>::quiet_NaN());
  for (int n = 0; n < N; ++n) {
    int k = p.scheduled(n);
    for (int m = 0; m < K; ++m) {
      if (m == k) continue;
      r.zeta_star(n, m) =
          k < 0 ? 1.0 : min_detection_error(p.p_a[n], p.p_j[n], g.g_ar(n, m), g.g_j(n, m)).zeta;
    }
  }
  CovertCheck c = covertness_check(p, g, s.epsilon);
  r.zeta_min = c.zeta_min;
  r.margin = c.margin;
  r.vacuous = c.vacuous;
  r.covert_ok = c.passed();

  r.rate_lb.resize(N, K);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      r.rate_lb(n, k) =
          rate_lower_bound(p.p_a[n], p.p_j[n], g.g_ar(n, k), g.g_j(n, k), s.noise[k], s.bandwidth);
  r.rate_served = Vec::Zero(N);
  for (int n = 0; n < N; ++n)
    if (int k = p.scheduled(n); k >= 0) r.rate_served[n] = r.rate_lb(n, k);
  r.power.resize(N);
  for (int n = 0; n < N; ++n)
    r.power[n] = propulsion_power(p.traj_r.velocities[n], s.propulsion) +
                 propulsion_power(p.traj_j.velocities[n], s.propulsion);

  r.ee = Vec::Zero(K);
  r.throughput = Vec::Zero(K);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      if (p.alpha(n, k)) {
        r.ee[k] += r.rate_lb(n, k) / r.power[n];
        r.throughput[k] += r.rate_lb(n, k);
      }
  r.ee /= N;
  r.throughput /= N;
  r.mAEE = K ? r.ee.minCoeff() : 0.0;
  r.mACT = K ? r.throughput.minCoeff() : 0.0;
  r.APC = r.power.mean();

  auto append = [&](std::vector<Violation> v, const std::string& who) {
    for (auto& x : v) {
      x.constraint = who + x.constraint;
      r.violations.push_back(x);
    }
  };
  append(check_flight_constraints(p.traj_r, s.limits_r, s.station_r, s.ap, s.permitted_radius,
                                  s.altitude_r(), s.slot),
         "uirs.");
  append(check_flight_constraints(p.traj_j, s.limits_j, s.station_j, s.ap, s.permitted_radius,
                                  s.altitude_j(), s.slot),
         "ucj.");
  append(check_separation(p.traj_r, p.traj_j, s.safety_distance), "");
  append(check_communication_constraints(s, p), "");
  for (int n : c.failing) r.violations.push_back({"covertness", n + 1, -c.margin[n]});
  return r;
}

double recompute_mAEE(const CovertnessReport& r, const Plan& p) {
  const int N = static_cast<int>(r.rate_lb.rows()), K = static_cast<int>(r.rate_lb.cols());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n) acc += p.alpha(n, k) * r.rate_lb(n, k) / r.power[n];
    best = std::min(best, acc / N);
  }
  return K ? best : 0.0;
}

void write_report_json(std::ostream& os, const CovertnessReport& r) {
  using nlohmann::json;
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["mAEE"] = r.mAEE;
  j["mACT"] = r.mACT;
  j["APC"] = r.APC;
  j["covert_ok"] = r.covert_ok;
  j["vacuous"] = r.vacuous;
  j["feasible"] = r.feasible();
  j["ee_per_ue"] = vec(r.ee);
  j["throughput_per_ue"] = vec(r.throughput);
  j["zeta_star_min"] = vec(r.zeta_min);
  j["margin"] = vec(r.margin);
  j["rate_lb_bits"] = vec(r.rate_served);
  j["power_watts"] = vec(r.power);
  json viol = json::array();
  for (const auto& v : r.violations)
    viol.push_back({{"constraint", v.constraint}, {"slot", v.slot}, {"magnitude", v.magnitude}});
  j["violations"] = viol;
  os << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& os, const CovertnessReport& r) {
  os << "slot,zeta_star_min,margin,rate_lb_bits,power_watts\n" << std::setprecision(17);
  for (int n = 0; n < r.zeta_min.size(); ++n)
    os << n + 1 << ',' << r.zeta_min[n] << ',' << r.margin[n] << ',' << r.rate_served[n] << ',' << r.power[n] << '\n';
}

}  // namespace cplan
