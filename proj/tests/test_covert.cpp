#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cplan/covert.hpp"
#include "cplan/errors.hpp"
#include "test_util.hpp"

using namespace cplan;

namespace {

DetectionContext context(double p_a, double p_j, double g_arm, double g_jm, double noise,
                         double threshold) {
  DetectionContext d;
  d.p_a = p_a;
  d.p_j_peak = p_j;
  d.g_arm = g_arm;
  d.g_jm = g_jm;
  d.noise = noise;
  d.threshold = threshold;
  return d;
}

// Plain radiometer simulation, independent of the library's oracle.
double simulated_error(const DetectionContext& d, int trials, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int fa = 0, md = 0;
  for (int i = 0; i < trials; ++i) {
    if (d.p_j_peak * d.g_jm * u(rng) + d.noise >= d.threshold) ++fa;
    if (d.p_a * d.g_arm + d.p_j_peak * d.g_jm * u(rng) + d.noise <= d.threshold) ++md;
  }
  return static_cast<double>(fa + md) / trials;
}

}  // namespace

TEST_CASE("rate bound edge cases") {
  CHECK(rate_lower_bound(0.5, 0.0, 2e-3, 1e-3, 1e-6, 1e6) ==
        doctest::Approx(1e6 * std::log2(1.0 + 0.5 * 2e-3 / 1e-6)).epsilon(1e-14));
  CHECK(rate_lower_bound(0.0, 0.7, 2e-3, 1e-3, 1e-6, 1e6) == 0.0);
  CHECK_THROWS_AS(rate_lower_bound(1.0, 1.0, 1.0, 1.0, 0.0, 1.0), ParameterError);
}

TEST_CASE("rate bound lies below the Monte-Carlo mean rate") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int set = 0; set < 20; ++set) {
    double p_a = u(rng), p_j = u(rng), g = std::pow(10.0, -3 - 3 * u(rng));
    double g_j = std::pow(10.0, -3 - 3 * u(rng)), noise = std::pow(10.0, -7 - 2 * u(rng));
    double lb = rate_lower_bound(p_a, p_j, g, g_j, noise, 1.0);
    double acc = 0.0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) acc += std::log2(1.0 + p_a * g / (p_j * u(rng) * g_j + noise));
    CHECK(lb <= acc / draws * (1.0 + 1e-9));
  }
}

TEST_CASE("rate bound monotonicity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    double p_a = u(rng), p_j = u(rng), g = u(rng) * 1e-4, gj = u(rng) * 1e-4, n = 1e-8;
    double r = rate_lower_bound(p_a, p_j, g, gj, n, 1.0);
    CHECK(rate_lower_bound(p_a, p_j + 0.01, g, gj, n, 1.0) <= r);
    CHECK(rate_lower_bound(p_a + 0.01, p_j, g, gj, n, 1.0) >= r);
  }
}

TEST_CASE("piecewise detection error branches") {
  const double noise = 1e-3;
  DetectionContext d = context(1.0, 4.0, 1e-3, 1e-3, noise, noise);
  DetectionError e = detection_error_piecewise(d);
  CHECK(e.p_fa == 1.0);
  CHECK(e.p_md == 0.0);
  CHECK(e.zeta == 1.0);
  CHECK_FALSE(e.zero_error_achievable);

  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    d.threshold = d.chi1() + t * (d.chi2() - d.chi1());
    CHECK(detection_error_piecewise(d).zeta == doctest::Approx(0.75).epsilon(1e-12));
  }

  d.threshold = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(detection_error_piecewise(d), ParameterError);

  DetectionContext loud = context(4.0, 1.0, 1e-3, 1e-3, noise, 4e-3 + noise);
  CHECK(detection_error_piecewise(loud).zero_error_achievable);
  CHECK(detection_error_piecewise(loud).zeta == 0.0);
}

TEST_CASE("piecewise error is continuous at the breakpoints") {
  DetectionContext d = context(0.6, 1.0, 2e-3, 3e-3, 1e-3, 0.0);
  for (double chi : {d.chi1(), d.chi2(), d.chi3(), d.noise}) {
    d.threshold = chi - 1e-12;
    double below = detection_error_piecewise(d).zeta;
    d.threshold = chi + 1e-12;
    double above = detection_error_piecewise(d).zeta;
    CHECK(std::abs(below - above) < 1e-6);
  }
}

TEST_CASE("piecewise error matches a radiometer simulation") {
  std::mt19937_64 rng(77);
  DetectionContext d = context(0.6, 1.0, 2e-3, 3e-3, 1e-3, 0.0);
  for (double rho = 0.5e-3; rho < d.chi3() + 1e-3; rho += 0.25e-3) {
    d.threshold = rho;
    CHECK(std::abs(detection_error_piecewise(d).zeta - simulated_error(d, 1000000, rng)) < 0.005);
  }
}

TEST_CASE("analytic error never drops below the minimum") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double p_a = u(rng), p_j = u(rng), g = u(rng), gj = u(rng), noise = 0.1 * u(rng);
    DetectionContext d = context(p_a, p_j, g, gj, noise, 0.0);
    double zmin = min_detection_error(p_a, p_j, g, gj).zeta;
    for (int t = 0; t < 50; ++t) {
      d.threshold = (d.chi3() + 0.2) * u(rng);
      CHECK(detection_error_piecewise(d).zeta >= zmin - 1e-12);
    }
  }
}

TEST_CASE("minimum detection error closed form") {
  CHECK(min_detection_error(0.0, 1.0, 1.0, 1.0).zeta == 1.0);
  CHECK(min_detection_error(1.0, 1.0, 2.0, 2.0).zeta == 0.0);
  MinDetection z = min_detection_error(1.0, 4.0, 1e-3, 1e-3);
  CHECK(z.zeta == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_FALSE(z.zero_error_achievable);
  MinDetection none = min_detection_error(1.0, 0.0, 1e-3, 1e-3);
  CHECK(none.zeta == 0.0);
  CHECK(none.zero_error_achievable);
}

TEST_CASE("minimum matches a threshold sweep of simulated errors") {
  std::mt19937_64 rng(19);
  DetectionContext d = context(1.0, 4.0, 1e-3, 1e-3, 1e-4, 0.0);
  double best = 1.0;
  for (double rho = 0.0; rho <= d.chi3() + 1e-3; rho += 2e-4) {
    d.threshold = rho;
    best = std::min(best, simulated_error(d, 200000, rng));
  }
  CHECK(std::abs(best - 0.75) < 0.005);
}

TEST_CASE("minimum is monotone in the powers") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double p_a = u(rng), p_j = u(rng), g = u(rng), gj = u(rng);
    double z = min_detection_error(p_a, p_j, g, gj).zeta;
    CHECK(min_detection_error(p_a + 0.05, p_j, g, gj).zeta <= z);
    CHECK(min_detection_error(p_a, p_j + 0.05, g, gj).zeta >= z);
  }
}

TEST_CASE("monte-carlo oracle") {
  SUBCASE("no jamming never alarms") {
    DetectionContext d = context(1.0, 0.0, 1e-3, 1e-3, 1e-4, 2e-4);
    CHECK(mc_detection_oracle(d, 100000, 1).p_fa == 0.0);
  }
  SUBCASE("agrees with the analytic rates within three sigma") {
    DetectionContext d = context(0.6, 1.0, 2e-3, 3e-3, 1e-3, 0.0);
    const long long n = 1000000;
    for (double rho : {0.8e-3, 1.5e-3, 2.5e-3, 3.2e-3, 4.0e-3, 5.0e-3}) {
      d.threshold = rho;
      DetectionError a = detection_error_piecewise(d);
      EmpiricalDetection e = mc_detection_oracle(d, n, 42);
      auto sigma = [&](double p) { return std::sqrt(std::max(p * (1 - p), 1.0 / n) / n); };
      CHECK(std::abs(e.p_fa - a.p_fa) <= 3 * sigma(a.p_fa));
      CHECK(std::abs(e.p_md - a.p_md) <= 3 * sigma(a.p_md));
    }
  }
  SUBCASE("U-shaped with a flat bottom") {
    DetectionContext d = context(0.6, 1.0, 2e-3, 3e-3, 1e-3, 0.0);
    auto z = [&](double rho) {
      d.threshold = rho;
      EmpiricalDetection e = mc_detection_oracle(d, 400000, 7);
      return e.p_fa + e.p_md;
    };
    double floor = 1.0 - d.p_a * d.g_arm / (d.p_j_peak * d.g_jm);
    CHECK(z(d.noise + 0.2e-3) > z(d.noise + 0.5e-3));
    CHECK(z(d.chi3() - 0.2e-3) < z(d.chi3()));
    for (double t : {0.1, 0.5, 0.9}) CHECK(std::abs(z(d.chi1() + t * (d.chi2() - d.chi1())) - floor) < 0.005);
  }
  SUBCASE("deterministic across worker counts") {
    DetectionContext d = context(0.6, 1.0, 2e-3, 3e-3, 1e-3, 2e-3);
    EmpiricalDetection a = mc_detection_oracle(d, 300000, 9, 1);
    EmpiricalDetection b = mc_detection_oracle(d, 300000, 9, 3);
    CHECK(a.p_fa == b.p_fa);
    CHECK(a.p_md == b.p_md);
  }
}

TEST_CASE("covertness check") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);
  Gains g = compute_gains(s, p);

  SUBCASE("initial plan is covert") { CHECK(covertness_check(p, g, s.epsilon).passed()); }
  SUBCASE("zero power gives margin epsilon") {
    p.p_a.setZero();
    p.p_j.setZero();
    CovertCheck c = covertness_check(p, g, s.epsilon);
    for (int n = 0; n < p.slots(); ++n) CHECK(c.margin[n] == doctest::Approx(s.epsilon).epsilon(1e-15));
  }
  SUBCASE("inflated slot fails alone") {
    // Scale every served slot onto the covert boundary first.
    for (int n = 0; n < p.slots(); ++n) {
      int k = p.scheduled(n);
      if (k < 0) continue;
      double worst = 0.0;
      for (int m = 0; m < s.K(); ++m)
        if (m != k) worst = std::max(worst, g.g_ar(n, m) / (p.p_j[n] * g.g_j(n, m)));
      p.p_a[n] = s.epsilon / worst;
    }
    REQUIRE(covertness_check(p, g, s.epsilon).passed());
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
      int slot = -1;
      while (slot < 0) {
        int n = std::uniform_int_distribution<int>(0, p.slots() - 1)(rng);
        if (p.scheduled(n) >= 0) slot = n;
      }
      Plan q = p;
      q.p_a[slot] *= 100.0;
      CovertCheck c = covertness_check(q, g, s.epsilon);
      REQUIRE(c.failing.size() == 1);
      CHECK(c.failing[0] == slot);
    }
  }
  SUBCASE("single UE is vacuous") {
    Gains one = g;
    one.g_ar = g.g_ar.leftCols(1);
    one.g_j = g.g_j.leftCols(1);
    Plan q = p;
    q.alpha = Eigen::MatrixXi::Ones(p.slots(), 1);
    CovertCheck c = covertness_check(q, one, s.epsilon);
    CHECK(c.vacuous);
    CHECK(c.passed());
  }
}

TEST_CASE("mAEE evaluation") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);

  SUBCASE("report is self-consistent") {
    CovertnessReport r = evaluate_mAEE(p, s);
    CHECK(r.feasible());
    CHECK(std::abs(recompute_mAEE(r, p) - r.mAEE) <= 1e-12 * r.mAEE);
  }
  SUBCASE("empty schedule") {
    p.alpha.setZero();
    CHECK(evaluate_mAEE(p, s).mAEE == 0.0);
  }
  SUBCASE("bandwidth scales the objective") {
    double base = evaluate_mAEE(p, s).mAEE;
    Scenario t = s;
    t.bandwidth *= 3.0;
    CHECK(evaluate_mAEE(p, t).mAEE == doctest::Approx(3.0 * base).epsilon(1e-12));
  }
  SUBCASE("hovering single-UE plan matches the hand formula") {
    s.ues.resize(1);
    s.noise.resize(1);
    const int N = s.slots, L = s.L();
    p.alpha = Eigen::MatrixXi::Ones(N, 1);
    for (int n = 0; n < N; ++n) {
      p.traj_r.positions[n] = s.station_r;
      p.traj_j.positions[n] = s.station_j;
      p.traj_r.velocities[n].setZero();
      p.traj_j.velocities[n].setZero();
    }
    apply_closed_form_beamforming(s, p);
    CovertnessReport r = evaluate_mAEE(p, s);
    Propagation pr = s.propagation();
    double g_ar = L * L * std::norm(cascaded_base_gain(s.station_r, s.ap, s.ues[0], pr));
    double g_j = std::norm(direct_gain(s.station_j, s.ues[0], pr));
    double acc = 0.0;
    for (int n = 0; n < N; ++n)
      acc += s.bandwidth * std::log2(1.0 + p.p_a[n] * g_ar / (0.5 * p.p_j[n] * g_j + s.noise[0]));
    double hover = s.propulsion.P_o + s.propulsion.P_i;
    CHECK(r.mAEE == doctest::Approx(acc / N / (2.0 * hover)).epsilon(1e-9));
    CHECK(r.vacuous);
  }
}
