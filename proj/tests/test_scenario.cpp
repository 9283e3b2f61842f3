#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include "cplan/covert.hpp"
#include "cplan/errors.hpp"
#include "test_util.hpp"

using namespace cplan;

namespace {

std::string with_key(std::string text, const std::string& key, const std::string& value) {
  std::regex line("(^|\n)" + key + " = [^\n]*");
  REQUIRE(std::regex_search(text, line));
  return std::regex_replace(text, line, "$1" + key + " = " + value);
}

template <class E>
std::string error_name(const std::string& text) {
  try {
    load_scenario(text);
  } catch (const E& e) {
    if constexpr (std::is_same_v<E, ConstraintError>) return e.name();
    else return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("default config") {
  Scenario s = testutil::load_config("default.cfg");
  CHECK(s.K() == 5);
  CHECK(s.horizon == 30.0);
  CHECK(s.slot == 0.1);
  CHECK(s.slots == 300);
  CHECK(s.L() == 30);
  CHECK(s.noise[0] == doctest::Approx(std::pow(10.0, (-180.0 - 30.0) / 10.0)).epsilon(1e-12));
  CHECK(s.kappa == doctest::Approx(3.2094e-4).epsilon(1e-3));
}

TEST_CASE("config rejections") {
  std::string text = testutil::config_text("default.cfg");
  CHECK(error_name<ConstraintError>(with_key(text, "epsilon", "0")) == "covertness_range");
  CHECK(error_name<ConstraintError>(with_key(text, "epsilon", "1")) == "covertness_range");
  CHECK(error_name<ConstraintError>(with_key(text, "slot_s", "0.07")) == "slot_count");
  CHECK(error_name<ConstraintError>(with_key(text, "p_tot", "-1")) == "power_sign");
  CHECK(error_name<ConstraintError>(with_key(text, "ue_count", "1")) == "ue_count");
  CHECK(error_name<SchemaError>(with_key(text, "p_tot", "lots")) == "power.p_tot");
  std::string unknown = text;
  unknown.replace(unknown.find("[power]\n"), 8, "[power]\nmystery = 1\n");
  CHECK(error_name<SchemaError>(unknown) == "power.mystery");
  CHECK(error_name<SchemaError>(text + "\n[weather]\nwind = 3\n") == "weather");
  CHECK(error_name<SchemaError>(with_key(text, "ap_position", "[0, 0]")) == "geometry.ap_position");
}

TEST_CASE("serialize round trip") {
  for (const char* name : {"default.cfg", "desk.cfg"}) {
    Scenario s = testutil::load_config(name);
    Scenario t = load_scenario(serialize_scenario(s));
    CHECK(same_scenario(s, t));
    CHECK(serialize_scenario(t) == serialize_scenario(s));
  }
}

TEST_CASE("UE placement") {
  auto ues = place_ues(7, 5, 100, 200, Vec3::Zero());
  REQUIRE(ues.size() == 5);
  for (auto& q : ues) {
    CHECK(q.z() == 0.0);
    CHECK(q.norm() >= 100.0);
    CHECK(q.norm() <= 200.0);
  }
  CHECK(place_ues(7, 5, 100, 200, Vec3::Zero()) == ues);
  CHECK(place_ues(8, 5, 100, 200, Vec3::Zero()) != ues);
  CHECK_THROWS_AS(place_ues(7, 5, 150, 150, Vec3::Zero()), GeometryError);

  Vec3 c(10, -20, 0);
  for (auto& q : place_ues(3, 50, 30, 40, c)) {
    CHECK((q - c).norm() >= 30.0);
    CHECK((q - c).norm() <= 40.0);
  }
}

TEST_CASE("UE radii follow the area-uniform law") {
  const double r1 = 100, r2 = 200;
  auto ues = place_ues(12345, 100000, r1, r2, Vec3::Zero());
  std::vector<double> r;
  for (auto& q : ues) r.push_back(q.norm());
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  const double n = static_cast<double>(r.size());
  for (size_t i = 0; i < r.size(); ++i) {
    double cdf = (r[i] * r[i] - r1 * r1) / (r2 * r2 - r1 * r1);
    ks = std::max({ks, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("initial plan") {
  Scenario s = testutil::load_config("default.cfg");
  Plan p = initial_feasible_plan(s);
  CHECK_NOTHROW(check_plan_shape(s, p));
  for (int n = 0; n < s.slots; ++n) {
    CHECK(p.p_a[n] == doctest::Approx(s.p_tot / (4 * s.horizon)).epsilon(1e-14));
    CHECK(p.p_j[n] == doctest::Approx(s.p_tot / (2 * s.horizon)).epsilon(1e-14));
  }
  CovertnessReport r = evaluate_mAEE(p, s);
  CHECK(r.violations.empty());
  CHECK(r.covert_ok);
  CHECK(r.mAEE > 0.0);

  Gains g = compute_gains(s, p);
  CHECK(covertness_check(p, g, s.epsilon).passed());
  CHECK(check_flight_constraints(p.traj_r, s.limits_r, s.station_r, s.ap, s.permitted_radius,
                                 s.altitude_r(), s.slot)
            .empty());
  CHECK(check_flight_constraints(p.traj_j, s.limits_j, s.station_j, s.ap, s.permitted_radius,
                                 s.altitude_j(), s.slot)
            .empty());
  CHECK(check_separation(p.traj_r, p.traj_j, s.safety_distance).empty());

  // Every UE is served somewhere and no slot carries two.
  for (int k = 0; k < s.K(); ++k) CHECK(p.alpha.col(k).sum() > 0);
  for (int n = 0; n < s.slots; ++n) CHECK(p.alpha.row(n).sum() <= 1);
}

TEST_CASE("zero power budget") {
  Scenario s = load_scenario(with_key(testutil::config_text("desk.cfg"), "p_tot", "0"));
  Plan p = initial_feasible_plan(s);
  CHECK(p.p_a.isZero());
  CHECK(p.p_j.isZero());
  CovertnessReport r = evaluate_mAEE(p, s);
  CHECK(r.covert_ok);
  CHECK(r.mAEE == 0.0);
  for (int n = 0; n < s.slots; ++n) CHECK(r.zeta_min[n] == 1.0);
}

TEST_CASE("infeasible initial circle names the binding constraint") {
  Scenario s = testutil::load_config("desk.cfg");
  s.limits_r.a_max = 0.01;
  try {
    initial_feasible_plan(s);
    FAIL("expected an infeasibility error");
  } catch (const InfeasibleError& e) {
    CHECK(e.binding() == "acceleration");
  }
}

TEST_CASE("communication constraint validators") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);
  REQUIRE(check_communication_constraints(s, p).empty());
  auto names = [&](const Plan& q) {
    std::vector<std::string> out;
    for (auto& v : check_communication_constraints(s, q)) out.push_back(v.constraint);
    return out;
  };
  auto has = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  Plan q = p;
  q.alpha.row(3).setOnes();
  CHECK(has(names(q), "C4.one_ue"));
  q = p;
  q.phi[2][0] = cd(1.5, 0.0);
  CHECK(has(names(q), "C5"));
  q = p;
  q.p_a[4] = 2.0 * s.p_a_max;
  CHECK(has(names(q), "C6.p_a"));
  q = p;
  q.p_j.setConstant(s.p_j_max);
  q.p_a.setConstant(s.p_a_max);
  CHECK(has(names(q), "C6.budget"));
  q = p;
  q.p_a.conservativeResize(3);
  CHECK_THROWS_AS(check_communication_constraints(s, q), ShapeError);
}

TEST_CASE("plan files round trip exactly") {
  Scenario s = testutil::load_config("desk.cfg");
  Plan p = initial_feasible_plan(s);
  p.p_a[1] = 0.1 + 0.2;  // not representable in short decimal form
  p.phi[5][3] = std::polar(0.37, 2.9);
  std::ostringstream plan, phases;
  write_plan_csv(plan, p);
  write_phases_csv(phases, p);
  Plan q = read_plan_csv(s, plan.str(), phases.str());
  CHECK(q.alpha == p.alpha);
  CHECK(q.p_a == p.p_a);
  CHECK(q.p_j == p.p_j);
  for (int n = 0; n < s.slots; ++n) {
    CHECK(q.phi[n] == p.phi[n]);
    CHECK(q.traj_r.positions[n] == p.traj_r.positions[n]);
    CHECK(q.traj_r.velocities[n] == p.traj_r.velocities[n]);
    CHECK(q.traj_j.positions[n] == p.traj_j.positions[n]);
    CHECK(q.traj_j.velocities[n] == p.traj_j.velocities[n]);
  }

  std::string header = plan.str().substr(0, plan.str().find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 15);

  Scenario other = testutil::load_config("default.cfg");
  CHECK_THROWS_AS(read_plan_csv(other, plan.str(), phases.str()), ShapeError);
}
