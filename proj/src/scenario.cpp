#include "cplan/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cplan/covert.hpp"
#include "cplan/errors.hpp"

namespace cplan {

namespace pt = boost::property_tree;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(const Vec3& v) { return "[" + fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z()) + "]"; }

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n"), b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double parse_double(const std::string& path, const std::string& raw) {
  std::string s = trim(raw);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw SchemaError(path, "expected a finite number, got '" + raw + "'");
  return v;
}

long long parse_int(const std::string& path, const std::string& raw) {
  std::string s = trim(raw);
  long long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw SchemaError(path, "expected an integer, got '" + raw + "'");
  return v;
}

std::vector<double> parse_list(const std::string& path, const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') s.erase(0, 1);
  if (!s.empty() && s.back() == ']') s.pop_back();
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_double(path, tok));
  return out;
}

Vec3 parse_vec3(const std::string& path, const std::string& raw) {
  auto v = parse_list(path, raw);
  if (v.size() != 3) throw SchemaError(path, "expected three components");
  return Vec3(v[0], v[1], v[2]);
}

// Section -> key -> value, with unknown-key detection.
class Reader {
 public:
  explicit Reader(const pt::ptree& root) : root_(root) {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"geometry",
         {"ap_position", "uirs_station", "ucj_station", "permitted_radius", "ue_positions",
          "ue_count", "ue_seed", "ue_inner_radius", "ue_outer_radius"}},
        {"kinematics",
         {"horizon_s", "slot_s", "v_max_uirs", "v_max_ucj", "a_max_uirs", "a_max_ucj",
          "safety_distance"}},
        {"power", {"p_a_max", "p_j_max", "p_tot", "bandwidth_hz", "noise_dbm"}},
        {"atmosphere",
         {"carrier_hz", "pressure_pa", "temperature_c", "humidity_pct", "kappa_target",
          "path_loss_exponent"}},
        {"irs", {"lx", "ly", "dx", "dy"}},
        {"propulsion", {"p_o", "p_i", "c0", "c1", "c2"}},
        {"covertness", {"epsilon"}},
        {"optimizer",
         {"eps_outer", "eps_ucj", "eps_uirs", "eps_power", "max_outer", "max_inner", "gap_tol",
          "feas_tol", "penalty_init", "penalty_growth", "penalty_max"}},
    };
    for (const auto& [sec, body] : root) {
      auto it = schema.find(sec);
      if (it == schema.end()) throw SchemaError(sec, "unknown section");
      if (!body.data().empty() && body.empty())
        throw SchemaError(sec, "key outside of a section");
      for (const auto& [key, val] : body)
        if (!it->second.count(key)) throw SchemaError(sec + "." + key, "unknown key");
    }
  }

  std::optional<std::string> get(const std::string& sec, const std::string& key) const {
    auto s = root_.get_child_optional(sec);
    if (!s) return std::nullopt;
    auto v = s->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return v->data();
  }
  void num(const std::string& sec, const std::string& key, double& out) const {
    if (auto v = get(sec, key)) out = parse_double(sec + "." + key, *v);
  }
  void integer(const std::string& sec, const std::string& key, int& out) const {
    if (auto v = get(sec, key)) {
      long long x = parse_int(sec + "." + key, *v);
      if (x < INT32_MIN || x > INT32_MAX) throw SchemaError(sec + "." + key, "out of range");
      out = static_cast<int>(x);
    }
  }
  void vec3(const std::string& sec, const std::string& key, Vec3& out) const {
    if (auto v = get(sec, key)) out = parse_vec3(sec + "." + key, *v);
  }

 private:
  const pt::ptree& root_;
};

void require(bool ok, const std::string& name, const std::string& msg) {
  if (!ok) throw ConstraintError(name, msg);
}

}  // namespace

std::vector<Vec3> place_ues(std::uint64_t seed, int count, double r1, double r2, const Vec3& center) {
  if (!(r1 > 0.0 && r1 < r2)) throw GeometryError("annulus needs 0 < R1 < R2");
  if (count < 0) throw GeometryError("negative UE count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    double r = std::sqrt(r1 * r1 + u(rng) * (r2 * r2 - r1 * r1));
    double a = 2.0 * kPi * u(rng);
    out.emplace_back(center.x() + r * std::cos(a), center.y() + r * std::sin(a), 0.0);
  }
  return out;
}

void finalize_scenario(Scenario& s) {
  require(s.horizon > 0.0 && s.slot > 0.0, "horizon", "T and slot length must be positive");
  double n = std::round(s.horizon / s.slot);
  require(n >= 2 && std::abs(n * s.slot - s.horizon) <= 1e-9 * s.horizon, "slot_count",
          "T / slot must be an integer of at least 2");
  s.slots = static_cast<int>(n);
  require(s.epsilon > 0.0 && s.epsilon < 1.0, "covertness_range", "epsilon must lie in (0,1)");
  require(s.p_a_max >= 0 && s.p_j_max >= 0 && s.p_tot >= 0, "power_sign", "powers must be >= 0");
  require(s.bandwidth > 0, "bandwidth", "bandwidth must be positive");
  require(s.altitude_r() > 0 && s.altitude_j() > 0, "altitude", "UAV altitudes must be positive");
  require(s.irs.Lx >= 1 && s.irs.Ly >= 1, "irs_size", "IRS needs at least one element");
  require(s.irs.dx > 0 && s.irs.dy > 0, "irs_spacing", "element spacing must be positive");
  require(s.path_loss_exponent >= 2.0, "path_loss_exponent", "exponent must be >= 2");
  require(s.permitted_radius > 0, "permitted_radius", "R_p must be positive");
  require(s.safety_distance >= 0, "safety_distance", "D_s must be >= 0");
  require(s.limits_r.v_max > 0 && s.limits_j.v_max > 0 && s.limits_r.a_max > 0 &&
              s.limits_j.a_max > 0,
          "flight_limits", "speed and acceleration limits must be positive");
  require(std::abs(s.ap.z()) == 0.0, "ap_position", "AP must be on the ground (z = 0)");
  const auto& pc = s.propulsion;
  require(pc.P_o > 0 && pc.P_i > 0 && pc.c0 > 0 && pc.c1 > 0 && pc.c2 > 0, "propulsion",
          "propulsion constants must be positive");
  const auto& o = s.optimizer;
  require(o.eps_outer > 0 && o.eps_ucj > 0 && o.eps_uirs > 0 && o.eps_power > 0 && o.max_outer >= 1 &&
              o.max_inner >= 1 && o.gap_tol > 0 && o.feas_tol > 0 && o.penalty_init > 0 &&
              o.penalty_growth > 1 && o.penalty_max >= o.penalty_init,
          "optimizer", "tolerances and penalty schedule must be positive and consistent");

  if (s.placement) {
    const auto& pl = *s.placement;
    if (!(pl.inner_radius > 0.0 && pl.inner_radius < pl.outer_radius))
      throw GeometryError("annulus needs 0 < R1 < R2");
    s.ues = place_ues(pl.seed, pl.count, pl.inner_radius, pl.outer_radius, s.ap);
  }
  require(s.K() >= 2, "ue_count", "at least two UEs are required");
  for (const Vec3& q : s.ues) require(q.z() == 0.0, "ue_positions", "UEs must be on the ground");

  s.noise.assign(s.K(), std::pow(10.0, (s.noise_dbm - 30.0) / 10.0));

  require(s.atmosphere.humidity >= 0 && s.atmosphere.humidity <= 100, "humidity",
          "humidity must be in [0,100]");
  if (s.kappa_target) {
    require(*s.kappa_target > 0, "kappa_target", "kappa target must be positive");
    s.atmosphere.humidity = calibrate_humidity(s.atmosphere, kCalibrationFrequency, *s.kappa_target);
  }
  Absorption ab = absorption_coeff(s.atmosphere);
  s.kappa = ab.kappa;
  s.kappa_warning = ab.warning;
}

Scenario load_scenario(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream is(text);
    pt::read_ini(is, root);
  } catch (const pt::ini_parser_error& e) {
    throw SchemaError("line " + std::to_string(e.line()), e.message());
  }
  Reader r(root);
  Scenario s;
  r.vec3("geometry", "ap_position", s.ap);
  r.vec3("geometry", "uirs_station", s.station_r);
  r.vec3("geometry", "ucj_station", s.station_j);
  r.num("geometry", "permitted_radius", s.permitted_radius);
  const bool explicit_ues = r.get("geometry", "ue_positions").has_value();
  const bool random_ues = r.get("geometry", "ue_count").has_value();
  if (explicit_ues == random_ues)
    throw SchemaError("geometry.ue_positions", "give either ue_positions or ue_count");
  if (explicit_ues) {
    std::string raw = *r.get("geometry", "ue_positions");
    std::istringstream is(raw);
    std::string item;
    while (std::getline(is, item, ';'))
      if (!trim(item).empty()) s.ues.push_back(parse_vec3("geometry.ue_positions", item));
  } else {
    UePlacement pl;
    r.integer("geometry", "ue_count", pl.count);
    auto seed = r.get("geometry", "ue_seed");
    if (!seed) throw SchemaError("geometry.ue_seed", "required with ue_count");
    long long sd = parse_int("geometry.ue_seed", *seed);
    if (sd < 0) throw SchemaError("geometry.ue_seed", "must be nonnegative");
    pl.seed = static_cast<std::uint64_t>(sd);
    for (const char* key : {"ue_inner_radius", "ue_outer_radius"})
      if (!r.get("geometry", key)) throw SchemaError(std::string("geometry.") + key, "required with ue_count");
    r.num("geometry", "ue_inner_radius", pl.inner_radius);
    r.num("geometry", "ue_outer_radius", pl.outer_radius);
    s.placement = pl;
  }

  r.num("kinematics", "horizon_s", s.horizon);
  r.num("kinematics", "slot_s", s.slot);
  r.num("kinematics", "v_max_uirs", s.limits_r.v_max);
  r.num("kinematics", "v_max_ucj", s.limits_j.v_max);
  r.num("kinematics", "a_max_uirs", s.limits_r.a_max);
  r.num("kinematics", "a_max_ucj", s.limits_j.a_max);
  r.num("kinematics", "safety_distance", s.safety_distance);

  r.num("power", "p_a_max", s.p_a_max);
  r.num("power", "p_j_max", s.p_j_max);
  r.num("power", "p_tot", s.p_tot);
  r.num("power", "bandwidth_hz", s.bandwidth);
  r.num("power", "noise_dbm", s.noise_dbm);

  r.num("atmosphere", "carrier_hz", s.atmosphere.f_c);
  r.num("atmosphere", "pressure_pa", s.atmosphere.pressure);
  r.num("atmosphere", "temperature_c", s.atmosphere.temperature);
  r.num("atmosphere", "humidity_pct", s.atmosphere.humidity);
  if (auto v = r.get("atmosphere", "kappa_target")) {
    if (r.get("atmosphere", "humidity_pct"))
      throw SchemaError("atmosphere.humidity_pct", "conflicts with kappa_target");
    s.kappa_target = parse_double("atmosphere.kappa_target", *v);
  }
  r.num("atmosphere", "path_loss_exponent", s.path_loss_exponent);

  r.integer("irs", "lx", s.irs.Lx);
  r.integer("irs", "ly", s.irs.Ly);
  r.num("irs", "dx", s.irs.dx);
  r.num("irs", "dy", s.irs.dy);

  r.num("propulsion", "p_o", s.propulsion.P_o);
  r.num("propulsion", "p_i", s.propulsion.P_i);
  r.num("propulsion", "c0", s.propulsion.c0);
  r.num("propulsion", "c1", s.propulsion.c1);
  r.num("propulsion", "c2", s.propulsion.c2);

  r.num("covertness", "epsilon", s.epsilon);

  auto& o = s.optimizer;
  r.num("optimizer", "eps_outer", o.eps_outer);
  r.num("optimizer", "eps_ucj", o.eps_ucj);
  r.num("optimizer", "eps_uirs", o.eps_uirs);
  r.num("optimizer", "eps_power", o.eps_power);
  r.integer("optimizer", "max_outer", o.max_outer);
  r.integer("optimizer", "max_inner", o.max_inner);
  r.num("optimizer", "gap_tol", o.gap_tol);
  r.num("optimizer", "feas_tol", o.feas_tol);
  r.num("optimizer", "penalty_init", o.penalty_init);
  r.num("optimizer", "penalty_growth", o.penalty_growth);
  r.num("optimizer", "penalty_max", o.penalty_max);

  finalize_scenario(s);
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "[geometry]\n";
  os << "ap_position = " << fmt(s.ap) << "\n";
  os << "uirs_station = " << fmt(s.station_r) << "\n";
  os << "ucj_station = " << fmt(s.station_j) << "\n";
  os << "permitted_radius = " << fmt(s.permitted_radius) << "\n";
  if (s.placement) {
    os << "ue_count = " << s.placement->count << "\n";
    os << "ue_seed = " << s.placement->seed << "\n";
    os << "ue_inner_radius = " << fmt(s.placement->inner_radius) << "\n";
    os << "ue_outer_radius = " << fmt(s.placement->outer_radius) << "\n";
  } else {
    os << "ue_positions = ";
    for (int k = 0; k < s.K(); ++k) os << (k ? "; " : "") << fmt(s.ues[k]);
    os << "\n";
  }
  os << "\n[kinematics]\n";
  os << "horizon_s = " << fmt(s.horizon) << "\n";
  os << "slot_s = " << fmt(s.slot) << "\n";
  os << "v_max_uirs = " << fmt(s.limits_r.v_max) << "\n";
  os << "v_max_ucj = " << fmt(s.limits_j.v_max) << "\n";
  os << "a_max_uirs = " << fmt(s.limits_r.a_max) << "\n";
  os << "a_max_ucj = " << fmt(s.limits_j.a_max) << "\n";
  os << "safety_distance = " << fmt(s.safety_distance) << "\n";
  os << "\n[power]\n";
  os << "p_a_max = " << fmt(s.p_a_max) << "\n";
  os << "p_j_max = " << fmt(s.p_j_max) << "\n";
  os << "p_tot = " << fmt(s.p_tot) << "\n";
  os << "bandwidth_hz = " << fmt(s.bandwidth) << "\n";
  os << "noise_dbm = " << fmt(s.noise_dbm) << "\n";
  os << "\n[atmosphere]\n";
  os << "carrier_hz = " << fmt(s.atmosphere.f_c) << "\n";
  os << "pressure_pa = " << fmt(s.atmosphere.pressure) << "\n";
  os << "temperature_c = " << fmt(s.atmosphere.temperature) << "\n";
  if (s.kappa_target)
    os << "kappa_target = " << fmt(*s.kappa_target) << "\n";
  else
    os << "humidity_pct = " << fmt(s.atmosphere.humidity) << "\n";
  os << "path_loss_exponent = " << fmt(s.path_loss_exponent) << "\n";
  os << "\n[irs]\n";
  os << "lx = " << s.irs.Lx << "\nly = " << s.irs.Ly << "\n";
  os << "dx = " << fmt(s.irs.dx) << "\ndy = " << fmt(s.irs.dy) << "\n";
  os << "\n[propulsion]\n";
  os << "p_o = " << fmt(s.propulsion.P_o) << "\np_i = " << fmt(s.propulsion.P_i) << "\n";
  os << "c0 = " << fmt(s.propulsion.c0) << "\nc1 = " << fmt(s.propulsion.c1)
     << "\nc2 = " << fmt(s.propulsion.c2) << "\n";
  os << "\n[covertness]\n";
  os << "epsilon = " << fmt(s.epsilon) << "\n";
  const auto& o = s.optimizer;
  os << "\n[optimizer]\n";
  os << "eps_outer = " << fmt(o.eps_outer) << "\neps_ucj = " << fmt(o.eps_ucj)
     << "\neps_uirs = " << fmt(o.eps_uirs) << "\neps_power = " << fmt(o.eps_power) << "\n";
  os << "max_outer = " << o.max_outer << "\nmax_inner = " << o.max_inner << "\n";
  os << "gap_tol = " << fmt(o.gap_tol) << "\nfeas_tol = " << fmt(o.feas_tol) << "\n";
  os << "penalty_init = " << fmt(o.penalty_init) << "\npenalty_growth = " << fmt(o.penalty_growth)
     << "\npenalty_max = " << fmt(o.penalty_max) << "\n";
  return os.str();
}

bool same_scenario(const Scenario& a, const Scenario& b) {
  if (serialize_scenario(a) != serialize_scenario(b)) return false;
  if (a.K() != b.K() || a.slots != b.slots || a.kappa != b.kappa || a.noise != b.noise ||
      a.atmosphere.humidity != b.atmosphere.humidity)
    return false;
  for (int k = 0; k < a.K(); ++k)
    if (a.ues[k] != b.ues[k]) return false;
  return true;
}

int Plan::scheduled(int n) const {
  for (int k = 0; k < alpha.cols(); ++k)
    if (alpha(n, k)) return k;
  return -1;
}

void check_plan_shape(const Scenario& s, const Plan& p) {
  const int N = s.slots;
  auto bad = [](const std::string& m) { throw ShapeError(m); };
  if (p.alpha.rows() != N || p.alpha.cols() != s.K()) bad("schedule must be N x K");
  if (p.p_a.size() != N || p.p_j.size() != N) bad("power vectors must have N entries");
  if (static_cast<int>(p.phi.size()) != N) bad("beamforming must have N slots");
  for (const CVec& f : p.phi)
    if (f.size() != s.L()) bad("beamforming vectors must have L entries");
  for (const Trajectory* t : {&p.traj_r, &p.traj_j})
    if (t->size() != N || static_cast<int>(t->velocities.size()) != N) bad("trajectories must have N slots");
}

double energy_used(const Scenario& s, const Vec& p_a, const Vec& p_j) {
  return s.slot * (p_a.sum() + p_j.sum());
}

std::vector<Violation> check_communication_constraints(const Scenario& s, const Plan& p) {
  check_plan_shape(s, p);
  std::vector<Violation> out;
  const double tol = 1e-12;
  for (int n = 0; n < s.slots; ++n) {
    int count = 0;
    for (int k = 0; k < s.K(); ++k) {
      int a = p.alpha(n, k);
      if (a != 0 && a != 1) out.push_back({"C4.binary", n + 1, static_cast<double>(a)});
      count += a;
    }
    if (count > 1) out.push_back({"C4.one_ue", n + 1, static_cast<double>(count - 1)});
    for (int l = 0; l < s.L(); ++l) {
      double amp = std::abs(p.phi[n][l]);
      if (amp > 1.0 + tol) out.push_back({"C5", n + 1, amp - 1.0});
    }
    if (p.p_a[n] < 0 || p.p_a[n] > s.p_a_max * (1 + 1e-12))
      out.push_back({"C6.p_a", n + 1, p.p_a[n] < 0 ? -p.p_a[n] : p.p_a[n] - s.p_a_max});
    if (p.p_j[n] < 0 || p.p_j[n] > s.p_j_max * (1 + 1e-12))
      out.push_back({"C6.p_j", n + 1, p.p_j[n] < 0 ? -p.p_j[n] : p.p_j[n] - s.p_j_max});
  }
  double e = energy_used(s, p.p_a, p.p_j);
  if (e > s.p_tot * (1 + 1e-9) + 1e-12) out.push_back({"C6.budget", 0, e - s.p_tot});
  return out;
}

void apply_closed_form_beamforming(const Scenario& s, Plan& p) {
  const double lambda = s.propagation().wavelength();
  p.phi.resize(s.slots);
  for (int n = 0; n < s.slots; ++n) {
    int k = p.scheduled(n);
    if (k < 0) {
      p.phi[n] = CVec::Ones(s.L());
      continue;
    }
    ArrayResponse ar = array_responses(p.traj_r.positions[n], s.ap, {s.ues[k]}, s.irs, lambda);
    p.phi[n] = closed_form_phases(ar.e_a, ar.e_k[0]);
  }
}

namespace {

// Circle of radius r through `station`, centered at station - r * dir,
// traversed once over slots 1..N with q[N] = q[1].
std::vector<Vec3> circle_waypoints(const Vec3& station, const Vec3& dir, double r, int n) {
  const Vec3 center = station - r * dir;
  const Vec3 perp(-dir.y(), dir.x(), 0.0);
  std::vector<Vec3> w(n);
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * kPi * i / (n - 1);
    w[i] = center + r * (std::cos(a) * dir + std::sin(a) * perp);
    w[i].z() = station.z();
  }
  w[n - 1] = station;
  w[0] = station;
  return w;
}

}  // namespace

Plan initial_feasible_plan(const Scenario& s) {
  const int N = s.slots, K = s.K();
  Plan p;

  Vec3 dir = s.station_r - s.ap;
  dir.z() = 0.0;
  dir = dir.norm() > 1e-9 ? Vec3(dir / dir.norm()) : Vec3(1, 0, 0);
  const double v = std::min(s.limits_r.v_max, s.limits_j.v_max);
  // The chord of each step is shorter than the arc, so this keeps |v| <= v_max.
  const double r = std::min(s.permitted_radius / 2.0, v * (N - 1) * s.slot / (2.0 * kPi));
  p.traj_r = trajectory_from_waypoints(circle_waypoints(s.station_r, dir, r, N), s.slot);
  p.traj_j = trajectory_from_waypoints(circle_waypoints(s.station_j, dir, r, N), s.slot);

  auto first_violation = [](const std::vector<Violation>& v, const std::string& who) {
    if (!v.empty())
      throw InfeasibleError(v.front().constraint,
                            who + " initial circle violates " + v.front().constraint + " at slot " +
                                std::to_string(v.front().slot));
  };
  first_violation(check_flight_constraints(p.traj_r, s.limits_r, s.station_r, s.ap,
                                           s.permitted_radius, s.altitude_r(), s.slot),
                  "UIRS");
  first_violation(check_flight_constraints(p.traj_j, s.limits_j, s.station_j, s.ap,
                                           s.permitted_radius, s.altitude_j(), s.slot),
                  "UCJ");
  first_violation(check_separation(p.traj_r, p.traj_j, s.safety_distance), "UAV pair");

  p.p_a = Vec::Constant(N, std::min(s.p_tot / (4.0 * s.horizon), s.p_a_max));
  p.p_j = Vec::Constant(N, std::min(s.p_tot / (2.0 * s.horizon), s.p_j_max));

  // Round-robin over UEs; a slot stays empty when its UE cannot be served covertly.
  p.alpha = Eigen::MatrixXi::Zero(N, K);
  p.phi.assign(N, CVec::Ones(s.L()));
  for (int n = 0; n < N; ++n) p.alpha(n, n % K) = 1;
  apply_closed_form_beamforming(s, p);
  Gains g = compute_gains(s, p);
  CovertCheck c = covertness_check(p, g, s.epsilon);
  for (int n : c.failing) p.alpha.row(n).setZero();
  apply_closed_form_beamforming(s, p);

  auto comm = check_communication_constraints(s, p);
  if (!comm.empty()) throw InfeasibleError(comm.front().constraint, "initial powers violate limits");
  return p;
}

}  // namespace cplan
