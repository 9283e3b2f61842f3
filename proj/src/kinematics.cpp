#include "cplan/kinematics.hpp"

#include <cmath>
#include <iomanip>

#include "cplan/errors.hpp"

namespace cplan {

double propulsion_power_speed(double s, const PropulsionConstants& c) {
  const double s2 = s * s;
  const double induced = std::sqrt(std::sqrt(1.0 + c.c2 * c.c2 * s2 * s2) - c.c2 * s2);
  return c.P_o * (1.0 + c.c0 * s2) + c.c1 * s2 * s + c.P_i * induced;
}

double propulsion_power(const Vec3& v, const PropulsionConstants& c) {
  return propulsion_power_speed(v.norm(), c);
}

double min_power_speed(const PropulsionConstants& c, double v_max, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = v_max;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = propulsion_power_speed(x1, c), f2 = propulsion_power_speed(x2, c);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = propulsion_power_speed(x1, c);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = propulsion_power_speed(x2, c);
    }
  }
  return 0.5 * (a + b);
}

std::vector<Violation> check_flight_constraints(const Trajectory& t, const FlightLimits& lim,
                                                const Vec3& anchor, const Vec3& center,
                                                double permitted_radius, double altitude,
                                                double dt) {
  const int n = t.size();
  if (n < 2 || static_cast<int>(t.velocities.size()) != n)
    throw ShapeError("trajectory needs N >= 2 positions and N velocities");
  std::vector<Violation> out;
  const double tol = kRecursionTol;

  double d0 = (t.positions[0] - anchor).norm();
  if (d0 > tol) out.push_back({"periodicity", 1, d0});
  double dn = (t.positions[n - 1] - t.positions[0]).norm();
  if (dn > tol) out.push_back({"periodicity", n, dn});

  for (int i = 0; i < n; ++i) {
    double dz = std::abs(t.positions[i].z() - altitude);
    if (dz > tol) out.push_back({"altitude", i + 1, dz});
  }

  Vec3 pred = t.positions[0];
  for (int i = 1; i < n; ++i) {
    pred += t.velocities[i - 1] * dt;
    double e = (t.positions[i] - pred).norm();
    if (e > tol) out.push_back({"recursion", i + 1, e});
  }

  const double zone = std::sqrt(permitted_radius * permitted_radius + altitude * altitude);
  for (int i = 0; i < n; ++i) {
    double e = (t.positions[i] - center).norm() - zone;
    if (e > tol) out.push_back({"permitted_zone", i + 1, e});
  }
  for (int i = 0; i < n; ++i) {
    double e = t.velocities[i].norm() - lim.v_max;
    if (e > tol) out.push_back({"speed", i + 1, e});
  }
  for (int i = 0; i + 1 < n; ++i) {
    double e = (t.velocities[i + 1] - t.velocities[i]).norm() - lim.a_max;
    if (e > tol) out.push_back({"acceleration", i + 1, e});
  }
  return out;
}

std::vector<Violation> check_separation(const Trajectory& r, const Trajectory& j,
                                        double min_distance) {
  if (r.size() != j.size()) throw ShapeError("trajectories have different slot counts");
  std::vector<Violation> out;
  for (int i = 0; i < r.size(); ++i) {
    double d = (r.positions[i] - j.positions[i]).norm();
    if (d < min_distance) out.push_back({"separation", i + 1, min_distance - d});
  }
  return out;
}

Trajectory trajectory_from_waypoints(const std::vector<Vec3>& w, double dt) {
  const int n = static_cast<int>(w.size());
  if (n < 2) throw ShapeError("need at least two waypoints");
  Trajectory t;
  t.velocities.resize(n);
  for (int i = 0; i + 1 < n; ++i) t.velocities[i] = (w[i + 1] - w[i]) / dt;
  t.velocities[n - 1] = t.velocities[n - 2];
  t.positions.resize(n);
  t.positions[0] = w[0];
  for (int i = 1; i < n; ++i) t.positions[i] = t.positions[i - 1] + t.velocities[i - 1] * dt;
  // Snap the closing waypoint so periodicity holds bit-exactly when intended.
  if ((w[n - 1] - w[0]).norm() == 0.0) t.positions[n - 1] = w[0];
  return t;
}

std::vector<double> slot_powers(const Trajectory& t, const PropulsionConstants& c) {
  std::vector<double> p(t.velocities.size());
  for (size_t i = 0; i < p.size(); ++i) p[i] = propulsion_power(t.velocities[i], c);
  return p;
}

double mission_energy(const Trajectory& r, const Trajectory& j, const PropulsionConstants& c,
                      double dt) {
  if (r.size() != j.size()) throw ShapeError("trajectories have different slot counts");
  double e = 0.0;
  for (int i = 0; i < r.size(); ++i)
    e += propulsion_power(r.velocities[i], c) + propulsion_power(j.velocities[i], c);
  return dt * e;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t, const PropulsionConstants& c) {
  os << "slot,x,y,z,vx,vy,vz,power_watts\n";
  os << std::setprecision(17);
  for (int i = 0; i < t.size(); ++i) {
    const Vec3& q = t.positions[i];
    const Vec3& v = t.velocities[i];
    os << i + 1 << ',' << q.x() << ',' << q.y() << ',' << q.z() << ',' << v.x() << ',' << v.y()
       << ',' << v.z() << ',' << propulsion_power(v, c) << '\n';
  }
}

}  // namespace cplan
