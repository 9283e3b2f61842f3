#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

namespace cplan {

using Vec3 = Eigen::Vector3d;

struct PropulsionConstants {
  double P_o = 79.856;
  double P_i = 88.63;
  double c0 = 2.0833e-4;
  double c1 = 0.0092;
  double c2 = 0.0308;
};

// Rotary-wing propulsion power at velocity v.
double propulsion_power(const Vec3& v, const PropulsionConstants& c);
double propulsion_power_speed(double speed, const PropulsionConstants& c);

// Speed in [0, v_max] minimizing propulsion power (golden-section search).
double min_power_speed(const PropulsionConstants& c, double v_max, double tol = 1e-6);

struct Trajectory {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  int size() const { return static_cast<int>(positions.size()); }
};

struct FlightLimits {
  double v_max = 25.0;
  double a_max = 6.0;
};

// One violated constraint. `slot` is 1-based.
struct Violation {
  std::string constraint;
  int slot = 0;
  double magnitude = 0.0;
};

constexpr double kRecursionTol = 1e-9;

// Periodicity, altitude, position recursion (checked cumulatively from
// q[1]), permitted zone, speed and acceleration limits.
std::vector<Violation> check_flight_constraints(const Trajectory& t, const FlightLimits& lim,
                                                const Vec3& anchor, const Vec3& center,
                                                double permitted_radius, double altitude,
                                                double dt);

std::vector<Violation> check_separation(const Trajectory& r, const Trajectory& j,
                                        double min_distance);

// Positions q[1] + dt * cumulative velocities, with v[n] = (q[n+1]-q[n])/dt.
Trajectory trajectory_from_waypoints(const std::vector<Vec3>& waypoints, double dt);

std::vector<double> slot_powers(const Trajectory& t, const PropulsionConstants& c);
double mission_energy(const Trajectory& r, const Trajectory& j, const PropulsionConstants& c,
                      double dt);

void write_trajectory_csv(std::ostream& os, const Trajectory& t, const PropulsionConstants& c);

}  // namespace cplan
