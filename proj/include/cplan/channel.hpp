#pragma once

#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include "cplan/kinematics.hpp"
#include "cplan/solver.hpp"

namespace cplan {

constexpr double kSpeedOfLight = 3e8;
using cd = std::complex<double>;

struct AtmosphereParams {
  double f_c = 0.3e12;           // Hz
  double pressure = 101325.0;    // Pa
  double temperature = 22.85;    // deg C
  double humidity = 50.0;        // percent
};

// Water-vapor volume mixing ratio.
double mixing_ratio(double pressure, double humidity, double temperature);

struct Absorption {
  double kappa = 0.0;  // 1/m
  double mu = 0.0;
  std::string warning;  // non-empty when f_c lies outside 275-400 GHz
};

Absorption absorption_coeff(const AtmosphereParams& a);
double absorption_coeff_mu(double f_c, double mu);

// Relative humidity in [0, 100] giving kappa(f_ref) == kappa_target at the
// pressure and temperature of `a`. Throws ParameterError if out of reach.
double calibrate_humidity(const AtmosphereParams& a, double f_ref, double kappa_target);

struct Propagation {
  double f_c = 0.3e12;
  double kappa = 0.0;
  double rho = 2.0;
  double wavelength() const { return kSpeedOfLight / f_c; }
};

cd direct_gain(const Vec3& tx, const Vec3& rx, const Propagation& pr);
cd cascaded_base_gain(const Vec3& q_r, const Vec3& q_a, const Vec3& q_k, const Propagation& pr);

struct IrsGeometry {
  int Lx = 1;
  int Ly = 1;
  double dx = 1e-3;
  double dy = 1e-3;
  int size() const { return Lx * Ly; }
};

struct ArrayResponse {
  CVec e_a;
  std::vector<CVec> e_k;  // one per requested receiver
};

// Element l = (lx-1)*Ly + ly (0-based here) sits at q_r + [lx dx, ly dy, 0].
ArrayResponse array_responses(const Vec3& q_r, const Vec3& q_a, const std::vector<Vec3>& q_k,
                              const IrsGeometry& irs, double wavelength);

// e_k^H diag(phi) e_a * h. Throws ConstraintError("C5") if some |phi_l| > 1.
cd effective_gain(const CVec& e_a, const CVec& e_k, const CVec& phi, cd h);

// Phases aligning every element towards the receiver: phi_l = theta_l - beta_l.
CVec closed_form_phases(const CVec& e_a, const CVec& e_k);

void write_absorption_csv(std::ostream& os, const AtmosphereParams& a, double f_lo, double f_hi,
                          int points, double distance);

}  // namespace cplan
