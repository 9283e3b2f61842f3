#include "cplan/channel.hpp"

#include <cmath>
#include <iomanip>

#include "cplan/errors.hpp"

namespace cplan {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_distinct(const Vec3& a, const Vec3& b, const char* what) {
  if ((a - b).norm() <= 1e-12) throw GeometryError(std::string("coincident points: ") + what);
}

double wrap_phase(double x) {
  double r = std::fmod(x, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  if (r >= 2.0 * kPi) r = 0.0;
  return r;
}

}  // namespace

double mixing_ratio(double pressure, double humidity, double temperature) {
  if (!(pressure > 0.0)) throw ParameterError("pressure must be positive");
  if (!(humidity >= 0.0 && humidity <= 100.0)) throw ParameterError("humidity must be in [0,100]");
  if (!(temperature > -240.97)) throw ParameterError("temperature must exceed -240.97 C");
  return 6.1121 * (3.46e-8 * pressure + 1.0007) * (humidity / pressure) *
         std::exp(17.502 * temperature / (240.97 + temperature));
}

double absorption_coeff_mu(double f_c, double mu) {
  const double nu = f_c / (100.0 * kSpeedOfLight);  // wavenumber in 1/cm
  const double a1 = 0.4093 * mu + 0.0925, b1 = nu - 10.835;
  const double a2 = 0.537 * mu + 0.0956, b2 = nu - 12.664;
  return 0.2205 * mu * (0.133 * mu + 0.0294) / (a1 * a1 + b1 * b1) +
         2.014 * mu * (0.1702 * mu + 0.0303) / (a2 * a2 + b2 * b2) + 5.54e-37 * f_c * f_c * f_c -
         3.94e-25 * f_c * f_c + 9.06e-14 * f_c - 6.36e-3;
}

Absorption absorption_coeff(const AtmosphereParams& a) {
  Absorption out;
  out.mu = mixing_ratio(a.pressure, a.humidity, a.temperature);
  out.kappa = absorption_coeff_mu(a.f_c, out.mu);
  if (a.f_c < 275e9 || a.f_c > 400e9)
    out.warning = "carrier frequency outside the 275-400 GHz model window";
  return out;
}

double calibrate_humidity(const AtmosphereParams& a, double f_ref, double kappa_target) {
  auto kappa_at = [&](double phi) {
    return absorption_coeff_mu(f_ref, mixing_ratio(a.pressure, phi, a.temperature));
  };
  double lo = 0.0, hi = 100.0;
  if (kappa_target < kappa_at(lo) || kappa_target > kappa_at(hi))
    throw ParameterError("kappa target not reachable for humidity in [0,100]");
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    double mid = 0.5 * (lo + hi);
    (kappa_at(mid) < kappa_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

cd direct_gain(const Vec3& tx, const Vec3& rx, const Propagation& pr) {
  require_distinct(tx, rx, "direct link");
  const double d = (tx - rx).norm();
  const double amp = kSpeedOfLight / (4.0 * kPi * pr.f_c * std::pow(d, pr.rho / 2.0)) *
                     std::exp(-pr.kappa * d / 2.0);
  return std::polar(amp, -2.0 * kPi * d / pr.wavelength());
}

cd cascaded_base_gain(const Vec3& q_r, const Vec3& q_a, const Vec3& q_k, const Propagation& pr) {
  require_distinct(q_r, q_a, "AP-IRS hop");
  require_distinct(q_r, q_k, "IRS-UE hop");
  const double d1 = (q_r - q_a).norm(), d2 = (q_r - q_k).norm();
  const double amp = kSpeedOfLight /
                     (8.0 * kPi * std::sqrt(kPi) * pr.f_c * std::pow(d1, pr.rho / 2.0) *
                      std::pow(d2, pr.rho / 2.0)) *
                     std::exp(-pr.kappa * (d1 + d2) / 2.0);
  return std::polar(amp, -2.0 * kPi * (d1 + d2) / pr.wavelength());
}

ArrayResponse array_responses(const Vec3& q_r, const Vec3& q_a, const std::vector<Vec3>& q_k,
                              const IrsGeometry& irs, double wavelength) {
  require_distinct(q_r, q_a, "AP-IRS hop");
  const int L = irs.size();
  std::vector<Vec3> dr(L);
  for (int lx = 0; lx < irs.Lx; ++lx)
    for (int ly = 0; ly < irs.Ly; ++ly) dr[lx * irs.Ly + ly] = Vec3(lx * irs.dx, ly * irs.dy, 0.0);

  auto response = [&](const Vec3& dir) {
    const Vec3 u = dir / dir.norm();
    CVec e(L);
    for (int l = 0; l < L; ++l) e[l] = std::polar(1.0, -2.0 * kPi * u.dot(dr[l]) / wavelength);
    return e;
  };
  ArrayResponse r;
  r.e_a = response(q_r - q_a);
  r.e_k.reserve(q_k.size());
  for (const Vec3& q : q_k) {
    require_distinct(q, q_r, "IRS-UE hop");
    r.e_k.push_back(response(q - q_r));
  }
  return r;
}

cd effective_gain(const CVec& e_a, const CVec& e_k, const CVec& phi, cd h) {
  if (e_a.size() != phi.size() || e_k.size() != phi.size())
    throw ShapeError("array response and beamforming sizes differ");
  cd s = 0.0;
  for (int l = 0; l < phi.size(); ++l) {
    if (std::abs(phi[l]) > 1.0 + 1e-12) throw ConstraintError("C5", "reflection amplitude above 1");
    s += std::conj(e_k[l]) * phi[l] * e_a[l];
  }
  return s * h;
}

CVec closed_form_phases(const CVec& e_a, const CVec& e_k) {
  CVec phi(e_a.size());
  for (int l = 0; l < e_a.size(); ++l)
    phi[l] = std::polar(1.0, wrap_phase(std::arg(e_k[l]) - std::arg(e_a[l])));
  return phi;
}

void write_absorption_csv(std::ostream& os, const AtmosphereParams& a, double f_lo, double f_hi,
                          int points, double distance) {
  os << "f_c_GHz,kappa_per_m,loss_dB_at_d\n" << std::setprecision(12);
  const double mu = mixing_ratio(a.pressure, a.humidity, a.temperature);
  for (int i = 0; i < points; ++i) {
    double f = points == 1 ? f_lo : f_lo + (f_hi - f_lo) * i / (points - 1);
    double k = absorption_coeff_mu(f, mu);
    os << f / 1e9 << ',' << k << ',' << 10.0 * k * distance / std::log(10.0) << '\n';
  }
}

}  // namespace cplan
