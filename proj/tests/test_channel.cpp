#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cplan/channel.hpp"
#include "cplan/errors.hpp"

using namespace cplan;
using std::numbers::pi;

namespace {

// Second transcription of the humidity-to-mixing-ratio formula, with the
// saturation pressure factored out.
double mu_oracle(double P, double phi, double T) {
  double enhancement = 1.0007 + 3.46e-8 * P;
  double saturation = 6.1121 * std::exp(17.502 * T / (240.97 + T));
  return enhancement * saturation * phi / P;
}

// Second transcription of the absorption model.
double kappa_oracle(double f, double mu) {
  double nu = f / (100.0 * 3e8);
  auto line = [&](double s, double w0, double w1, double a0, double a1, double nu0) {
    double width = a0 * mu + a1;
    return s * mu * (w0 * mu + w1) / (width * width + (nu - nu0) * (nu - nu0));
  };
  double poly = ((5.54e-37 * f - 3.94e-25) * f + 9.06e-14) * f - 6.36e-3;
  return line(0.2205, 0.133, 0.0294, 0.4093, 0.0925, 10.835) +
         line(2.014, 0.1702, 0.0303, 0.537, 0.0956, 12.664) + poly;
}

Vec3 random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  return Vec3(u(rng), u(rng), u(rng));
}

}  // namespace

TEST_CASE("mixing ratio") {
  CHECK(mixing_ratio(101325, 0.0, 22.85) == 0.0);
  double prev = -1.0;
  for (double phi = 0.0; phi <= 100.0; phi += 5.0) {
    double m = mixing_ratio(101325, phi, 22.85);
    CHECK(m > prev);
    prev = m;
  }
  double m = mixing_ratio(101325, 50.0, 22.85);
  CHECK(std::abs(m - mu_oracle(101325, 50.0, 22.85)) <= 1e-12 * m);
  CHECK_THROWS_AS(mixing_ratio(0.0, 50.0, 20.0), ParameterError);
  CHECK_THROWS_AS(mixing_ratio(101325, 101.0, 20.0), ParameterError);
  CHECK_THROWS_AS(mixing_ratio(101325, 50.0, -241.0), ParameterError);
}

TEST_CASE("absorption matches the transcribed model") {
  for (double mu : {0.0, 0.005, 0.0154, 0.03})
    for (double f = 275e9; f <= 400e9; f += 2.5e9)
      CHECK(absorption_coeff_mu(f, mu) == doctest::Approx(kappa_oracle(f, mu)).epsilon(1e-10));
}

TEST_CASE("calibrated humidity reproduces the reference absorption") {
  AtmosphereParams a;
  double phi = calibrate_humidity(a, 0.3e12, 3.2094e-4);
  CHECK(phi >= 0.0);
  CHECK(phi <= 100.0);
  a.humidity = phi;
  Absorption k = absorption_coeff(a);
  CHECK(std::abs(k.kappa - 3.2094e-4) <= 1e-3 * 3.2094e-4);
  CHECK(k.warning.empty());
  CHECK_THROWS_AS(calibrate_humidity(a, 0.3e12, 1.0), ParameterError);
}

TEST_CASE("dry air leaves the polynomial tail") {
  for (double f : {280e9, 320e9, 380e9}) {
    double tail = 5.54e-37 * f * f * f - 3.94e-25 * f * f + 9.06e-14 * f - 6.36e-3;
    CHECK(absorption_coeff_mu(f, 0.0) == doctest::Approx(tail).epsilon(1e-12));
  }
}

TEST_CASE("absorption spike between 370 and 390 GHz") {
  AtmosphereParams a;
  a.humidity = calibrate_humidity(a, 0.3e12, 3.2094e-4);
  double mu = mixing_ratio(a.pressure, a.humidity, a.temperature);
  double best_f = 0.0, best_k = -1.0;
  for (double f = 370e9; f <= 390e9; f += 0.05e9) {
    double k = absorption_coeff_mu(f, mu);
    if (k > best_k) {
      best_k = k;
      best_f = f;
    }
  }
  CHECK(best_f > 370e9);
  CHECK(best_f < 390e9);
  CHECK(absorption_coeff_mu(best_f - 1e9, mu) < best_k);
  CHECK(absorption_coeff_mu(best_f + 1e9, mu) < best_k);
}

TEST_CASE("out-of-window carrier warns") {
  AtmosphereParams a;
  a.f_c = 0.5e12;
  CHECK_FALSE(absorption_coeff(a).warning.empty());
}

TEST_CASE("absorption is continuous over the window") {
  double mu = 0.0154;
  for (double f = 275e9; f < 400e9; f += 1e9) {
    // Difference quotients at two step sizes agree, so no pole sits nearby.
    double k0 = absorption_coeff_mu(f, mu);
    double s1 = (absorption_coeff_mu(f + 1e5, mu) - k0) / 1e5;
    double s2 = (absorption_coeff_mu(f + 1e4, mu) - k0) / 1e4;
    CHECK(std::abs(s1 - s2) <= 1e-2 * std::abs(s2) + 1e-20);
  }
}

TEST_CASE("direct gain reduces to free space") {
  Propagation pr{0.3e12, 0.0, 2.0};
  Vec3 a(0, 0, 0), b(30, 40, 0);
  double lam = 3e8 / 0.3e12;
  double g = std::norm(direct_gain(a, b, pr));
  CHECK(g == doctest::Approx(std::pow(lam / (4 * pi * 50.0), 2)).epsilon(1e-12));
  double g2 = std::norm(direct_gain(a, 2.0 * b, pr));
  CHECK(g / g2 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(direct_gain(a, a, pr), GeometryError);
}

TEST_CASE("absorption factor over 100 m") {
  Propagation dry{0.3e12, 0.0, 2.0}, wet{0.3e12, 3.2094e-4, 2.0};
  Vec3 a(0, 0, 0), b(100, 0, 0);
  double factor = std::norm(direct_gain(a, b, wet)) / std::norm(direct_gain(a, b, dry));
  CHECK(std::abs(factor - 0.96842) < 1e-5);
}

TEST_CASE("direct gain decreases with distance") {
  Propagation pr{0.3e12, 3.2094e-4, 2.0};
  double prev = 1e300;
  for (double d = 1.0; d < 500.0; d *= 1.3) {
    double g = std::abs(direct_gain(Vec3::Zero(), Vec3(d, 0, 0), pr));
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("cascaded gain constant, symmetry and absorption product") {
  std::mt19937_64 rng(7);
  Propagation dry{0.3e12, 0.0, 2.0}, wet{0.3e12, 3.2094e-4, 2.0};
  double lam = dry.wavelength();
  for (int i = 0; i < 50; ++i) {
    Vec3 r = random_point(rng, 200), a = random_point(rng, 200), k = random_point(rng, 200);
    double d1 = (r - a).norm(), d2 = (r - k).norm();
    double g = std::norm(cascaded_base_gain(r, a, k, dry));
    CHECK(g == doctest::Approx(lam * lam / (64 * pi * pi * pi * d1 * d1 * d2 * d2)).epsilon(1e-11));
    CHECK(std::abs(cascaded_base_gain(r, a, k, wet)) ==
          doctest::Approx(std::abs(cascaded_base_gain(r, k, a, wet))).epsilon(1e-12));
    double cascade = std::norm(cascaded_base_gain(r, a, k, wet)) / g;
    double hop1 = std::norm(direct_gain(r, a, wet)) / std::norm(direct_gain(r, a, dry));
    double hop2 = std::norm(direct_gain(r, k, wet)) / std::norm(direct_gain(r, k, dry));
    CHECK(cascade == doctest::Approx(hop1 * hop2).epsilon(1e-12));
  }
}

TEST_CASE("array responses") {
  IrsGeometry irs{3, 4, 1e-3, 1e-3};
  double lam = 1e-3;
  std::mt19937_64 rng(9);

  SUBCASE("unit modulus with reference element at one") {
    for (int i = 0; i < 20; ++i) {
      Vec3 r = random_point(rng, 100), a = random_point(rng, 100), k = random_point(rng, 100);
      ArrayResponse ar = array_responses(r, a, {k}, irs, lam);
      for (int l = 0; l < irs.size(); ++l) {
        CHECK(std::abs(std::abs(ar.e_a[l]) - 1.0) < 1e-12);
        CHECK(std::abs(std::abs(ar.e_k[0][l]) - 1.0) < 1e-12);
      }
      CHECK(std::abs(ar.e_a[0] - cd(1.0)) < 1e-12);
      CHECK(std::abs(ar.e_k[0][0] - cd(1.0)) < 1e-12);
    }
  }
  SUBCASE("normal incidence has zero phase") {
    ArrayResponse ar = array_responses(Vec3(5, 5, 50), Vec3(5, 5, 0), {Vec3(1, 2, 3)}, irs, lam);
    for (int l = 0; l < irs.size(); ++l) CHECK(std::abs(ar.e_a[l] - cd(1.0)) < 1e-12);
  }
  SUBCASE("single element is scalar one") {
    ArrayResponse ar = array_responses(Vec3(5, 5, 50), Vec3(0, 0, 0), {Vec3(9, 2, 3)}, IrsGeometry{}, lam);
    REQUIRE(ar.e_a.size() == 1);
    CHECK(std::abs(ar.e_a[0] - cd(1.0)) < 1e-15);
    CHECK(std::abs(ar.e_k[0][0] - cd(1.0)) < 1e-15);
  }
  SUBCASE("phase ramp matches a dot-product oracle") {
    Vec3 r(40, -10, 50), a(0, 0, 0);
    ArrayResponse ar = array_responses(r, a, {}, irs, lam);
    Vec3 u = (r - a).normalized();
    double step = 2 * pi * u.x() * irs.dx / lam;
    for (int ly = 0; ly < irs.Ly; ++ly)
      for (int lx = 0; lx + 1 < irs.Lx; ++lx) {
        cd ratio = ar.e_a[(lx + 1) * irs.Ly + ly] / ar.e_a[lx * irs.Ly + ly];
        CHECK(std::abs(ratio - std::polar(1.0, -step)) < 1e-12);
      }
  }
  SUBCASE("coincident points throw") {
    CHECK_THROWS_AS(array_responses(Vec3(1, 1, 1), Vec3(1, 1, 1), {}, irs, lam), GeometryError);
  }
}

TEST_CASE("effective gain bounds and alignment") {
  IrsGeometry irs{3, 4, 1e-3, 1e-3};
  const int L = irs.size();
  Propagation pr{0.3e12, 3.2094e-4, 2.0};
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> amp(0.0, 1.0), ang(0.0, 2 * pi);
  for (int trial = 0; trial < 10; ++trial) {
    Vec3 r = random_point(rng, 150) + Vec3(0, 0, 200), a = random_point(rng, 150), k = random_point(rng, 150);
    ArrayResponse ar = array_responses(r, a, {k}, irs, pr.wavelength());
    cd h = cascaded_base_gain(r, a, k, pr);
    double bound = L * L * std::norm(h);

    CVec phi = closed_form_phases(ar.e_a, ar.e_k[0]);
    CHECK(std::norm(effective_gain(ar.e_a, ar.e_k[0], phi, h)) == doctest::Approx(bound).epsilon(1e-9));
    CHECK(std::abs(effective_gain(ar.e_a, ar.e_k[0], CVec::Zero(L), h)) == 0.0);

    for (int s = 0; s < 1000; ++s) {
      CVec q(L);
      for (int l = 0; l < L; ++l) q[l] = std::polar(amp(rng), ang(rng));
      CHECK(std::norm(effective_gain(ar.e_a, ar.e_k[0], q, h)) <= bound * (1 + 1e-12));
    }
  }
  CVec big = CVec::Constant(L, cd(1.1, 0.0));
  CVec e = CVec::Ones(L);
  CHECK_THROWS_AS(effective_gain(e, e, big, cd(1.0)), ConstraintError);
}

TEST_CASE("absorption export") {
  AtmosphereParams a;
  std::ostringstream os;
  write_absorption_csv(os, a, 275e9, 400e9, 6, 100.0);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "f_c_GHz,kappa_per_m,loss_dB_at_d");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 6);
}
