#include <algorithm>
#include <cmath>

#include "bsca_internal.hpp"
#include "cplan/errors.hpp"

namespace cplan {

CVec closed_form_beamforming(const Vec3& q_r, const Vec3& q_a, const Vec3& q_k,
                             const IrsGeometry& irs, double wavelength) {
  ArrayResponse ar = array_responses(q_r, q_a, {q_k}, irs, wavelength);
  return closed_form_phases(ar.e_a, ar.e_k[0]);
}

BeamformingSlot beamforming_slot(const Scenario& s, const Plan& p, int n) {
  if (s.K() < 2) throw ParameterError("beamforming needs at least one warden (K >= 2)");
  const int k = p.scheduled(n);
  if (k < 0) throw ParameterError("slot " + std::to_string(n + 1) + " has no scheduled UE");
  const Propagation pr = s.propagation();
  const Vec3& qr = p.traj_r.positions[n];
  ArrayResponse ar = array_responses(qr, s.ap, s.ues, s.irs, pr.wavelength());
  auto coupling = [&](int m) {
    CVec v(s.L());
    for (int l = 0; l < s.L(); ++l) v[l] = ar.e_k[m][l] * std::conj(ar.e_a[l]);
    return v;
  };
  BeamformingSlot slot;
  slot.eps = s.epsilon;
  slot.a = coupling(k);
  for (int m = 0; m < s.K(); ++m) {
    if (m == k) continue;
    const double hm = std::norm(cascaded_base_gain(qr, s.ap, s.ues[m], pr));
    const double gjm = std::norm(direct_gain(p.traj_j.positions[n], s.ues[m], pr));
    const double leak = p.p_a[n] * hm;
    if (leak <= 0) continue;
    slot.b.push_back(coupling(m));
    slot.c.push_back(p.p_j[n] * gjm > 0 ? leak / (p.p_j[n] * gjm) : 1e300);
  }
  return slot;
}

namespace {

struct LiftedProgram {
  detail::Builder b;
  HermitianBlock W;
};

// Feasible set shared by the relaxation and the rank-penalized problem.
LiftedProgram lifted(const BeamformingSlot& slot, const CMat& start) {
  const int L = static_cast<int>(slot.a.size());
  LiftedProgram lp;
  lp.W = lp.b.prog.add_hermitian_psd("W", L);
  lp.b.x0.assign(lp.W.count(), 0.0);
  for (int l = 0; l < L; ++l) {
    lp.b.x0[lp.W.diag(l)] = start(l, l).real();
    for (int m = l + 1; m < L; ++m) {
      lp.b.x0[lp.W.re(l, m)] = start(l, m).real();
      lp.b.x0[lp.W.im(l, m)] = start(l, m).imag();
    }
    lp.b.prog.add_le("diag" + std::to_string(l), Affine::var(lp.W.diag(l)) - 1.0);
  }
  for (size_t m = 0; m < slot.b.size(); ++m) {
    CMat B = slot.b[m] * slot.b[m].adjoint();
    lp.b.prog.add_le("covert" + std::to_string(m), lp.W.trace_with(B) * (slot.c[m] / slot.eps) - 1.0);
  }
  return lp;
}

// Scaled identity strictly inside every constraint.
CMat interior_start(const BeamformingSlot& slot) {
  const int L = static_cast<int>(slot.a.size());
  double worst = 0.0;
  for (size_t m = 0; m < slot.b.size(); ++m) worst = std::max(worst, slot.c[m] * slot.b[m].squaredNorm());
  const double d = worst > 0 ? std::min(0.5, 0.5 * slot.eps / worst) : 0.5;
  return d * CMat::Identity(L, L);
}

bool covert_ok(const BeamformingSlot& slot, const CVec& phi) {
  for (size_t m = 0; m < slot.b.size(); ++m)
    if (slot.c[m] * std::norm(slot.b[m].dot(phi)) > slot.eps * (1 + 1e-9)) return false;
  return true;
}

}  // namespace

SdrResult sdr_beamforming(const BeamformingSlot& slot, const SolverOptions& opt) {
  const int L = static_cast<int>(slot.a.size());
  LiftedProgram lp = lifted(slot, interior_start(slot));
  const CMat A = slot.a * slot.a.adjoint();
  lp.b.prog.maximize(lp.W.trace_with(A) * (1.0 / (double(L) * L)));
  Solution sol = solve(lp.b.prog, lp.b.start(), opt);
  SdrResult r;
  r.W = lp.W.value(sol.x);
  r.value = (A * r.W).trace().real();
  r.ok = sol.status == SolveStatus::Optimal;
  return r;
}

RmScaResult rm_sca_beamforming(const BeamformingSlot& slot, const CVec& closed_form,
                               const PenaltySchedule& pen, int max_iter, const SolverOptions& opt) {
  const int L = static_cast<int>(slot.a.size());
  RmScaResult r;
  const double cf_value = std::norm(slot.a.dot(closed_form));
  auto fallback = [&] {
    r.phi = closed_form;
    r.value = cf_value;
    r.fallback = true;
    return r;
  };
  SdrResult sdr = sdr_beamforming(slot, opt);
  if (!sdr.ok) return fallback();
  CMat W = sdr.W;
  const CMat A = slot.a * slot.a.adjoint();
  double psi = rank_one_psi(W);
  r.psi.push_back(psi);
  r.mu.push_back(0.0);
  r.iterations = 1;
  double mu = pen.init;
  while (psi > 1e-6 && r.iterations < max_iter) {
    EigPairs e = smallest_eigpairs(W, L - 1);
    const CMat& V = e.vectors;
    CMat start = 0.9 * W + 0.1 * interior_start(slot);
    LiftedProgram lp = lifted(slot, start);
    const CMat VW0V = V.adjoint() * start * V;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (VW0V + VW0V.adjoint()));
    const double wn = std::max(W.norm(), 1e-12);
    int ps = lp.b.var("psi", (es.eigenvalues().maxCoeff() + 1e-3 * wn) / wn, 0.0);
    // psi |W_0|_F I - V^H W V >= 0, with psi normalized like rank_one_psi.
    std::vector<std::pair<int, CMat>> coefs;
    coefs.emplace_back(ps, wn * CMat::Identity(L - 1, L - 1));
    const std::complex<double> I(0.0, 1.0);
    for (int l = 0; l < L; ++l) {
      coefs.emplace_back(lp.W.diag(l), -(V.row(l).adjoint() * V.row(l)));
      for (int m = l + 1; m < L; ++m) {
        CMat lm = V.row(l).adjoint() * V.row(m);
        coefs.emplace_back(lp.W.re(l, m), -(lm + lm.adjoint()));
        coefs.emplace_back(lp.W.im(l, m), -(I * lm - I * lm.adjoint()));
      }
    }
    lp.b.prog.add_complex_lmi("rank", CMat::Zero(L - 1, L - 1), coefs);
    lp.b.prog.maximize(lp.W.trace_with(A) * (1.0 / (double(L) * L)) + Affine::var(ps, -mu));
    Solution sol = solve(lp.b.prog, lp.b.start(), opt);
    ++r.iterations;
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIter) break;
    W = lp.W.value(sol.x);
    psi = rank_one_psi(W);
    r.psi.push_back(psi);
    r.mu.push_back(mu);
    mu = std::min(pen.max, mu * pen.growth);
  }
  r.rank_one = psi <= 1e-6;
  RankOneResult ex = rank_one_extract(W);
  CVec phi = ex.u;
  for (int l = 0; l < L; ++l)
    if (std::abs(phi[l]) > 1.0) phi[l] /= std::abs(phi[l]);
  const double value = std::norm(slot.a.dot(phi));
  if (!r.rank_one || !covert_ok(slot, phi) || value < cf_value - 1e-6 * double(L) * L) {
    // Keep the closed form when it is covert; RM-SCA only wins when it is not.
    if (covert_ok(slot, closed_form) || !r.rank_one || !covert_ok(slot, phi)) return fallback();
  }
  r.phi = phi;
  r.value = value;
  return r;
}

}  // namespace cplan
