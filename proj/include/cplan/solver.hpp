#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace cplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// c + sum_i coef_i * x_i over global variable indices.
struct Affine {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  Affine() = default;
  explicit Affine(double c) : constant(c) {}
  static Affine var(int index, double coef = 1.0);

  Affine& add(int index, double coef);
  Affine& operator+=(const Affine& o);
  Affine& operator*=(double s);
  double eval(const Vec& x) const;
};

Affine operator+(Affine a, const Affine& b);
Affine operator-(Affine a, const Affine& b);
Affine operator*(double s, Affine a);
Affine operator+(Affine a, double c);
Affine operator-(Affine a, double c);
inline Affine operator*(Affine a, double s) { return a *= s; }
inline Affine operator+(double c, Affine a) { return a + c; }

// Convex scalar pieces a constraint or objective penalty is assembled from.
enum class TermKind {
  NegLog,       // -w ln(a)
  Exp,          // w exp(a)
  SqSum,        // w sum_i r_i^2
  Power,        // w a^p, p < 0 or p >= 1, on a > 0
  RadialPowExp, // w |r|^p exp(kappa |r|), p >= 2
  QuadOverLin,  // w a^2 / b, b > 0
};

struct Term {
  TermKind kind = TermKind::SqSum;
  double weight = 1.0;
  std::vector<Affine> args;
  double p = 0.0;
  double kappa = 0.0;

  static Term neg_log(double w, Affine a);
  static Term exp(double w, Affine a);
  static Term sq_sum(double w, std::vector<Affine> rows);
  static Term power(double w, Affine a, double p);
  static Term radial(double w, std::vector<Affine> rows, double p, double kappa);
  static Term quad_over_lin(double w, Affine a, Affine b);

  // Throws CurvatureError when the term is not convex as parameterized.
  void check() const;
  double eval(const Vec& x) const;
};

// lin(x) + sum of convex terms.
struct ConvexFunc {
  Affine lin;
  std::vector<Term> terms;
  double eval(const Vec& x) const;
};

struct FuncAtom {
  ConvexFunc g;  // g(x) <= 0
  std::string name;
};

struct SocAtom {
  std::vector<Affine> rows;  // |rows| <= bound
  Affine bound;
  std::string name;
};

// F0 + sum_i x_i F_i is positive semidefinite (real symmetric).
struct LmiAtom {
  Mat f0;
  std::vector<std::pair<int, Mat>> coefs;
  std::string name;
};

struct EqAtom {
  Affine a;  // a(x) == 0
  std::string name;
};

// Variables of an L x L Hermitian matrix W = X + iY stored as
// X_ll, then (X_lm, Y_lm) for l < m.
struct HermitianBlock {
  int size = 0;
  int offset = 0;
  int diag(int l) const;
  int re(int l, int m) const;
  int im(int l, int m) const;
  int count() const { return size * size; }
  CMat value(const Vec& x) const;
  // Re tr(A W) for Hermitian A.
  Affine trace_with(const CMat& a) const;
};

// maximize obj_lin(x) - sum(obj_penalty(x)) over the atoms.
class ConvexProgram {
 public:
  int add_var(const std::string& name, double lb = -kInf, double ub = kInf);
  int add_vars(const std::string& name, int count, double lb = -kInf, double ub = kInf);
  HermitianBlock add_hermitian_psd(const std::string& name, int size);

  void maximize(Affine lin) { obj_lin_ = std::move(lin); }
  void add_objective_penalty(Term t);
  // Adds tau <= sqrt(a(x)) via tau^2 <= a and returns tau's index.
  int add_sqrt_epigraph(const std::string& name, const Affine& a);

  void add_le(const std::string& name, ConvexFunc g);
  void add_le(const std::string& name, const Affine& a);  // a(x) <= 0
  void add_soc(const std::string& name, std::vector<Affine> rows, Affine bound);
  void add_lmi(const std::string& name, Mat f0, std::vector<std::pair<int, Mat>> coefs);
  // Complex Hermitian LMI, mapped to its real 2n x 2n embedding.
  void add_complex_lmi(const std::string& name, const CMat& f0,
                       const std::vector<std::pair<int, CMat>>& coefs);
  void add_eq(const std::string& name, const Affine& a);

  int num_vars() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& var_names() const { return names_; }
  const Affine& objective_lin() const { return obj_lin_; }
  const std::vector<Term>& objective_penalty() const { return obj_pen_; }
  const std::vector<FuncAtom>& funcs() const { return funcs_; }
  const std::vector<SocAtom>& socs() const { return socs_; }
  const std::vector<LmiAtom>& lmis() const { return lmis_; }
  const std::vector<EqAtom>& eqs() const { return eqs_; }

  double objective(const Vec& x) const;
  // Largest constraint violation at x (0 when feasible), evaluated directly
  // from the atoms without solver state.
  double max_violation(const Vec& x) const;
  // Stable human-readable listing of the program.
  std::string dump() const;

 private:
  std::vector<std::string> names_;
  Affine obj_lin_;
  std::vector<Term> obj_pen_;
  std::vector<FuncAtom> funcs_;
  std::vector<SocAtom> socs_;
  std::vector<LmiAtom> lmis_;
  std::vector<EqAtom> eqs_;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible, Numerical };
const char* to_string(SolveStatus s);

struct SolverOptions {
  double gap_tol = 1e-6;
  double feas_tol = 1e-8;
  double t0 = 1.0;
  double mu = 10.0;
  double ls_alpha = 0.3;
  double ls_beta = 0.5;
  int max_newton = 500;
  int max_total_newton = 5000;
};

struct Solution {
  Vec x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Numerical;
  double gap = kInf;
  int iterations = 0;
  double wall_ms = 0.0;
  bool used_phase1 = false;
  std::vector<double> stage_objectives;
  std::string message;
};

// Barrier method. `x0` is used as the starting point when it is strictly
// feasible; otherwise a phase-I subproblem is solved from it.
Solution solve(const ConvexProgram& p, const Vec& x0, const SolverOptions& opt = {});
Solution solve(const ConvexProgram& p, const SolverOptions& opt = {});

struct EigPairs {
  Vec values;  // ascending
  CMat vectors;
};

// `count` smallest eigenpairs of a Hermitian matrix.
EigPairs smallest_eigpairs(const CMat& w, int count);

struct RankOneResult {
  CVec u;
  double residual = 0.0;  // |W - u u^H|_F / |W|_F
};

RankOneResult rank_one_extract(const CMat& w);

// Rank-one certificate: largest diagonal of V^H W V relative to |W|_F,
// with V the L-1 smallest eigenvectors. Zero iff W has rank at most one.
double rank_one_psi(const CMat& w);

// [[X, -Y], [Y, X]] for W = X + iY.
Mat real_embedding(const CMat& w);

}  // namespace cplan
