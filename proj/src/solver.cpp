#include "cplan/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <iomanip>
#include <functional>
#include <map>
#include <sstream>

#include "cplan/errors.hpp"

namespace cplan {

// ---------------------------------------------------------------------------
// Affine

Affine Affine::var(int index, double coef) {
  Affine a;
  a.terms.emplace_back(index, coef);
  return a;
}

Affine& Affine::add(int index, double coef) {
  terms.emplace_back(index, coef);
  return *this;
}

Affine& Affine::operator+=(const Affine& o) {
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  constant += o.constant;
  return *this;
}

Affine& Affine::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

double Affine::eval(const Vec& x) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * x[i];
  return v;
}

Affine operator+(Affine a, const Affine& b) { return a += b; }
Affine operator-(Affine a, const Affine& b) {
  Affine nb = b;
  nb *= -1.0;
  return a += nb;
}
Affine operator*(double s, Affine a) { return a *= s; }
Affine operator+(Affine a, double c) {
  a.constant += c;
  return a;
}
Affine operator-(Affine a, double c) {
  a.constant -= c;
  return a;
}

// ---------------------------------------------------------------------------
// Terms

Term Term::neg_log(double w, Affine a) {
  Term t;
  t.kind = TermKind::NegLog;
  t.weight = w;
  t.args = {std::move(a)};
  t.check();
  return t;
}

Term Term::exp(double w, Affine a) {
  Term t;
  t.kind = TermKind::Exp;
  t.weight = w;
  t.args = {std::move(a)};
  t.check();
  return t;
}

Term Term::sq_sum(double w, std::vector<Affine> rows) {
  Term t;
  t.kind = TermKind::SqSum;
  t.weight = w;
  t.args = std::move(rows);
  t.check();
  return t;
}

Term Term::power(double w, Affine a, double p) {
  Term t;
  t.kind = TermKind::Power;
  t.weight = w;
  t.p = p;
  t.args = {std::move(a)};
  t.check();
  return t;
}

Term Term::radial(double w, std::vector<Affine> rows, double p, double kappa) {
  Term t;
  t.kind = TermKind::RadialPowExp;
  t.weight = w;
  t.p = p;
  t.kappa = kappa;
  t.args = std::move(rows);
  t.check();
  return t;
}

Term Term::quad_over_lin(double w, Affine a, Affine b) {
  Term t;
  t.kind = TermKind::QuadOverLin;
  t.weight = w;
  t.args = {std::move(a), std::move(b)};
  t.check();
  return t;
}

void Term::check() const {
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw CurvatureError("term weight must be finite and nonnegative");
  switch (kind) {
    case TermKind::NegLog:
    case TermKind::Exp:
      if (args.size() != 1) throw CurvatureError("scalar term needs one argument");
      break;
    case TermKind::SqSum:
      if (args.empty()) throw CurvatureError("sum of squares needs rows");
      break;
    case TermKind::Power:
      if (args.size() != 1) throw CurvatureError("power term needs one argument");
      if (!(p < 0.0 || p >= 1.0)) throw CurvatureError("power exponent in (0,1) is concave");
      break;
    case TermKind::RadialPowExp:
      if (args.empty()) throw CurvatureError("radial term needs rows");
      if (p < 2.0 || kappa < 0.0) throw CurvatureError("radial term needs p >= 2, kappa >= 0");
      break;
    case TermKind::QuadOverLin:
      if (args.size() != 2) throw CurvatureError("quad-over-lin needs two arguments");
      break;
  }
}

double Term::eval(const Vec& x) const {
  const double w = weight;
  switch (kind) {
    case TermKind::NegLog: {
      double a = args[0].eval(x);
      return a > 0 ? -w * std::log(a) : kInf;
    }
    case TermKind::Exp:
      return w * std::exp(args[0].eval(x));
    case TermKind::SqSum: {
      double s = 0;
      for (const auto& r : args) {
        double v = r.eval(x);
        s += v * v;
      }
      return w * s;
    }
    case TermKind::Power: {
      double a = args[0].eval(x);
      return a > 0 ? w * std::pow(a, p) : kInf;
    }
    case TermKind::RadialPowExp: {
      double s = 0;
      for (const auto& r : args) {
        double v = r.eval(x);
        s += v * v;
      }
      double rho = std::sqrt(s);
      return w * std::pow(rho, p) * std::exp(kappa * rho);
    }
    case TermKind::QuadOverLin: {
      double a = args[0].eval(x), b = args[1].eval(x);
      return b > 0 ? w * a * a / b : kInf;
    }
  }
  return kInf;
}

double ConvexFunc::eval(const Vec& x) const {
  double v = lin.eval(x);
  for (const auto& t : terms) v += t.eval(x);
  return v;
}

// ---------------------------------------------------------------------------
// Hermitian blocks

int HermitianBlock::diag(int l) const { return offset + l; }

static int pair_index(int l, int m, int n) {
  // position of (l, m), l < m, in row-major upper-triangle order
  return l * n - l * (l + 1) / 2 + (m - l - 1);
}

int HermitianBlock::re(int l, int m) const {
  if (l > m) std::swap(l, m);
  return offset + size + 2 * pair_index(l, m, size);
}

int HermitianBlock::im(int l, int m) const {
  return re(l, m) + 1;
}

CMat HermitianBlock::value(const Vec& x) const {
  CMat w(size, size);
  for (int l = 0; l < size; ++l) {
    w(l, l) = x[diag(l)];
    for (int m = l + 1; m < size; ++m) {
      std::complex<double> z(x[re(l, m)], x[im(l, m)]);
      w(l, m) = z;
      w(m, l) = std::conj(z);
    }
  }
  return w;
}

Affine HermitianBlock::trace_with(const CMat& a) const {
  Affine f;
  for (int l = 0; l < size; ++l) {
    f.add(diag(l), a(l, l).real());
    for (int m = l + 1; m < size; ++m) {
      // Re(A_lm W_ml + A_ml W_lm) with W_lm = X + iY
      f.add(re(l, m), 2.0 * a(l, m).real());
      f.add(im(l, m), 2.0 * a(l, m).imag());
    }
  }
  return f;
}

Mat real_embedding(const CMat& w) {
  const int n = static_cast<int>(w.rows());
  Mat e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = w.real();
  e.topRightCorner(n, n) = -w.imag();
  e.bottomLeftCorner(n, n) = w.imag();
  e.bottomRightCorner(n, n) = w.real();
  return e;
}

// ---------------------------------------------------------------------------
// Program construction

int ConvexProgram::add_var(const std::string& name, double lb, double ub) {
  int idx = num_vars();
  names_.push_back(name);
  if (std::isfinite(lb)) add_le(name + ">=lb", Affine(lb) - Affine::var(idx));
  if (std::isfinite(ub)) add_le(name + "<=ub", Affine::var(idx) - ub);
  return idx;
}

int ConvexProgram::add_vars(const std::string& name, int count, double lb, double ub) {
  int first = num_vars();
  for (int i = 0; i < count; ++i) add_var(name + "[" + std::to_string(i) + "]", lb, ub);
  return first;
}

HermitianBlock ConvexProgram::add_hermitian_psd(const std::string& name, int size) {
  HermitianBlock b;
  b.size = size;
  b.offset = num_vars();
  for (int l = 0; l < size; ++l) names_.push_back(name + ".d" + std::to_string(l));
  for (int l = 0; l < size; ++l)
    for (int m = l + 1; m < size; ++m) {
      names_.push_back(name + ".re" + std::to_string(l) + "_" + std::to_string(m));
      names_.push_back(name + ".im" + std::to_string(l) + "_" + std::to_string(m));
    }
  std::vector<std::pair<int, CMat>> coefs;
  for (int l = 0; l < size; ++l) {
    CMat e = CMat::Zero(size, size);
    e(l, l) = 1.0;
    coefs.emplace_back(b.diag(l), e);
  }
  const std::complex<double> I(0.0, 1.0);
  for (int l = 0; l < size; ++l)
    for (int m = l + 1; m < size; ++m) {
      CMat e = CMat::Zero(size, size);
      e(l, m) = 1.0;
      e(m, l) = 1.0;
      coefs.emplace_back(b.re(l, m), e);
      CMat f = CMat::Zero(size, size);
      f(l, m) = I;
      f(m, l) = -I;
      coefs.emplace_back(b.im(l, m), f);
    }
  add_complex_lmi(name + ">=0", CMat::Zero(size, size), coefs);
  return b;
}

void ConvexProgram::add_objective_penalty(Term t) {
  t.check();
  obj_pen_.push_back(std::move(t));
}

int ConvexProgram::add_sqrt_epigraph(const std::string& name, const Affine& a) {
  int tau = add_var(name, 0.0);
  ConvexFunc g;
  g.lin = Affine(0.0) - a;
  g.terms.push_back(Term::sq_sum(1.0, {Affine::var(tau)}));
  add_le(name + "^2<=arg", std::move(g));
  return tau;
}

void ConvexProgram::add_le(const std::string& name, ConvexFunc g) {
  for (const auto& t : g.terms) t.check();
  funcs_.push_back({std::move(g), name});
}

void ConvexProgram::add_le(const std::string& name, const Affine& a) {
  ConvexFunc g;
  g.lin = a;
  funcs_.push_back({std::move(g), name});
}

void ConvexProgram::add_soc(const std::string& name, std::vector<Affine> rows, Affine bound) {
  socs_.push_back({std::move(rows), std::move(bound), name});
}

void ConvexProgram::add_lmi(const std::string& name, Mat f0,
                            std::vector<std::pair<int, Mat>> coefs) {
  auto sym_ok = [](const Mat& m) {
    return m.rows() == m.cols() && (m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm());
  };
  if (!sym_ok(f0)) throw CurvatureError("LMI " + name + ": F0 not symmetric");
  for (const auto& [i, m] : coefs)
    if (!sym_ok(m) || m.rows() != f0.rows())
      throw CurvatureError("LMI " + name + ": coefficient not symmetric or wrong size");
  lmis_.push_back({std::move(f0), std::move(coefs), name});
}

void ConvexProgram::add_complex_lmi(const std::string& name, const CMat& f0,
                                    const std::vector<std::pair<int, CMat>> & coefs) {
  std::vector<std::pair<int, Mat>> rc;
  rc.reserve(coefs.size());
  for (const auto& [i, m] : coefs) rc.emplace_back(i, real_embedding(m));
  add_lmi(name, real_embedding(f0), std::move(rc));
}

void ConvexProgram::add_eq(const std::string& name, const Affine& a) {
  eqs_.push_back({a, name});
}

double ConvexProgram::objective(const Vec& x) const {
  double v = obj_lin_.eval(x);
  for (const auto& t : obj_pen_) v -= t.eval(x);
  return v;
}

static Mat lmi_value(const LmiAtom& a, const Vec& x) {
  Mat s = a.f0;
  for (const auto& [i, m] : a.coefs) s += x[i] * m;
  return s;
}

double ConvexProgram::max_violation(const Vec& x) const {
  double worst = 0.0;
  auto upd = [&](double v) {
    if (std::isnan(v)) v = kInf;
    worst = std::max(worst, v);
  };
  for (const auto& f : funcs_) upd(f.g.eval(x));
  for (const auto& s : socs_) {
    double r = 0;
    for (const auto& row : s.rows) r += std::pow(row.eval(x), 2);
    upd(std::sqrt(r) - s.bound.eval(x));
  }
  for (const auto& l : lmis_) {
    Mat v = lmi_value(l, x);
    Eigen::SelfAdjointEigenSolver<Mat> es(v, Eigen::EigenvaluesOnly);
    upd(-es.eigenvalues()[0]);
  }
  for (const auto& e : eqs_) upd(std::abs(e.a.eval(x)));
  return worst;
}

static void dump_affine(std::ostringstream& os, const Affine& a) {
  std::map<int, double> merged;
  for (const auto& [i, c] : a.terms) merged[i] += c;
  os << a.constant;
  for (const auto& [i, c] : merged) os << (c < 0 ? " - " : " + ") << std::abs(c) << "*x" << i;
}

static const char* kind_name(TermKind k) {
  switch (k) {
    case TermKind::NegLog: return "neglog";
    case TermKind::Exp: return "exp";
    case TermKind::SqSum: return "sqsum";
    case TermKind::Power: return "power";
    case TermKind::RadialPowExp: return "radial";
    case TermKind::QuadOverLin: return "quad_over_lin";
  }
  return "?";
}

static void dump_term(std::ostringstream& os, const Term& t) {
  os << kind_name(t.kind) << "(w=" << t.weight;
  if (t.kind == TermKind::Power || t.kind == TermKind::RadialPowExp) os << ", p=" << t.p;
  if (t.kind == TermKind::RadialPowExp) os << ", kappa=" << t.kappa;
  for (const auto& a : t.args) {
    os << ", [";
    dump_affine(os, a);
    os << "]";
  }
  os << ")";
}

std::string ConvexProgram::dump() const {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "variables " << num_vars() << "\n";
  for (int i = 0; i < num_vars(); ++i) os << "  x" << i << " " << names_[i] << "\n";
  os << "maximize ";
  dump_affine(os, obj_lin_);
  for (const auto& t : obj_pen_) {
    os << " - ";
    dump_term(os, t);
  }
  os << "\n";
  for (const auto& e : eqs_) {
    os << "eq " << e.name << ": ";
    dump_affine(os, e.a);
    os << " == 0\n";
  }
  for (const auto& f : funcs_) {
    os << "le " << f.name << ": ";
    dump_affine(os, f.g.lin);
    for (const auto& t : f.g.terms) {
      os << " + ";
      dump_term(os, t);
    }
    os << " <= 0\n";
  }
  for (const auto& s : socs_) {
    os << "soc " << s.name << ": |";
    for (size_t r = 0; r < s.rows.size(); ++r) {
      os << (r ? ", " : "");
      dump_affine(os, s.rows[r]);
    }
    os << "| <= ";
    dump_affine(os, s.bound);
    os << "\n";
  }
  for (const auto& l : lmis_) {
    os << "lmi " << l.name << ": size " << l.f0.rows() << ", vars";
    for (const auto& [i, m] : l.coefs) os << " x" << i;
    os << "\n";
  }
  return os.str();
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Numerical: return "numerical";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Compiled evaluation

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct LAff {
  std::vector<int> idx;  // local indices
  std::vector<double> coef;
  double c = 0.0;
  double eval(const double* xl) const {
    double v = c;
    for (size_t i = 0; i < idx.size(); ++i) v += coef[i] * xl[idx[i]];
    return v;
  }
};

struct CTerm {
  TermKind kind;
  double w, p, kappa;
  std::vector<LAff> args;
};

// A convex function restricted to the variables it touches.
struct CFunc {
  std::vector<int> vars;
  LAff lin;
  std::vector<CTerm> terms;
};

struct CSoc {
  std::vector<int> vars;
  std::vector<LAff> rows;
  LAff bound;
};

struct CLmi {
  const LmiAtom* atom;
};

class LocalMap {
 public:
  explicit LocalMap(std::vector<int>& vars) : vars_(vars) {}
  void collect(const Affine& a) {
    for (const auto& t : a.terms) vars_.push_back(t.first);
  }
  void finalize() {
    std::sort(vars_.begin(), vars_.end());
    vars_.erase(std::unique(vars_.begin(), vars_.end()), vars_.end());
  }
  LAff map(const Affine& a) const {
    std::map<int, double> merged;
    for (const auto& [i, c] : a.terms) merged[i] += c;
    LAff l;
    l.c = a.constant;
    for (const auto& [i, c] : merged) {
      auto it = std::lower_bound(vars_.begin(), vars_.end(), i);
      l.idx.push_back(static_cast<int>(it - vars_.begin()));
      l.coef.push_back(c);
    }
    return l;
  }

 private:
  std::vector<int>& vars_;
};

CFunc compile_func(const Affine& lin, const std::vector<Term>& terms) {
  CFunc f;
  LocalMap lm(f.vars);
  lm.collect(lin);
  for (const auto& t : terms)
    for (const auto& a : t.args) lm.collect(a);
  lm.finalize();
  f.lin = lm.map(lin);
  for (const auto& t : terms) {
    CTerm ct{t.kind, t.weight, t.p, t.kappa, {}};
    for (const auto& a : t.args) ct.args.push_back(lm.map(a));
    f.terms.push_back(std::move(ct));
  }
  return f;
}

CSoc compile_soc(const SocAtom& s) {
  CSoc c;
  LocalMap lm(c.vars);
  for (const auto& r : s.rows) lm.collect(r);
  lm.collect(s.bound);
  lm.finalize();
  for (const auto& r : s.rows) c.rows.push_back(lm.map(r));
  c.bound = lm.map(s.bound);
  return c;
}

void add_scaled(Vec& g, const LAff& a, double s) {
  for (size_t i = 0; i < a.idx.size(); ++i) g[a.idx[i]] += s * a.coef[i];
}

void add_outer(Mat& h, const LAff& a, const LAff& b, double s) {
  for (size_t i = 0; i < a.idx.size(); ++i)
    for (size_t j = 0; j < b.idx.size(); ++j) h(a.idx[i], b.idx[j]) += s * a.coef[i] * b.coef[j];
}

// Value, local gradient and Hessian of a compiled function. Returns false
// outside the domain of one of its terms.
bool eval_func(const CFunc& f, const double* xl, double& v, Vec* g, Mat* h) {
  const int m = static_cast<int>(f.vars.size());
  if (g) {
    g->setZero(m);
    h->setZero(m, m);
    add_scaled(*g, f.lin, 1.0);
  }
  v = f.lin.eval(xl);
  for (const auto& t : f.terms) {
    const double w = t.w;
    switch (t.kind) {
      case TermKind::NegLog: {
        double a = t.args[0].eval(xl);
        if (!(a > 0)) return false;
        v -= w * std::log(a);
        if (g) {
          add_scaled(*g, t.args[0], -w / a);
          add_outer(*h, t.args[0], t.args[0], w / (a * a));
        }
        break;
      }
      case TermKind::Exp: {
        double e = w * std::exp(t.args[0].eval(xl));
        if (!std::isfinite(e)) return false;
        v += e;
        if (g) {
          add_scaled(*g, t.args[0], e);
          add_outer(*h, t.args[0], t.args[0], e);
        }
        break;
      }
      case TermKind::SqSum: {
        for (const auto& r : t.args) {
          double rv = r.eval(xl);
          v += w * rv * rv;
          if (g) {
            add_scaled(*g, r, 2 * w * rv);
            add_outer(*h, r, r, 2 * w);
          }
        }
        break;
      }
      case TermKind::Power: {
        double a = t.args[0].eval(xl);
        if (!(a > 0)) return false;
        double val = w * std::pow(a, t.p);
        v += val;
        if (g) {
          add_scaled(*g, t.args[0], t.p * val / a);
          add_outer(*h, t.args[0], t.args[0], t.p * (t.p - 1) * val / (a * a));
        }
        break;
      }
      case TermKind::RadialPowExp: {
        const size_t d = t.args.size();
        std::vector<double> y(d);
        double s = 0;
        for (size_t i = 0; i < d; ++i) {
          y[i] = t.args[i].eval(xl);
          s += y[i] * y[i];
        }
        double rho = std::sqrt(s);
        double ek = std::exp(t.kappa * rho);
        double p = t.p, k = t.kappa;
        v += w * std::pow(rho, p) * ek;
        if (g) {
          // h'(rho)/rho and h''(rho), finite at rho = 0 for p >= 2
          double d1r = w * ek * (p * std::pow(rho, p - 2) + k * std::pow(rho, p - 1));
          double d2 = w * ek *
                      (p * (p - 1) * std::pow(rho, p - 2) + 2 * p * k * std::pow(rho, p - 1) +
                       k * k * std::pow(rho, p));
          for (size_t i = 0; i < d; ++i) add_scaled(*g, t.args[i], d1r * y[i]);
          for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) {
              double hy = (i == j ? d1r : 0.0);
              if (rho > 0) hy += (d2 - d1r) * y[i] * y[j] / s;
              if (hy != 0.0) add_outer(*h, t.args[i], t.args[j], hy);
            }
        }
        break;
      }
      case TermKind::QuadOverLin: {
        double a = t.args[0].eval(xl), b = t.args[1].eval(xl);
        if (!(b > 0)) return false;
        v += w * a * a / b;
        if (g) {
          add_scaled(*g, t.args[0], 2 * w * a / b);
          add_scaled(*g, t.args[1], -w * a * a / (b * b));
          double r = a / b, s2 = 2 * w / b;
          add_outer(*h, t.args[0], t.args[0], s2);
          add_outer(*h, t.args[0], t.args[1], -s2 * r);
          add_outer(*h, t.args[1], t.args[0], -s2 * r);
          add_outer(*h, t.args[1], t.args[1], s2 * r * r);
        }
        break;
      }
    }
  }
  return std::isfinite(v);
}

struct Compiled {
  int n = 0;
  CFunc objective;  // convex: -lin + penalties
  std::vector<CFunc> funcs;
  std::vector<CSoc> socs;
  std::vector<const LmiAtom*> lmis;
  Eigen::SparseMatrix<double> aeq;
  Vec beq;
  double theta = 0.0;  // barrier parameter
};

Compiled compile(const ConvexProgram& p) {
  Compiled c;
  c.n = p.num_vars();
  Affine neg = Affine(0.0) - p.objective_lin();
  c.objective = compile_func(neg, p.objective_penalty());
  for (const auto& f : p.funcs()) c.funcs.push_back(compile_func(f.g.lin, f.g.terms));
  for (const auto& s : p.socs()) c.socs.push_back(compile_soc(s));
  for (const auto& l : p.lmis()) c.lmis.push_back(&l);
  c.theta = static_cast<double>(c.funcs.size()) + 2.0 * c.socs.size();
  for (const auto* l : c.lmis) c.theta += static_cast<double>(l->f0.rows());
  const int m = static_cast<int>(p.eqs().size());
  c.aeq.resize(m, c.n);
  c.beq.setZero(m);
  Triplets trip;
  for (int r = 0; r < m; ++r) {
    const auto& a = p.eqs()[r].a;
    for (const auto& [i, v] : a.terms) trip.emplace_back(r, i, v);
    c.beq[r] = -a.constant;
  }
  c.aeq.setFromTriplets(trip.begin(), trip.end());
  return c;
}

void gather(const std::vector<int>& vars, const Vec& x, std::vector<double>& buf) {
  buf.resize(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) buf[i] = x[vars[i]];
}

void scatter(const std::vector<int>& vars, const Vec& gl, const Mat& hl, double gs, double hs,
             Vec& g, Triplets& trip) {
  const int m = static_cast<int>(vars.size());
  for (int i = 0; i < m; ++i) g[vars[i]] += gs * gl[i];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double v = hs * hl(i, j);
      if (v != 0.0) trip.emplace_back(vars[i], vars[j], v);
    }
}

// Barrier-augmented objective t*phi0 + sum barriers. With grad == nullptr
// only the value is computed. Returns false outside the interior.
bool barrier(const Compiled& c, const Vec& x, double t, double& val, Vec* grad,
             Triplets* hess) {
  std::vector<double> xl;
  Vec gl;
  Mat hl;
  val = 0.0;
  if (grad) {
    grad->setZero(c.n);
    hess->clear();
  }
  {
    double v;
    gather(c.objective.vars, x, xl);
    if (!eval_func(c.objective, xl.data(), v, grad ? &gl : nullptr, grad ? &hl : nullptr))
      return false;
    val += t * v;
    if (grad) scatter(c.objective.vars, gl, hl, t, t, *grad, *hess);
  }
  for (const auto& f : c.funcs) {
    double v;
    gather(f.vars, x, xl);
    if (!eval_func(f, xl.data(), v, grad ? &gl : nullptr, grad ? &hl : nullptr)) return false;
    if (!(v < 0)) return false;
    val -= std::log(-v);
    if (grad) {
      // -log(-g): grad g/(-g), hess H/(-g) + g g^T / g^2
      const int m = static_cast<int>(f.vars.size());
      for (int i = 0; i < m; ++i) (*grad)[f.vars[i]] += gl[i] / (-v);
      const double inv = 1.0 / (-v), inv2 = 1.0 / (v * v);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          double hv = hl(i, j) * inv + gl[i] * gl[j] * inv2;
          if (hv != 0.0) hess->emplace_back(f.vars[i], f.vars[j], hv);
        }
    }
  }
  for (const auto& s : c.socs) {
    gather(s.vars, x, xl);
    double b = s.bound.eval(xl.data());
    if (!(b > 0)) return false;
    double u = b * b;
    std::vector<double> rv(s.rows.size());
    for (size_t r = 0; r < s.rows.size(); ++r) {
      rv[r] = s.rows[r].eval(xl.data());
      u -= rv[r] * rv[r];
    }
    if (!(u > 0)) return false;
    val -= std::log(u);
    if (grad) {
      const int m = static_cast<int>(s.vars.size());
      Vec du = Vec::Zero(m);
      Mat d2u = Mat::Zero(m, m);
      add_scaled(du, s.bound, 2 * b);
      add_outer(d2u, s.bound, s.bound, 2.0);
      for (size_t r = 0; r < s.rows.size(); ++r) {
        add_scaled(du, s.rows[r], -2 * rv[r]);
        add_outer(d2u, s.rows[r], s.rows[r], -2.0);
      }
      Mat hl2 = du * du.transpose() / (u * u) - d2u / u;
      Vec gl2 = -du / u;
      scatter(s.vars, gl2, hl2, 1.0, 1.0, *grad, *hess);
    }
  }
  for (const auto* l : c.lmis) {
    Mat s = lmi_value(*l, x);
    Eigen::LLT<Mat> llt(s);
    if (llt.info() != Eigen::Success) return false;
    const Mat& lm = llt.matrixL();
    double ld = 0;
    for (int i = 0; i < lm.rows(); ++i) {
      if (!(lm(i, i) > 0)) return false;
      ld += std::log(lm(i, i));
    }
    val -= 2.0 * ld;
    if (grad) {
      const int m = static_cast<int>(l->coefs.size());
      std::vector<Mat> mi(m);
      auto tri = llt.matrixL();
      for (int i = 0; i < m; ++i) {
        Mat a = tri.solve(l->coefs[i].second);
        mi[i] = tri.solve(a.transpose());
      }
      for (int i = 0; i < m; ++i) {
        (*grad)[l->coefs[i].first] -= mi[i].trace();
        for (int j = 0; j < m; ++j) {
          double hv = (mi[i].array() * mi[j].array()).sum();
          if (hv != 0.0) hess->emplace_back(l->coefs[i].first, l->coefs[j].first, hv);
        }
      }
    }
  }
  return std::isfinite(val);
}

// Newton direction for the barrier function with equality constraints
// A dx = 0 (iterates are kept on the affine set).
bool newton_direction(const Compiled& c, const Vec& g, Triplets& trip, Vec& dx) {
  const int n = c.n;
  const int m = static_cast<int>(c.aeq.rows());
  double maxdiag = 0;
  for (const auto& t : trip)
    if (t.row() == t.col()) maxdiag = std::max(maxdiag, std::abs(t.value()));
  double reg = 1e-13 * std::max(1.0, maxdiag);
  for (int attempt = 0; attempt < 6; ++attempt, reg *= 100.0) {
    Triplets tr = trip;
    for (int i = 0; i < n; ++i) tr.emplace_back(i, i, reg);
    if (m == 0) {
      Eigen::SparseMatrix<double> h(n, n);
      h.setFromTriplets(tr.begin(), tr.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
      if (ldlt.info() != Eigen::Success) continue;
      dx = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !dx.allFinite()) continue;
      return true;
    }
    for (int k = 0; k < c.aeq.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(c.aeq, k); it; ++it) {
        tr.emplace_back(n + it.row(), it.col(), it.value());
        tr.emplace_back(it.col(), n + it.row(), it.value());
      }
    Eigen::SparseMatrix<double> kkt(n + m, n + m);
    kkt.setFromTriplets(tr.begin(), tr.end());
    kkt.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(kkt);
    if (lu.info() != Eigen::Success) continue;
    Vec rhs = Vec::Zero(n + m);
    rhs.head(n) = -g;
    Vec sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !sol.allFinite()) continue;
    dx = sol.head(n);
    return true;
  }
  return false;
}

enum class CenterResult { Ok, MaxIter, Numerical, Stopped };

template <class Stop>
CenterResult center(const Compiled& c, Vec& x, double t, const SolverOptions& opt, int& iters,
                    Stop&& stop) {
  Vec g, dx;
  Triplets trip;
  for (int k = 0; k < opt.max_newton; ++k) {
    if (iters >= opt.max_total_newton) return CenterResult::MaxIter;
    double f0;
    if (!barrier(c, x, t, f0, &g, &trip)) return CenterResult::Numerical;
    if (!newton_direction(c, g, trip, dx)) return CenterResult::Numerical;
    double dec = -g.dot(dx);
    if (dec < 0) dec = 0;
    if (dec / 2.0 <= 1e-11) return CenterResult::Ok;
    ++iters;
    double step = 1.0, f1;
    Vec xn;
    int ls = 0;
    // Below this the Armijo test only sees rounding noise in f.
    const double noise = 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0));
    bool at_precision = false;
    for (;; ++ls) {
      xn = x + step * dx;
      if (barrier(c, xn, t, f1, nullptr, nullptr) && f1 <= f0 - opt.ls_alpha * step * dec) break;
      step *= opt.ls_beta;
      if (step * dec < noise) {
        at_precision = true;
        break;
      }
      if (ls > 80) break;
    }
    if (at_precision) return CenterResult::Ok;
    if (ls > 80) {
      // No descent available at working precision; treat as centered.
      return dec < 1e-6 ? CenterResult::Ok : CenterResult::Numerical;
    }
    x = xn;
    if (stop(x)) return CenterResult::Stopped;
  }
  return CenterResult::MaxIter;
}

bool strictly_interior(const Compiled& c, const Vec& x) {
  double v;
  return barrier(c, x, 0.0, v, nullptr, nullptr);
}

double lmi_min_eig(const LmiAtom& l, const Vec& x) {
  Mat v = lmi_value(l, x);
  Eigen::SelfAdjointEigenSolver<Mat> es(v, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

// Feasible-direction projection onto {A x = b}.
Vec project_eq(const Compiled& c, const Vec& x0) {
  if (c.aeq.rows() == 0) return x0;
  Mat a = Mat(c.aeq);
  Vec r = a * x0 - c.beq;
  if (r.norm() <= 1e-14) return x0;
  Vec y = (a * a.transpose()).completeOrthogonalDecomposition().solve(r);
  return x0 - a.transpose() * y;
}

Solution run_barrier(const Compiled& c, const ConvexProgram& p, Vec x, const SolverOptions& opt,
                     const std::function<bool(const Vec&)>& stop) {
  Solution sol;
  double t = opt.t0;
  int iters = 0;
  CenterResult last = CenterResult::Ok;
  while (true) {
    last = center(c, x, t, opt, iters, stop);
    sol.stage_objectives.push_back(p.objective(x));
    if (last != CenterResult::Ok) break;
    if (c.theta / t <= opt.gap_tol) break;
    t *= opt.mu;
  }
  sol.x = x;
  sol.iterations = iters;
  sol.objective = p.objective(x);
  sol.gap = c.theta / t;
  switch (last) {
    case CenterResult::Ok:
      sol.status = SolveStatus::Optimal;
      break;
    case CenterResult::Stopped:
      sol.status = SolveStatus::Optimal;
      sol.message = "stopped";
      break;
    case CenterResult::MaxIter:
      sol.status = SolveStatus::MaxIter;
      break;
    case CenterResult::Numerical:
      sol.status = SolveStatus::Numerical;
      // A stage that already reached the tolerance counts as converged.
      if (c.theta / t <= opt.gap_tol * 10) sol.status = SolveStatus::Optimal;
      break;
  }
  return sol;
}

}  // namespace

Solution solve(const ConvexProgram& p, const SolverOptions& opt) {
  return solve(p, Vec::Zero(p.num_vars()), opt);
}

Solution solve(const ConvexProgram& p, const Vec& x0_in, const SolverOptions& opt) {
  auto t_start = std::chrono::steady_clock::now();
  Compiled c = compile(p);
  Vec x0 = x0_in.size() == c.n ? x0_in : Vec::Zero(c.n);
  x0 = project_eq(c, x0);
  bool used_phase1 = false;
  auto finish = [&](Solution s) {
    s.used_phase1 = used_phase1;
    s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          t_start)
                    .count();
    return s;
  };

  if (!strictly_interior(c, x0)) {
    used_phase1 = true;
    // maximize -s subject to every inequality relaxed by s.
    ConvexProgram ph;
    for (int i = 0; i < c.n; ++i) ph.add_var(p.var_names()[i]);
    int s = ph.add_var("phase1_s", -1.0);
    double s0 = 0.0;
    for (const auto& f : p.funcs()) {
      double v = f.g.eval(x0);
      if (!std::isfinite(v)) {
        Solution bad;
        bad.x = x0;
        bad.status = SolveStatus::Infeasible;
        bad.message = "start point outside the domain of " + f.name;
        return finish(bad);
      }
      s0 = std::max(s0, v);
      ConvexFunc g = f.g;
      g.lin.add(s, -1.0);
      ph.add_le(f.name, std::move(g));
    }
    for (const auto& so : p.socs()) {
      double r = 0;
      for (const auto& row : so.rows) r += std::pow(row.eval(x0), 2);
      s0 = std::max(s0, std::sqrt(r) - so.bound.eval(x0));
      Affine b = so.bound;
      b.add(s, 1.0);
      ph.add_soc(so.name, so.rows, b);
    }
    for (const auto& l : p.lmis()) {
      s0 = std::max(s0, -lmi_min_eig(l, x0));
      auto coefs = l.coefs;
      coefs.emplace_back(s, Mat::Identity(l.f0.rows(), l.f0.cols()));
      ph.add_lmi(l.name, l.f0, coefs);
    }
    for (const auto& e : p.eqs()) ph.add_eq(e.name, e.a);
    ph.maximize(Affine::var(s, -1.0));
    Vec z(c.n + 1);
    z.head(c.n) = x0;
    z[c.n] = s0 + 1.0;
    Compiled pc = compile(ph);
    SolverOptions popt = opt;
    Solution ps = run_barrier(pc, ph, z, popt, [&](const Vec& zz) {
      return zz[c.n] < -1e-7 && strictly_interior(c, zz.head(c.n));
    });
    Vec xs = ps.x.head(c.n);
    if (!strictly_interior(c, xs)) {
      Solution bad;
      bad.x = xs;
      bad.iterations = ps.iterations;
      bad.status = SolveStatus::Infeasible;
      bad.message = "phase I optimum s = " + std::to_string(ps.x[c.n]);
      return finish(bad);
    }
    x0 = xs;
  }

  Solution sol = run_barrier(c, p, x0, opt, [](const Vec&) { return false; });
  if (sol.status == SolveStatus::Optimal && p.max_violation(sol.x) > opt.feas_tol)
    sol.status = SolveStatus::Numerical;
  return finish(sol);
}

// ---------------------------------------------------------------------------
// Eigen routines

static CMat checked_hermitian(const CMat& w) {
  if (w.rows() != w.cols()) throw ParameterError("matrix is not square");
  double scale = std::max(1.0, w.norm());
  if ((w - w.adjoint()).norm() > 1e-10 * scale) throw ParameterError("matrix is not Hermitian");
  return 0.5 * (w + w.adjoint());
}

EigPairs smallest_eigpairs(const CMat& w, int count) {
  CMat h = checked_hermitian(w);
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  EigPairs e;
  count = std::clamp(count, 0, static_cast<int>(h.rows()));
  e.values = es.eigenvalues().head(count);
  e.vectors = es.eigenvectors().leftCols(count);
  return e;
}

RankOneResult rank_one_extract(const CMat& w) {
  CMat h = checked_hermitian(w);
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  const int n = static_cast<int>(h.rows());
  RankOneResult r;
  double lmax = std::max(0.0, es.eigenvalues()[n - 1]);
  r.u = std::sqrt(lmax) * es.eigenvectors().col(n - 1);
  double wn = h.norm();
  r.residual = wn > 0 ? (h - r.u * r.u.adjoint()).norm() / wn : 0.0;
  return r;
}

double rank_one_psi(const CMat& w) {
  const int n = static_cast<int>(w.rows());
  if (n <= 1) return 0.0;
  EigPairs e = smallest_eigpairs(w, n - 1);
  CMat d = e.vectors.adjoint() * w * e.vectors;
  double mx = 0;
  for (int i = 0; i < d.rows(); ++i) mx = std::max(mx, d(i, i).real());
  double wn = w.norm();
  return wn > 0 ? mx / wn : 0.0;
}

}  // namespace cplan
