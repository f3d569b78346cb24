#include "dissnet/sdp.hpp"

#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace dissnet {

AffineMatrixExpr::AffineMatrixExpr(int n) : n_(n), constant_(DenseMatrix::Zero(n, n)) {
  if (n < 0) throw std::invalid_argument("AffineMatrixExpr: negative dimension");
}

void AffineMatrixExpr::check_block(int r0, int c0, Eigen::Index h, Eigen::Index w) const {
  if (r0 < 0 || c0 < 0 || r0 + h > n_ || c0 + w > n_) {
    throw std::out_of_range("AffineMatrixExpr: placement outside the frame");
  }
  if (h == 0 || w == 0) return;
  if (r0 == c0) {
    if (h != w) throw std::invalid_argument("AffineMatrixExpr: diagonal placement must be square");
    return;
  }
  const bool overlap = r0 < c0 + w && c0 < r0 + h;
  if (overlap) throw std::invalid_argument("AffineMatrixExpr: placement straddles the diagonal");
}

void AffineMatrixExpr::push(int r, int c, int scalar, double v) {
  if (v == 0.0) return;
  if (r > c) std::swap(r, c);
  entries_.push_back({r, c, scalar, v});
}

void AffineMatrixExpr::add_entry(int r, int c, int scalar, double v) {
  if (r < 0 || c < 0 || r >= n_ || c >= n_) throw std::out_of_range("add_entry: outside frame");
  push(r, c, scalar, v);
}

void AffineMatrixExpr::add_constant_entry(int r, int c, double v) {
  if (r < 0 || c < 0 || r >= n_ || c >= n_) throw std::out_of_range("add_constant_entry: outside frame");
  constant_(r, c) += v;
  if (r != c) constant_(c, r) += v;
}

void AffineMatrixExpr::add_constant(int r0, int c0, const DenseMatrix& block) {
  check_block(r0, c0, block.rows(), block.cols());
  if (block.size() == 0) return;
  if (r0 == c0) {
    const DenseMatrix s = sym_part(block);
    constant_.block(r0, c0, s.rows(), s.cols()) += s;
  } else {
    constant_.block(r0, c0, block.rows(), block.cols()) += block;
    constant_.block(c0, r0, block.cols(), block.rows()) += block.transpose();
  }
}

void AffineMatrixExpr::add_scalar_term(int r0, int c0, int scalar, const DenseMatrix& coeff) {
  check_block(r0, c0, coeff.rows(), coeff.cols());
  if (r0 == c0) {
    const DenseMatrix s = sym_part(coeff);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index j = i; j < s.cols(); ++j) push(r0 + i, c0 + j, scalar, s(i, j));
    }
  } else {
    for (Eigen::Index i = 0; i < coeff.rows(); ++i) {
      for (Eigen::Index j = 0; j < coeff.cols(); ++j) push(r0 + i, c0 + j, scalar, coeff(i, j));
    }
  }
}

void AffineMatrixExpr::add_product_term(int r0, int c0, const DenseMatrix& c,
                                        const DecisionVar& v, const DenseMatrix& d,
                                        double coeff) {
  if (c.cols() != v.rows || d.rows() != v.cols) {
    throw std::invalid_argument("AffineMatrixExpr: product term dims mismatch for " + v.name);
  }
  check_block(r0, c0, c.rows(), d.cols());
  const bool diag = r0 == c0;
  for (int k = 0; k < v.rows; ++k) {
    for (int l = 0; l < v.cols; ++l) {
      const int s = v.scalar(k, l);
      for (Eigen::Index a = 0; a < c.rows(); ++a) {
        const double ca = coeff * c(a, k);
        if (ca == 0.0) continue;
        for (Eigen::Index b = 0; b < d.cols(); ++b) {
          const double val = ca * d(l, b);
          if (val == 0.0) continue;
          if (diag && a == b) {
            push(r0 + a, c0 + b, s, 2.0 * val);
          } else {
            push(r0 + a, c0 + b, s, val);
          }
        }
      }
    }
  }
}

void AffineMatrixExpr::add(const AffineMatrixExpr& other, double scale) {
  if (other.n_ != n_) throw std::invalid_argument("AffineMatrixExpr::add: dimension mismatch");
  constant_ += scale * other.constant_;
  for (const auto& e : other.entries_) push(e.row, e.col, e.scalar, scale * e.coeff);
}

void AffineMatrixExpr::compress() {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.scalar, a.row, a.col) < std::tie(b.scalar, b.row, b.col);
  });
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    if (!out.empty() && out.back().scalar == e.scalar && out.back().row == e.row &&
        out.back().col == e.col) {
      out.back().coeff += e.coeff;
    } else {
      out.push_back(e);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Entry& e) { return e.coeff == 0.0; }),
            out.end());
  entries_ = std::move(out);
}

DenseMatrix AffineMatrixExpr::coefficient(int scalar) const {
  DenseMatrix f = DenseMatrix::Zero(n_, n_);
  for (const auto& e : entries_) {
    if (e.scalar != scalar) continue;
    f(e.row, e.col) += e.coeff;
    if (e.row != e.col) f(e.col, e.row) += e.coeff;
  }
  return f;
}

std::vector<int> AffineMatrixExpr::referenced_scalars() const {
  std::set<int> s;
  for (const auto& e : entries_) s.insert(e.scalar);
  return {s.begin(), s.end()};
}

AffineMatrixExpr AffineMatrixExpr::principal(const std::vector<int>& rows) const {
  AffineMatrixExpr out(static_cast<int>(rows.size()));
  std::vector<int> where(n_, -1);
  for (std::size_t i = 0; i < rows.size(); ++i) where.at(rows[i]) = static_cast<int>(i);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) out.constant_(i, j) = constant_(rows[i], rows[j]);
  }
  for (const auto& e : entries_) {
    const int a = where[e.row];
    const int b = where[e.col];
    if (a >= 0 && b >= 0) out.push(a, b, e.scalar, e.coeff);
  }
  return out;
}

DenseMatrix evaluate(const AffineMatrixExpr& expr, const std::vector<double>& assignment) {
  DenseMatrix m = expr.constant();
  for (const auto& e : expr.entries()) {
    if (e.scalar < 0 || e.scalar >= static_cast<int>(assignment.size())) {
      throw std::out_of_range("evaluate: assignment misses scalar " + std::to_string(e.scalar));
    }
    const double v = e.coeff * assignment[e.scalar];
    m(e.row, e.col) += v;
    if (e.row != e.col) m(e.col, e.row) += v;
  }
  return m;
}

int SdpProblem::add_scalar(const std::string& name, std::optional<double> lower,
                           std::optional<double> upper) {
  DecisionVar v;
  v.id = static_cast<int>(vars_.size());
  v.name = name;
  v.kind = VarKind::Scalar;
  v.first_scalar = num_scalars();
  vars_.push_back(v);
  scalars_.push_back({v.id, 0, 0, lower, upper, std::nullopt});
  return v.id;
}

int SdpProblem::add_block(const std::string& name, int rows, int cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("add_block: negative dimension");
  DecisionVar v;
  v.id = static_cast<int>(vars_.size());
  v.name = name;
  v.kind = VarKind::MatrixBlock;
  v.rows = rows;
  v.cols = cols;
  v.first_scalar = num_scalars();
  vars_.push_back(v);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) scalars_.push_back({v.id, r, c, {}, {}, {}});
  }
  return v.id;
}

std::optional<int> SdpProblem::find_var(const std::string& name) const {
  for (const auto& v : vars_) {
    if (v.name == name) return v.id;
  }
  return std::nullopt;
}

std::string SdpProblem::scalar_name(int s) const {
  const auto& info = scalars_.at(s);
  const auto& v = vars_.at(info.var);
  if (v.kind == VarKind::Scalar) return v.name;
  return v.name + "[" + std::to_string(info.row) + "," + std::to_string(info.col) + "]";
}

void SdpProblem::set_bounds(int scalar, std::optional<double> lower, std::optional<double> upper) {
  auto& s = scalars_.at(scalar);
  s.lower = lower;
  s.upper = upper;
}

void SdpProblem::fix(int scalar, double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("fix: non-finite value");
  scalars_.at(scalar).fixed = value;
}

void SdpProblem::fix_block(int var_id, const DenseMatrix& value) {
  const auto& v = vars_.at(var_id);
  if (value.rows() != v.rows || value.cols() != v.cols) {
    throw std::invalid_argument("fix_block: dims mismatch for " + v.name);
  }
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) fix(v.scalar(r, c), value(r, c));
  }
}

void SdpProblem::add_psd(AffineMatrixExpr expr, double margin, std::string name) {
  for (const auto& e : expr.entries()) {
    if (e.scalar < 0 || e.scalar >= num_scalars()) {
      throw std::out_of_range("add_psd: expression references an unknown scalar");
    }
  }
  if (margin < 0) {
    const DenseMatrix& c = expr.constant();
    const double norm = c.size() ? c.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    margin = 1e-6 * (1.0 + norm);
  }
  expr.compress();
  psd_.push_back({std::move(expr), margin, std::move(name)});
}

void SdpProblem::set_objective(std::vector<std::pair<int, double>> terms, Sense sense) {
  objective_ = std::move(terms);
  sense_ = sense;
}

void SdpProblem::add_objective_term(int scalar, double coeff) {
  objective_.emplace_back(scalar, coeff);
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Feasible: return "feasible";
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

DenseMatrix SdpSolution::block(const DecisionVar& v) const {
  DenseMatrix m(v.rows, v.cols);
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) m(r, c) = values.at(v.scalar(r, c));
  }
  return m;
}

SdpProblem add_soft_quadratic_cost(SdpProblem problem, const std::vector<SoftTerm>& terms,
                                   int* epigraph_scalar) {
  if (terms.empty()) return problem;
  for (const auto& t : terms) {
    if (!(t.weight > 0)) throw std::invalid_argument("add_soft_quadratic_cost: weight must be > 0");
    const auto& v = problem.var(t.var_id);
    if (t.row < 0 || t.row >= v.rows || t.col < 0 || t.col >= v.cols) {
      throw std::out_of_range("add_soft_quadratic_cost: entry outside " + v.name);
    }
  }
  const int k = static_cast<int>(terms.size());
  const int tid = problem.add_scalar("soft_cost", 0.0, std::nullopt);
  const int ts = problem.var(tid).first_scalar;
  AffineMatrixExpr e(k + 1);
  e.add_scalar_term(0, 0, ts, DenseMatrix::Ones(1, 1));
  e.add_constant(1, 1, DenseMatrix::Identity(k, k));
  for (int i = 0; i < k; ++i) {
    const auto& v = problem.var(terms[i].var_id);
    DenseMatrix coeff = DenseMatrix::Zero(k, 1);
    coeff(i, 0) = terms[i].weight;
    e.add_scalar_term(1, 0, v.scalar(terms[i].row, terms[i].col), coeff);
  }
  problem.add_psd(std::move(e), 0.0, "soft_cost_epigraph");
  if (problem.has_objective() && problem.sense() == Sense::Maximize) {
    problem.add_objective_term(ts, -1.0);
  } else {
    auto obj = problem.objective();
    obj.emplace_back(ts, 1.0);
    problem.set_objective(std::move(obj), Sense::Minimize);
  }
  if (epigraph_scalar) *epigraph_scalar = ts;
  return problem;
}

// ---------------------------------------------------------------------------
// Dense primal-dual interior point method (HKM direction, Mehrotra corrector).

namespace {

struct Trip {
  int r;
  int c;
  double v;
};

struct Layout {
  int m = 0;
  std::vector<int> dims;
  int nl = 0;
  // sdp[j][k]: full (both halves) entries of A_k in block j
  std::vector<std::vector<std::vector<Trip>>> sdp;
  // lp[k]: (row, value)
  std::vector<std::vector<std::pair<int, double>>> lp;
  std::vector<DenseMatrix> c;
  Vector cl;
  Vector b;
};

Layout make_layout(const ConicProblem& p) {
  Layout L;
  L.m = p.num_vars();
  L.dims = p.sdp_dims;
  L.nl = p.lp_dim;
  const int nb = static_cast<int>(p.sdp_dims.size());
  L.sdp.assign(nb, std::vector<std::vector<Trip>>(L.m));
  L.lp.assign(L.m, {});
  L.c = p.c_sdp;
  L.cl = p.c_lp;
  L.b = p.b;
  for (int k = 0; k < L.m; ++k) {
    for (const auto& t : p.a[k]) {
      if (t.block == nb) {
        L.lp[k].emplace_back(t.row, t.value);
      } else {
        L.sdp[t.block][k].push_back({t.row, t.col, t.value});
        if (t.row != t.col) L.sdp[t.block][k].push_back({t.col, t.row, t.value});
      }
    }
  }
  return L;
}

double inner(const std::vector<Trip>& a, const DenseMatrix& m) {
  double s = 0;
  for (const auto& t : a) s += t.v * m(t.r, t.c);
  return s;
}

void add_scaled(DenseMatrix& m, const std::vector<Trip>& a, double y) {
  for (const auto& t : a) m(t.r, t.c) += y * t.v;
}

double max_step_psd(const DenseMatrix& x, const DenseMatrix& dx) {
  if (x.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<DenseMatrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const DenseMatrix l = llt.matrixL();
  DenseMatrix t = l.triangularView<Eigen::Lower>().solve(dx);
  DenseMatrix m = l.triangularView<Eigen::Lower>().solve(t.transpose());
  const double lmin = min_eigenvalue(m);
  return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double max_step_lp(const Vector& x, const Vector& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

struct Dir {
  Vector dy;
  std::vector<DenseMatrix> dx, dz;
  Vector dxl, dzl;
};

}  // namespace

constexpr double kReducedAccuracy = 1e-6;

ConicResult solve_conic(const ConicProblem& problem, int max_iterations, double tol) {
  const Layout L = make_layout(problem);
  const int nb = static_cast<int>(L.dims.size());
  const int m = L.m;
  ConicResult res;
  res.y = Vector::Zero(m);
  int ntot = L.nl;
  for (int d : L.dims) ntot += d;
  if (ntot == 0) {
    res.converged = L.b.isZero();
    return res;
  }

  // Infeasible starting point scaled per block.
  std::vector<DenseMatrix> X(nb), Z(nb);
  double bmax = L.b.size() ? L.b.cwiseAbs().maxCoeff() : 0.0;
  for (int j = 0; j < nb; ++j) {
    const int n = L.dims[j];
    double xi = std::max(10.0, std::sqrt(double(n)));
    double eta = std::max(10.0, std::sqrt(double(n)));
    eta = std::max(eta, L.c[j].norm());
    for (int k = 0; k < m; ++k) {
      double nrm = 0;
      for (const auto& t : L.sdp[j][k]) nrm += t.v * t.v;
      nrm = std::sqrt(nrm);
      xi = std::max(xi, n * (1.0 + std::abs(L.b(k))) / (1.0 + nrm));
      eta = std::max(eta, nrm);
    }
    X[j] = xi * DenseMatrix::Identity(n, n);
    Z[j] = eta * DenseMatrix::Identity(n, n);
  }
  Vector xl, zl;
  {
    double xi = std::max(10.0, std::sqrt(double(L.nl)));
    double eta = std::max(10.0, std::sqrt(double(L.nl)));
    eta = std::max(eta, L.cl.size() ? L.cl.cwiseAbs().maxCoeff() : 0.0);
    for (int k = 0; k < m; ++k) {
      double nrm = 0;
      for (const auto& e : L.lp[k]) nrm += e.second * e.second;
      nrm = std::sqrt(nrm);
      xi = std::max(xi, (1.0 + std::abs(L.b(k))) / (1.0 + nrm));
      eta = std::max(eta, nrm);
    }
    xi = std::max(xi, 1.0 + bmax);
    xl = Vector::Constant(L.nl, xi);
    zl = Vector::Constant(L.nl, eta);
  }
  Vector y = Vector::Zero(m);

  double cnorm = 0;
  for (const auto& c : L.c) cnorm += c.squaredNorm();
  cnorm = std::sqrt(cnorm + L.cl.squaredNorm());
  const double bnorm = L.b.norm();

  auto ax = [&](const std::vector<DenseMatrix>& xs, const Vector& xlp) {
    Vector v = Vector::Zero(m);
    for (int k = 0; k < m; ++k) {
      double s = 0;
      for (int j = 0; j < nb; ++j) s += inner(L.sdp[j][k], xs[j]);
      for (const auto& e : L.lp[k]) s += e.second * xlp(e.first);
      v(k) = s;
    }
    return v;
  };
  auto aty = [&](const Vector& yy, std::vector<DenseMatrix>& out, Vector& outl) {
    out.resize(nb);
    for (int j = 0; j < nb; ++j) {
      out[j] = DenseMatrix::Zero(L.dims[j], L.dims[j]);
      for (int k = 0; k < m; ++k) add_scaled(out[j], L.sdp[j][k], yy(k));
    }
    outl = Vector::Zero(L.nl);
    for (int k = 0; k < m; ++k) {
      for (const auto& e : L.lp[k]) outl(e.first) += yy(k) * e.second;
    }
  };

  // Best iterate by worst residual, used when the iteration stalls.
  double best_score = std::numeric_limits<double>::infinity();
  Vector best_y = y;
  auto finish = [&](const char* why) {
    res.message = why;
    if (best_score < kReducedAccuracy) {
      res.y = best_y;
      res.converged = true;
      res.message += "; accepted at reduced accuracy";
    }
    return res;
  };

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    std::vector<DenseMatrix> S;
    Vector sl;
    aty(y, S, sl);
    std::vector<DenseMatrix> rd(nb);
    double rdn = 0;
    for (int j = 0; j < nb; ++j) {
      rd[j] = L.c[j] - Z[j] - S[j];
      rdn += rd[j].squaredNorm();
    }
    Vector rdl = L.cl - zl - sl;
    rdn = std::sqrt(rdn + rdl.squaredNorm());
    const Vector rp = L.b - ax(X, xl);

    double gap = xl.dot(zl);
    double pobj = L.cl.dot(xl);
    for (int j = 0; j < nb; ++j) {
      gap += X[j].cwiseProduct(Z[j]).sum();
      pobj += L.c[j].cwiseProduct(X[j]).sum();
    }
    const double dobj = L.b.dot(y);
    const double mu = gap / ntot;
    const double pinf = rp.norm() / (1.0 + bnorm);
    const double dinf = rdn / (1.0 + cnorm);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.y = y;
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    if (std::getenv("DISSNET_SDP_TRACE")) {
      std::fprintf(stderr, "it %3d pobj %+.6e dobj %+.6e pinf %.2e dinf %.2e gap %.2e\n", it,
                   pobj, dobj, pinf, dinf, gap);
    }
    if (pinf < tol && dinf < tol && (relgap < tol || gap < tol)) {
      res.converged = true;
      return res;
    }
    const double score = std::max({pinf, dinf, std::min(relgap, gap)});
    if (score < best_score) {
      best_score = score;
      best_y = y;
    }
    // Infeasibility certificates.
    if (pobj < 0) {
      const double ratio = (L.b - rp).norm() / -pobj;
      if (ratio < 1e-7 && dinf < 1e-6) {
        res.primal_ray = true;
        return res;
      }
    }
    if (dobj > 0) {
      double zs = 0;
      for (int j = 0; j < nb; ++j) zs += (S[j] + Z[j]).squaredNorm();
      zs = std::sqrt(zs + (sl + zl).squaredNorm());
      if (zs / dobj < 1e-7 && pinf < 1e-6) {
        res.dual_ray = true;
        return res;
      }
    }

    std::vector<DenseMatrix> zi(nb);
    bool bad = false;
    for (int j = 0; j < nb; ++j) {
      Eigen::LLT<DenseMatrix> llt(Z[j]);
      if (llt.info() != Eigen::Success) {
        bad = true;
        break;
      }
      zi[j] = llt.solve(DenseMatrix::Identity(L.dims[j], L.dims[j]));
      zi[j] = sym_part(zi[j]);
    }
    if (bad) return finish("dual slack lost definiteness");

    // Schur complement matrix H_kl = <A_k, X A_l Z^-1> (+ LP part).
    DenseMatrix h = DenseMatrix::Zero(m, m);
    for (int j = 0; j < nb; ++j) {
      const int n = L.dims[j];
      DenseMatrix t(n, n);
      for (int l = 0; l < m; ++l) {
        const auto& al = L.sdp[j][l];
        if (al.empty()) continue;
        t.setZero();
        for (const auto& e : al) t.noalias() += e.v * X[j].col(e.r) * zi[j].row(e.c);
        for (int k = 0; k <= l; ++k) {
          if (L.sdp[j][k].empty()) continue;
          const double v = inner(L.sdp[j][k], t);
          h(k, l) += v;
        }
      }
    }
    if (L.nl > 0) {
      const Vector dd = xl.cwiseQuotient(zl);
      for (int l = 0; l < m; ++l) {
        for (int k = 0; k <= l; ++k) {
          double s = 0;
          for (const auto& a : L.lp[k]) {
            for (const auto& b : L.lp[l]) {
              if (a.first == b.first) s += a.second * b.second * dd(a.first);
            }
          }
          h(k, l) += s;
        }
      }
    }
    for (int l = 0; l < m; ++l) {
      for (int k = 0; k < l; ++k) h(l, k) = h(k, l);
    }
    Eigen::LLT<DenseMatrix> hl(h);
    Eigen::LDLT<DenseMatrix> hd;
    bool use_ldlt = hl.info() != Eigen::Success;
    if (use_ldlt) {
      DenseMatrix hr = h;
      hr.diagonal().array() += 1e-14 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      hd.compute(hr);
    }

    auto direction = [&](double sigma_mu, const std::vector<DenseMatrix>* corr,
                         const Vector* corrl) {
      Dir d;
      std::vector<DenseMatrix> g(nb);
      for (int j = 0; j < nb; ++j) {
        DenseMatrix lhs = sigma_mu * DenseMatrix::Identity(L.dims[j], L.dims[j]);
        if (corr) lhs -= (*corr)[j];
        g[j] = lhs * zi[j] - X[j] * rd[j] * zi[j];
      }
      Vector gl(L.nl);
      for (int i = 0; i < L.nl; ++i) {
        double lhs = sigma_mu - (corrl ? (*corrl)(i) : 0.0);
        gl(i) = lhs / zl(i) - xl(i) * rdl(i) / zl(i);
      }
      Vector rhs = L.b - ax(g, gl);
      d.dy = use_ldlt ? Vector(hd.solve(rhs)) : Vector(hl.solve(rhs));
      std::vector<DenseMatrix> ady;
      Vector adyl;
      aty(d.dy, ady, adyl);
      d.dz.resize(nb);
      d.dx.resize(nb);
      for (int j = 0; j < nb; ++j) {
        d.dz[j] = rd[j] - ady[j];
        DenseMatrix lhs = sigma_mu * DenseMatrix::Identity(L.dims[j], L.dims[j]);
        if (corr) lhs -= (*corr)[j];
        DenseMatrix dxj = lhs * zi[j] - X[j] - X[j] * d.dz[j] * zi[j];
        d.dx[j] = sym_part(dxj);
      }
      d.dzl = rdl - adyl;
      d.dxl.resize(L.nl);
      for (int i = 0; i < L.nl; ++i) {
        double lhs = sigma_mu - (corrl ? (*corrl)(i) : 0.0);
        d.dxl(i) = lhs / zl(i) - xl(i) - xl(i) * d.dzl(i) / zl(i);
      }
      return d;
    };
    auto steps = [&](const Dir& d, double* ap, double* ad) {
      double a = max_step_lp(xl, d.dxl), b = max_step_lp(zl, d.dzl);
      for (int j = 0; j < nb; ++j) {
        a = std::min(a, max_step_psd(X[j], d.dx[j]));
        b = std::min(b, max_step_psd(Z[j], d.dz[j]));
      }
      *ap = a;
      *ad = b;
    };

    const Dir pred = direction(0.0, nullptr, nullptr);
    double ap, ad;
    steps(pred, &ap, &ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double gap_aff = 0;
    for (int j = 0; j < nb; ++j) {
      gap_aff += (X[j] + ap * pred.dx[j]).cwiseProduct(Z[j] + ad * pred.dz[j]).sum();
    }
    gap_aff += (xl + ap * pred.dxl).dot(zl + ad * pred.dzl);
    double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);
    std::vector<DenseMatrix> corr(nb);
    for (int j = 0; j < nb; ++j) corr[j] = pred.dx[j] * pred.dz[j];
    const Vector corrl = pred.dxl.cwiseProduct(pred.dzl);
    const Dir d = direction(sigma * mu, &corr, &corrl);
    steps(d, &ap, &ad);
    const double tau = 0.98;
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);
    if (ap < 1e-12 && ad < 1e-12) return finish("step length collapsed");
    for (int j = 0; j < nb; ++j) {
      X[j] = sym_part(X[j] + ap * d.dx[j]);
      Z[j] = sym_part(Z[j] + ad * d.dz[j]);
    }
    xl += ap * d.dxl;
    zl += ad * d.dzl;
    y += ad * d.dy;
  }
  return finish("iteration limit");
}

// ---------------------------------------------------------------------------

namespace {

struct Reduction {
  std::vector<int> free;      // free position -> scalar
  std::vector<int> position;  // scalar -> free position or -1
  std::vector<double> base;   // fixed values (0 for free scalars)
};

Reduction reduce(const SdpProblem& p) {
  Reduction r;
  r.position.assign(p.num_scalars(), -1);
  r.base.assign(p.num_scalars(), 0.0);
  for (int s = 0; s < p.num_scalars(); ++s) {
    const auto& info = p.scalar_info(s);
    if (info.fixed) {
      r.base[s] = *info.fixed;
    } else {
      r.position[s] = static_cast<int>(r.free.size());
      r.free.push_back(s);
    }
  }
  return r;
}

struct Bounds {
  double lo;
  double hi;
  bool lo_artificial;
  bool hi_artificial;
};

Bounds bounds_of(const ScalarInfo& info, double box) {
  Bounds b{-box, box, true, true};
  if (info.lower) {
    b.lo = *info.lower;
    b.lo_artificial = false;
  }
  if (info.upper) {
    b.hi = *info.upper;
    b.hi_artificial = false;
  }
  if (b.lo_artificial && !b.hi_artificial) b.lo = std::min(b.lo, b.hi - box);
  if (b.hi_artificial && !b.lo_artificial) b.hi = std::max(b.hi, b.lo + box);
  return b;
}

// Builds the conic layout. phase1 adds a slack t (last variable) that is
// maximized; otherwise the objective of the problem is used. extra_margin
// tightens every PSD constraint.
ConicProblem build_conic(const SdpProblem& p, const Reduction& red, const SolveOptions& opt,
                         bool phase1, double extra_margin_rel) {
  ConicProblem cp;
  const int nfree = static_cast<int>(red.free.size());
  const int m = nfree + (phase1 ? 1 : 0);
  cp.a.assign(m, {});
  cp.b = Vector::Zero(m);
  const int nb = static_cast<int>(p.psd().size());
  for (int j = 0; j < nb; ++j) {
    const auto& con = p.psd()[j];
    const int n = con.expr.dim();
    cp.sdp_dims.push_back(n);
    DenseMatrix c = con.expr.constant();
    for (const auto& e : con.expr.entries()) {
      const int pos = red.position[e.scalar];
      if (pos < 0) {
        const double v = e.coeff * red.base[e.scalar];
        c(e.row, e.col) += v;
        if (e.row != e.col) c(e.col, e.row) += v;
      } else {
        cp.a[pos].push_back({j, e.row, e.col, -e.coeff});
      }
    }
    const double mg = con.margin * (1.0 + extra_margin_rel);
    c.diagonal().array() -= mg;
    cp.c_sdp.push_back(c);
    if (phase1) {
      for (int i = 0; i < n; ++i) cp.a[nfree].push_back({j, i, i, 1.0});
    }
  }
  std::vector<double> cl;
  auto lp_row = [&](double c0) {
    cl.push_back(c0);
    return static_cast<int>(cl.size()) - 1;
  };
  for (const auto& lc : p.linear()) {
    double lo = lc.lower;
    std::vector<std::pair<int, double>> fr;
    for (const auto& [s, a] : lc.terms) {
      const int pos = red.position.at(s);
      if (pos < 0) {
        lo -= a * red.base[s];
      } else {
        fr.emplace_back(pos, a);
      }
    }
    if (fr.empty()) continue;
    const int row = lp_row(-lo);
    for (const auto& [pos, a] : fr) cp.a[pos].push_back({nb, row, row, -a});
  }
  for (int k = 0; k < nfree; ++k) {
    const Bounds b = bounds_of(p.scalar_info(red.free[k]), opt.box);
    int row = lp_row(-b.lo);
    cp.a[k].push_back({nb, row, row, -1.0});
    row = lp_row(b.hi);
    cp.a[k].push_back({nb, row, row, 1.0});
  }
  if (phase1) {
    const int row = lp_row(opt.t_cap);
    cp.a[nfree].push_back({nb, row, row, 1.0});
    cp.b(nfree) = 1.0;
  } else {
    const double sgn = p.sense() == Sense::Minimize ? -1.0 : 1.0;
    for (const auto& [s, c] : p.objective()) {
      const int pos = red.position.at(s);
      if (pos >= 0) cp.b(pos) += sgn * c;
    }
  }
  cp.lp_dim = static_cast<int>(cl.size());
  cp.c_lp = Eigen::Map<Vector>(cl.data(), cl.size());
  return cp;
}

std::vector<double> expand(const Reduction& red, const Vector& y) {
  std::vector<double> v = red.base;
  for (std::size_t k = 0; k < red.free.size(); ++k) v[red.free[k]] = y(k);
  return v;
}

// Smallest slack min_j lambda_min(F_j(x)) - margin_j and whether every
// constraint passes the PD test.
bool verify(const SdpProblem& p, const std::vector<double>& x, double* slack) {
  bool ok = true;
  double s = std::numeric_limits<double>::infinity();
  for (const auto& con : p.psd()) {
    const DenseMatrix f = evaluate(con.expr, x);
    if (!f.allFinite()) return false;
    s = std::min(s, min_eigenvalue(f) - con.margin);
    if (!is_positive_definite(f, con.margin)) ok = false;
  }
  for (const auto& lc : p.linear()) {
    double v = 0;
    for (const auto& [sc, a] : lc.terms) v += a * x[sc];
    if (v < lc.lower - 1e-12 * (1 + std::abs(lc.lower))) ok = false;
  }
  for (int k = 0; k < p.num_scalars(); ++k) {
    const auto& info = p.scalar_info(k);
    if (info.fixed) continue;
    if (info.lower && x[k] < *info.lower - 1e-12 * (1 + std::abs(*info.lower))) ok = false;
    if (info.upper && x[k] > *info.upper + 1e-12 * (1 + std::abs(*info.upper))) ok = false;
  }
  if (slack) *slack = p.psd().empty() ? 0.0 : s;
  return ok;
}

double objective_of(const SdpProblem& p, const std::vector<double>& x) {
  double v = 0;
  for (const auto& [s, c] : p.objective()) v += c * x[s];
  return v;
}

void validate(const SdpProblem& p) {
  for (const auto& con : p.psd()) {
    if (con.margin < 0) throw std::invalid_argument("solve: negative margin");
    const DenseMatrix& c = con.expr.constant();
    if (!c.allFinite()) throw std::invalid_argument("solve: non-finite constant");
  }
  for (int s = 0; s < p.num_scalars(); ++s) {
    const auto& info = p.scalar_info(s);
    if (info.lower && info.upper && *info.lower > *info.upper) {
      throw std::invalid_argument("solve: empty bounds for " + p.scalar_name(s));
    }
  }
}

}  // namespace

ConicProblem to_conic(const SdpProblem& problem, const SolveOptions& options) {
  return build_conic(problem, reduce(problem), options, true, 0.0);
}

SdpSolution solve(const SdpProblem& problem, const SolveOptions& options) {
  validate(problem);
  SdpSolution sol;
  const Reduction red = reduce(problem);
  sol.values = red.base;

  const ConicProblem p1 = build_conic(problem, red, options, true, 0.0);
  const ConicResult r1 = solve_conic(p1, options.max_iterations, options.tolerance);
  sol.iterations = r1.iterations;
  if (r1.primal_ray) {
    sol.status = SdpStatus::Infeasible;
    sol.message = "linear constraints are inconsistent";
    return sol;
  }
  const double t = r1.y.size() ? r1.y(r1.y.size() - 1) : 0.0;
  sol.phase1_t = t;
  std::vector<double> x1 = expand(red, r1.y.head(red.free.size()));
  sol.values = x1;
  double slack1 = 0;
  const bool ok1 = verify(problem, x1, &slack1);
  sol.achieved_margin = slack1;
  if (!ok1) {
    if (r1.converged && t < -1e-9) {
      sol.status = SdpStatus::Infeasible;
      sol.message = "phase-1 optimum t* = " + std::to_string(t) + " < 0";
    } else {
      sol.status = SdpStatus::NumericalFailure;
      sol.message = r1.converged ? "phase-1 point fails verification (boundary case)"
                                 : "phase-1 did not converge";
    }
    return sol;
  }
  sol.status = SdpStatus::Feasible;
  sol.objective_value = objective_of(problem, x1);

  auto mark_box = [&](const std::vector<double>& x) {
    sol.at_box_bound.clear();
    for (int k : red.free) {
      const Bounds b = bounds_of(problem.scalar_info(k), options.box);
      const double tolb = 1e-3 * options.box;
      if ((b.lo_artificial && x[k] <= b.lo + tolb) || (b.hi_artificial && x[k] >= b.hi - tolb)) {
        sol.at_box_bound.push_back(k);
      }
    }
  };

  if (!problem.has_objective()) {
    mark_box(x1);
    return sol;
  }

  const ConicProblem p2 = build_conic(problem, red, options, false, 0.0);
  const ConicResult r2 = solve_conic(p2, options.max_iterations, options.tolerance);
  sol.iterations += r2.iterations;
  if (!r2.converged && !r2.dual_ray) {
    sol.message = "objective stage did not converge (" + (r2.message.empty() ? std::string("iteration limit") : r2.message) + "); returning the phase-1 point";
    sol.status = SdpStatus::NumericalFailure;
    mark_box(x1);
    return sol;
  }
  const std::vector<double> x2 = expand(red, r2.y.head(red.free.size()));
  // Pull the optimum toward the phase-1 point until it verifies.
  for (double theta : {0.0, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    std::vector<double> x(x2.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1 - theta) * x2[i] + theta * x1[i];
    double slack = 0;
    if (verify(problem, x, &slack)) {
      sol.values = x;
      sol.achieved_margin = slack;
      sol.objective_value = objective_of(problem, x);
      sol.status = theta < 1.0 ? SdpStatus::Optimal : SdpStatus::Feasible;
      break;
    }
  }
  mark_box(sol.values);
  if (r2.dual_ray) sol.status = SdpStatus::Unbounded;
  for (int k : sol.at_box_bound) {
    for (const auto& [s, c] : problem.objective()) {
      if (s == k && c != 0.0) sol.status = SdpStatus::Unbounded;
    }
  }
  if (sol.status == SdpStatus::Unbounded) sol.message = "objective driven to the box bound";
  return sol;
}

void write_triplets(std::ostream& os, const ConicProblem& p) {
  const int nb = static_cast<int>(p.sdp_dims.size());
  std::size_t nnz = 0;
  for (int j = 0; j < nb; ++j) {
    for (int r = 0; r < p.sdp_dims[j]; ++r) {
      for (int c = r; c < p.sdp_dims[j]; ++c) nnz += p.c_sdp[j](r, c) != 0.0;
    }
  }
  for (Eigen::Index i = 0; i < p.c_lp.size(); ++i) nnz += p.c_lp(i) != 0.0;
  for (const auto& a : p.a) nnz += a.size();
  os.precision(17);
  os << "conic " << p.num_vars() << ' ' << nb << ' ' << p.lp_dim << ' ' << nnz << " dims:";
  for (int d : p.sdp_dims) os << ' ' << d;
  os << '\n';
  for (int j = 0; j < nb; ++j) {
    for (int r = 0; r < p.sdp_dims[j]; ++r) {
      for (int c = r; c < p.sdp_dims[j]; ++c) {
        if (p.c_sdp[j](r, c) != 0.0) os << j << ' ' << r << ' ' << c << " 0 " << p.c_sdp[j](r, c) << '\n';
      }
    }
  }
  for (Eigen::Index i = 0; i < p.c_lp.size(); ++i) {
    if (p.c_lp(i) != 0.0) os << nb << ' ' << i << ' ' << i << " 0 " << p.c_lp(i) << '\n';
  }
  for (std::size_t k = 0; k < p.a.size(); ++k) {
    for (const auto& t : p.a[k]) {
      os << t.block << ' ' << t.row << ' ' << t.col << ' ' << k + 1 << ' ' << t.value << '\n';
    }
  }
  for (Eigen::Index k = 0; k < p.b.size(); ++k) os << "b " << k + 1 << ' ' << p.b(k) << '\n';
}

}  // namespace dissnet
