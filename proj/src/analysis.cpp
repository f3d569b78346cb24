#include "dissnet/analysis.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dissnet {

namespace {

LmiOptions lmi_options(const AnalysisOptions& o) {
  LmiOptions l;
  l.margin = o.margin;
  l.p_min = o.p_min;
  l.p_max = o.p_max;
  return l;
}

void fill_result(AnalysisResult& r, const NscLmi& lmi, const SdpSolution& s) {
  r.status = s.status;
  r.message = s.message;
  r.margin = s.achieved_margin;
  r.p.clear();
  r.pbar.clear();
  for (int k : lmi.p) r.p.push_back(s.values.at(k));
  for (int k : lmi.pbar) r.pbar.push_back(s.values.at(k));
  r.lmi = evaluate(lmi.problem.psd()[lmi.main_constraint].expr, s.values);
  r.verdict = s.ok() ? Verdict::Certified : Verdict::NotCertified;
}

bool all_x11(const std::vector<SubsystemProfile>& v, bool positive) {
  for (const auto& s : v) {
    const DenseMatrix& x = s.certificate.x11;
    if (x.size() == 0) continue;
    if (positive && !is_positive_definite(x, 0.0)) return false;
    if (!positive && max_eigenvalue(x) > 1e-12) return false;
  }
  return true;
}

// Sign hint for alpha: -sign(tr H(Phi' Theta J)) at unit multipliers.
double alpha_sign_hint(const NSCProblem& p, const InterconnectionMatrix& m) {
  double tr = 0;
  auto acc = [&](MBlock b, const std::vector<SubsystemProfile>& prof) {
    if (!m.has(b)) return;
    const BlockMatrix& blk = m.at(b);
    for (int i = 0; i < blk.block_rows(); ++i) {
      if (blk.block(i, i).rows() != blk.block(i, i).cols()) continue;
      tr += 2.0 * (prof[i].certificate.x11 * blk.block(i, i)).trace();
    }
  };
  acc(MBlock::UY, p.subsystems);
  if (p.has_plants()) acc(MBlock::UbYb, p.plants);
  return tr > 0 ? -1.0 : 1.0;
}

}  // namespace

std::vector<double> alpha_grid(double preferred_sign) {
  std::vector<double> g{0.0};
  const double s = preferred_sign < 0 ? -1.0 : 1.0;
  for (int k = -6; k <= 5; ++k) {
    const double a = std::pow(10.0, 0.5 * k);
    g.push_back(s * a);
    g.push_back(-s * a);
  }
  return g;
}

DenseMatrix raw_quadratic_form(const NSCProblem& p, const InterconnectionMatrix& m,
                               const std::vector<double>& mult, const std::vector<double>& mult_bar) {
  const DenseMatrix full = stacked(p, m);
  auto tot = [](const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); };
  const int q = tot(p.row_partition(RowGroup::U));
  const int qb = tot(p.row_partition(RowGroup::Ub));
  const int l = tot(p.row_partition(RowGroup::Z));
  const int my = tot(p.col_partition(ColGroup::Y));
  const int mb = tot(p.col_partition(ColGroup::Yb));
  const int r = tot(p.col_partition(ColGroup::W));
  const int nv = my + mb + r;
  const DenseMatrix eu = full.topRows(q);
  const DenseMatrix eub = full.middleRows(q, qb);
  const DenseMatrix ez = full.bottomRows(l);
  const DenseMatrix ey = DenseMatrix::Identity(nv, nv).topRows(my);
  const DenseMatrix eyb = DenseMatrix::Identity(nv, nv).middleRows(my, mb);
  const DenseMatrix ew = DenseMatrix::Identity(nv, nv).bottomRows(r);

  const ScaledAggregate xs = assemble_scaled(p.subsystems, mult);
  DenseMatrix w = eu.transpose() * xs.x11.data * eu + eu.transpose() * xs.x12.data * ey +
                  ey.transpose() * xs.x21.data * eu + ey.transpose() * xs.x22.data * ey;
  if (p.has_plants()) {
    const ScaledAggregate xb = assemble_scaled(p.plants, mult_bar);
    w += eub.transpose() * xb.x11.data * eub + eub.transpose() * xb.x12.data * eyb +
         eyb.transpose() * xb.x21.data * eub + eyb.transpose() * xb.x22.data * eyb;
  }
  if (p.has_exogenous()) {
    const SupplyMatrix& y = *p.global_spec;
    w -= ew.transpose() * y.x11 * ew + ew.transpose() * y.x12 * ez + ez.transpose() * y.x21 * ew +
         ez.transpose() * y.x22 * ez;
  }
  return sym_part(w);
}

DenseMatrix embedded_form(const NSCProblem& p, const InterconnectionMatrix& m,
                          const std::vector<double>& mult, const std::vector<double>& mult_bar) {
  LmiOptions o;
  o.normalize = false;
  o.p_min = 0.0;
  const NscLmi lmi = build_nsc_lmi(p, fixed_specs(p, m), o);
  std::vector<double> x(lmi.problem.num_scalars(), 0.0);
  for (std::size_t i = 0; i < lmi.p.size(); ++i) x[lmi.p[i]] = mult.at(i);
  for (std::size_t i = 0; i < lmi.pbar.size(); ++i) x[lmi.pbar[i]] = mult_bar.at(i);
  return evaluate(lmi.problem.psd()[lmi.main_constraint].expr, x);
}

namespace {

// Raw form -W(p, index) >= margin*I. With M fixed the raw form is affine in
// the multipliers and in the entries of Y, so this is itself an LMI. Used for
// mixed-sign X11 and for index estimation without a positive X11, where
// (nu, rho) or gamma^2 enter directly (no reciprocal change of variables).
struct RawIndexVars {
  std::optional<int> nu, rho, gamma_sq;
};
struct RawIndexValues {
  std::optional<double> nu, rho, gamma_sq;
};

AnalysisResult analyze_raw(const NSCProblem& p, const InterconnectionMatrix& m,
                           const AnalysisOptions& o, IndexMode mode = IndexMode::FixedY,
                           double c1 = 1.0, double c2 = 1.0, RawIndexValues* index_vars = nullptr,
                           SdpStatus* solve_status = nullptr) {
  const int n = p.size();
  const bool plants = p.has_plants();
  SdpProblem sp;
  std::vector<int> ps, pbs;
  for (int i = 0; i < n; ++i) {
    ps.push_back(sp.var(sp.add_scalar("p[" + std::to_string(i) + "]", o.p_min, o.p_max)).first_scalar);
    if (plants) {
      pbs.push_back(sp.var(sp.add_scalar("pbar[" + std::to_string(i) + "]", o.p_min, o.p_max)).first_scalar);
    }
  }
  NSCProblem base = p;
  std::vector<std::pair<int, SupplyMatrix>> y_terms;
  RawIndexVars iv;
  if (mode != IndexMode::FixedY) {
    const int r = std::accumulate(p.w_split.begin(), p.w_split.end(), 0);
    const int l = std::accumulate(p.z_split.begin(), p.z_split.end(), 0);
    auto supply = [&](const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& d) {
      return SupplyMatrix{a, b, b.transpose(), d};
    };
    const DenseMatrix ir = DenseMatrix::Identity(r, r), il = DenseMatrix::Identity(l, l);
    const DenseMatrix zr = DenseMatrix::Zero(r, r), zl = DenseMatrix::Zero(l, l),
                      zrl = DenseMatrix::Zero(r, l);
    if (mode == IndexMode::MaxPassivity) {
      if (r != l) throw std::invalid_argument("passivity indices need dim w == dim z");
      base.global_spec = supply(zr, 0.5 * DenseMatrix::Identity(r, l), zl);
      iv.nu = sp.var(sp.add_scalar("nu")).first_scalar;
      iv.rho = sp.var(sp.add_scalar("rho")).first_scalar;
      y_terms.emplace_back(*iv.nu, supply(-ir, zrl, zl));
      y_terms.emplace_back(*iv.rho, supply(zr, zrl, -il));
      sp.set_objective({{*iv.nu, c1}, {*iv.rho, c2}}, Sense::Maximize);
    } else {
      base.global_spec = supply(zr, zrl, -il);
      iv.gamma_sq = sp.var(sp.add_scalar("gamma_sq", 0.0)).first_scalar;
      y_terms.emplace_back(*iv.gamma_sq, supply(ir, zrl, zl));
      sp.set_objective({{*iv.gamma_sq, 1.0}}, Sense::Minimize);
    }
  }
  std::vector<double> z(n, 0.0), zb(plants ? n : 0, 0.0);
  const DenseMatrix w0 = raw_quadratic_form(base, m, z, zb);
  AffineMatrixExpr e(static_cast<int>(w0.rows()));
  e.add_constant(0, 0, -w0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> ei = z;
    ei[i] = 1.0;
    e.add_scalar_term(0, 0, ps[i], -(raw_quadratic_form(base, m, ei, zb) - w0));
    if (plants) {
      std::vector<double> ebi = zb;
      ebi[i] = 1.0;
      e.add_scalar_term(0, 0, pbs[i], -(raw_quadratic_form(base, m, z, ebi) - w0));
    }
  }
  for (const auto& [scalar, yk] : y_terms) {
    NSCProblem unit = p;
    unit.global_spec = yk;
    e.add_scalar_term(0, 0, scalar, -raw_quadratic_form(unit, m, z, zb));
  }
  sp.add_psd(e, o.margin);
  LinearConstraint c;
  for (int s : ps) c.terms.emplace_back(s, 1.0);
  for (int s : pbs) c.terms.emplace_back(s, 1.0);
  c.lower = 1.0;
  sp.add_linear(c);
  const SdpSolution s = solve(sp, o.solver);
  AnalysisResult r;
  r.status = s.status;
  r.message = "raw-form analysis; " + s.message;
  r.margin = s.achieved_margin;
  for (int k : ps) r.p.push_back(s.values[k]);
  for (int k : pbs) r.pbar.push_back(s.values[k]);
  r.lmi = evaluate(sp.psd()[0].expr, s.values);
  r.verdict = s.ok() ? Verdict::Certified : Verdict::NotCertified;
  if (index_vars) {
    if (iv.nu) index_vars->nu = s.values[*iv.nu];
    if (iv.rho) index_vars->rho = s.values[*iv.rho];
    if (iv.gamma_sq) index_vars->gamma_sq = s.values[*iv.gamma_sq];
  }
  if (solve_status) *solve_status = s.status;
  return r;
}

}  // namespace

AnalysisResult analyze(const NSCProblem& p, const InterconnectionMatrix& m,
                       const AnalysisOptions& o) {
  const ValidationReport rep = validate(p);
  if (!rep.ok) throw std::invalid_argument("invalid problem: " + rep.errors.front());
  if (m.variant != p.variant) throw std::invalid_argument("interconnection variant mismatch");
  const bool pos = all_x11(p.subsystems, true) && (!p.has_plants() || all_x11(p.plants, true));
  if (pos) {
    const NscLmi lmi = build_nsc_lmi(p, fixed_specs(p, m), lmi_options(o));
    const SdpSolution s = solve(lmi.problem, o.solver);
    AnalysisResult r;
    fill_result(r, lmi, s);
    return r;
  }
  const bool neg = all_x11(p.subsystems, false) && (!p.has_plants() || all_x11(p.plants, false));
  if (!neg) return analyze_raw(p, m, o);
  AnalysisResult last;
  last.message = "no alpha on the grid certifies";
  for (double a : alpha_grid(alpha_sign_hint(p, m))) {
    LmiOptions lo = lmi_options(o);
    lo.alpha = a;
    const NscLmi lmi = build_nsc_lmi(p, fixed_specs(p, m), lo);
    const SdpSolution s = solve(lmi.problem, o.solver);
    AnalysisResult r;
    fill_result(r, lmi, s);
    r.alpha = a;
    if (r.certified()) return r;
    last.status = r.status;
  }
  return last;
}

namespace {

AnalysisResult analyze_variant(int v, const NSCProblem& p, const InterconnectionMatrix& m,
                               const AnalysisOptions& o) {
  if (p.variant != v) {
    throw std::invalid_argument("expected a variant-" + std::to_string(v) + " problem");
  }
  return analyze(p, m, o);
}

}  // namespace

AnalysisResult analyze_nsc1(const NSCProblem& p, const InterconnectionMatrix& m,
                            const AnalysisOptions& o) {
  return analyze_variant(1, p, m, o);
}
AnalysisResult analyze_nsc2(const NSCProblem& p, const InterconnectionMatrix& m,
                            const AnalysisOptions& o) {
  return analyze_variant(2, p, m, o);
}
AnalysisResult analyze_nsc3(const NSCProblem& p, const InterconnectionMatrix& m,
                            const AnalysisOptions& o) {
  return analyze_variant(3, p, m, o);
}
AnalysisResult analyze_nsc4(const NSCProblem& p, const InterconnectionMatrix& m,
                            const AnalysisOptions& o) {
  return analyze_variant(4, p, m, o);
}

IndexEstimate estimate_indices(const NSCProblem& p, const InterconnectionMatrix& m,
                               IndexMode mode, double c1, double c2, const AnalysisOptions& o) {
  if (mode == IndexMode::FixedY) throw std::invalid_argument("estimate_indices: pick an index mode");
  if (!p.has_exogenous()) throw std::invalid_argument("estimate_indices: variant 2 or 4 required");
  NSCProblem q = p;
  if (!q.global_spec) {
    const int r = std::accumulate(p.w_split.begin(), p.w_split.end(), 0);
    const int l = std::accumulate(p.z_split.begin(), p.z_split.end(), 0);
    q.global_spec = supply_from_kind(L2Gain{1.0}, r, l);
  }
  const bool pos = all_x11(q.subsystems, true) && (!q.has_plants() || all_x11(q.plants, true));
  if (!pos) {
    IndexEstimate est;
    RawIndexValues v;
    SdpStatus st = SdpStatus::NumericalFailure;
    est.analysis = analyze_raw(q, m, o, mode, c1, c2, &v, &st);
    if (st == SdpStatus::Unbounded) est.analysis.verdict = Verdict::Certified;
    if (est.analysis.certified()) {
      if (v.nu) est.indices.nu = *v.nu;
      if (v.rho) est.indices.rho = *v.rho;
      if (v.gamma_sq) est.indices.gamma = std::sqrt(std::max(0.0, *v.gamma_sq));
    }
    return est;
  }
  LmiOptions lo = lmi_options(o);
  lo.index_mode = mode;
  lo.c1 = c1;
  lo.c2 = c2;
  lo.nonnegative_nu = false;
  const NscLmi lmi = build_nsc_lmi(q, fixed_specs(q, m), lo);
  const SdpSolution s = solve(lmi.problem, o.solver);
  IndexEstimate est;
  fill_result(est.analysis, lmi, s);
  if (s.status == SdpStatus::Unbounded) est.analysis.verdict = Verdict::Certified;
  if (est.analysis.certified()) {
    if (lmi.nu) est.indices.nu = s.values[*lmi.nu];
    if (lmi.rho_bar) est.indices.rho = 1.0 / s.values[*lmi.rho_bar];
    if (lmi.gamma_sq) est.indices.gamma = std::sqrt(std::max(0.0, s.values[*lmi.gamma_sq]));
  }
  return est;
}

}  // namespace dissnet
