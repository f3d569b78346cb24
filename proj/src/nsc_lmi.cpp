#include "dissnet/nsc_lmi.hpp"

#include <numeric>
#include <stdexcept>

namespace dissnet {

LinearMatrix LinearMatrix::zero(int rows, int cols) {
  return {DenseMatrix::Zero(rows, cols), {}};
}

LinearMatrix LinearMatrix::of_var(const DecisionVar& v) {
  LinearMatrix l = zero(v.rows, v.cols);
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) l.terms.push_back({v.scalar(r, c), r, c, 1.0});
  }
  return l;
}

DenseMatrix LinearMatrix::evaluate(const std::vector<double>& x) const {
  DenseMatrix m = constant;
  for (const auto& t : terms) m(t.row, t.col) += t.coeff * x.at(t.scalar);
  return m;
}

namespace {

LinearMatrix left_multiply(const DenseMatrix& c, const LinearMatrix& l) {
  if (c.cols() != l.rows()) throw std::invalid_argument("left_multiply: dims mismatch");
  LinearMatrix out{c * l.constant, {}};
  for (const auto& t : l.terms) {
    for (Eigen::Index a = 0; a < c.rows(); ++a) {
      if (c(a, t.row) != 0.0) out.terms.push_back({t.scalar, int(a), t.col, c(a, t.row) * t.coeff});
    }
  }
  return out;
}

}  // namespace

void place(AffineMatrixExpr& e, int r0, int c0, const LinearMatrix& l, const DenseMatrix& c,
           const DenseMatrix& d, double scale) {
  if (c.cols() != l.rows() || d.rows() != l.cols()) {
    throw std::invalid_argument("place: dims mismatch");
  }
  if (c.rows() == 0 || d.cols() == 0) return;
  const bool diag = r0 == c0;
  const DenseMatrix k = scale * c * l.constant * d;
  if (diag) {
    e.add_constant(r0, c0, k + k.transpose());
  } else if (k.size() > 0) {
    e.add_constant(r0, c0, k);
  }
  for (const auto& t : l.terms) {
    for (Eigen::Index a = 0; a < c.rows(); ++a) {
      const double ca = scale * t.coeff * c(a, t.row);
      if (ca == 0.0) continue;
      for (Eigen::Index b = 0; b < d.cols(); ++b) {
        const double v = ca * d(t.col, b);
        if (v == 0.0) continue;
        e.add_entry(r0 + int(a), c0 + int(b), t.scalar, diag && a == b ? 2.0 * v : v);
      }
    }
  }
}

void place(AffineMatrixExpr& e, int r0, int c0, const LinearMatrix& l, double scale) {
  place(e, r0, c0, l, DenseMatrix::Identity(l.rows(), l.rows()),
        DenseMatrix::Identity(l.cols(), l.cols()), scale);
}

namespace {

int total(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

std::vector<int> offsets(const std::vector<int>& part) {
  std::vector<int> off(part.size() + 1, 0);
  for (std::size_t i = 0; i < part.size(); ++i) off[i + 1] = off[i] + part[i];
  return off;
}

int agent_of(const std::vector<int>& off, int index) {
  for (std::size_t i = 0; i + 1 < off.size(); ++i) {
    if (index < off[i + 1]) return static_cast<int>(i);
  }
  return static_cast<int>(off.size()) - 2;
}

enum Group { GU, GUb, GZ, GY, GYb, GW, kGroups };
const char* kGroupNames[] = {"u", "ubar", "z", "y", "ybar", "w"};

Group group_of(ColGroup c) { return c == ColGroup::Y ? GY : c == ColGroup::Yb ? GYb : GW; }

}  // namespace

std::map<MBlock, BlockSpec> fixed_specs(const NSCProblem& p, const InterconnectionMatrix& m) {
  std::map<MBlock, BlockSpec> s;
  for (MBlock b : kAllBlocks) {
    if (!p.has_block(b)) continue;
    if (!m.has(b)) throw std::invalid_argument(std::string("missing M block ") + block_name(b));
    s[b] = {BlockMode::Fixed, m.at(b).data};
  }
  return s;
}

NscLmi build_nsc_lmi(const NSCProblem& p, const std::map<MBlock, BlockSpec>& specs_in,
                     const LmiOptions& opt) {
  const ValidationReport rep = validate(p);
  if (!rep.ok) throw std::invalid_argument("invalid problem: " + rep.errors.front());
  const int n = p.size();
  const bool negative = opt.alpha.has_value();
  if (opt.index_mode != IndexMode::FixedY && !p.has_exogenous()) {
    throw std::invalid_argument("index objectives need variant 2 or 4");
  }

  NscLmi out;
  SdpProblem& sp = out.problem;

  // Per-group agent partitions.
  std::vector<std::vector<int>> part(kGroups);
  part[GU] = p.row_partition(RowGroup::U);
  part[GUb] = p.row_partition(RowGroup::Ub);
  part[GZ] = p.row_partition(RowGroup::Z);
  part[GY] = p.col_partition(ColGroup::Y);
  part[GYb] = p.col_partition(ColGroup::Yb);
  part[GW] = p.col_partition(ColGroup::W);
  std::vector<bool> present(kGroups, false);
  present[GU] = !negative;
  present[GUb] = !negative && p.has_plants();
  present[GZ] = p.has_exogenous();
  present[GY] = true;
  present[GYb] = p.has_plants();
  present[GW] = p.has_exogenous();
  std::vector<int> goff(kGroups, -1);
  int dim = 0;
  for (int g = 0; g < kGroups; ++g) {
    if (!present[g]) continue;
    goff[g] = dim;
    dim += total(part[g]);
    out.layout.inner.push_back(part[g]);
    out.group_names.push_back(kGroupNames[g]);
  }
  out.layout.data = DenseMatrix::Zero(dim, dim);
  std::vector<std::vector<int>> aoff(kGroups);
  for (int g = 0; g < kGroups; ++g) aoff[g] = offsets(part[g]);

  // Multipliers.
  for (int i = 0; i < n; ++i) {
    const int v = sp.add_scalar("p[" + std::to_string(i) + "]", opt.p_min, opt.p_max);
    out.p.push_back(sp.var(v).first_scalar);
    if (p.has_plants()) {
      const int vb = sp.add_scalar("pbar[" + std::to_string(i) + "]", opt.p_min, opt.p_max);
      out.pbar.push_back(sp.var(vb).first_scalar);
    }
  }

  // Blocks.
  std::map<MBlock, BlockSpec> specs;
  std::vector<MBlock> free_blocks;
  for (MBlock b : kAllBlocks) {
    if (!p.has_block(b)) continue;
    auto it = specs_in.find(b);
    BlockSpec s = it == specs_in.end() ? BlockSpec{} : it->second;
    const int rows = total(p.row_partition(row_group(b)));
    const int cols = total(p.col_partition(col_group(b)));
    if (s.mode == BlockMode::Fixed && (s.value.rows() != rows || s.value.cols() != cols)) {
      throw std::invalid_argument(std::string("fixed block ") + block_name(b) + " has wrong dims");
    }
    if (s.mode == BlockMode::Free) free_blocks.push_back(b);
    specs[b] = s;
  }
  const TopologyFixes topo = apply_topology(p, free_blocks);

  const auto& subs = p.subsystems;
  const auto& plants = p.plants;
  auto cert = [&](RowGroup g, int i) -> const SupplyMatrix& {
    return g == RowGroup::U ? subs[i].certificate : plants[i].certificate;
  };
  auto mult = [&](RowGroup g, int i) { return g == RowGroup::U ? out.p[i] : out.pbar[i]; };

  std::map<MBlock, LinearMatrix> lin;    // L (input side) or M (z side)
  std::map<MBlock, LinearMatrix> cross;  // X21r * L for input-side blocks
  for (const auto& [b, s] : specs) {
    const RowGroup rg = row_group(b);
    const auto rpart = p.row_partition(rg);
    const auto cpart = p.col_partition(col_group(b));
    const auto roff = offsets(rpart);
    const auto coff = offsets(cpart);
    const int rows = roff.back();
    const int cols = coff.back();
    if (s.mode == BlockMode::Free) {
      const std::string prefix = rg == RowGroup::Z ? "M_" : "L_";
      const int v = sp.add_block(prefix + block_name(b), rows, cols);
      out.vars[b] = v;
      auto zit = topo.zero_blocks.find(b);
      if (zit != topo.zero_blocks.end()) {
        for (const auto& [i, j] : zit->second) {
          for (int r = roff[i]; r < roff[i + 1]; ++r) {
            for (int c = coff[j]; c < coff[j + 1]; ++c) sp.fix(sp.var(v).scalar(r, c), 0.0);
          }
        }
      }
      lin[b] = LinearMatrix::of_var(sp.var(v));
      if (rg != RowGroup::Z) {
        const auto& prof = rg == RowGroup::U ? subs : plants;
        const RatioBlocks rb = ratio_blocks(prof);
        cross[b] = left_multiply(rb.x21_ratio.data, lin[b]);
      }
    } else if (rg == RowGroup::Z) {
      lin[b] = {s.value, {}};
    } else {
      // L = X_p11 * M and X21r * L = X_p21 * M, both affine in the multipliers.
      const auto outp = p.col_partition(rg == RowGroup::U ? ColGroup::Y : ColGroup::Yb);
      const auto ooff = offsets(outp);
      LinearMatrix l = LinearMatrix::zero(rows, cols);
      LinearMatrix k = LinearMatrix::zero(ooff.back(), cols);
      for (int i = 0; i < n; ++i) {
        const SupplyMatrix& x = cert(rg, i);
        const DenseMatrix mi = s.value.middleRows(roff[i], rpart[i]);
        const DenseMatrix li = x.x11 * mi;
        const DenseMatrix ki = x.x21 * mi;
        for (int r = 0; r < li.rows(); ++r) {
          for (int c = 0; c < cols; ++c) {
            if (li(r, c) != 0.0) l.terms.push_back({mult(rg, i), roff[i] + r, c, li(r, c)});
          }
        }
        for (int r = 0; r < ki.rows(); ++r) {
          for (int c = 0; c < cols; ++c) {
            if (ki(r, c) != 0.0) k.terms.push_back({mult(rg, i), ooff[i] + r, c, ki(r, c)});
          }
        }
      }
      lin[b] = std::move(l);
      cross[b] = std::move(k);
    }
  }

  // Index variables.
  int l_dim = total(part[GZ]);
  int r_dim = total(part[GW]);
  if (opt.index_mode == IndexMode::MaxPassivity) {
    if (l_dim != r_dim) throw std::invalid_argument("passivity indices need dim z == dim w");
    out.nu = sp.var(sp.add_scalar("nu", opt.nonnegative_nu ? std::optional<double>(0.0) : std::nullopt))
                 .first_scalar;
    out.rho_bar = sp.var(sp.add_scalar("rho_bar", 0.0)).first_scalar;
  } else if (opt.index_mode == IndexMode::MinL2Gain) {
    out.gamma_sq = sp.var(sp.add_scalar("gamma_sq", 0.0)).first_scalar;
  }

  AffineMatrixExpr e(dim);
  auto diag_mult = [&](Group g, RowGroup rg, bool use_x22) {
    const auto& off = aoff[g];
    for (int i = 0; i < n; ++i) {
      const SupplyMatrix& x = cert(rg, i);
      const DenseMatrix& blk = use_x22 ? x.x22 : x.x11;
      if (blk.size() == 0) continue;
      e.add_scalar_term(goff[g] + off[i], goff[g] + off[i], mult(rg, i), use_x22 ? -blk : blk);
    }
  };
  if (!negative) {
    diag_mult(GU, RowGroup::U, false);
    if (present[GUb]) diag_mult(GUb, RowGroup::Ub, false);
  }
  diag_mult(GY, RowGroup::U, true);
  if (present[GYb]) diag_mult(GYb, RowGroup::Ub, true);

  for (const auto& [b, s] : specs) {
    const RowGroup rg = row_group(b);
    const Group cg = group_of(col_group(b));
    if (rg == RowGroup::Z) continue;
    const Group own = rg == RowGroup::U ? GU : GUb;
    const Group out_g = rg == RowGroup::U ? GY : GYb;
    if (!negative) place(e, goff[own], goff[cg], lin[b]);
    place(e, goff[out_g], goff[cg], cross[b], -1.0);
  }

  // Performance rows.
  if (p.has_exogenous()) {
    const SupplyMatrix& y = *p.global_spec;
    DenseMatrix zscale, y12;
    if (opt.index_mode == IndexMode::FixedY) {
      zscale = -y.x22;
      y12 = y.x12;
      e.add_constant(goff[GZ], goff[GZ], -y.x22);
      e.add_constant(goff[GW], goff[GW], y.x11);
    } else if (opt.index_mode == IndexMode::MaxPassivity) {
      zscale = DenseMatrix::Identity(l_dim, l_dim);
      y12 = 0.5 * DenseMatrix::Identity(r_dim, l_dim);
      e.add_scalar_term(goff[GZ], goff[GZ], *out.rho_bar, DenseMatrix::Identity(l_dim, l_dim));
      e.add_scalar_term(goff[GW], goff[GW], *out.nu, -DenseMatrix::Identity(r_dim, r_dim));
    } else {
      zscale = DenseMatrix::Identity(l_dim, l_dim);
      y12 = DenseMatrix::Zero(r_dim, l_dim);
      e.add_constant(goff[GZ], goff[GZ], DenseMatrix::Identity(l_dim, l_dim));
      e.add_scalar_term(goff[GW], goff[GW], *out.gamma_sq, DenseMatrix::Identity(r_dim, r_dim));
    }
    for (const auto& [b, s] : specs) {
      if (row_group(b) != RowGroup::Z) continue;
      const Group cg = group_of(col_group(b));
      const LinearMatrix& m = lin[b];
      place(e, goff[GZ], goff[cg], m, zscale, DenseMatrix::Identity(m.cols(), m.cols()));
      place(e, goff[GW], goff[cg], m, y12, DenseMatrix::Identity(m.cols(), m.cols()));
    }
  }

  // alpha-embedding terms replacing the Theta rows: alpha^2 J'ThetaJ - alpha H(J'L).
  if (negative) {
    const double a = *opt.alpha;
    for (int i = 0; i < n; ++i) {
      if (!is_positive_definite(-subs[i].certificate.x11 + 1e-12 * DenseMatrix::Identity(part[GU][i], part[GU][i]), 0.0)) {
        throw std::invalid_argument("negative-X11 path needs X11 <= 0 for every subsystem");
      }
      if (p.has_plants() &&
          !is_positive_definite(-plants[i].certificate.x11 + 1e-12 * DenseMatrix::Identity(part[GUb][i], part[GUb][i]), 0.0)) {
        throw std::invalid_argument("negative-X11 path needs X11 <= 0 for every plant");
      }
    }
    auto selected = [&](RowGroup rg) {
      std::vector<Group> sel;
      const Group own_out = rg == RowGroup::U ? GY : GYb;
      const Group own_in = rg == RowGroup::U ? GU : GUb;
      if (part[own_in] != part[own_out]) {
        throw std::invalid_argument("negative-X11 path needs input and output dims to match");
      }
      sel.push_back(own_out);
      if (rg == RowGroup::U && present[GW] && part[GW] == part[GU]) sel.push_back(GW);
      return sel;
    };
    std::vector<RowGroup> rgs = {RowGroup::U};
    if (p.has_plants()) rgs.push_back(RowGroup::Ub);
    for (RowGroup rg : rgs) {
      const auto sel = selected(rg);
      for (Group g1 : sel) {
        for (Group g2 : sel) {
          if (goff[g1] > goff[g2]) continue;
          for (int i = 0; i < n; ++i) {
            const SupplyMatrix& x = cert(rg, i);
            if (x.x11.size() == 0) continue;
            e.add_scalar_term(goff[g1] + aoff[g1][i], goff[g2] + aoff[g2][i], mult(rg, i),
                              a * a * x.x11);
          }
        }
      }
      for (const auto& [b, s] : specs) {
        if (row_group(b) != rg) continue;
        const Group cg = group_of(col_group(b));
        for (Group g : sel) place(e, goff[g], goff[cg], lin[b], -a);
      }
    }
  }

  out.main_constraint = static_cast<int>(sp.psd().size());
  sp.add_psd(std::move(e), opt.margin, "main");

  if (opt.normalize) {
    LinearConstraint c;
    for (int s : out.p) c.terms.emplace_back(s, 1.0);
    for (int s : out.pbar) c.terms.emplace_back(s, 1.0);
    c.lower = 1.0;
    sp.add_linear(std::move(c));
  }

  if (opt.index_mode == IndexMode::MaxPassivity) {
    sp.set_objective({{*out.nu, opt.c1}, {*out.rho_bar, -opt.c2}}, Sense::Maximize);
  } else if (opt.index_mode == IndexMode::MinL2Gain) {
    sp.set_objective({{*out.gamma_sq, 1.0}}, Sense::Minimize);
  }

  // Soft topology costs on the free blocks.
  std::vector<SoftTerm> soft;
  for (const auto& [b, terms] : topo.soft_terms) {
    const int v = out.vars.at(b);
    const RowGroup rg = row_group(b);
    const auto roff = offsets(p.row_partition(rg));
    const auto coff = offsets(p.col_partition(col_group(b)));
    for (const auto& [i, j, w] : terms) {
      double weight = w;
      if (opt.soft_cost_on_m && rg != RowGroup::Z) {
        const double scale = cert(rg, i).x11.norm();
        if (scale > 0) weight /= scale;
      }
      for (int r = roff[i]; r < roff[i + 1]; ++r) {
        for (int c = coff[j]; c < coff[j + 1]; ++c) {
          if (sp.scalar_info(sp.var(v).scalar(r, c)).fixed) continue;
          soft.push_back({v, r, c, weight});
        }
      }
    }
  }
  if (!soft.empty()) {
    int ts = -1;
    out.problem = add_soft_quadratic_cost(std::move(out.problem), soft, &ts);
    out.soft_cost = ts;
  }

  // Ownership: multipliers belong to their agent, a block entry to the later
  // of its row/col agents, index variables are global.
  SdpProblem& fin = out.problem;
  out.owner.assign(fin.num_scalars(), -1);
  for (int i = 0; i < n; ++i) {
    out.owner[out.p[i]] = i;
    if (!out.pbar.empty()) out.owner[out.pbar[i]] = i;
  }
  for (const auto& [b, v] : out.vars) {
    const auto roff = offsets(p.row_partition(row_group(b)));
    const auto coff = offsets(p.col_partition(col_group(b)));
    const DecisionVar& dv = fin.var(v);
    for (int r = 0; r < dv.rows; ++r) {
      for (int c = 0; c < dv.cols; ++c) {
        out.owner[dv.scalar(r, c)] = std::max(agent_of(roff, r), agent_of(coff, c));
      }
    }
  }
  out.specs = std::move(specs);
  return out;
}

InterconnectionMatrix recover_interconnection(const NSCProblem& p,
                                              const std::map<MBlock, DenseMatrix>& blocks,
                                              const std::vector<double>& mult,
                                              const std::vector<double>& mult_bar) {
  InterconnectionMatrix m = zero_interconnection(p);
  for (const auto& [b, val] : blocks) {
    if (!p.has_block(b)) throw std::invalid_argument(std::string("unexpected block ") + block_name(b));
    auto& blk = m.at(b);
    if (val.rows() != blk.data.rows() || val.cols() != blk.data.cols()) {
      throw std::invalid_argument(std::string("block ") + block_name(b) + " has wrong dims");
    }
    const RowGroup rg = row_group(b);
    if (rg == RowGroup::Z) {
      blk.data = val;
      continue;
    }
    const auto& prof = rg == RowGroup::U ? p.subsystems : p.plants;
    const auto& pm = rg == RowGroup::U ? mult : mult_bar;
    const auto roff = offsets(p.row_partition(rg));
    for (int i = 0; i < p.size(); ++i) {
      const int qi = roff[i + 1] - roff[i];
      if (qi == 0) continue;
      const DenseMatrix xi = pm.at(i) * prof[i].certificate.x11;
      Eigen::FullPivLU<DenseMatrix> lu(xi);
      if (!lu.isInvertible()) {
        throw std::runtime_error(std::string("recovery: scaled X11 of ") +
                                 (rg == RowGroup::U ? "subsystem " : "plant ") +
                                 std::to_string(i) + " is singular");
      }
      blk.data.middleRows(roff[i], qi) = lu.solve(val.middleRows(roff[i], qi));
    }
  }
  return m;
}

InterconnectionMatrix recover_from_solution(const NSCProblem& p, const NscLmi& lmi,
                                            const std::vector<double>& x) {
  std::map<MBlock, DenseMatrix> free;
  for (const auto& [b, id] : lmi.vars) {
    const DecisionVar& v = lmi.problem.var(id);
    DenseMatrix val(v.rows, v.cols);
    for (int r = 0; r < v.rows; ++r) {
      for (int c = 0; c < v.cols; ++c) val(r, c) = x.at(v.scalar(r, c));
    }
    free[b] = val;
  }
  std::vector<double> mult, mult_bar;
  for (int k : lmi.p) mult.push_back(x.at(k));
  for (int k : lmi.pbar) mult_bar.push_back(x.at(k));
  InterconnectionMatrix m = recover_interconnection(p, free, mult, mult_bar);
  for (const auto& [b, s] : lmi.specs) {
    if (s.mode == BlockMode::Fixed) m.at(b).data = s.value;
  }
  return m;
}

}  // namespace dissnet
