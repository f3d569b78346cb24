#include "dissnet/decentralized.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace dissnet {

namespace {

constexpr double kMaxCondition = 1e12;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> offsets(const std::vector<int>& part) {
  std::vector<int> off(part.size() + 1, 0);
  for (std::size_t i = 0; i < part.size(); ++i) off[i + 1] = off[i] + part[i];
  return off;
}

double condition(const DenseMatrix& s) {
  if (s.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(s, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

FactorStep local_factor_step(int i, const std::vector<DenseMatrix>& w_row,
                             const std::vector<FactorStep>& prior) {
  if (i < 0 || static_cast<int>(w_row.size()) != i + 1 || static_cast<int>(prior.size()) < i) {
    throw std::invalid_argument("local_factor_step: expected W_i1..W_ii and i prior rows");
  }
  const int ni = static_cast<int>(w_row[i].rows());
  std::vector<int> sizes(i);
  for (int j = 0; j < i; ++j) {
    sizes[j] = static_cast<int>(prior[j].diag.rows());
    if (!prior[j].pd) throw std::invalid_argument("local_factor_step: prior agent failed");
    if (w_row[j].rows() != ni || w_row[j].cols() != sizes[j]) {
      throw std::invalid_argument("local_factor_step: block W_" + std::to_string(i) + std::to_string(j) +
                                  " has wrong dims");
    }
  }
  const auto off = offsets(sizes);
  std::vector<Eigen::LLT<DenseMatrix>> inv(i);
  for (int k = 0; k < i; ++k) {
    if (condition(prior[k].diag) > kMaxCondition) {
      throw NumericalError("stored factor of agent " + std::to_string(k) + " is near-singular");
    }
    inv[k].compute(prior[k].diag);
  }
  FactorStep out;
  out.row = DenseMatrix::Zero(ni, off[i]);
  // Wt_ij = W_ij - sum_{k<j} Wt_ik Wt_kk^-1 Wt_jk'
  for (int j = 0; j < i; ++j) {
    DenseMatrix b = w_row[j];
    for (int k = 0; k < j; ++k) {
      const DenseMatrix wjk = prior[j].row.middleCols(off[k], sizes[k]);
      b -= out.row.middleCols(off[k], sizes[k]) * inv[k].solve(wjk.transpose());
    }
    out.row.middleCols(off[j], sizes[j]) = b;
  }
  DenseMatrix d = w_row[i];
  for (int k = 0; k < i; ++k) {
    const DenseMatrix wik = out.row.middleCols(off[k], sizes[k]);
    d -= wik * inv[k].solve(wik.transpose());
  }
  out.diag = sym_part(d);
  out.pd = ni == 0 || is_positive_definite(out.diag, 0.0);
  return out;
}

DenseMatrix Session::reconstruct() const {
  std::vector<int> sizes;
  for (const auto& a : agents) sizes.push_back(static_cast<int>(a.factor.diag.rows()));
  const auto off = offsets(sizes);
  const int n = off.back();
  DenseMatrix a = DenseMatrix::Zero(n, n), d = DenseMatrix::Zero(n, n);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const FactorStep& f = agents[i].factor;
    a.block(off[i], 0, sizes[i], f.row.cols()) = f.row;
    a.block(off[i], off[i], sizes[i], sizes[i]) = f.diag;
    d.block(off[i], off[i], sizes[i], sizes[i]) =
        f.diag.llt().solve(DenseMatrix::Identity(sizes[i], sizes[i]));
  }
  return a * d * a.transpose();
}

void Session::export_log(std::ostream& out) const {
  for (const auto& e : log) {
    out << "step=" << e.step << " agent=" << e.agent << " verdict=" << (e.verdict ? "pass" : "fail")
        << " senders=[";
    for (std::size_t k = 0; k < e.senders.size(); ++k) out << (k ? "," : "") << e.senders[k];
    out << "] payload=" << e.payload;
    if (!e.note.empty()) out << " note=\"" << e.note << '"';
    out << '\n';
  }
}

namespace {

// Runs the factor step of agent i on numeric row blocks and records it.
void execute_step(Session& s, int i, const std::vector<DenseMatrix>& w_row, std::string note = {}) {
  LogEntry e;
  e.step = s.steps_executed++;
  e.agent = i;
  e.note = std::move(note);
  std::vector<FactorStep> prior;
  for (int j = 0; j < i; ++j) {
    SessionMessage msg{j, i, s.agents[j].factor.row, s.agents[j].factor.diag};
    e.senders.push_back(j);
    e.payload += msg.size();
    prior.push_back(s.agents[j].factor);
    s.messages.push_back(std::move(msg));
  }
  AgentState st;
  st.index = i;
  try {
    st.factor = local_factor_step(i, w_row, prior);
  } catch (const NumericalError& err) {
    s.status = SdpStatus::NumericalFailure;
    s.failed_at = i;
    s.message = err.what();
    e.verdict = false;
    e.note = err.what();
    s.log.push_back(std::move(e));
    return;
  }
  e.verdict = st.factor.pd;
  if (!st.factor.pd) {
    s.failed_at = i;
    s.status = s.mode == SessionMode::Test ? SdpStatus::Feasible : SdpStatus::Infeasible;
    if (s.message.empty()) s.message = "agent " + std::to_string(i) + " fails the local test";
  }
  if (static_cast<int>(s.agents.size()) > i) s.agents.resize(i);
  s.agents.push_back(std::move(st));
  s.log.push_back(std::move(e));
}

std::vector<DenseMatrix> row_blocks(const DenseMatrix& w, const std::vector<int>& part, int i) {
  const auto off = offsets(part);
  std::vector<DenseMatrix> row;
  for (int j = 0; j <= i; ++j) row.push_back(w.block(off[i], off[j], part[i], part[j]));
  return row;
}

void check_symmetric(const DenseMatrix& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("network matrix must be square");
  const double tol = 1e-10 * std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("network matrix is not symmetric");
  }
}

}  // namespace

Session run_test_session(const BlockMatrix& w) {
  if (w.row_partition != w.col_partition) throw std::invalid_argument("network matrix partitions differ");
  check_symmetric(w.data);
  Session s;
  s.mode = SessionMode::Test;
  s.partition = w.row_partition;
  s.w = w.data;
  for (int i = 0; i < s.size() && s.passed(); ++i) execute_step(s, i, row_blocks(s.w, s.partition, i));
  return s;
}

// ---------------------------------------------------------------------------
// LMI-driven sessions

namespace {

struct Built {
  NscLmi lmi;
  std::vector<int> perm;      // BEW order: perm[new] = old
  std::vector<int> part;      // rows per agent
  std::vector<int> off;
  double margin = 0.0;
};

Built build(const NetworkContext& ctx) {
  Built b;
  LmiOptions lo = ctx.lmi;
  lo.normalize = false;
  NSCProblem p = ctx.problem;
  if (p.topology && p.topology->mode == TopologyMode::Soft) p.topology.reset();
  if (p.topology) p.topology->mode = TopologyMode::Hard;
  b.lmi = build_nsc_lmi(p, ctx.specs, lo);
  b.perm = bew_permutation(b.lmi.layout);
  b.part = bew_partition(b.lmi.layout);
  b.off = offsets(b.part);
  b.margin = b.lmi.problem.psd()[b.lmi.main_constraint].margin;
  return b;
}

std::vector<double> assignment(const NetworkContext& ctx, const SdpProblem& sp) {
  std::vector<double> x(sp.num_scalars(), 0.0);
  for (int s = 0; s < sp.num_scalars(); ++s) {
    const auto& info = sp.scalar_info(s);
    if (info.fixed) {
      x[s] = *info.fixed;
      continue;
    }
    auto it = ctx.values.find(sp.scalar_name(s));
    if (it != ctx.values.end()) x[s] = it->second;
  }
  return x;
}

DenseMatrix permuted(const DenseMatrix& w, const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  DenseMatrix out(n, n);
  for (int a = 0; a < n; ++a) {
    for (int c = 0; c < n; ++c) out(a, c) = w(perm[a], perm[c]);
  }
  return out;
}

bool is_multiplier(const NscLmi& lmi, int s) {
  return std::find(lmi.p.begin(), lmi.p.end(), s) != lmi.p.end() ||
         std::find(lmi.pbar.begin(), lmi.pbar.end(), s) != lmi.pbar.end();
}

// Local LMI of agent i: [[diag(Wt_jj), Wt_i'], [Wt_i, W_ii]] >= margin, with
// Wt_i = W_i (D_i A_i')^-1 affine in the agent's own decisions.
void enforce_step(Session& s, const Built& b, int i) {
  NetworkContext& ctx = *s.network;
  const SdpProblem& sp = b.lmi.problem;
  const AffineMatrixExpr& e = sp.psd()[b.lmi.main_constraint].expr;
  const int np = b.off[i];
  const int ni = b.part[i];
  std::vector<int> idx(b.perm.begin(), b.perm.begin() + b.off[i + 1]);
  const AffineMatrixExpr ei = e.principal(idx);

  std::vector<int> local;
  for (int sc : ei.referenced_scalars()) {
    if (sp.scalar_info(sc).fixed) continue;
    const int own = b.lmi.owner.at(sc);
    if (own < 0) throw std::invalid_argument("global decision " + sp.scalar_name(sc) + " cannot be decentralized");
    if (own > i) throw std::logic_error("decision " + sp.scalar_name(sc) + " leaks into an earlier agent");
    if (own == i) local.push_back(sc);
  }
  std::vector<double> x0 = assignment(ctx, sp);
  for (int sc : local) x0[sc] = 0.0;
  const DenseMatrix c0 = evaluate(ei, x0);

  // T = (D_i A_i')^-1 from the stored rows.
  DenseMatrix t = DenseMatrix::Identity(np, np);
  DenseMatrix dinv = DenseMatrix::Zero(np, np);
  if (np > 0) {
    DenseMatrix a = DenseMatrix::Zero(np, np), d = DenseMatrix::Zero(np, np);
    for (int j = 0; j < i; ++j) {
      const FactorStep& f = s.agents[j].factor;
      a.block(b.off[j], 0, b.part[j], f.row.cols()) = f.row;
      a.block(b.off[j], b.off[j], b.part[j], b.part[j]) = f.diag;
      d.block(b.off[j], b.off[j], b.part[j], b.part[j]) =
          f.diag.llt().solve(DenseMatrix::Identity(b.part[j], b.part[j]));
      dinv.block(b.off[j], b.off[j], b.part[j], b.part[j]) = f.diag;
    }
    t = (d * a.transpose()).lu().solve(DenseMatrix::Identity(np, np));
  }

  SdpProblem lp;
  AffineMatrixExpr le(np + ni);
  DenseMatrix k0 = DenseMatrix::Zero(np + ni, np + ni);
  k0.topLeftCorner(np, np) = dinv;
  k0.bottomLeftCorner(ni, np) = c0.bottomLeftCorner(ni, np) * t;
  k0.topRightCorner(np, ni) = k0.bottomLeftCorner(ni, np).transpose();
  k0.bottomRightCorner(ni, ni) = c0.bottomRightCorner(ni, ni);
  le.add_constant(0, 0, sym_part(k0));
  std::vector<int> lvar;
  for (int sc : local) {
    const auto& info = sp.scalar_info(sc);
    std::optional<double> lo = info.lower;
    if (is_multiplier(b.lmi, sc)) lo = std::max(lo.value_or(0.0), ctx.multiplier_floor);
    const int v = lp.add_scalar(sp.scalar_name(sc), lo, info.upper);
    const int ls = lp.var(v).first_scalar;
    lvar.push_back(ls);
    const DenseMatrix cs = ei.coefficient(sc);
    DenseMatrix k = DenseMatrix::Zero(np + ni, np + ni);
    k.bottomLeftCorner(ni, np) = cs.bottomLeftCorner(ni, np) * t;
    k.topRightCorner(np, ni) = k.bottomLeftCorner(ni, np).transpose();
    k.bottomRightCorner(ni, ni) = cs.bottomRightCorner(ni, ni);
    le.add_scalar_term(0, 0, ls, k);
  }
  lp.add_psd(std::move(le), b.margin, "agent " + std::to_string(i));
  const SdpSolution sol = solve(lp, ctx.solver);

  if (!sol.ok()) {
    LogEntry le_fail;
    le_fail.step = s.steps_executed++;
    le_fail.agent = i;
    le_fail.verdict = false;
    for (int j = 0; j < i; ++j) {
      le_fail.senders.push_back(j);
      le_fail.payload += s.agents[j].factor.row.size() + s.agents[j].factor.diag.size();
    }
    le_fail.note = std::string("local LMI ") + to_string(sol.status);
    s.log.push_back(std::move(le_fail));
    s.failed_at = i;
    s.status = sol.status == SdpStatus::NumericalFailure ? SdpStatus::NumericalFailure : SdpStatus::Infeasible;
    s.message = "agent " + std::to_string(i) + ": " + (sol.message.empty() ? to_string(sol.status) : sol.message);
    return;
  }
  std::map<std::string, double> decided;
  for (std::size_t k = 0; k < local.size(); ++k) {
    const std::string name = sp.scalar_name(local[k]);
    ctx.values[name] = sol.values[lvar[k]];
    decided[name] = sol.values[lvar[k]];
  }
  const DenseMatrix w = permuted(evaluate(e, assignment(ctx, sp)), b.perm);
  execute_step(s, i, row_blocks(w, b.part, i), "local margin " + std::to_string(sol.achieved_margin));
  if (static_cast<int>(s.agents.size()) == i + 1) s.agents.back().decisions = std::move(decided);
}

void run_network(Session& s, int from) {
  const Built b = build(*s.network);
  s.partition = b.part;
  if (s.mode == SessionMode::Test) {
    const DenseMatrix w = permuted(evaluate(b.lmi.problem.psd()[b.lmi.main_constraint].expr,
                                            assignment(*s.network, b.lmi.problem)),
                                   b.perm);
    s.w = w;
    for (int i = from; i < s.size() && s.passed(); ++i) execute_step(s, i, row_blocks(w, b.part, i));
    return;
  }
  for (int i = from; i < s.size() && s.passed(); ++i) enforce_step(s, b, i);
  s.w = permuted(evaluate(b.lmi.problem.psd()[b.lmi.main_constraint].expr,
                          assignment(*s.network, b.lmi.problem)),
                 b.perm);
}

void check_block_diagonal_y(const NSCProblem& p) {
  if (!p.global_spec) return;
  const SupplyMatrix& y = *p.global_spec;
  const auto woff = offsets(p.w_split);
  const auto zoff = offsets(p.z_split);
  auto check = [&](const DenseMatrix& m, const std::vector<int>& ro, const std::vector<int>& co,
                   const char* name) {
    for (int i = 0; i + 1 < static_cast<int>(ro.size()); ++i) {
      for (int j = 0; j + 1 < static_cast<int>(co.size()); ++j) {
        if (i == j) continue;
        if (!m.block(ro[i], co[j], ro[i + 1] - ro[i], co[j + 1] - co[j]).isZero(0.0)) {
          throw std::invalid_argument(std::string("Y") + name + " is not block diagonal");
        }
      }
    }
  };
  check(y.x12, woff, zoff, "12");
  check(y.x21, zoff, woff, "21");
  check(y.x22, zoff, zoff, "22");
  check(y.x11, woff, woff, "11");
}

Session start(const NSCProblem& problem, const std::map<MBlock, BlockSpec>& specs, SessionMode mode,
              const DecentralizedOptions& options) {
  const ValidationReport rep = validate(problem);
  if (!rep.ok) throw std::invalid_argument("invalid problem: " + rep.errors.front());
  if (options.lmi.index_mode != IndexMode::FixedY) {
    throw std::invalid_argument("decentralized sessions need a fixed Y");
  }
  check_block_diagonal_y(problem);
  Session s;
  s.mode = mode;
  NetworkContext ctx;
  ctx.problem = problem;
  ctx.specs = specs;
  ctx.lmi = options.lmi;
  ctx.solver = options.solver;
  ctx.multiplier_floor = std::max(options.lmi.p_min, 1.0 / std::max(1, problem.size()));
  s.network = std::move(ctx);
  return s;
}

}  // namespace

Session decentralized_general(const NSCProblem& problem, const std::map<MBlock, BlockSpec>& specs,
                              SessionMode mode, const DecentralizedOptions& options,
                              const std::vector<double>& p, const std::vector<double>& pbar) {
  Session s = start(problem, specs, mode, options);
  if (mode == SessionMode::Test) {
    for (MBlock b : kAllBlocks) {
      if (!problem.has_block(b)) continue;
      auto it = specs.find(b);
      if (it == specs.end() || it->second.mode != BlockMode::Fixed) {
        throw std::invalid_argument(std::string("test session needs block ") + block_name(b) + " fixed");
      }
    }
    if (static_cast<int>(p.size()) != problem.size() ||
        (problem.has_plants() && static_cast<int>(pbar.size()) != problem.size())) {
      throw std::invalid_argument("test session needs one multiplier per agent");
    }
    for (int i = 0; i < problem.size(); ++i) {
      s.network->values["p[" + std::to_string(i) + "]"] = p[i];
      if (problem.has_plants()) s.network->values["pbar[" + std::to_string(i) + "]"] = pbar[i];
    }
  }
  run_network(s, 0);
  return s;
}

Session decentralized_analyze_nsc1(const NSCProblem& problem, const InterconnectionMatrix& m,
                                   const DecentralizedOptions& options) {
  if (problem.variant != 1) throw std::invalid_argument("expected a variant-1 problem");
  return decentralized_general(problem, fixed_specs(problem, m), SessionMode::Enforce, options);
}

std::pair<Session, InterconnectionMatrix> decentralized_synth_nsc1(const NSCProblem& problem,
                                                                   const DecentralizedOptions& options) {
  if (problem.variant != 1) throw std::invalid_argument("expected a variant-1 problem");
  Session s = decentralized_general(problem, {}, SessionMode::Enforce, options);
  InterconnectionMatrix m = s.passed() ? session_interconnection(s) : zero_interconnection(problem);
  return {std::move(s), std::move(m)};
}

InterconnectionMatrix session_interconnection(const Session& s) {
  if (!s.network) throw std::invalid_argument("session has no network context");
  const Built b = build(*s.network);
  return recover_from_solution(s.network->problem, b.lmi, assignment(*s.network, b.lmi.problem));
}

Session add_subsystem(const Session& session, const std::vector<DenseMatrix>& w_row) {
  if (session.network) throw std::invalid_argument("LMI-driven sessions grow through SubsystemExtension");
  if (!session.passed()) throw std::invalid_argument("cannot extend a failed session");
  Session s = session;
  const int n = s.size();
  if (static_cast<int>(w_row.size()) != n + 1) throw std::invalid_argument("need W_{N+1,1..N+1}");
  const int k = static_cast<int>(w_row.back().rows());
  const int old = static_cast<int>(s.w.rows());
  DenseMatrix w = DenseMatrix::Zero(old + k, old + k);
  w.topLeftCorner(old, old) = s.w;
  const auto off = offsets(s.partition);
  for (int j = 0; j < n; ++j) {
    w.block(old, off[j], k, s.partition[j]) = w_row[j];
    w.block(off[j], old, s.partition[j], k) = w_row[j].transpose();
  }
  w.bottomRightCorner(k, k) = w_row.back();
  check_symmetric(w);
  s.w = w;
  s.partition.push_back(k);
  execute_step(s, n, w_row);
  return s;
}

namespace {

DenseMatrix grow(const DenseMatrix& a, const std::vector<double>& edge) {
  const int n = static_cast<int>(a.rows());
  if (static_cast<int>(edge.size()) != n + 1) throw std::invalid_argument("topology row must have N+1 entries");
  DenseMatrix out = DenseMatrix::Zero(n + 1, n + 1);
  out.topLeftCorner(n, n) = a;
  for (int j = 0; j <= n; ++j) {
    out(n, j) = edge[j];
    out(j, n) = edge[j];
  }
  return out;
}

}  // namespace

Session add_subsystem(const Session& session, const SubsystemExtension& ext) {
  if (!session.network) throw std::invalid_argument("session has no network context");
  if (!session.passed()) throw std::invalid_argument("cannot extend a failed session");
  Session s = session;
  NetworkContext& ctx = *s.network;
  NSCProblem& p = ctx.problem;
  const int n = p.size();
  SubsystemProfile prof = ext.profile;
  prof.id = n;
  p.subsystems.push_back(prof);
  if (p.has_plants()) {
    if (!ext.plant) throw std::invalid_argument("extension needs a plant profile");
    SubsystemProfile pl = *ext.plant;
    pl.id = n;
    p.plants.push_back(pl);
  }
  if (p.has_exogenous()) {
    p.w_split.push_back(ext.w_dim);
    p.z_split.push_back(ext.z_dim);
    if (p.global_spec) {
      // Extend Y block-diagonally with the new agent's copy of its last block.
      const int r = ext.w_dim, l = ext.z_dim;
      const int r0 = p.global_spec->x11.rows(), l0 = p.global_spec->x22.rows();
      if (r > 0 || l > 0) {
        const int ri = p.w_split[n - 1], li = p.z_split[n - 1];
        if (ri != r || li != l) throw std::invalid_argument("cannot extend Y for different port sizes");
        SupplyMatrix y = *p.global_spec;
        auto ext_block = [](const DenseMatrix& m, int a, int b, int ai, int bi) {
          DenseMatrix out = DenseMatrix::Zero(m.rows() + ai, m.cols() + bi);
          out.topLeftCorner(m.rows(), m.cols()) = m;
          out.bottomRightCorner(ai, bi) = m.block(a - ai, b - bi, ai, bi);
          return out;
        };
        y.x11 = ext_block(y.x11, r0, r0, r, r);
        y.x12 = ext_block(y.x12, r0, l0, r, l);
        y.x21 = ext_block(y.x21, l0, r0, l, r);
        y.x22 = ext_block(y.x22, l0, l0, l, l);
        p.global_spec = y;
      }
    }
  }
  if (p.topology) {
    p.topology->adjacency = grow(p.topology->adjacency, ext.adjacency);
    p.topology->cost = grow(p.topology->cost, ext.cost.empty() ? std::vector<double>(n + 1, 0.0) : ext.cost);
  }
  for (auto& [b, spec] : ctx.specs) {
    if (spec.mode != BlockMode::Fixed) continue;
    auto it = ext.fixed.find(b);
    if (it == ext.fixed.end()) throw std::invalid_argument(std::string("extension misses fixed block ") + block_name(b));
    const DenseMatrix& v = it->second;
    if (v.rows() < spec.value.rows() || v.cols() < spec.value.cols() ||
        v.topLeftCorner(spec.value.rows(), spec.value.cols()) != spec.value) {
      throw std::invalid_argument(std::string("extension changes existing entries of ") + block_name(b));
    }
    spec.value = v;
  }
  if (s.mode == SessionMode::Test) {
    if (!ext.p || (p.has_plants() && !ext.pbar)) throw std::invalid_argument("test session needs the new multipliers");
    ctx.values["p[" + std::to_string(n) + "]"] = *ext.p;
    if (p.has_plants()) ctx.values["pbar[" + std::to_string(n) + "]"] = *ext.pbar;
  }
  const ValidationReport rep = validate(p);
  if (!rep.ok) throw std::invalid_argument("invalid extension: " + rep.errors.front());
  run_network(s, n);
  return s;
}

namespace {

std::vector<int> drop_range(const std::vector<int>& part, int k) {
  std::vector<int> out = part;
  out.erase(out.begin() + k);
  return out;
}

DenseMatrix drop(const DenseMatrix& m, const std::vector<int>& rpart, const std::vector<int>& cpart, int k) {
  const auto ro = offsets(rpart);
  const auto co = offsets(cpart);
  std::vector<int> rows, cols;
  for (int r = 0; r < ro.back(); ++r) {
    if (r < ro[k] || r >= ro[k + 1]) rows.push_back(r);
  }
  for (int c = 0; c < co.back(); ++c) {
    if (c < co[k] || c >= co[k + 1]) cols.push_back(c);
  }
  DenseMatrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
  }
  return out;
}

}  // namespace

Session remove_subsystem(const Session& session, int k) {
  if (session.size() == 0) throw std::invalid_argument("cannot remove from an empty session");
  if (k < 0 || k >= session.size()) throw std::invalid_argument("agent index out of range");
  Session s = session;
  const int n = s.size();
  s.failed_at.reset();
  s.status = SdpStatus::Feasible;
  s.message.clear();
  const int keep = std::min<int>(k, static_cast<int>(s.agents.size()));
  s.agents.resize(keep);

  if (!s.network) {
    s.w = drop(s.w, s.partition, s.partition, k);
    s.partition = drop_range(s.partition, k);
    for (int i = k; i < s.size() && s.passed(); ++i) execute_step(s, i, row_blocks(s.w, s.partition, i));
    return s;
  }

  NetworkContext& ctx = *s.network;
  NSCProblem& p = ctx.problem;
  // Partitions before removal, for cutting fixed blocks.
  std::map<MBlock, std::pair<std::vector<int>, std::vector<int>>> parts;
  for (const auto& [b, spec] : ctx.specs) {
    parts[b] = {p.row_partition(row_group(b)), p.col_partition(col_group(b))};
  }
  std::optional<std::pair<std::vector<int>, std::vector<int>>> wz;
  if (p.has_exogenous()) wz = std::make_pair(p.w_split, p.z_split);

  // Decisions of surviving earlier agents keep their names; the rest go.
  const Built old = build(ctx);
  std::map<std::string, double> kept;
  for (const auto& [name, v] : ctx.values) {
    for (int sc = 0; sc < old.lmi.problem.num_scalars(); ++sc) {
      if (old.lmi.problem.scalar_name(sc) != name) continue;
      const int own = old.lmi.owner[sc];
      if (own >= 0 && own < k) kept[name] = v;
      if (s.mode == SessionMode::Test && own > k && is_multiplier(old.lmi, sc)) {
        const bool bar = name.rfind("pbar", 0) == 0;
        kept[std::string(bar ? "pbar[" : "p[") + std::to_string(own - 1) + "]"] = v;
      }
      break;
    }
  }
  ctx.values = std::move(kept);

  p.subsystems.erase(p.subsystems.begin() + k);
  for (int i = 0; i < p.size(); ++i) p.subsystems[i].id = i;
  if (p.has_plants()) {
    p.plants.erase(p.plants.begin() + k);
    for (int i = 0; i < p.size(); ++i) p.plants[i].id = i;
  }
  if (wz) {
    if (p.global_spec) {
      const auto& [ws, zs] = *wz;
      SupplyMatrix y = *p.global_spec;
      y.x11 = drop(y.x11, ws, ws, k);
      y.x12 = drop(y.x12, ws, zs, k);
      y.x21 = drop(y.x21, zs, ws, k);
      y.x22 = drop(y.x22, zs, zs, k);
      p.global_spec = y;
    }
    p.w_split.erase(p.w_split.begin() + k);
    p.z_split.erase(p.z_split.begin() + k);
  }
  if (p.topology) {
    const std::vector<int> ones(n, 1);
    p.topology->adjacency = drop(p.topology->adjacency, ones, ones, k);
    p.topology->cost = drop(p.topology->cost, ones, ones, k);
  }
  for (auto& [b, spec] : ctx.specs) {
    if (spec.mode != BlockMode::Fixed) continue;
    spec.value = drop(spec.value, parts[b].first, parts[b].second, k);
  }
  run_network(s, k);
  return s;
}

}  // namespace dissnet
