#include "dissnet/synthesis.hpp"

#include <cmath>
#include <stdexcept>

namespace dissnet {

const char* to_string(Objective o) {
  switch (o) {
    case Objective::Feasible: return "feasible";
    case Objective::MaxPassivity: return "max-passivity";
    case Objective::MinL2Gain: return "min-l2gain";
    case Objective::SoftTopologyCost: return "soft-topology-cost";
  }
  return "?";
}

std::map<MBlock, BlockSpec> request_specs(const SynthesisRequest& req) {
  const NSCProblem& p = req.problem;
  const InterconnectionMatrix zero = zero_interconnection(p);
  std::map<MBlock, BlockSpec> specs;
  for (const auto& [b, kind] : req.structure.fixed) {
    if (!p.has_block(b) || kind == FixedKind::Free) continue;
    const DenseMatrix& z = zero.at(b).data;
    specs[b] = {BlockMode::Fixed, fixed_value(kind, int(z.rows()), int(z.cols()))};
  }
  for (const auto& [b, v] : req.fixed) {
    if (!p.has_block(b)) throw std::invalid_argument(std::string("block ") + block_name(b) + " not in variant");
    specs[b] = {BlockMode::Fixed, v};
  }
  return specs;
}

namespace {

enum class X11Sign { Positive, NonPositive, Mixed };

X11Sign x11_sign(const NSCProblem& p) {
  bool pos = true, neg = true;
  auto scan = [&](const std::vector<SubsystemProfile>& v) {
    for (const auto& s : v) {
      if (s.certificate.x11.size() == 0) continue;
      if (!is_positive_definite(s.certificate.x11, 0.0)) pos = false;
      if (max_eigenvalue(s.certificate.x11) > 1e-12) neg = false;
    }
  };
  scan(p.subsystems);
  if (p.has_plants()) scan(p.plants);
  if (pos) return X11Sign::Positive;
  if (neg) return X11Sign::NonPositive;
  return X11Sign::Mixed;
}

IndexMode index_mode(Objective o) {
  switch (o) {
    case Objective::MaxPassivity: return IndexMode::MaxPassivity;
    case Objective::MinL2Gain: return IndexMode::MinL2Gain;
    default: return IndexMode::FixedY;
  }
}

SynthesisResult solve_once(const SynthesisRequest& req, const std::map<MBlock, BlockSpec>& specs,
                           std::optional<double> alpha) {
  const NSCProblem& p = req.problem;
  NSCProblem work = p;
  const IndexMode mode = index_mode(req.objective);
  if (mode != IndexMode::FixedY && !work.global_spec) {
    int r = 0, l = 0;
    for (int v : p.w_split) r += v;
    for (int v : p.z_split) l += v;
    work.global_spec = supply_from_kind(L2Gain{1.0}, r, l);
  }
  if (req.objective == Objective::SoftTopologyCost && !(p.topology && p.topology->soft())) {
    throw std::invalid_argument("soft-topology objective needs a soft or both topology");
  }
  LmiOptions lo;
  lo.margin = req.margin;
  lo.p_min = req.p_min;
  lo.p_max = req.p_max;
  lo.index_mode = mode;
  lo.c1 = req.c1;
  lo.c2 = req.c2;
  lo.nonnegative_nu = req.nonnegative_nu;
  lo.alpha = alpha;
  lo.soft_cost_on_m = req.soft_cost_on_m;
  const NscLmi lmi = build_nsc_lmi(work, specs, lo);
  const SdpSolution s = solve(lmi.problem, req.solver);

  SynthesisResult r;
  r.status = s.status;
  r.message = s.message;
  r.alpha = alpha;
  r.margin = s.achieved_margin;
  r.solve_margin = lmi.problem.psd()[lmi.main_constraint].margin;
  if (s.values.empty() || !(s.ok() || s.status == SdpStatus::Unbounded)) return r;
  for (int k : lmi.p) r.p.push_back(s.values[k]);
  for (int k : lmi.pbar) r.pbar.push_back(s.values[k]);
  if (lmi.nu) r.indices.nu = s.values[*lmi.nu];
  if (lmi.rho_bar && s.values[*lmi.rho_bar] > 0) r.indices.rho = 1.0 / s.values[*lmi.rho_bar];
  if (lmi.gamma_sq) r.indices.gamma = std::sqrt(std::max(0.0, s.values[*lmi.gamma_sq]));
  if (lmi.soft_cost) r.soft_cost = s.values[*lmi.soft_cost];
  try {
    r.m = recover_from_solution(work, lmi, s.values);
  } catch (const std::runtime_error& e) {
    r.status = SdpStatus::NumericalFailure;
    r.message = e.what();
    return r;
  }
  if (!r.ok()) return r;

  AnalysisOptions ao;
  ao.margin = r.solve_margin;
  ao.p_min = req.p_min;
  ao.p_max = req.p_max;
  ao.solver = req.solver;
  if (mode == IndexMode::FixedY) {
    r.verified = analyze(p, r.m, ao).certified();
  } else {
    r.verified = estimate_indices(work, r.m, mode, req.c1, req.c2, ao).analysis.certified();
  }
  return r;
}

SynthesisResult alpha_search(const SynthesisRequest& req, const std::map<MBlock, BlockSpec>& specs) {
  if (req.alpha) return solve_once(req, specs, req.alpha);
  SynthesisResult last;
  last.status = SdpStatus::Infeasible;
  last.message = "no alpha on the grid is feasible";
  for (double a : alpha_grid(1.0)) {
    SynthesisResult r = solve_once(req, specs, a);
    if (r.ok()) return r;
    if (r.status == SdpStatus::NumericalFailure) last.message = r.message;
  }
  return last;
}

// Every block fixed: nothing to recover, so the raw form decides directly.
SynthesisResult fully_fixed(const SynthesisRequest& req, const std::map<MBlock, BlockSpec>& specs) {
  const NSCProblem& p = req.problem;
  std::map<MBlock, DenseMatrix> blocks;
  for (const auto& [b, s] : specs) blocks[b] = s.value;
  AnalysisOptions ao;
  ao.margin = req.margin;
  ao.p_min = req.p_min;
  ao.p_max = req.p_max;
  ao.solver = req.solver;
  SynthesisResult r;
  r.m = make_interconnection(p, blocks);
  const IndexMode mode = index_mode(req.objective);
  const AnalysisResult a = mode == IndexMode::FixedY
                               ? analyze(p, r.m, ao)
                               : [&] {
                                   const IndexEstimate e = estimate_indices(p, r.m, mode, req.c1, req.c2, ao);
                                   r.indices = e.indices;
                                   return e.analysis;
                                 }();
  r.status = a.certified() ? SdpStatus::Feasible : SdpStatus::Infeasible;
  if (a.status == SdpStatus::NumericalFailure) r.status = a.status;
  r.p = a.p;
  r.pbar = a.pbar;
  r.margin = a.margin;
  r.alpha = a.alpha;
  r.verified = a.certified();
  r.message = "all blocks fixed; " + a.message;
  return r;
}

bool all_blocks_fixed(const NSCProblem& p, const std::map<MBlock, BlockSpec>& specs) {
  for (MBlock b : kAllBlocks) {
    if (p.has_block(b) && !specs.contains(b)) return false;
  }
  return true;
}

SynthesisResult check_variant(int v, const SynthesisRequest& req) {
  if (req.problem.variant != v) {
    throw std::invalid_argument("expected a variant-" + std::to_string(v) + " problem");
  }
  return synthesize(req);
}

}  // namespace

SynthesisResult synthesize(const SynthesisRequest& req) {
  const NSCProblem& p = req.problem;
  const ValidationReport rep = validate(p);
  if (!rep.ok) throw std::invalid_argument("invalid problem: " + rep.errors.front());
  if (index_mode(req.objective) != IndexMode::FixedY && !p.has_exogenous()) {
    throw std::invalid_argument(std::string(to_string(req.objective)) + " needs variant 2 or 4");
  }
  const auto specs = request_specs(req);
  const X11Sign sign = x11_sign(p);
  if (sign != X11Sign::Positive && all_blocks_fixed(p, specs)) return fully_fixed(req, specs);
  switch (sign) {
    case X11Sign::Positive:
      return solve_once(req, specs, std::nullopt);
    case X11Sign::NonPositive:
      return alpha_search(req, specs);
    case X11Sign::Mixed:
      break;
  }
  throw std::invalid_argument(
      "X11 certificates of mixed sign; shift the non-positive ones (shift_ifp) first");
}

SynthesisResult synth_nsc1(const SynthesisRequest& r) { return check_variant(1, r); }
SynthesisResult synth_nsc2(const SynthesisRequest& r) { return check_variant(2, r); }
SynthesisResult synth_nsc3(const SynthesisRequest& r) { return check_variant(3, r); }
SynthesisResult synth_nsc4(const SynthesisRequest& r) { return check_variant(4, r); }

SynthesisResult synth_optimal(const SynthesisRequest& r) {
  if (r.objective != Objective::MaxPassivity && r.objective != Objective::MinL2Gain) {
    throw std::invalid_argument("synth_optimal needs an index objective");
  }
  return synthesize(r);
}

SynthesisResult synth_negative_x11(const SynthesisRequest& r) {
  const ValidationReport rep = validate(r.problem);
  if (!rep.ok) throw std::invalid_argument("invalid problem: " + rep.errors.front());
  if (x11_sign(r.problem) != X11Sign::NonPositive) {
    throw std::invalid_argument("synth_negative_x11 needs X11 <= 0 for every subsystem");
  }
  return alpha_search(r, request_specs(r));
}

}  // namespace dissnet
