#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "dissnet/decentralized.hpp"
#include "json.hpp"

namespace dissnet::cli {

using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNegative = 2;

struct Flags {
  std::string config;
  std::string out;
  std::optional<double> margin;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::string mode;
  std::string objective;
  bool json = false;
  std::string demo_case;
};

json matrix_json(const DenseMatrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json m_json(const InterconnectionMatrix& m) {
  json out = json::object();
  for (const auto& [b, blk] : m.blocks) out[block_name(b)] = matrix_json(blk.data);
  return out;
}

json indices_json(const Indices& ix) {
  json out = json::object();
  out["nu"] = ix.nu ? json(*ix.nu) : json(nullptr);
  out["rho"] = ix.rho ? json(*ix.rho) : json(nullptr);
  out["gamma"] = ix.gamma ? json(*ix.gamma) : json(nullptr);
  return out;
}

json envelope(const std::string& command, const std::string& status) {
  json out = json::object();
  out["schema_version"] = 1;
  out["command"] = command;
  out["status"] = status;
  return out;
}

void emit(std::ostream& out, const json& j, bool compact) {
  out << (compact ? j.dump() : j.dump(2)) << "\n";
}

AnalysisOptions analysis_options(const Config& cfg) {
  AnalysisOptions o;
  o.margin = cfg.margin;
  o.p_min = cfg.p_min;
  o.p_max = cfg.p_max;
  return o;
}

SynthesisRequest synthesis_request(const Config& cfg) {
  SynthesisRequest q;
  q.problem = cfg.problem;
  q.structure = template_mask(cfg.structure, cfg.problem);
  q.fixed = cfg.fixed;
  q.objective = cfg.objective;
  q.c1 = cfg.c1;
  q.c2 = cfg.c2;
  q.margin = cfg.margin;
  q.p_min = cfg.p_min;
  q.p_max = cfg.p_max;
  q.alpha = cfg.alpha;
  return q;
}

int status_code(SdpStatus s) {
  switch (s) {
    case SdpStatus::Feasible:
    case SdpStatus::Optimal: return kOk;
    case SdpStatus::Infeasible:
    case SdpStatus::Unbounded: return kNegative;
    case SdpStatus::NumericalFailure: return kError;
  }
  return kError;
}

const InterconnectionMatrix& require_m(const Config& cfg) {
  if (!cfg.m) throw ConfigError("config has no interconnection matrix 'm'");
  return *cfg.m;
}

json analysis_json(const AnalysisResult& a) {
  json out = envelope("analyze", a.certified() ? "certified" : "not_certified");
  out["solver_status"] = to_string(a.status);
  out["p"] = a.p;
  out["pbar"] = a.pbar;
  out["margin"] = a.margin;
  if (a.alpha) out["alpha"] = *a.alpha;
  if (!a.message.empty()) out["message"] = a.message;
  return out;
}

int cmd_analyze(const Config& cfg, const Flags& f, std::ostream& out) {
  const AnalysisResult a = analyze(cfg.problem, require_m(cfg), analysis_options(cfg));
  emit(out, analysis_json(a), f.json);
  return a.certified() ? kOk : kNegative;
}

json synthesis_json(const std::string& command, const SynthesisResult& r) {
  json out = envelope(command, to_string(r.status));
  out["indices"] = indices_json(r.indices);
  out["p"] = r.p;
  out["pbar"] = r.pbar;
  out["verified"] = r.verified;
  out["margin"] = r.margin;
  if (r.alpha) out["alpha"] = *r.alpha;
  if (r.soft_cost) out["soft_cost"] = *r.soft_cost;
  if (r.ok()) out["m"] = m_json(r.m);
  if (!r.message.empty()) out["message"] = r.message;
  return out;
}

int synthesis_code(const SynthesisResult& r) {
  const int code = status_code(r.status);
  if (code == kOk && !r.verified) return kNegative;
  return code;
}

int cmd_synthesize(const Config& cfg, const Flags& f, std::ostream& out) {
  const SynthesisResult r = synthesize(synthesis_request(cfg));
  emit(out, synthesis_json("synthesize", r), f.json);
  return synthesis_code(r);
}

int cmd_estimate(const Config& cfg, const Flags& f, std::ostream& out) {
  IndexMode mode;
  if (cfg.objective == Objective::MaxPassivity) mode = IndexMode::MaxPassivity;
  else if (cfg.objective == Objective::MinL2Gain) mode = IndexMode::MinL2Gain;
  else throw ConfigError("estimate needs --objective max-passivity or min-l2gain");
  const IndexEstimate e =
      estimate_indices(cfg.problem, require_m(cfg), mode, cfg.c1, cfg.c2, analysis_options(cfg));
  json j = envelope("estimate", to_string(e.analysis.status));
  j["indices"] = indices_json(e.indices);
  j["p"] = e.analysis.p;
  j["pbar"] = e.analysis.pbar;
  j["certified"] = e.analysis.certified();
  if (!e.analysis.message.empty()) j["message"] = e.analysis.message;
  emit(out, j, f.json);
  if (e.analysis.status == SdpStatus::NumericalFailure) return kError;
  return e.analysis.certified() ? kOk : kNegative;
}

json session_json(const Session& s) {
  json steps = json::array();
  for (const LogEntry& e : s.log) {
    json st = json::object();
    st["step"] = e.step;
    st["agent"] = e.agent;
    st["verdict"] = e.verdict;
    st["senders"] = e.senders;
    st["payload"] = e.payload;
    if (!e.note.empty()) st["note"] = e.note;
    steps.push_back(st);
  }
  json out = json::object();
  out["steps"] = steps;
  out["steps_executed"] = s.steps_executed;
  out["agents"] = s.size();
  if (s.failed_at) out["failed_at"] = *s.failed_at;
  return out;
}

int cmd_decentralized(const Config& cfg, const Flags& f, std::ostream& out) {
  DecentralizedOptions opts;
  opts.lmi.margin = cfg.margin;
  opts.lmi.p_min = cfg.p_min;
  opts.lmi.p_max = cfg.p_max;
  Session s;
  std::optional<InterconnectionMatrix> m;
  if (cfg.m && cfg.problem.variant == 1) {
    s = decentralized_analyze_nsc1(cfg.problem, *cfg.m, opts);
    m = cfg.m;
  } else if (cfg.m) {
    std::map<MBlock, BlockSpec> specs;
    for (const auto& [b, blk] : cfg.m->blocks) specs[b] = {BlockMode::Fixed, blk.data};
    s = decentralized_general(cfg.problem, specs, SessionMode::Enforce, opts);
    m = cfg.m;
  } else if (cfg.problem.variant == 1 && cfg.fixed.empty() && cfg.structure == "custom") {
    auto [sess, mm] = decentralized_synth_nsc1(cfg.problem, opts);
    s = std::move(sess);
    if (s.passed()) m = mm;
  } else {
    s = decentralized_general(cfg.problem, request_specs(synthesis_request(cfg)),
                              SessionMode::Enforce, opts);
    if (s.passed()) m = session_interconnection(s);
  }
  json j = envelope("decentralized", s.passed() ? "certified" : "not_certified");
  j["session"] = session_json(s);
  if (!s.message.empty()) j["message"] = s.message;
  bool verified = false;
  if (s.passed() && m) {
    verified = analyze(cfg.problem, *m, analysis_options(cfg)).certified();
    if (!cfg.m) j["m"] = m_json(*m);
  }
  j["verified"] = verified;
  emit(out, j, f.json);
  if (s.status == SdpStatus::NumericalFailure) return kError;
  return s.passed() ? kOk : kNegative;
}

ClosedLoop configured_loop(const Config& cfg, const InterconnectionMatrix& m) {
  if (!cfg.sim) throw ConfigError("config has no 'sim' section");
  const SimConfig& sim = *cfg.sim;
  ClosedLoop loop = make_closed_loop(cfg.problem, m, sim.controllers, sim.plants);
  loop.dt = sim.dt;
  loop.horizon = sim.horizon;
  loop.excitation = sim.excitation;
  loop.k_sys = sim.k_sys;
  return loop;
}

void write_trace(const TimeSeries& ts, const std::string& path) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  ts.write_csv(f);
}

std::vector<std::string> decay_ports(const NSCProblem& p) {
  std::vector<std::string> ports = {"y"};
  if (p.has_plants()) ports.push_back("ybar");
  if (p.has_exogenous()) ports.push_back("z");
  return ports;
}

int cmd_simulate(const Config& cfg, const Flags& f, std::ostream& out) {
  const TimeSeries ts = simulate(configured_loop(cfg, require_m(cfg)));
  write_trace(ts, f.out);
  const DecayReport d = decay_metric(ts, decay_ports(cfg.problem));
  const std::string status = ts.diverged ? "diverged" : (d.decayed ? "decayed" : "not_decayed");
  json j = envelope("simulate", status);
  j["decay_ratio"] = d.ratio;
  j["diverged"] = ts.diverged;
  j["steps"] = ts.steps();
  emit(out, j, f.json);
  return d.decayed && !ts.diverged ? kOk : kNegative;
}

// ---------------------------------------------------------------- demos

struct DemoReport {
  json j = json::object();
  std::vector<std::string> lines;
  int code = kOk;

  void line(const std::string& s) { lines.push_back(s); }
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

DemoReport demo_nsc1(TopologyMode mode) {
  const StudyCatalog st = builtin_study();
  DemoReport rep;
  SynthesisRequest q;
  q.problem = study_problem(st, 1, mode);
  if (mode != TopologyMode::Hard) q.objective = Objective::SoftTopologyCost;
  const SynthesisResult r = synthesize(q);
  rep.j = synthesis_json("demo", r);
  rep.line("nsc1 synthesis: " + std::string(to_string(r.status)));
  if (!r.ok()) {
    rep.code = synthesis_code(r);
    return rep;
  }
  const AnalysisResult a = analyze_nsc1(q.problem, r.m);
  const bool topo = respects_topology(q.problem, r.m);
  const TimeSeries ts = simulate(make_closed_loop(q.problem, r.m, st.controllers));
  const DecayReport d = decay_metric(ts, {"y"});
  rep.j["verified"] = a.certified();
  rep.j["respects_topology"] = topo;
  rep.j["decay_ratio"] = d.ratio;
  rep.j["diverged"] = ts.diverged;
  rep.line("re-verified by analysis: " + std::string(a.certified() ? "yes" : "no"));
  rep.line("respects topology: " + std::string(topo ? "yes" : "no"));
  rep.line("decay ratio: " + fmt(d.ratio) + (d.decayed ? " (decayed)" : " (not decayed)"));
  rep.code = a.certified() && d.decayed ? kOk : kNegative;
  return rep;
}

DemoReport demo_nsc2() {
  const StudyCatalog st = builtin_study();
  DemoReport rep;
  SynthesisRequest q;
  q.problem = study_problem(st, 2);
  q.objective = Objective::MaxPassivity;
  const int n = q.problem.size();
  q.fixed[MBlock::UW] = DenseMatrix::Identity(n, n);
  q.fixed[MBlock::ZY] = DenseMatrix::Identity(n, n);
  const SynthesisResult r = synth_optimal(q);
  rep.j = synthesis_json("demo", r);
  rep.line("nsc2 max-passivity synthesis (M_uw = M_zy = I): " + std::string(to_string(r.status)));
  if (!r.ok() || !r.indices.rho) {
    rep.code = r.ok() ? kNegative : synthesis_code(r);
    return rep;
  }
  const double rho = *r.indices.rho;
  rep.line("nu* = " + fmt(r.indices.nu.value_or(NAN)) + ", rho* = " + fmt(rho));
  rep.line("re-verified by analysis: " + std::string(r.verified ? "yes" : "no"));
  const ClosedLoop loop = make_closed_loop(q.problem, r.m, st.controllers);
  json fb = json::array();
  bool stable_ok = false, unstable_ok = false;
  for (double k : {-rho + 1.0, -rho - 1.0}) {
    const TimeSeries ts = feedback_gain_demo(loop, k);
    const DecayReport d = decay_metric(ts, {"z"});
    json e = json::object();
    e["k_sys"] = k;
    e["diverged"] = ts.diverged;
    e["decay_ratio"] = d.ratio;
    fb.push_back(e);
    rep.line("K_sys = " + fmt(k) + ": " +
             (ts.diverged ? std::string("diverged") : "decay ratio " + fmt(d.ratio)));
    if (k > -rho) stable_ok = d.decayed && !ts.diverged;
    else unstable_ok = ts.diverged;
  }
  rep.j["feedback"] = fb;
  rep.code = r.verified && stable_ok && unstable_ok ? kOk : kNegative;
  return rep;
}

DemoReport demo_nsc3() {
  const StudyCatalog st = builtin_study();
  DemoReport rep;
  SynthesisRequest q;
  q.problem = study_problem(st, 3);
  const SynthesisResult r = synthesize(q);
  rep.j = synthesis_json("demo", r);
  rep.line("nsc3 synthesis: " + std::string(to_string(r.status)));
  if (!r.ok()) {
    rep.code = synthesis_code(r);
    return rep;
  }
  const AnalysisResult a = analyze_nsc3(q.problem, r.m);
  const TimeSeries ts = simulate(make_closed_loop(q.problem, r.m, st.controllers, st.plants));
  const DecayReport d = decay_metric(ts, {"y", "ybar"});
  rep.j["verified"] = a.certified();
  rep.j["decay_ratio"] = d.ratio;
  rep.j["diverged"] = ts.diverged;
  rep.line("re-verified by analysis: " + std::string(a.certified() ? "yes" : "no"));
  rep.line("decay ratio (y, ybar): " + fmt(d.ratio) + (d.decayed ? " (decayed)" : " (not decayed)"));
  rep.code = a.certified() && d.decayed ? kOk : kNegative;
  return rep;
}

DemoReport demo_nsc4() {
  const StudyCatalog st = builtin_study();
  DemoReport rep;
  SynthesisRequest q;
  q.problem = study_problem(st, 4);
  q.structure = template_mask("approximate_simulation", q.problem);
  q.objective = Objective::MinL2Gain;
  const SynthesisResult r = synth_optimal(q);
  rep.j = synthesis_json("demo", r);
  rep.line("nsc4 min-L2-gain synthesis (approximate_simulation): " + std::string(to_string(r.status)));
  if (!r.ok() || !r.indices.gamma) {
    rep.code = r.ok() ? kNegative : synthesis_code(r);
    return rep;
  }
  const IndexEstimate e = estimate_indices(q.problem, r.m, IndexMode::MinL2Gain);
  const double g = *r.indices.gamma;
  const double ge = e.indices.gamma.value_or(NAN);
  rep.j["estimated_gamma"] = e.indices.gamma ? json(ge) : json(nullptr);
  rep.line("achieved gamma: " + fmt(g));
  rep.line("re-verified gamma (fixed M): " + fmt(ge));
  rep.code = r.verified && e.analysis.certified() ? kOk : kNegative;
  return rep;
}

int cmd_demo(const Flags& f, std::ostream& out) {
  DemoReport rep;
  if (f.demo_case == "nsc1") {
    rep = demo_nsc1(f.mode.empty() ? TopologyMode::Hard : parse_topology_mode(f.mode));
  } else if (f.demo_case == "nsc2") {
    rep = demo_nsc2();
  } else if (f.demo_case == "nsc3") {
    rep = demo_nsc3();
  } else {
    rep = demo_nsc4();
  }
  if (f.json) {
    emit(out, rep.j, true);
  } else {
    for (const auto& l : rep.lines) out << l << "\n";
  }
  return rep.code;
}

Config load_with_overrides(const Flags& f) {
  if (f.config.empty()) throw ConfigError("--config is required");
  Config cfg = load_config(f.config);
  if (f.margin) cfg.margin = *f.margin;
  if (!f.objective.empty()) cfg.objective = parse_objective(f.objective);
  if (!f.mode.empty()) {
    if (!cfg.problem.topology) throw ConfigError("--mode needs a topology in the config");
    cfg.problem.topology->mode = parse_topology_mode(f.mode);
  }
  if (cfg.sim) {
    if (f.dt) cfg.sim->dt = *f.dt;
    if (f.horizon) cfg.sim->horizon = *f.horizon;
  }
  return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dissipativity-based analysis and synthesis of networked systems"};
  app.require_subcommand(1);
  Flags f;
  const std::vector<std::string> modes = {"hard", "soft", "both"};
  const std::vector<std::string> objectives = {"feasible", "max-passivity", "min-l2gain",
                                               "soft-topology-cost"};

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", f.config, "JSON config path");
    if (needs_config) c->required();
    sub->add_option("--margin", f.margin, "LMI margin");
    sub->add_option("--mode,--topology", f.mode, "topology constraint mode")
        ->check(CLI::IsMember(modes));
    sub->add_option("--objective", f.objective, "synthesis objective")
        ->check(CLI::IsMember(objectives));
    sub->add_flag("--json", f.json, "compact single-line JSON");
  };
  auto* analyze_cmd = app.add_subcommand("analyze", "certify a fixed interconnection");
  auto* synth_cmd = app.add_subcommand("synthesize", "synthesize an interconnection");
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate passivity or L2-gain indices");
  auto* dec_cmd = app.add_subcommand("decentralized", "agent-wise sequential session");
  auto* sim_cmd = app.add_subcommand("simulate", "time-domain closed-loop simulation");
  auto* demo_cmd = app.add_subcommand("demo", "built-in study cases");
  for (auto* s : {analyze_cmd, synth_cmd, estimate_cmd, dec_cmd, sim_cmd}) common(s, true);
  common(demo_cmd, false);
  for (auto* s : {sim_cmd, demo_cmd}) {
    s->add_option("--dt", f.dt, "integration step");
    s->add_option("--horizon", f.horizon, "simulation horizon");
    s->add_option("--out", f.out, "CSV trace path");
  }
  demo_cmd->add_option("case", f.demo_case, "nsc1 | nsc2 | nsc3 | nsc4")
      ->required()
      ->check(CLI::IsMember({"nsc1", "nsc2", "nsc3", "nsc4"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kError;
  }

  try {
    if (demo_cmd->parsed()) return cmd_demo(f, out);
    const Config cfg = load_with_overrides(f);
    if (analyze_cmd->parsed()) return cmd_analyze(cfg, f, out);
    if (synth_cmd->parsed()) return cmd_synthesize(cfg, f, out);
    if (estimate_cmd->parsed()) return cmd_estimate(cfg, f, out);
    if (dec_cmd->parsed()) return cmd_decentralized(cfg, f, out);
    return cmd_simulate(cfg, f, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
}

}  // namespace dissnet::cli
