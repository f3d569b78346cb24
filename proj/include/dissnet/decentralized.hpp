#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dissnet/nsc_lmi.hpp"

namespace dissnet {

enum class SessionMode { Test, Enforce };

/// Factor row of one agent: row = [Wt_i1 .. Wt_i,i-1], diag = Wt_ii.
struct FactorStep {
  DenseMatrix row;
  DenseMatrix diag;
  bool pd = false;
};

/// One sequential factorization step. w_row holds W_i1 .. W_ii (the last
/// block is the diagonal); prior holds the stored steps of agents 0 .. i-1.
FactorStep local_factor_step(int i, const std::vector<DenseMatrix>& w_row,
                             const std::vector<FactorStep>& prior);

struct SessionMessage {
  int from = 0;
  int to = 0;
  DenseMatrix row;   // sender's stored factor row
  DenseMatrix diag;  // sender's stored diagonal factor

  std::size_t size() const { return static_cast<std::size_t>(row.size() + diag.size()); }
};

struct AgentState {
  int index = 0;
  FactorStep factor;
  std::map<std::string, double> decisions;  // local decision values by scalar name
};

struct LogEntry {
  int step = 0;
  int agent = 0;
  bool verdict = false;
  std::vector<int> senders;
  std::size_t payload = 0;  // doubles received
  std::string note;
};

/// LMI-driven sessions keep what is needed to rebuild agent rows.
struct NetworkContext {
  NSCProblem problem;
  std::map<MBlock, BlockSpec> specs;
  LmiOptions lmi;
  SolveOptions solver;
  double multiplier_floor = 0.0;  // local lower bound on p_i, pbar_i
  std::map<std::string, double> values;  // all decided scalars by name
};

struct Session {
  SessionMode mode = SessionMode::Test;
  std::vector<int> partition;  // per-agent row count of the (BEW) network matrix
  std::vector<AgentState> agents;
  std::vector<SessionMessage> messages;
  std::vector<LogEntry> log;
  int steps_executed = 0;
  SdpStatus status = SdpStatus::Feasible;
  std::optional<int> failed_at;
  std::string message;
  DenseMatrix w;  // numeric network matrix for plain Test sessions
  std::optional<NetworkContext> network;

  bool passed() const { return !failed_at && status != SdpStatus::NumericalFailure; }
  int size() const { return static_cast<int>(partition.size()); }
  /// A D A' from the stored rows (valid after a passing session).
  DenseMatrix reconstruct() const;
  /// One line per log entry: step, agent, verdict, senders, payload size.
  void export_log(std::ostream& out) const;
};

Session run_test_session(const BlockMatrix& w);

struct DecentralizedOptions {
  LmiOptions lmi;
  SolveOptions solver;
};

/// Agent-wise search for p_i with M fixed, earlier agents frozen.
Session decentralized_analyze_nsc1(const NSCProblem& problem, const InterconnectionMatrix& m,
                                   const DecentralizedOptions& options = {});

/// Agent-wise synthesis of M_uy; the matrix is assembled from all agents.
std::pair<Session, InterconnectionMatrix> decentralized_synth_nsc1(
    const NSCProblem& problem, const DecentralizedOptions& options = {});

/// Any variant: the embedded LMI is regrouped per agent (BEW) and run as a
/// session. Test mode needs every block fixed and the multipliers given.
Session decentralized_general(const NSCProblem& problem, const std::map<MBlock, BlockSpec>& specs,
                              SessionMode mode, const DecentralizedOptions& options = {},
                              const std::vector<double>& p = {},
                              const std::vector<double>& pbar = {});

/// Interconnection assembled from the decisions of an LMI-driven session.
InterconnectionMatrix session_interconnection(const Session& session);

/// Data that extends an LMI-driven session by one subsystem.
struct SubsystemExtension {
  SubsystemProfile profile;
  std::optional<SubsystemProfile> plant;
  int w_dim = 0;
  int z_dim = 0;
  std::vector<double> adjacency;  // new row/column of the topology (length N+1)
  std::vector<double> cost;
  std::map<MBlock, DenseMatrix> fixed;  // full new values of the fixed blocks
  std::optional<double> p;              // Test mode multipliers of the new agent
  std::optional<double> pbar;
};

/// Appends one agent and runs only its step.
Session add_subsystem(const Session& session, const std::vector<DenseMatrix>& w_row);
Session add_subsystem(const Session& session, const SubsystemExtension& ext);
/// Drops agent k; agents before k are kept verbatim, later ones are re-run.
Session remove_subsystem(const Session& session, int k);

}  // namespace dissnet
