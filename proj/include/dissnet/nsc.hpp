#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dissnet/dissipativity.hpp"

namespace dissnet {

/// Blocks of the interconnection matrix. Rows: u, ubar, z; cols: y, ybar, w.
enum class MBlock { UY, UYb, UW, UbY, UbYb, UbW, ZY, ZYb, ZW };
inline constexpr std::array<MBlock, 9> kAllBlocks = {MBlock::UY,  MBlock::UYb, MBlock::UW,
                                                     MBlock::UbY, MBlock::UbYb, MBlock::UbW,
                                                     MBlock::ZY,  MBlock::ZYb, MBlock::ZW};

enum class RowGroup { U, Ub, Z };
enum class ColGroup { Y, Yb, W };

const char* block_name(MBlock b);
std::optional<MBlock> block_from_name(const std::string& name);
RowGroup row_group(MBlock b);
ColGroup col_group(MBlock b);
bool input_side(MBlock b);  // rows u or ubar

enum class TopologyMode { Hard, Soft, Both };

struct Topology {
  DenseMatrix adjacency;  // N x N, 0/1, symmetric; diagonal ignored
  DenseMatrix cost;       // N x N, non-negative
  TopologyMode mode = TopologyMode::Hard;

  bool hard() const { return mode != TopologyMode::Soft; }
  bool soft() const { return mode != TopologyMode::Hard; }
};

struct NSCProblem {
  int variant = 1;
  std::vector<SubsystemProfile> subsystems;
  std::vector<SubsystemProfile> plants;
  std::optional<SupplyMatrix> global_spec;  // Y, variants 2 and 4
  std::vector<int> w_split;                 // per subsystem, sums to r
  std::vector<int> z_split;                 // per subsystem, sums to l
  std::optional<Topology> topology;

  int size() const { return static_cast<int>(subsystems.size()); }
  bool has_plants() const { return variant == 3 || variant == 4; }
  bool has_exogenous() const { return variant == 2 || variant == 4; }
  bool has_block(MBlock b) const;
  std::vector<int> row_partition(RowGroup g) const;
  std::vector<int> col_partition(ColGroup g) const;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> errors;
  AssumptionReport assumption1;
  AssumptionReport assumption1_plants;
  AssumptionReport assumption2;
};

ValidationReport validate(const NSCProblem& problem);

/// Interconnection matrix as named blocks over the port partitions.
struct InterconnectionMatrix {
  int variant = 1;
  std::map<MBlock, BlockMatrix> blocks;

  bool has(MBlock b) const { return blocks.count(b) > 0; }
  const BlockMatrix& at(MBlock b) const { return blocks.at(b); }
  BlockMatrix& at(MBlock b) { return blocks.at(b); }
};

/// Zero interconnection with the block layout of the problem.
InterconnectionMatrix zero_interconnection(const NSCProblem& problem);
InterconnectionMatrix make_interconnection(const NSCProblem& problem,
                                           const std::map<MBlock, DenseMatrix>& values);
/// Full stacked matrix [[M_uy M_uyb M_uw]; [M_uby ...]; [M_zy ...]].
DenseMatrix stacked(const NSCProblem& problem, const InterconnectionMatrix& m);

enum class FixedKind { Free, Zero, Identity, NegIdentity };

struct StructureTemplate {
  std::string name;
  std::map<MBlock, FixedKind> fixed;  // blocks absent from the map are Free
};

/// Standard configuration templates (variant 4): series, parallel, feedback,
/// feedback_reconfiguration, approximate_simulation; "custom" = all free.
StructureTemplate template_mask(const std::string& name, const NSCProblem& problem);
DenseMatrix fixed_value(FixedKind kind, int rows, int cols);

struct TopologyFixes {
  // per block: (i, j) subsystem block pairs forced to zero
  std::map<MBlock, std::vector<std::pair<int, int>>> zero_blocks;
  // per block: (i, j, weight) soft penalties
  std::map<MBlock, std::vector<std::tuple<int, int, double>>> soft_terms;
};

TopologyFixes apply_topology(const NSCProblem& problem, const std::vector<MBlock>& free_blocks);

/// True if every block (i, j), i != j, with no edge is exactly zero.
bool respects_topology(const NSCProblem& problem, const InterconnectionMatrix& m);

}  // namespace dissnet
