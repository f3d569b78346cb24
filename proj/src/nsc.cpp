#include "dissnet/nsc.hpp"

#include <numeric>
#include <stdexcept>

namespace dissnet {

const char* block_name(MBlock b) {
  switch (b) {
    case MBlock::UY: return "uy";
    case MBlock::UYb: return "uybar";
    case MBlock::UW: return "uw";
    case MBlock::UbY: return "ubary";
    case MBlock::UbYb: return "ubarybar";
    case MBlock::UbW: return "ubarw";
    case MBlock::ZY: return "zy";
    case MBlock::ZYb: return "zybar";
    case MBlock::ZW: return "zw";
  }
  return "?";
}

std::optional<MBlock> block_from_name(const std::string& name) {
  for (MBlock b : kAllBlocks) {
    if (name == block_name(b)) return b;
  }
  return std::nullopt;
}

RowGroup row_group(MBlock b) {
  switch (b) {
    case MBlock::UY:
    case MBlock::UYb:
    case MBlock::UW: return RowGroup::U;
    case MBlock::UbY:
    case MBlock::UbYb:
    case MBlock::UbW: return RowGroup::Ub;
    default: return RowGroup::Z;
  }
}

ColGroup col_group(MBlock b) {
  switch (b) {
    case MBlock::UY:
    case MBlock::UbY:
    case MBlock::ZY: return ColGroup::Y;
    case MBlock::UYb:
    case MBlock::UbYb:
    case MBlock::ZYb: return ColGroup::Yb;
    default: return ColGroup::W;
  }
}

bool input_side(MBlock b) { return row_group(b) != RowGroup::Z; }

bool NSCProblem::has_block(MBlock b) const {
  const RowGroup r = row_group(b);
  const ColGroup c = col_group(b);
  if ((r == RowGroup::Ub || c == ColGroup::Yb) && !has_plants()) return false;
  if ((r == RowGroup::Z || c == ColGroup::W) && !has_exogenous()) return false;
  return true;
}

std::vector<int> NSCProblem::row_partition(RowGroup g) const {
  switch (g) {
    case RowGroup::U: return input_partition(subsystems);
    case RowGroup::Ub: return has_plants() ? input_partition(plants) : std::vector<int>(size(), 0);
    case RowGroup::Z: return has_exogenous() ? z_split : std::vector<int>(size(), 0);
  }
  return {};
}

std::vector<int> NSCProblem::col_partition(ColGroup g) const {
  switch (g) {
    case ColGroup::Y: return output_partition(subsystems);
    case ColGroup::Yb: return has_plants() ? output_partition(plants) : std::vector<int>(size(), 0);
    case ColGroup::W: return has_exogenous() ? w_split : std::vector<int>(size(), 0);
  }
  return {};
}

ValidationReport validate(const NSCProblem& p) {
  ValidationReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.errors.push_back(std::move(msg));
  };
  if (p.variant < 1 || p.variant > 4) fail("variant must be 1..4");
  if (p.subsystems.empty()) fail("at least one subsystem is required");
  auto check_profiles = [&](const std::vector<SubsystemProfile>& list, const char* what) {
    for (const auto& s : list) {
      try {
        s.certificate.validate();
        if (s.certificate.input_dim() != s.input_dim || s.certificate.output_dim() != s.output_dim) {
          fail(std::string(what) + " " + std::to_string(s.id) + ": certificate dims mismatch");
        }
      } catch (const std::exception& e) {
        fail(std::string(what) + " " + std::to_string(s.id) + ": " + e.what());
      }
    }
  };
  check_profiles(p.subsystems, "subsystem");
  if (p.has_plants()) {
    if (p.plants.size() != p.subsystems.size()) {
      fail("variants 3-4 need one plant per subsystem (got " + std::to_string(p.plants.size()) +
           " plants for " + std::to_string(p.subsystems.size()) + " subsystems)");
    }
    check_profiles(p.plants, "plant");
  } else if (!p.plants.empty()) {
    fail("plants are only used by variants 3-4");
  }
  if (p.has_exogenous()) {
    if (static_cast<int>(p.w_split.size()) != p.size() ||
        static_cast<int>(p.z_split.size()) != p.size()) {
      fail("w/z splits need one entry per subsystem");
    } else if (!p.global_spec) {
      fail("variants 2 and 4 need a global spec Y");
    } else {
      const int r = std::accumulate(p.w_split.begin(), p.w_split.end(), 0);
      const int l = std::accumulate(p.z_split.begin(), p.z_split.end(), 0);
      try {
        p.global_spec->validate();
        if (p.global_spec->input_dim() != r || p.global_spec->output_dim() != l) {
          fail("Y dims (" + std::to_string(p.global_spec->input_dim()) + "," +
               std::to_string(p.global_spec->output_dim()) + ") do not match (r,l) = (" +
               std::to_string(r) + "," + std::to_string(l) + ")");
        }
      } catch (const std::exception& e) {
        fail(std::string("Y: ") + e.what());
      }
      rep.assumption2 = check_assumption2(*p.global_spec);
    }
  }
  if (p.topology) {
    const auto n = p.size();
    if (p.topology->adjacency.rows() != n || p.topology->adjacency.cols() != n ||
        p.topology->cost.rows() != n || p.topology->cost.cols() != n) {
      fail("topology matrices must be N x N");
    } else {
      const auto& a = p.topology->adjacency;
      if ((a - a.transpose()).cwiseAbs().maxCoeff() > 0) fail("adjacency must be symmetric");
      if (((a.array() != 0) && (a.array() != 1)).any()) fail("adjacency must be 0/1");
      if ((p.topology->cost.array() < 0).any()) fail("costs must be non-negative");
    }
  }
  rep.assumption1 = check_assumption1(p.subsystems);
  if (p.has_plants()) rep.assumption1_plants = check_assumption1(p.plants);
  return rep;
}

InterconnectionMatrix zero_interconnection(const NSCProblem& p) {
  InterconnectionMatrix m;
  m.variant = p.variant;
  for (MBlock b : kAllBlocks) {
    if (!p.has_block(b)) continue;
    m.blocks.emplace(b, BlockMatrix(p.row_partition(row_group(b)), p.col_partition(col_group(b))));
  }
  return m;
}

InterconnectionMatrix make_interconnection(const NSCProblem& p,
                                           const std::map<MBlock, DenseMatrix>& values) {
  InterconnectionMatrix m = zero_interconnection(p);
  for (const auto& [b, v] : values) {
    if (!m.has(b)) {
      throw std::invalid_argument(std::string("block ") + block_name(b) + " not used by variant " +
                                  std::to_string(p.variant));
    }
    auto& blk = m.at(b);
    if (v.rows() != blk.data.rows() || v.cols() != blk.data.cols()) {
      throw std::invalid_argument(std::string("block ") + block_name(b) + " has wrong dimensions");
    }
    blk.data = v;
  }
  return m;
}

DenseMatrix stacked(const NSCProblem& p, const InterconnectionMatrix& m) {
  auto total = [](const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); };
  const int q = total(p.row_partition(RowGroup::U));
  const int qb = total(p.row_partition(RowGroup::Ub));
  const int l = total(p.row_partition(RowGroup::Z));
  const int mm = total(p.col_partition(ColGroup::Y));
  const int mb = total(p.col_partition(ColGroup::Yb));
  const int r = total(p.col_partition(ColGroup::W));
  DenseMatrix out = DenseMatrix::Zero(q + qb + l, mm + mb + r);
  auto roff = [&](RowGroup g) { return g == RowGroup::U ? 0 : g == RowGroup::Ub ? q : q + qb; };
  auto coff = [&](ColGroup g) { return g == ColGroup::Y ? 0 : g == ColGroup::Yb ? mm : mm + mb; };
  for (const auto& [b, blk] : m.blocks) {
    out.block(roff(row_group(b)), coff(col_group(b)), blk.data.rows(), blk.data.cols()) = blk.data;
  }
  return out;
}

DenseMatrix fixed_value(FixedKind kind, int rows, int cols) {
  switch (kind) {
    case FixedKind::Zero: return DenseMatrix::Zero(rows, cols);
    case FixedKind::Identity:
    case FixedKind::NegIdentity:
      if (rows != cols) throw std::invalid_argument("identity template block must be square");
      return (kind == FixedKind::Identity ? 1.0 : -1.0) * DenseMatrix::Identity(rows, cols);
    case FixedKind::Free: break;
  }
  throw std::invalid_argument("fixed_value: free block has no value");
}

StructureTemplate template_mask(const std::string& name, const NSCProblem& p) {
  using F = FixedKind;
  StructureTemplate t;
  t.name = name;
  if (name == "custom" || name.empty()) {
    t.name = "custom";
    return t;
  }
  if (p.variant != 4) {
    throw std::invalid_argument("template '" + name + "' targets variant 4");
  }
  if (name == "series") {
    t.fixed = {{MBlock::UY, F::Zero},   {MBlock::UW, F::Identity}, {MBlock::UbYb, F::Zero},
               {MBlock::UbW, F::Zero},  {MBlock::ZY, F::Zero},     {MBlock::ZW, F::Zero}};
  } else if (name == "parallel") {
    t.fixed = {{MBlock::UY, F::Zero},   {MBlock::UYb, F::Zero}, {MBlock::UW, F::Identity},
               {MBlock::UbY, F::Zero},  {MBlock::UbYb, F::Zero}, {MBlock::ZY, F::Identity},
               {MBlock::ZW, F::Zero}};
  } else if (name == "feedback") {
    t.fixed = {{MBlock::UY, F::Zero},  {MBlock::UW, F::Identity}, {MBlock::UbYb, F::Zero},
               {MBlock::UbW, F::Zero}, {MBlock::ZY, F::Identity}, {MBlock::ZYb, F::Zero},
               {MBlock::ZW, F::Zero}};
  } else if (name == "feedback_reconfiguration") {
    t.fixed = {{MBlock::UW, F::Identity}, {MBlock::UbW, F::Zero}, {MBlock::ZY, F::Identity},
               {MBlock::ZYb, F::Zero},    {MBlock::ZW, F::Zero}};
  } else if (name == "approximate_simulation") {
    t.fixed = {{MBlock::UY, F::Zero},     {MBlock::UYb, F::Zero},       {MBlock::UW, F::Identity},
               {MBlock::ZY, F::Identity}, {MBlock::ZYb, F::NegIdentity}, {MBlock::ZW, F::Zero}};
  } else {
    throw std::invalid_argument("unknown template '" + name + "'");
  }
  return t;
}

TopologyFixes apply_topology(const NSCProblem& p, const std::vector<MBlock>& free_blocks) {
  TopologyFixes fx;
  if (!p.topology) return fx;
  const auto& topo = *p.topology;
  const int n = p.size();
  if (topo.adjacency.rows() != n || topo.adjacency.cols() != n) {
    throw std::invalid_argument("apply_topology: topology dims != N");
  }
  for (MBlock b : free_blocks) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool edge = i == j || topo.adjacency(i, j) != 0;
        if (topo.hard() && !edge) {
          fx.zero_blocks[b].emplace_back(i, j);
          continue;
        }
        if (topo.soft() && topo.cost(i, j) > 0) fx.soft_terms[b].emplace_back(i, j, topo.cost(i, j));
      }
    }
  }
  return fx;
}

bool respects_topology(const NSCProblem& p, const InterconnectionMatrix& m) {
  if (!p.topology) return true;
  const auto& a = p.topology->adjacency;
  for (const auto& [b, blk] : m.blocks) {
    for (int i = 0; i < blk.block_rows(); ++i) {
      for (int j = 0; j < blk.block_cols(); ++j) {
        if (i == j || a(i, j) != 0) continue;
        if (blk.block(i, j).size() > 0 && blk.block(i, j).cwiseAbs().maxCoeff() != 0.0) return false;
      }
    }
  }
  return true;
}

}  // namespace dissnet
