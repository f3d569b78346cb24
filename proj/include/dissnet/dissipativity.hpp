#pragma once

#include <string>
#include <variant>
#include <vector>

#include "dissnet/linalg.hpp"

namespace dissnet {

/// Quadratic supply-rate matrix [[x11, x12], [x21, x22]] over (input, output).
struct SupplyMatrix {
  DenseMatrix x11, x12, x21, x22;

  int input_dim() const { return static_cast<int>(x11.rows()); }
  int output_dim() const { return static_cast<int>(x22.rows()); }
  DenseMatrix full() const;
  static SupplyMatrix from_full(const DenseMatrix& x, int input_dim);
  /// Throws unless dims are consistent and the full matrix is symmetric.
  void validate() const;
};

struct Passive {};
struct StrictlyPassive {
  double nu = 0.0;
  double rho = 0.0;
};
struct L2Gain {
  double gamma = 1.0;
};
struct General {
  SupplyMatrix x;
};
using DissipativityKind = std::variant<Passive, StrictlyPassive, L2Gain, General>;

struct SubsystemProfile {
  int id = 0;
  int input_dim = 1;
  int output_dim = 1;
  SupplyMatrix certificate;
};

SubsystemProfile make_profile(int id, const DissipativityKind& kind, int q, int m);

struct ScaledAggregate {
  BlockMatrix x11, x12, x21, x22;
  std::vector<double> p;
};

struct AssumptionReport {
  bool ok = true;
  std::vector<int> offenders;  // subsystem ids
  std::string message;
};

SupplyMatrix supply_from_kind(const DissipativityKind& kind, int q, int m);

/// Replaces nu by nu - epsilon in a [[-nu I, I/2], [I/2, -rho I]] certificate.
SupplyMatrix shift_ifp(const SupplyMatrix& x, double epsilon);

ScaledAggregate assemble_scaled(const std::vector<SubsystemProfile>& profiles,
                                const std::vector<double>& p);

struct RatioBlocks {
  BlockMatrix x12_ratio;  // diag(X11^-1 X12)
  BlockMatrix x21_ratio;  // diag(X21 X11^-1)
};
RatioBlocks ratio_blocks(const std::vector<SubsystemProfile>& profiles);

AssumptionReport check_assumption1(const std::vector<SubsystemProfile>& profiles);
AssumptionReport check_assumption2(const SupplyMatrix& y);

std::vector<int> input_partition(const std::vector<SubsystemProfile>& profiles);
std::vector<int> output_partition(const std::vector<SubsystemProfile>& profiles);

}  // namespace dissnet
