#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dissnet/nsc_lmi.hpp"

namespace dissnet {

enum class Verdict { Certified, NotCertified };

struct AnalysisOptions {
  double margin = -1.0;
  double p_min = 1e-6;
  double p_max = 1e2;
  SolveOptions solver;
};

struct AnalysisResult {
  Verdict verdict = Verdict::NotCertified;
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<double> p;
  std::vector<double> pbar;
  double margin = 0.0;           // slack above the required margin
  DenseMatrix lmi;               // assembled LMI at the certificate
  std::optional<double> alpha;   // set when the negative-X11 path was used
  std::string message;

  bool certified() const { return verdict == Verdict::Certified; }
};

AnalysisResult analyze(const NSCProblem& problem, const InterconnectionMatrix& m,
                       const AnalysisOptions& options = {});
AnalysisResult analyze_nsc1(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const AnalysisOptions& options = {});
AnalysisResult analyze_nsc2(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const AnalysisOptions& options = {});
AnalysisResult analyze_nsc3(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const AnalysisOptions& options = {});
AnalysisResult analyze_nsc4(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const AnalysisOptions& options = {});

struct Indices {
  std::optional<double> nu;
  std::optional<double> rho;
  std::optional<double> gamma;
};

struct IndexEstimate {
  Indices indices;
  AnalysisResult analysis;
};

/// Optimizes (nu, rho_bar) or gamma^2 over the analysis LMI with M fixed.
IndexEstimate estimate_indices(const NSCProblem& problem, const InterconnectionMatrix& m,
                               IndexMode mode, double c1 = 1.0, double c2 = 1.0,
                               const AnalysisOptions& options = {});

/// Raw quadratic form W(p, M) over (y, ybar, w): the weighted supply sum
/// minus the global supply. The instance is certified when W < 0.
DenseMatrix raw_quadratic_form(const NSCProblem& problem, const InterconnectionMatrix& m,
                               const std::vector<double>& p, const std::vector<double>& pbar);

/// Embedded (Schur) form Psi(p, L = X_p11 M) evaluated at fixed (p, M).
DenseMatrix embedded_form(const NSCProblem& problem, const InterconnectionMatrix& m,
                          const std::vector<double>& p, const std::vector<double>& pbar);

/// alpha grid {0} U {+-10^(k/2): k = -6..5}, ordered by |alpha| with the
/// preferred sign first.
std::vector<double> alpha_grid(double preferred_sign);

}  // namespace dissnet
