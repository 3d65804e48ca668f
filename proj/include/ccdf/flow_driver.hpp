#pragma once

#include <Eigen/Dense>

#include <map>
#include <vector>

#include "ccdf/cc_solver.hpp"
#include "ccdf/excitation.hpp"
#include "ccdf/fock_space.hpp"
#include "ccdf/ses_downfolding.hpp"

namespace ccdf {

enum class FlowOrdering { energy, explicit_order };

struct FlowOptions {
  FlowOrdering ordering = FlowOrdering::energy;
  double sweep_tol = 1e-8;
  int max_sweeps = 200;
  /// Highest rank of the local internal manifolds; < 0 means every rank the
  /// active space allows.
  int max_rank = -1;
  double local_tol = 1e-11;
};

struct FlowPlan {
  std::vector<SesAlgebra> algebras;
  FlowOrdering ordering = FlowOrdering::energy;
  double sweep_tol = 1e-8;
  int max_sweeps = 200;
  double local_tol = 1e-11;
  Determinant reference;
  int n_spin = 0;
  std::vector<double> orbital_energies;
  std::vector<std::vector<ExcitationLabel>> local_manifolds;  // internal labels of each algebra
  std::map<ExcitationLabel, std::size_t> owner;              // first algebra containing the label
};

/// Orders the algebras (descending sum of F_ii over R for energy ordering,
/// ties by R then S), builds the local manifolds and ownership. Throws usage
/// naming the first algebra that is not an SES for its local manifold.
FlowPlan make_plan(const std::vector<SesAlgebra>& algebras, const ReferencePartition& partition,
                   const FlowOptions& options = {});

/// Deduplicated union of the local manifolds, sorted.
std::vector<ExcitationLabel> union_manifold(const FlowPlan& plan);

struct FlowTraceRow {
  int sweep = 0;
  std::size_t algebra = 0;
  double local_energy = 0.0;
  double max_change = 0.0;
};

struct FlowResult {
  ClusterOperator pool;
  double energy = 0.0;
  int sweeps = 0;
  std::vector<FlowTraceRow> trace;
  std::vector<double> sweep_changes;
};

/// Sweeps the plan until the largest amplitude change over a sweep is below
/// sweep_tol. Each algebra owns the labels it meets first and writes the
/// labels not owned by an earlier algebra.
FlowResult run_flow(const OperatorMatrix& h, const FlowPlan& plan);

struct EquivalenceCheck {
  double flow_energy = 0.0;
  double direct_energy = 0.0;
  double max_union_residual = 0.0;  // direct residuals evaluated at the flow pool
};

EquivalenceCheck check_equivalence(const OperatorMatrix& h, const FlowPlan& plan, const FlowResult& flow,
                                   const CcOptions& direct_options = {});

/// Singles and doubles plus triples and quadruples whose occupied indices lie
/// in one occupied spatial pair.
std::vector<ExcitationLabel> scsaf_manifold(const Determinant& reference, int n_spin);

/// g(2_R) algebras: each pair of occupied spatial orbitals with all virtuals active.
std::vector<SesAlgebra> pair_algebras(const Determinant& reference, int n_spatial);

struct FlowDensity {
  SesAlgebra algebra;
  std::vector<int> orbitals;  // active spin orbitals, row/column order of gamma
  Eigen::MatrixXd gamma;
  double local_energy = 0.0;
};

/// gamma_PQ = <ref|(1 + Lambda_int) exp(-T_int) a+_P a_Q exp(T_int)|ref> on the
/// active space of h_i, with Lambda_int solved on H_eff(h_i).
FlowDensity flow_density(const SesAlgebra& algebra, const ClusterOperator& pool, const OperatorMatrix& h);

}  // namespace ccdf
