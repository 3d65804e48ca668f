#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "ccdf/excitation.hpp"
#include "ccdf/fock_space.hpp"
#include "ccdf/hamiltonian_io.hpp"

namespace ccdf {

enum class InitialGuess { zero, mp2 };

struct CcOptions {
  double tol = 1e-10;  // max |r_mu|
  int max_iter = 300;
  int diis_depth = 8;
  InitialGuess guess = InitialGuess::zero;
  std::optional<ClusterOperator> initial;  // overrides `guess` when set
};

struct CcResult {
  ClusterOperator t;
  double energy = 0.0;
  int iterations = 0;
  double residual_norm = 0.0;
  std::vector<double> residual_history;
};

/// Projected CC equations evaluated exactly in the determinant space of `h`.
struct CcResiduals {
  double energy = 0.0;
  Eigen::VectorXd r;  // in manifold order
};

/// Reference determinant of a manifold member and the sign s_mu with
/// E_mu |ref> = s_mu |D_mu>.
struct ExcitedDeterminant {
  Determinant det;
  int sign;
  Eigen::Index index;  // position in the space
};

std::vector<ExcitedDeterminant> excited_determinants(const DeterminantSpace& space, const Determinant& reference,
                                                     const std::vector<ExcitationLabel>& manifold);

CcResiduals cc_residuals(const OperatorMatrix& h, const Determinant& reference, const ClusterOperator& t,
                         const std::vector<ExcitationLabel>& manifold);

/// Quasi-Newton with diagonal Fock denominators and DIIS on raw residuals.
/// `orbital_energies` is the Fock diagonal in spin orbitals.
CcResult solve_cc(const OperatorMatrix& h, const Determinant& reference, const std::vector<double>& orbital_energies,
                  const std::vector<ExcitationLabel>& manifold, const CcOptions& options = {});

CcResult solve_cc(const OperatorMatrix& h, const ReferencePartition& partition,
                  const std::vector<ExcitationLabel>& manifold, const CcOptions& options = {});

/// Left-hand de-excitation amplitudes from the dense linear system
///   sum_nu (s_mu s_nu Hbar[D_nu, D_mu] - E delta) lambda_nu = -s_mu Hbar[ref, D_mu].
ClusterOperator solve_lambda(const OperatorMatrix& h, const ClusterOperator& t,
                             const std::vector<ExcitationLabel>& manifold, double energy);

/// <ref|(1 + Lambda) as a row vector over the space of `h`.
Eigen::VectorXd lambda_bra(const DeterminantSpace& space, const ClusterOperator& lambda);

/// exp(T)|ref> over the space.
Eigen::VectorXd cc_ket(const DeterminantSpace& space, const ClusterOperator& t);

/// <ref|(1 + Lambda) exp(-T) H exp(T)|ref>.
double lambda_energy(const OperatorMatrix& h, const ClusterOperator& t, const ClusterOperator& lambda);

}  // namespace ccdf
