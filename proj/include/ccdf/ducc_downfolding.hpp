#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccdf/excitation.hpp"
#include "ccdf/fock_space.hpp"
#include "ccdf/hamiltonian_io.hpp"
#include "ccdf/ses_downfolding.hpp"

namespace ccdf {

/// sigma = T_ext - T_ext^dagger together with its generator.
struct SigmaOperator {
  ClusterOperator generator;
  OperatorMatrix matrix;
};

/// Throws contamination when `algebra` is given and t_ext holds an internal label.
SigmaOperator build_sigma_ext(const ClusterOperator& t_ext, SpacePtr space,
                              const std::optional<SesAlgebra>& algebra = std::nullopt);

/// Unitary transform exp(-sigma) H exp(sigma) projected on the active space.
EffectiveHamiltonian exact_ducc_heff(const OperatorMatrix& h, const SigmaOperator& sigma, const SesAlgebra& algebra);

/// Commutator approximants. A2 and A5 are evaluated as A4 and A7.
enum class DuccVariant { a1, a2, a3, a4, a5, a6, a7 };

/// Accepts "A7", "a7" and "A(7)".
DuccVariant parse_variant(const std::string& name);
std::string to_string(DuccVariant v);
/// A2 -> A4, A5 -> A7, others unchanged.
DuccVariant canonical(DuccVariant v);

/// Full-space matrix of the chosen approximant before projection:
///   A1 = H
///   A3 = H + [H_N, s]
///   A4 = A3 + 1/2 [[F_N, s], s]
///   A6 = H + [H_N, s] + 1/2 [[H_N, s], s]
///   A7 = A6 + 1/6 [[[F_N, s], s], s]
/// with H_N = H - <ref|H|ref> and F_N normal ordered with respect to the
/// partition's reference. Operands share one space.
OperatorMatrix commutator_expansion(const OperatorMatrix& h, const OperatorMatrix& sigma, DuccVariant variant,
                                    const OperatorMatrix& f_n, double e_ref_expectation);

/// Approximant projected on the algebra's active space and Hermitized.
EffectiveHamiltonian commutator_heff(const OperatorMatrix& h, const SigmaOperator& sigma, DuccVariant variant,
                                     const ReferencePartition& partition, const SesAlgebra& algebra);

/// The same downfolded Hamiltonian realized on several particle-number
/// sectors (each over all ms2). `variant` empty selects the exact transform.
/// `matrix` holds the N-electron block on the reference's ms2 sector and
/// `sectors` every requested electron count.
EffectiveHamiltonian ducc_family(const SpinIntegralSet& integrals, const ReferencePartition& partition,
                                 const ClusterOperator& t_ext, const SesAlgebra& algebra,
                                 std::optional<DuccVariant> variant, const std::vector<int>& electron_counts);

/// Bare Hamiltonian projected on the active space of several sectors; the
/// sigma = 0 member of ducc_family.
EffectiveHamiltonian bare_family(const SpinIntegralSet& integrals, const Determinant& reference,
                                 const SesAlgebra& algebra, const std::vector<int>& electron_counts);

struct ManyBodyTerm {
  std::vector<int> creators;      // ascending active indices
  std::vector<int> annihilators;  // ascending active indices; string is a+_P1.. a+_Pm a_Qm .. a_Q1
  double value = 0.0;
};

/// Rank-truncated second-quantized form of an effective Hamiltonian over its
/// active spin orbitals (0-based active indices).
struct DowncoefExport {
  std::vector<int> active_orbitals;  // parent spin-orbital index of each active index
  int n_active_electrons = 0;        // electrons in active orbitals, N sector
  std::string provenance;
  int max_rank = 2;
  double e_scalar = 0.0;
  Eigen::MatrixXd one_body;        // coefficient of a+_P a_Q
  SpinIntegralSet two_body{0};     // v(P,Q,R,S) multiplies a+_P a+_Q a_S a_R for P<Q, R<S
  std::vector<ManyBodyTerm> terms;  // every fitted coefficient, any rank
  double recomposition_error = 0.0;
  bool rank_deficient = false;
  Eigen::Index gram_size = 0;
  Eigen::Index gram_rank = 0;
  std::vector<int> fitted_sectors;  // electron counts used in the fit
};

/// Least-squares projection on {1, a+_P a_Q, a+_P a+_Q a_S a_R, ...} with the
/// trace inner product, summed over every sector available in heff. The
/// recomposition error is measured on the N-electron block.
DowncoefExport extract_many_body(const EffectiveHamiltonian& heff, int max_rank = 2);

/// Matrix of the exported operator on the active N-electron basis of heff.
OperatorMatrix recompose(const DowncoefExport& coef, const EffectiveHamiltonian& heff);

void write_downcoef(std::ostream& out, const DowncoefExport& coef);

struct ActiveSpectrum {
  Eigen::VectorXd eigenvalues;  // ascending, e_shift included
  Eigen::VectorXd ground_vector;
  [[nodiscard]] double ground_energy() const { return eigenvalues[0]; }
};

/// Full Hermitian eigendecomposition; rejects SES-CC input and asymmetric matrices.
ActiveSpectrum diagonalize_active(const EffectiveHamiltonian& heff);

}  // namespace ccdf
