#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ccdf/excitation.hpp"
#include "ccdf/fock_space.hpp"

namespace ccdf {

enum class AlgebraMode { spatial, spin_orbital };

/// Excitation sub-algebra g(R, S): generators move electrons from the active
/// occupied set R into the active virtual set S. Both sets are spin-orbital
/// masks; in spatial mode they are closed under alpha/beta pairing.
struct SesAlgebra {
  std::uint64_t active_occupied = 0;
  std::uint64_t active_virtual = 0;
  AlgebraMode mode = AlgebraMode::spatial;

  [[nodiscard]] bool contains(const ExcitationLabel& label) const noexcept {
    return (label.occupied_mask() & ~active_occupied) == 0 && (label.virtual_mask() & ~active_virtual) == 0;
  }
  /// Holes relative to `reference` only in R and particles only in S.
  [[nodiscard]] bool in_active_space(const Determinant& reference, const Determinant& d) const noexcept {
    return (reference.bits & ~d.bits & ~active_occupied) == 0 && (d.bits & ~reference.bits & ~active_virtual) == 0;
  }
  [[nodiscard]] std::uint64_t active_mask() const noexcept { return active_occupied | active_virtual; }
  [[nodiscard]] std::vector<int> active_orbitals() const;
  /// e.g. "g(R={1},S={2,3})" with spatial indices in spatial mode and
  /// spin-orbital indices otherwise.
  [[nodiscard]] std::string to_string() const;

  friend auto operator<=>(const SesAlgebra&, const SesAlgebra&) = default;
};

/// Validated spatial-mode algebra from spatial orbital indices.
SesAlgebra make_spatial_algebra(const Determinant& reference, const std::vector<int>& occupied_spatial,
                                const std::vector<int>& virtual_spatial);
/// Validated spin-orbital-mode algebra from spin orbital indices.
SesAlgebra make_spin_algebra(const Determinant& reference, const std::vector<int>& occupied_spin,
                             const std::vector<int>& virtual_spin);
/// Every orbital active.
SesAlgebra full_algebra(const Determinant& reference, int n_spin);

/// Determinants of a sector space that lie in the algebra's active space.
class ActiveProjector {
 public:
  ActiveProjector(const SesAlgebra& algebra, const Determinant& reference, SpacePtr parent);

  [[nodiscard]] const SesAlgebra& algebra() const noexcept { return algebra_; }
  [[nodiscard]] const Determinant& reference() const noexcept { return reference_; }
  [[nodiscard]] const SpacePtr& parent() const noexcept { return parent_; }
  [[nodiscard]] const SpacePtr& space() const noexcept { return space_; }
  [[nodiscard]] const std::vector<Eigen::Index>& embedding() const noexcept { return embedding_; }

  [[nodiscard]] OperatorMatrix project(const OperatorMatrix& m) const;
  [[nodiscard]] Eigen::VectorXd restrict(const Eigen::VectorXd& v) const;
  [[nodiscard]] Eigen::VectorXd embed(const Eigen::VectorXd& v) const;

 private:
  SesAlgebra algebra_;
  Determinant reference_;
  SpacePtr parent_;
  SpacePtr space_;
  std::vector<Eigen::Index> embedding_;
};

enum class Provenance { ses_cc, ducc_exact, ducc_a1, ducc_a3, ducc_a4, ducc_a6, ducc_a7 };

std::string to_string(Provenance p);

/// Downfolded Hamiltonian on the active determinants. `matrix` is the
/// N-electron block; `sectors` optionally holds the same transform on other
/// particle-number sectors (keyed by electron count, N included when set).
struct EffectiveHamiltonian {
  OperatorMatrix matrix;
  Provenance provenance = Provenance::ses_cc;
  SesAlgebra algebra;
  Determinant reference;
  double e_shift = 0.0;
  double asymmetry_before_hermitization = 0.0;
  std::string note;
  std::map<int, OperatorMatrix> sectors;
};

/// Labels wholly inside the algebra go to the first operator, the rest to the second.
std::pair<ClusterOperator, ClusterOperator> partition_cluster(const ClusterOperator& t, const SesAlgebra& h);

/// Same split on a plain label list.
std::pair<std::vector<ExcitationLabel>, std::vector<ExcitationLabel>> partition_labels(
    const std::vector<ExcitationLabel>& labels, const SesAlgebra& h);

/// Inverse of partition_cluster.
ClusterOperator merge_cluster(const ClusterOperator& a, const ClusterOperator& b);

/// True iff every active-space determinant of the reference's S_z sector is
/// generated from the reference by a single manifold label internal to h.
bool is_ses(const SesAlgebra& h, const std::vector<ExcitationLabel>& manifold, const Determinant& reference,
            int n_spin);

/// P exp(-T_ext) H exp(T_ext) P. Throws contamination if t_ext has internal labels.
EffectiveHamiltonian build_heff_ses(const OperatorMatrix& h, const ClusterOperator& t_ext, const SesAlgebra& algebra);

/// Active columns of exp(-A) H exp(A) or U^T H U restricted to the active rows,
/// computed column by column without forming the full transform.
OperatorMatrix project_similarity(const OperatorMatrix& h, const OperatorMatrix& a, TransformMode mode,
                                  const ActiveProjector& projector);

/// exp(T_int)|ref> on the active basis of heff.
Eigen::VectorXd internal_ket(const EffectiveHamiltonian& heff, const ClusterOperator& t_int);

/// || (H_eff + e_shift - e_cc) exp(T_int)|ref> ||_2 on the active basis.
double verify_ses_theorem(const EffectiveHamiltonian& heff, const ClusterOperator& t_int, double e_cc);

struct CcRoot {
  double eigenvalue = 0.0;
  double overlap = 0.0;  // |<v|c>| with both normalized
};

/// Eigenpair of heff whose right eigenvector overlaps most with exp(T_int)|ref>.
CcRoot identify_cc_root(const EffectiveHamiltonian& heff, const ClusterOperator& t_int);

/// All spatial-mode algebras with one active occupied orbital and any nonempty
/// virtual subset, or one active virtual and any nonempty occupied subset.
/// Occupied spatial orbitals are 0..n_o-1 and virtuals n_o..n_o+n_v-1.
std::vector<SesAlgebra> enumerate_ses_ccsd(int n_o, int n_v);

/// Same for a closed-shell reference; occupied/virtual spatial orbitals are
/// read from the reference.
std::vector<SesAlgebra> enumerate_ses_ccsd(const Determinant& reference, int n_spatial);

/// Number of algebras enumerate_ses_ccsd produces.
long long ses_ccsd_count(int n_o, int n_v);

struct SesReport {
  SesAlgebra algebra;
  Eigen::Index active_dimension = 0;
  double residual = 0.0;
  double eigenvalue = 0.0;
  double delta_e = 0.0;  // |eigenvalue - e_cc|
  double max_asymmetry = 0.0;
};

/// Partition t, build H_eff for the algebra, and check the eigen-relation.
SesReport verify_algebra(const OperatorMatrix& h, const ClusterOperator& t, double e_cc, const SesAlgebra& algebra);

}  // namespace ccdf
