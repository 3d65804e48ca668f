#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ccdf/determinant.hpp"
#include "ccdf/excitation.hpp"
#include "ccdf/hamiltonian_io.hpp"

namespace ccdf {

/// Fixed-particle-number determinant basis, sorted ascending by bitstring.
class DeterminantSpace {
 public:
  /// `basis` is sorted and deduplicated; every member must hold n_electrons
  /// electrons inside n_spin orbitals (and match ms2 when given).
  DeterminantSpace(int n_spin, int n_electrons, std::optional<int> ms2, std::vector<Determinant> basis);

  [[nodiscard]] int n_spin() const noexcept { return n_spin_; }
  [[nodiscard]] int n_electrons() const noexcept { return n_electrons_; }
  [[nodiscard]] std::optional<int> ms2() const noexcept { return ms2_; }
  [[nodiscard]] const std::vector<Determinant>& basis() const noexcept { return basis_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(basis_.size()); }
  [[nodiscard]] const Determinant& operator[](Eigen::Index i) const { return basis_[static_cast<std::size_t>(i)]; }

  [[nodiscard]] std::optional<Eigen::Index> find(Determinant d) const noexcept;
  [[nodiscard]] bool contains(Determinant d) const noexcept { return find(d).has_value(); }

  [[nodiscard]] bool same_basis(const DeterminantSpace& other) const noexcept {
    return n_spin_ == other.n_spin_ && basis_ == other.basis_;
  }

 private:
  int n_spin_;
  int n_electrons_;
  std::optional<int> ms2_;
  std::vector<Determinant> basis_;
};

using SpacePtr = std::shared_ptr<const DeterminantSpace>;

/// All determinants with n_electrons in n_spin orbitals, optionally filtered
/// by ms2. Throws empty_space when no determinant satisfies the filter.
SpacePtr enumerate_space(int n_spin, int n_electrons, std::optional<int> ms2 = std::nullopt);

SpacePtr make_space(int n_spin, int n_electrons, std::optional<int> ms2, std::vector<Determinant> basis);

enum class Storage { automatic, dense, sparse };

/// Above this dimension matrices are stored sparse and the Hermitian ground
/// state is found iteratively.
constexpr Eigen::Index kDenseLimit = 4000;

/// Real matrix of an operator between two determinant spaces (usually the
/// same one). Dense or sparse storage is picked by dimension.
class OperatorMatrix {
 public:
  using Dense = Eigen::MatrixXd;
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  OperatorMatrix(SpacePtr space, Dense m, bool hermitian_hint = false);
  OperatorMatrix(SpacePtr space, Sparse m, bool hermitian_hint = false);
  OperatorMatrix(SpacePtr rows, SpacePtr cols, Dense m);
  OperatorMatrix(SpacePtr rows, SpacePtr cols, Sparse m);

  static OperatorMatrix zero(SpacePtr space, Storage storage = Storage::automatic);
  static OperatorMatrix identity(SpacePtr space, Storage storage = Storage::automatic);

  [[nodiscard]] const SpacePtr& space() const noexcept { return rows_; }
  [[nodiscard]] const SpacePtr& row_space() const noexcept { return rows_; }
  [[nodiscard]] const SpacePtr& col_space() const noexcept { return cols_; }
  [[nodiscard]] Eigen::Index rows() const noexcept;
  [[nodiscard]] Eigen::Index cols() const noexcept;
  [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] bool is_dense() const noexcept { return std::holds_alternative<Dense>(data_); }
  [[nodiscard]] bool hermitian_hint() const noexcept { return hermitian_hint_; }

  /// Dense view; copies when the matrix is stored sparse.
  [[nodiscard]] Dense to_dense() const;
  [[nodiscard]] const Dense& dense() const;  // throws unless dense
  [[nodiscard]] const Sparse& sparse() const;  // throws unless sparse
  [[nodiscard]] double operator()(Eigen::Index r, Eigen::Index c) const;
  [[nodiscard]] Eigen::VectorXd diagonal() const;

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const;
  [[nodiscard]] Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& v) const;

  [[nodiscard]] OperatorMatrix adjoint() const;
  [[nodiscard]] bool is_zero() const;
  [[nodiscard]] double max_abs() const;
  /// max |M - M^T| over elements.
  [[nodiscard]] double max_asymmetry() const;
  /// max |M + M^T| over elements.
  [[nodiscard]] double max_symmetry() const;
  [[nodiscard]] double trace() const;

  /// (M + M^T) / 2, flagged Hermitian.
  [[nodiscard]] OperatorMatrix hermitized() const;
  [[nodiscard]] OperatorMatrix with_hint(bool hermitian) const;

  OperatorMatrix& operator+=(const OperatorMatrix& o);
  OperatorMatrix& operator-=(const OperatorMatrix& o);
  OperatorMatrix& operator*=(double s);

  friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) { return a += b; }
  friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) { return a -= b; }
  friend OperatorMatrix operator*(OperatorMatrix a, double s) { return a *= s; }
  friend OperatorMatrix operator*(double s, OperatorMatrix a) { return a *= s; }
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);

 private:
  void validate() const;
  void require_same_shape(const OperatorMatrix& o) const;

  SpacePtr rows_;
  SpacePtr cols_;
  std::variant<Dense, Sparse> data_;
  bool hermitian_hint_ = false;
};

/// [A, B] = AB - BA.
OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b);

/// Scalar-weighted product of ladder operators.
struct OperatorTerm {
  double coefficient = 0.0;
  std::vector<LadderOp> ops;
};

/// Matrix <row| sum_k c_k ops_k |col> between two spaces. Components leaving
/// the row space are dropped.
OperatorMatrix build_operator_matrix(const std::vector<OperatorTerm>& terms, SpacePtr rows, SpacePtr cols,
                                     Storage storage = Storage::automatic);

/// e_core + sum h_pq p+ q + 1/4 sum <pq||rs> p+ q+ s r on `space`.
OperatorMatrix build_hamiltonian_matrix(const SpinIntegralSet& s, SpacePtr space,
                                        Storage storage = Storage::automatic);

/// sum f_pq p+ q (no constant).
OperatorMatrix one_body_matrix(const Eigen::MatrixXd& f, SpacePtr space, Storage storage = Storage::automatic);

/// F_N = sum F_pq {p+ q}, normal ordered with respect to the partition's reference.
OperatorMatrix normal_fock_matrix(const ReferencePartition& partition, SpacePtr space,
                                  Storage storage = Storage::automatic);

/// Single creation or annihilation operator from `from` into `to`.
OperatorMatrix ladder_matrix(LadderOp op, SpacePtr from, SpacePtr to, Storage storage = Storage::automatic);

/// Sum of t_mu times the excitation string of mu.
OperatorMatrix build_cluster_matrix(const ClusterOperator& t, SpacePtr space, Storage storage = Storage::automatic);

/// Precomputed nonzero pattern of each label's excitation string on a space,
/// so that cluster matrices for changing amplitudes are cheap to rebuild.
class ClusterMatrixBuilder {
 public:
  ClusterMatrixBuilder(std::vector<ExcitationLabel> labels, SpacePtr space);

  [[nodiscard]] const std::vector<ExcitationLabel>& labels() const noexcept { return labels_; }
  [[nodiscard]] const SpacePtr& space() const noexcept { return space_; }

  /// Amplitudes are in label order.
  [[nodiscard]] OperatorMatrix build(const Eigen::VectorXd& amplitudes, Storage storage = Storage::automatic) const;
  [[nodiscard]] OperatorMatrix build(const ClusterOperator& t, Storage storage = Storage::automatic) const;

 private:
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    int phase;
  };
  std::vector<ExcitationLabel> labels_;
  SpacePtr space_;
  std::vector<std::vector<Entry>> pattern_;
};

/// Terminating exponential: the series stops at the first power that is
/// exactly zero; `last_power` is the highest power kept.
struct NilpotentExp {
  OperatorMatrix matrix;
  int last_power;
};

/// max_power < 0 selects n_electrons + 2. Throws non_nilpotent when the
/// series has not terminated by then.
NilpotentExp exp_nilpotent_series(const OperatorMatrix& m, int max_power = -1);
OperatorMatrix exp_nilpotent(const OperatorMatrix& m, int max_power = -1);

/// exp(M) v by the same terminating series, without forming exp(M).
Eigen::VectorXd exp_nilpotent_apply(const OperatorMatrix& m, const Eigen::VectorXd& v, int max_power = -1);

/// Unitary exp(M) for anti-symmetric M, via the eigendecomposition of iM.
OperatorMatrix exp_antihermitian(const OperatorMatrix& m);

enum class EigenMode { hermitian, right };
enum class EigenSolverKind { automatic, dense, davidson };

struct EigenOptions {
  EigenMode mode = EigenMode::hermitian;
  EigenSolverKind solver = EigenSolverKind::automatic;
  double davidson_tol = 1e-9;  // residual 2-norm
  int davidson_max_iter = 500;
  int davidson_max_subspace = 40;
};

struct Eigenpair {
  double energy = 0.0;
  Eigen::VectorXd vector;
};

/// Lowest eigenpair (Hermitian) or the eigenpair with lowest real part and its
/// right eigenvector (right mode). Vectors are normalized with their largest
/// component positive.
Eigenpair ground_state(const OperatorMatrix& m, const EigenOptions& options = {});

/// Full spectrum as real parts, ascending.
Eigen::VectorXd spectrum(const OperatorMatrix& m);

enum class TransformMode { nilpotent, unitary };

/// nilpotent: exp(-A) H exp(A); unitary: U^T H U with U = exp(A).
OperatorMatrix similarity_transform(const OperatorMatrix& h, const OperatorMatrix& a, TransformMode mode);

/// Rows and columns of `m` restricted to `sub`, which must be a subset of m's space.
OperatorMatrix restrict_to(const OperatorMatrix& m, SpacePtr sub);

/// Position of each member of `sub` inside `parent`.
std::vector<Eigen::Index> embedding(const DeterminantSpace& sub, const DeterminantSpace& parent);

}  // namespace ccdf
