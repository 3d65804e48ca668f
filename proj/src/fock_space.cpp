#include "ccdf/fock_space.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "ccdf/error.hpp"

namespace ccdf {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

bool use_dense(Storage storage, Eigen::Index rows, Eigen::Index cols) {
  switch (storage) {
    case Storage::dense:
      return true;
    case Storage::sparse:
      return false;
    case Storage::automatic:
      break;
  }
  return std::max(rows, cols) <= kDenseLimit;
}

OperatorMatrix from_triplets(SpacePtr rows, SpacePtr cols, const Triplets& trips, Storage storage) {
  const Eigen::Index nr = rows->size(), nc = cols->size();
  if (use_dense(storage, nr, nc)) {
    OperatorMatrix::Dense m = OperatorMatrix::Dense::Zero(nr, nc);
    for (const auto& t : trips) m(t.row(), t.col()) += t.value();
    return rows == cols ? OperatorMatrix(rows, std::move(m)) : OperatorMatrix(rows, cols, std::move(m));
  }
  OperatorMatrix::Sparse m(nr, nc);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(0.0);
  return rows == cols ? OperatorMatrix(rows, std::move(m)) : OperatorMatrix(rows, cols, std::move(m));
}

std::vector<int> unoccupied(Determinant d, int n_spin) {
  std::vector<int> out;
  for (int p = 0; p < n_spin; ++p)
    if (!d.occupied(p)) out.push_back(p);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- spaces

DeterminantSpace::DeterminantSpace(int n_spin, int n_electrons, std::optional<int> ms2, std::vector<Determinant> basis)
    : n_spin_(n_spin), n_electrons_(n_electrons), ms2_(ms2), basis_(std::move(basis)) {
  if (n_spin < 0 || n_spin > kMaxSpinOrbitals) throw Error(ErrorCode::index, "spin orbital count out of range");
  if (n_electrons < 0 || n_electrons > n_spin)
    throw Error(ErrorCode::empty_space, "electron count " + std::to_string(n_electrons) + " does not fit in " +
                                            std::to_string(n_spin) + " spin orbitals");
  std::sort(basis_.begin(), basis_.end());
  basis_.erase(std::unique(basis_.begin(), basis_.end()), basis_.end());
  const std::uint64_t outside = n_spin == kMaxSpinOrbitals ? 0 : ~(bit(n_spin) - 1);
  for (const auto& d : basis_) {
    if (d.count() != n_electrons || (d.bits & outside) != 0 || (ms2 && d.ms2() != *ms2))
      throw Error(ErrorCode::shape, "determinant " + d.to_string(n_spin) + " does not belong to the space");
  }
}

std::optional<Eigen::Index> DeterminantSpace::find(Determinant d) const noexcept {
  const auto it = std::lower_bound(basis_.begin(), basis_.end(), d);
  if (it == basis_.end() || *it != d) return std::nullopt;
  return static_cast<Eigen::Index>(it - basis_.begin());
}

SpacePtr make_space(int n_spin, int n_electrons, std::optional<int> ms2, std::vector<Determinant> basis) {
  return std::make_shared<const DeterminantSpace>(n_spin, n_electrons, ms2, std::move(basis));
}

SpacePtr enumerate_space(int n_spin, int n_electrons, std::optional<int> ms2) {
  if (n_spin < 0 || n_spin > kMaxSpinOrbitals) throw Error(ErrorCode::index, "spin orbital count out of range");
  if (n_electrons < 0 || n_electrons > n_spin)
    throw Error(ErrorCode::empty_space, "cannot place " + std::to_string(n_electrons) + " electrons in " +
                                            std::to_string(n_spin) + " spin orbitals");
  std::vector<Determinant> basis;
  if (n_electrons == 0) {
    basis.push_back(Determinant{0});
  } else {
    // Gosper's hack walks all n-bit words with k set bits in ascending order.
    const std::uint64_t limit = n_spin == kMaxSpinOrbitals ? 0 : bit(n_spin);
    std::uint64_t x = n_electrons == 64 ? ~std::uint64_t{0} : bit(n_electrons) - 1;
    while (true) {
      if (!ms2 || Determinant{x}.ms2() == *ms2) basis.push_back(Determinant{x});
      const std::uint64_t c = x & (~x + 1);
      const std::uint64_t r = x + c;
      if (r == 0 || (limit != 0 && r >= limit)) break;
      x = (((r ^ x) >> 2) / c) | r;
      if (limit != 0 && x >= limit) break;
    }
  }
  if (basis.empty())
    throw Error(ErrorCode::empty_space, "no determinant with ms2 = " + std::to_string(ms2.value_or(0)) + " for " +
                                            std::to_string(n_electrons) + " electrons in " +
                                            std::to_string(n_spin) + " spin orbitals");
  return make_space(n_spin, n_electrons, ms2, std::move(basis));
}

std::vector<Eigen::Index> embedding(const DeterminantSpace& sub, const DeterminantSpace& parent) {
  std::vector<Eigen::Index> idx;
  idx.reserve(sub.basis().size());
  for (const auto& d : sub.basis()) {
    const auto pos = parent.find(d);
    if (!pos) throw Error(ErrorCode::shape, "determinant " + d.to_string(sub.n_spin()) + " is not in the parent space");
    idx.push_back(*pos);
  }
  return idx;
}

// --------------------------------------------------------- OperatorMatrix

OperatorMatrix::OperatorMatrix(SpacePtr space, Dense m, bool hermitian_hint)
    : rows_(space), cols_(std::move(space)), data_(std::move(m)), hermitian_hint_(hermitian_hint) {
  validate();
}

OperatorMatrix::OperatorMatrix(SpacePtr space, Sparse m, bool hermitian_hint)
    : rows_(space), cols_(std::move(space)), data_(std::move(m)), hermitian_hint_(hermitian_hint) {
  validate();
}

OperatorMatrix::OperatorMatrix(SpacePtr rows, SpacePtr cols, Dense m)
    : rows_(std::move(rows)), cols_(std::move(cols)), data_(std::move(m)) {
  validate();
}

OperatorMatrix::OperatorMatrix(SpacePtr rows, SpacePtr cols, Sparse m)
    : rows_(std::move(rows)), cols_(std::move(cols)), data_(std::move(m)) {
  validate();
}

void OperatorMatrix::validate() const {
  if (!rows_ || !cols_) throw Error(ErrorCode::shape, "operator matrix without a space");
  if (rows() != rows_->size() || cols() != cols_->size())
    throw Error(ErrorCode::shape, "matrix is " + std::to_string(rows()) + "x" + std::to_string(cols()) +
                                      " but the spaces have dimensions " + std::to_string(rows_->size()) + " and " +
                                      std::to_string(cols_->size()));
  if (hermitian_hint_) {
    if (!is_square()) throw Error(ErrorCode::shape, "Hermitian flag on a rectangular operator");
    const double a = max_asymmetry();
    if (!(a < 1e-10)) throw Error(ErrorCode::shape, "matrix flagged Hermitian has asymmetry " + std::to_string(a));
  }
}

OperatorMatrix OperatorMatrix::zero(SpacePtr space, Storage storage) {
  const Eigen::Index n = space->size();
  if (use_dense(storage, n, n)) return {std::move(space), Dense::Zero(n, n), true};
  return {std::move(space), Sparse(n, n), true};
}

OperatorMatrix OperatorMatrix::identity(SpacePtr space, Storage storage) {
  const Eigen::Index n = space->size();
  if (use_dense(storage, n, n)) return {std::move(space), Dense(Dense::Identity(n, n)), true};
  Sparse id(n, n);
  id.setIdentity();
  return {std::move(space), std::move(id), true};
}

Eigen::Index OperatorMatrix::rows() const noexcept {
  return std::visit([](const auto& m) { return static_cast<Eigen::Index>(m.rows()); }, data_);
}

Eigen::Index OperatorMatrix::cols() const noexcept {
  return std::visit([](const auto& m) { return static_cast<Eigen::Index>(m.cols()); }, data_);
}

OperatorMatrix::Dense OperatorMatrix::to_dense() const {
  if (is_dense()) return std::get<Dense>(data_);
  return Dense(std::get<Sparse>(data_));
}

const OperatorMatrix::Dense& OperatorMatrix::dense() const {
  if (!is_dense()) throw Error(ErrorCode::shape, "operator matrix is stored sparse");
  return std::get<Dense>(data_);
}

const OperatorMatrix::Sparse& OperatorMatrix::sparse() const {
  if (is_dense()) throw Error(ErrorCode::shape, "operator matrix is stored dense");
  return std::get<Sparse>(data_);
}

double OperatorMatrix::operator()(Eigen::Index r, Eigen::Index c) const {
  if (is_dense()) return std::get<Dense>(data_)(r, c);
  return std::get<Sparse>(data_).coeff(r, c);
}

Eigen::VectorXd OperatorMatrix::diagonal() const {
  return std::visit([](const auto& m) -> Eigen::VectorXd { return m.diagonal(); }, data_);
}

Eigen::VectorXd OperatorMatrix::apply(const Eigen::VectorXd& v) const {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m * v; }, data_);
}

Eigen::MatrixXd OperatorMatrix::apply(const Eigen::MatrixXd& v) const {
  return std::visit([&](const auto& m) -> Eigen::MatrixXd { return m * v; }, data_);
}

Eigen::VectorXd OperatorMatrix::apply_adjoint(const Eigen::VectorXd& v) const {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.transpose() * v; }, data_);
}

OperatorMatrix OperatorMatrix::adjoint() const {
  if (is_dense()) return {cols_, rows_, Dense(std::get<Dense>(data_).transpose())};
  return {cols_, rows_, Sparse(std::get<Sparse>(data_).transpose())};
}

bool OperatorMatrix::is_zero() const { return max_abs() == 0.0; }

double OperatorMatrix::max_abs() const {
  if (is_dense()) {
    const auto& m = std::get<Dense>(data_);
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  }
  const auto& m = std::get<Sparse>(data_);
  double out = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (Sparse::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

double OperatorMatrix::max_asymmetry() const {
  if (!is_square()) throw Error(ErrorCode::shape, "asymmetry of a rectangular operator");
  if (is_dense()) {
    const auto& m = std::get<Dense>(data_);
    return m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  }
  const auto& m = std::get<Sparse>(data_);
  const Sparse d = m - Sparse(m.transpose());
  double out = 0.0;
  for (Eigen::Index k = 0; k < d.outerSize(); ++k)
    for (Sparse::InnerIterator it(d, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

double OperatorMatrix::max_symmetry() const {
  if (!is_square()) throw Error(ErrorCode::shape, "symmetry of a rectangular operator");
  if (is_dense()) {
    const auto& m = std::get<Dense>(data_);
    return m.size() == 0 ? 0.0 : (m + m.transpose()).cwiseAbs().maxCoeff();
  }
  const auto& m = std::get<Sparse>(data_);
  const Sparse d = m + Sparse(m.transpose());
  double out = 0.0;
  for (Eigen::Index k = 0; k < d.outerSize(); ++k)
    for (Sparse::InnerIterator it(d, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

double OperatorMatrix::trace() const { return diagonal().sum(); }

OperatorMatrix OperatorMatrix::hermitized() const {
  if (!is_square()) throw Error(ErrorCode::shape, "cannot Hermitize a rectangular operator");
  if (is_dense()) {
    const auto& m = std::get<Dense>(data_);
    return {rows_, Dense(0.5 * (m + m.transpose())), true};
  }
  const auto& m = std::get<Sparse>(data_);
  return {rows_, Sparse(0.5 * (m + Sparse(m.transpose()))), true};
}

OperatorMatrix OperatorMatrix::with_hint(bool hermitian) const {
  OperatorMatrix out = *this;
  out.hermitian_hint_ = hermitian;
  out.validate();
  return out;
}

void OperatorMatrix::require_same_shape(const OperatorMatrix& o) const {
  if (rows() != o.rows() || cols() != o.cols() || !rows_->same_basis(*o.rows_) || !cols_->same_basis(*o.cols_))
    throw Error(ErrorCode::shape, "operator matrices live on different spaces");
}

OperatorMatrix& OperatorMatrix::operator+=(const OperatorMatrix& o) {
  require_same_shape(o);
  if (is_dense() && o.is_dense()) {
    std::get<Dense>(data_) += std::get<Dense>(o.data_);
  } else if (!is_dense() && !o.is_dense()) {
    std::get<Sparse>(data_) += std::get<Sparse>(o.data_);
  } else {
    data_ = Dense(to_dense() + o.to_dense());
  }
  hermitian_hint_ = hermitian_hint_ && o.hermitian_hint_;
  return *this;
}

OperatorMatrix& OperatorMatrix::operator-=(const OperatorMatrix& o) {
  require_same_shape(o);
  if (is_dense() && o.is_dense()) {
    std::get<Dense>(data_) -= std::get<Dense>(o.data_);
  } else if (!is_dense() && !o.is_dense()) {
    std::get<Sparse>(data_) -= std::get<Sparse>(o.data_);
  } else {
    data_ = Dense(to_dense() - o.to_dense());
  }
  hermitian_hint_ = hermitian_hint_ && o.hermitian_hint_;
  return *this;
}

OperatorMatrix& OperatorMatrix::operator*=(double s) {
  std::visit([s](auto& m) { m *= s; }, data_);
  return *this;
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
  if (a.cols() != b.rows() || !a.col_space()->same_basis(*b.row_space()))
    throw Error(ErrorCode::shape, "operator product with mismatched spaces");
  if (a.is_dense() && b.is_dense())
    return {a.row_space(), b.col_space(), OperatorMatrix::Dense(a.dense() * b.dense())};
  if (!a.is_dense() && !b.is_dense()) {
    OperatorMatrix::Sparse p = (a.sparse() * b.sparse()).pruned(0.0);
    return {a.row_space(), b.col_space(), std::move(p)};
  }
  if (a.is_dense()) return {a.row_space(), b.col_space(), OperatorMatrix::Dense(a.dense() * b.sparse())};
  return {a.row_space(), b.col_space(), OperatorMatrix::Dense(a.sparse() * b.dense())};
}

OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) { return a * b - b * a; }

// ------------------------------------------------------------ builders

OperatorMatrix build_operator_matrix(const std::vector<OperatorTerm>& terms, SpacePtr rows, SpacePtr cols,
                                     Storage storage) {
  Triplets trips;
  for (const auto& term : terms) {
    if (term.coefficient == 0.0) continue;
    for (const auto& op : term.ops)
      if (op.orbital < 0 || op.orbital >= cols->n_spin())
        throw Error(ErrorCode::index, "ladder operator index " + std::to_string(op.orbital) + " out of range");
    for (Eigen::Index c = 0; c < cols->size(); ++c) {
      const auto act = apply_string(term.ops, (*cols)[c]);
      if (!act) continue;
      const auto r = rows->find(act->det);
      if (r) trips.emplace_back(*r, c, term.coefficient * act->phase);
    }
  }
  return from_triplets(std::move(rows), std::move(cols), trips, storage);
}

OperatorMatrix build_hamiltonian_matrix(const SpinIntegralSet& s, SpacePtr space, Storage storage) {
  if (s.n_spin() != space->n_spin())
    throw Error(ErrorCode::shape, "integrals cover " + std::to_string(s.n_spin()) + " spin orbitals, space " +
                                      std::to_string(space->n_spin()));
  const int n = s.n_spin();
  Triplets trips;
  for (Eigen::Index c = 0; c < space->size(); ++c) {
    const Determinant d = (*space)[c];
    const auto occ = d.occupied_list();
    const auto vir = unoccupied(d, n);
    trips.emplace_back(c, c, s.e_core);
    for (int q : occ) {
      std::vector<int> targets = vir;
      targets.push_back(q);
      for (int p : targets) {
        const double h = s.h(p, q);
        if (h == 0.0) continue;
        const LadderOp ops[] = {cre(p), ann(q)};
        const auto act = apply_string(ops, d);
        if (!act) continue;
        if (const auto r = space->find(act->det)) trips.emplace_back(*r, c, h * act->phase);
      }
    }
    for (std::size_t a = 0; a < occ.size(); ++a) {
      for (std::size_t b = a + 1; b < occ.size(); ++b) {
        const int r0 = occ[a], s0 = occ[b];
        std::vector<int> targets = vir;
        targets.push_back(r0);
        targets.push_back(s0);
        std::sort(targets.begin(), targets.end());
        for (std::size_t i = 0; i < targets.size(); ++i) {
          for (std::size_t j = i + 1; j < targets.size(); ++j) {
            const int p = targets[i], q = targets[j];
            const double v = s.v(p, q, r0, s0);
            if (v == 0.0) continue;
            const LadderOp ops[] = {cre(p), cre(q), ann(s0), ann(r0)};
            const auto act = apply_string(ops, d);
            if (!act) continue;
            if (const auto r = space->find(act->det)) trips.emplace_back(*r, c, v * act->phase);
          }
        }
      }
    }
  }
  OperatorMatrix m = from_triplets(space, space, trips, storage);
  // Rounding in summation order can leave tiny asymmetry; symmetrize exactly.
  return m.hermitized();
}

OperatorMatrix one_body_matrix(const Eigen::MatrixXd& f, SpacePtr space, Storage storage) {
  const int n = space->n_spin();
  if (f.rows() != n || f.cols() != n) throw Error(ErrorCode::shape, "one-body matrix does not match the space");
  Triplets trips;
  for (Eigen::Index c = 0; c < space->size(); ++c) {
    const Determinant d = (*space)[c];
    for (int q : d.occupied_list()) {
      for (int p = 0; p < n; ++p) {
        if (f(p, q) == 0.0) continue;
        const LadderOp ops[] = {cre(p), ann(q)};
        const auto act = apply_string(ops, d);
        if (!act) continue;
        if (const auto r = space->find(act->det)) trips.emplace_back(*r, c, f(p, q) * act->phase);
      }
    }
  }
  return from_triplets(space, space, trips, storage);
}

OperatorMatrix normal_fock_matrix(const ReferencePartition& partition, SpacePtr space, Storage storage) {
  OperatorMatrix f = one_body_matrix(partition.fock, space, storage);
  double shift = 0.0;
  for (int i : partition.reference.occupied_list()) shift += partition.fock(i, i);
  f -= OperatorMatrix::identity(space, f.is_dense() ? Storage::dense : Storage::sparse) * shift;
  return f;
}

OperatorMatrix ladder_matrix(LadderOp op, SpacePtr from, SpacePtr to, Storage storage) {
  return build_operator_matrix({OperatorTerm{1.0, {op}}}, std::move(to), std::move(from), storage);
}

OperatorMatrix build_cluster_matrix(const ClusterOperator& t, SpacePtr space, Storage storage) {
  Triplets trips;
  for (const auto& [label, amp] : t.amplitudes()) {
    for (int p : label.occupied)
      if (p >= space->n_spin()) throw Error(ErrorCode::index, "label " + label.to_string() + " exceeds the space");
    for (int p : label.virtuals)
      if (p >= space->n_spin()) throw Error(ErrorCode::index, "label " + label.to_string() + " exceeds the space");
    if (amp == 0.0) continue;
    const auto ops = label.excitation_string();
    for (Eigen::Index c = 0; c < space->size(); ++c) {
      const auto act = apply_string(ops, (*space)[c]);
      if (!act) continue;
      if (const auto r = space->find(act->det)) trips.emplace_back(*r, c, amp * act->phase);
    }
  }
  return from_triplets(space, space, trips, storage);
}

ClusterMatrixBuilder::ClusterMatrixBuilder(std::vector<ExcitationLabel> labels, SpacePtr space)
    : labels_(std::move(labels)), space_(std::move(space)) {
  pattern_.resize(labels_.size());
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    const auto ops = labels_[k].excitation_string();
    for (const auto& op : ops)
      if (op.orbital >= space_->n_spin())
        throw Error(ErrorCode::index, "label " + labels_[k].to_string() + " exceeds the space");
    for (Eigen::Index c = 0; c < space_->size(); ++c) {
      const auto act = apply_string(ops, (*space_)[c]);
      if (!act) continue;
      if (const auto r = space_->find(act->det)) pattern_[k].push_back({*r, c, act->phase});
    }
  }
}

OperatorMatrix ClusterMatrixBuilder::build(const Eigen::VectorXd& amplitudes, Storage storage) const {
  if (amplitudes.size() != static_cast<Eigen::Index>(labels_.size()))
    throw Error(ErrorCode::shape, "amplitude vector does not match the label list");
  const Eigen::Index n = space_->size();
  if (use_dense(storage, n, n)) {
    OperatorMatrix::Dense m = OperatorMatrix::Dense::Zero(n, n);
    for (std::size_t k = 0; k < labels_.size(); ++k) {
      const double a = amplitudes[static_cast<Eigen::Index>(k)];
      if (a == 0.0) continue;
      for (const auto& e : pattern_[k]) m(e.row, e.col) += a * e.phase;
    }
    return {space_, std::move(m)};
  }
  Triplets trips;
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    const double a = amplitudes[static_cast<Eigen::Index>(k)];
    if (a == 0.0) continue;
    for (const auto& e : pattern_[k]) trips.emplace_back(e.row, e.col, a * e.phase);
  }
  return from_triplets(space_, space_, trips, Storage::sparse);
}

OperatorMatrix ClusterMatrixBuilder::build(const ClusterOperator& t, Storage storage) const {
  Eigen::VectorXd amps(static_cast<Eigen::Index>(labels_.size()));
  for (std::size_t k = 0; k < labels_.size(); ++k) amps[static_cast<Eigen::Index>(k)] = t.get(labels_[k]);
  return build(amps, storage);
}

// -------------------------------------------------------- exponentials

NilpotentExp exp_nilpotent_series(const OperatorMatrix& m, int max_power) {
  if (!m.is_square()) throw Error(ErrorCode::shape, "exponential of a rectangular operator");
  if (max_power < 0) max_power = m.space()->n_electrons() + 2;
  OperatorMatrix result = OperatorMatrix::identity(m.space(), m.is_dense() ? Storage::dense : Storage::sparse);
  OperatorMatrix term = result;
  for (int k = 1; k <= max_power + 1; ++k) {
    term = term * m;
    if (term.is_zero()) return {std::move(result), k - 1};
    if (k > max_power) break;
    term *= 1.0 / k;
    result += term;
  }
  throw Error(ErrorCode::non_nilpotent,
              "exponential series did not terminate within " + std::to_string(max_power) + " powers");
}

OperatorMatrix exp_nilpotent(const OperatorMatrix& m, int max_power) {
  return exp_nilpotent_series(m, max_power).matrix;
}

Eigen::VectorXd exp_nilpotent_apply(const OperatorMatrix& m, const Eigen::VectorXd& v, int max_power) {
  if (!m.is_square()) throw Error(ErrorCode::shape, "exponential of a rectangular operator");
  if (max_power < 0) max_power = m.space()->n_electrons() + 2;
  Eigen::VectorXd result = v;
  Eigen::VectorXd term = v;
  for (int k = 1; k <= max_power + 1; ++k) {
    term = m.apply(term);
    if (term.size() == 0 || term.cwiseAbs().maxCoeff() == 0.0) return result;
    if (k > max_power) break;
    term /= k;
    result += term;
  }
  throw Error(ErrorCode::non_nilpotent,
              "exponential series did not terminate within " + std::to_string(max_power) + " powers");
}

OperatorMatrix exp_antihermitian(const OperatorMatrix& m) {
  if (!m.is_square()) throw Error(ErrorCode::shape, "exponential of a rectangular operator");
  const double s = m.max_symmetry();
  if (!(s < 1e-10)) throw Error(ErrorCode::shape, "operator is not anti-Hermitian (max |M + M^T| = " +
                                                      std::to_string(s) + ")");
  const Eigen::MatrixXd a = m.to_dense();
  const Eigen::Index n = a.rows();
  if (n == 0) return m;
  const Eigen::MatrixXcd ia = std::complex<double>(0.0, 1.0) * a.cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ia);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::convergence, "eigendecomposition of iM failed");
  // M = -i V diag(l) V^H, so exp(M) = V diag(exp(-i l)) V^H.
  const Eigen::VectorXcd phases = (std::complex<double>(0.0, -1.0) * es.eigenvalues().cast<std::complex<double>>())
                                      .array()
                                      .exp()
                                      .matrix();
  const Eigen::MatrixXcd u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  OperatorMatrix::Dense real = u.real();
  if (m.is_dense()) return {m.space(), std::move(real)};
  return {m.space(), OperatorMatrix::Sparse(real.sparseView())};
}

// --------------------------------------------------------- eigensolvers

namespace {

Eigen::VectorXd normalize_sign(Eigen::VectorXd v) {
  v.normalize();
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0) v = -v;
  return v;
}

Eigenpair davidson(const OperatorMatrix& m, const EigenOptions& opt) {
  const Eigen::Index n = m.rows();
  const Eigen::VectorXd diag = m.diagonal();
  Eigen::Index start = 0;
  diag.minCoeff(&start);
  const Eigen::Index max_sub = std::min<Eigen::Index>(std::max(opt.davidson_max_subspace, 4), n);

  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, 1);
  v(start, 0) = 1.0;
  Eigen::MatrixXd av = m.apply(Eigen::MatrixXd(v));
  double residual = 0.0;
  for (int iter = 0; iter < opt.davidson_max_iter; ++iter) {
    const Eigen::MatrixXd sub = v.transpose() * av;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sub + sub.transpose()));
    const double theta = es.eigenvalues()[0];
    const Eigen::VectorXd s = es.eigenvectors().col(0);
    Eigen::VectorXd x = v * s;
    const Eigen::VectorXd r = av * s - theta * x;
    residual = r.norm();
    if (residual < opt.davidson_tol || v.cols() == n) return {theta, normalize_sign(x)};

    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = theta - diag[i];
      t[i] = std::abs(denom) > 1e-8 ? r[i] / denom : r[i] / 1e-8;
    }
    if (v.cols() >= max_sub) {
      // Restart from the current Ritz vector.
      x.normalize();
      v = x;
      av = m.apply(Eigen::MatrixXd(v));
    }
    for (int pass = 0; pass < 2; ++pass) t -= v * (v.transpose() * t);
    double norm = t.norm();
    if (norm < 1e-14) {
      // Preconditioned correction collapsed; fall back to the raw residual.
      t = r;
      for (int pass = 0; pass < 2; ++pass) t -= v * (v.transpose() * t);
      norm = t.norm();
      if (norm < 1e-14) return {theta, normalize_sign(x)};
    }
    t /= norm;
    v.conservativeResize(Eigen::NoChange, v.cols() + 1);
    v.col(v.cols() - 1) = t;
    av.conservativeResize(Eigen::NoChange, av.cols() + 1);
    av.col(av.cols() - 1) = m.apply(Eigen::VectorXd(t));
  }
  throw Error(ErrorCode::convergence, "Davidson did not converge in " + std::to_string(opt.davidson_max_iter) +
                                          " iterations; residual norm " + std::to_string(residual));
}

}  // namespace

Eigenpair ground_state(const OperatorMatrix& m, const EigenOptions& options) {
  if (!m.is_square() || m.rows() == 0) throw Error(ErrorCode::shape, "ground state of an empty or rectangular matrix");
  if (options.mode == EigenMode::hermitian) {
    const double a = m.max_asymmetry();
    if (!(a < 1e-10)) throw Error(ErrorCode::shape, "Hermitian eigensolver on a matrix with asymmetry " +
                                                        std::to_string(a));
    const bool dense = options.solver == EigenSolverKind::dense ||
                       (options.solver == EigenSolverKind::automatic && m.rows() <= kDenseLimit);
    if (!dense) return davidson(m, options);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.to_dense());
    if (es.info() != Eigen::Success) throw Error(ErrorCode::convergence, "dense eigensolver failed");
    return {es.eigenvalues()[0], normalize_sign(es.eigenvectors().col(0))};
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(m.to_dense());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::convergence, "non-Hermitian eigensolver failed");
  Eigen::Index k = 0;
  es.eigenvalues().real().minCoeff(&k);
  Eigen::VectorXcd z = es.eigenvectors().col(k);
  Eigen::Index big = 0;
  z.cwiseAbs().maxCoeff(&big);
  z *= std::conj(z[big]) / std::abs(z[big]);
  return {es.eigenvalues()[k].real(), normalize_sign(z.real())};
}

Eigen::VectorXd spectrum(const OperatorMatrix& m) {
  if (!m.is_square()) throw Error(ErrorCode::shape, "spectrum of a rectangular matrix");
  const Eigen::MatrixXd d = m.to_dense();
  if (d.size() == 0) return {};
  if (m.hermitian_hint() || m.max_asymmetry() < 1e-10) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(d, false);
  Eigen::VectorXd out = es.eigenvalues().real();
  std::sort(out.begin(), out.end());
  return out;
}

OperatorMatrix similarity_transform(const OperatorMatrix& h, const OperatorMatrix& a, TransformMode mode) {
  if (mode == TransformMode::nilpotent) {
    return exp_nilpotent(a * -1.0) * h * exp_nilpotent(a);
  }
  const OperatorMatrix u = exp_antihermitian(a);
  OperatorMatrix out = u.adjoint() * h * u;
  if (h.hermitian_hint()) return out.hermitized();
  return out;
}

OperatorMatrix restrict_to(const OperatorMatrix& m, SpacePtr sub) {
  if (!m.is_square()) throw Error(ErrorCode::shape, "restriction of a rectangular operator");
  const auto idx = embedding(*sub, *m.space());
  if (m.is_dense()) {
    OperatorMatrix::Dense d = m.dense()(idx, idx);
    return {std::move(sub), std::move(d), m.hermitian_hint()};
  }
  std::vector<Eigen::Index> inverse(static_cast<std::size_t>(m.rows()), -1);
  for (std::size_t k = 0; k < idx.size(); ++k) inverse[static_cast<std::size_t>(idx[k])] = static_cast<Eigen::Index>(k);
  Triplets trips;
  const auto& s = m.sparse();
  for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
    const Eigen::Index nr = inverse[static_cast<std::size_t>(r)];
    if (nr < 0) continue;
    for (OperatorMatrix::Sparse::InnerIterator it(s, r); it; ++it) {
      const Eigen::Index nc = inverse[static_cast<std::size_t>(it.col())];
      if (nc >= 0) trips.emplace_back(nr, nc, it.value());
    }
  }
  OperatorMatrix out = from_triplets(sub, sub, trips, Storage::automatic);
  return m.hermitian_hint() ? out.with_hint(true) : out;
}

}  // namespace ccdf
