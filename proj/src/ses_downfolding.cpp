#include "ccdf/ses_downfolding.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <unordered_set>

#include "ccdf/error.hpp"

namespace ccdf {

namespace {

std::string join_indices(std::uint64_t mask, bool spatial) {
  std::string s;
  for (int p = 0; p < kMaxSpinOrbitals; ++p) {
    if (!((mask >> p) & 1U)) continue;
    if (spatial && spin_of(p) == 1) continue;
    if (!s.empty()) s += ",";
    s += std::to_string(spatial ? spatial_of(p) : p);
  }
  return s;
}

std::uint64_t spatial_pair(int i) { return bit(spin_orbital(i, 0)) | bit(spin_orbital(i, 1)); }

void check_sets(const Determinant& reference, std::uint64_t occ, std::uint64_t vir) {
  if ((occ & ~reference.bits) != 0) throw Error(ErrorCode::usage, "active occupied orbital not occupied in the reference");
  if ((vir & reference.bits) != 0) throw Error(ErrorCode::usage, "active virtual orbital occupied in the reference");
}

}  // namespace

std::vector<int> SesAlgebra::active_orbitals() const {
  return Determinant{active_mask()}.occupied_list();
}

std::string SesAlgebra::to_string() const {
  const bool spatial = mode == AlgebraMode::spatial;
  return std::string(spatial ? "g" : "g_so") + "(R={" + join_indices(active_occupied, spatial) + "},S={" +
         join_indices(active_virtual, spatial) + "})";
}

SesAlgebra make_spatial_algebra(const Determinant& reference, const std::vector<int>& occupied_spatial,
                                const std::vector<int>& virtual_spatial) {
  SesAlgebra h;
  for (int i : occupied_spatial) {
    if (i < 0 || 2 * i + 1 >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "spatial orbital out of range");
    h.active_occupied |= spatial_pair(i);
  }
  for (int a : virtual_spatial) {
    if (a < 0 || 2 * a + 1 >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "spatial orbital out of range");
    h.active_virtual |= spatial_pair(a);
  }
  check_sets(reference, h.active_occupied, h.active_virtual);
  return h;
}

SesAlgebra make_spin_algebra(const Determinant& reference, const std::vector<int>& occupied_spin,
                             const std::vector<int>& virtual_spin) {
  SesAlgebra h;
  h.mode = AlgebraMode::spin_orbital;
  for (int p : occupied_spin) {
    if (p < 0 || p >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "spin orbital out of range");
    h.active_occupied |= bit(p);
  }
  for (int p : virtual_spin) {
    if (p < 0 || p >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "spin orbital out of range");
    h.active_virtual |= bit(p);
  }
  check_sets(reference, h.active_occupied, h.active_virtual);
  return h;
}

SesAlgebra full_algebra(const Determinant& reference, int n_spin) {
  const std::uint64_t all = n_spin == kMaxSpinOrbitals ? ~std::uint64_t{0} : bit(n_spin) - 1;
  SesAlgebra h;
  h.active_occupied = reference.bits & all;
  h.active_virtual = ~reference.bits & all;
  return h;
}

// ------------------------------------------------------------ projector

ActiveProjector::ActiveProjector(const SesAlgebra& algebra, const Determinant& reference, SpacePtr parent)
    : algebra_(algebra), reference_(reference), parent_(std::move(parent)) {
  if (algebra_.mode == AlgebraMode::spatial) {
    const std::uint64_t m = algebra_.active_mask();
    if (((m & kAlphaMask) << 1) != (m & kBetaMask))
      throw Error(ErrorCode::usage, "spatial-mode algebra is not closed under spin pairing");
  }
  std::vector<Determinant> members;
  for (Eigen::Index k = 0; k < parent_->size(); ++k) {
    const Determinant d = (*parent_)[k];
    if (algebra_.in_active_space(reference_, d)) {
      members.push_back(d);
      embedding_.push_back(k);
    }
  }
  if (members.empty()) throw Error(ErrorCode::empty_space, "no active determinant for " + algebra_.to_string());
  space_ = make_space(parent_->n_spin(), parent_->n_electrons(), parent_->ms2(), std::move(members));
}

OperatorMatrix ActiveProjector::project(const OperatorMatrix& m) const {
  if (!m.space()->same_basis(*parent_)) throw Error(ErrorCode::shape, "operator is not on the projector's parent space");
  return restrict_to(m, space_);
}

Eigen::VectorXd ActiveProjector::restrict(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(embedding_.size()));
  for (std::size_t k = 0; k < embedding_.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[embedding_[k]];
  return out;
}

Eigen::VectorXd ActiveProjector::embed(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(parent_->size());
  for (std::size_t k = 0; k < embedding_.size(); ++k) out[embedding_[k]] = v[static_cast<Eigen::Index>(k)];
  return out;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::ses_cc:
      return "SES-CC";
    case Provenance::ducc_exact:
      return "DUCC-exact";
    case Provenance::ducc_a1:
      return "DUCC-A1";
    case Provenance::ducc_a3:
      return "DUCC-A3";
    case Provenance::ducc_a4:
      return "DUCC-A4";
    case Provenance::ducc_a6:
      return "DUCC-A6";
    case Provenance::ducc_a7:
      return "DUCC-A7";
  }
  return "unknown";
}

// ----------------------------------------------------------- partition

std::pair<ClusterOperator, ClusterOperator> partition_cluster(const ClusterOperator& t, const SesAlgebra& h) {
  ClusterOperator internal(t.reference()), external(t.reference());
  for (const auto& [label, value] : t.amplitudes()) (h.contains(label) ? internal : external).set(label, value);
  return {std::move(internal), std::move(external)};
}

std::pair<std::vector<ExcitationLabel>, std::vector<ExcitationLabel>> partition_labels(
    const std::vector<ExcitationLabel>& labels, const SesAlgebra& h) {
  std::pair<std::vector<ExcitationLabel>, std::vector<ExcitationLabel>> out;
  for (const auto& label : labels) (h.contains(label) ? out.first : out.second).push_back(label);
  return out;
}

ClusterOperator merge_cluster(const ClusterOperator& a, const ClusterOperator& b) {
  if (a.reference() != b.reference()) throw Error(ErrorCode::usage, "merging cluster operators with different references");
  ClusterOperator out = a;
  for (const auto& [label, value] : b.amplitudes()) {
    if (out.contains(label)) throw Error(ErrorCode::conflict, "label " + label.to_string() + " present in both parts");
    out.set(label, value);
  }
  return out;
}

bool is_ses(const SesAlgebra& h, const std::vector<ExcitationLabel>& manifold, const Determinant& reference,
            int n_spin) {
  std::unordered_set<std::uint64_t> support{reference.bits};
  for (const auto& label : manifold) {
    if (!h.contains(label)) continue;
    if (const auto act = excite(label, reference)) support.insert(act->det.bits);
  }
  // Walk every same-sector determinant of the active orbitals.
  const SpacePtr sector = enumerate_space(n_spin, reference.count(), reference.ms2());
  for (const auto& d : sector->basis())
    if (h.in_active_space(reference, d) && !support.count(d.bits)) return false;
  return true;
}

// --------------------------------------------------------- effective H

OperatorMatrix project_similarity(const OperatorMatrix& h, const OperatorMatrix& a, TransformMode mode,
                                  const ActiveProjector& projector) {
  if (!h.space()->same_basis(*projector.parent()) || !a.space()->same_basis(*projector.parent()))
    throw Error(ErrorCode::shape, "transform operands are not on the projector's parent space");
  const auto& emb = projector.embedding();
  const auto n_act = static_cast<Eigen::Index>(emb.size());
  const Eigen::Index n = h.rows();
  Eigen::MatrixXd out(n_act, n_act);
  if (mode == TransformMode::nilpotent) {
    const OperatorMatrix minus_a = a * -1.0;
    for (Eigen::Index j = 0; j < n_act; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[emb[static_cast<std::size_t>(j)]] = 1.0;
      const Eigen::VectorXd col = exp_nilpotent_apply(minus_a, h.apply(exp_nilpotent_apply(a, e)));
      for (Eigen::Index i = 0; i < n_act; ++i) out(i, j) = col[emb[static_cast<std::size_t>(i)]];
    }
  } else {
    const Eigen::MatrixXd u = exp_antihermitian(a).to_dense();
    Eigen::MatrixXd u_act(n, n_act);
    for (Eigen::Index j = 0; j < n_act; ++j) u_act.col(j) = u.col(emb[static_cast<std::size_t>(j)]);
    out = u_act.transpose() * h.apply(u_act);
  }
  return {projector.space(), std::move(out)};
}

EffectiveHamiltonian build_heff_ses(const OperatorMatrix& h, const ClusterOperator& t_ext, const SesAlgebra& algebra) {
  for (const auto& [label, value] : t_ext.amplitudes())
    if (algebra.contains(label))
      throw Error(ErrorCode::contamination, "internal label " + label.to_string() + " found in T_ext for " +
                                                algebra.to_string());
  const ActiveProjector projector(algebra, t_ext.reference(), h.space());
  const OperatorMatrix tm = build_cluster_matrix(t_ext, h.space());
  OperatorMatrix m = project_similarity(h, tm, TransformMode::nilpotent, projector);
  const double asym = m.max_asymmetry();
  return EffectiveHamiltonian{std::move(m), Provenance::ses_cc, algebra, t_ext.reference(), 0.0, asym, {}, {}};
}

Eigen::VectorXd internal_ket(const EffectiveHamiltonian& heff, const ClusterOperator& t_int) {
  const SpacePtr& space = heff.matrix.space();
  const auto ref = space->find(heff.reference);
  if (!ref) throw Error(ErrorCode::shape, "reference missing from the active basis");
  for (const auto& [label, value] : t_int.amplitudes())
    if (!heff.algebra.contains(label))
      throw Error(ErrorCode::contamination, "external label " + label.to_string() + " in T_int");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(space->size());
  e[*ref] = 1.0;
  return exp_nilpotent_apply(build_cluster_matrix(t_int, space), e);
}

double verify_ses_theorem(const EffectiveHamiltonian& heff, const ClusterOperator& t_int, double e_cc) {
  if (heff.provenance != Provenance::ses_cc)
    throw Error(ErrorCode::usage, "SES-CC verification needs an SES-CC effective Hamiltonian");
  const Eigen::VectorXd c = internal_ket(heff, t_int);
  return (heff.matrix.apply(c) + (heff.e_shift - e_cc) * c).norm();
}

CcRoot identify_cc_root(const EffectiveHamiltonian& heff, const ClusterOperator& t_int) {
  Eigen::VectorXd c = internal_ket(heff, t_int);
  c.normalize();
  Eigen::EigenSolver<Eigen::MatrixXd> es(heff.matrix.to_dense());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::convergence, "eigensolver failed on the effective Hamiltonian");
  CcRoot best;
  best.overlap = -1.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    Eigen::VectorXcd v = es.eigenvectors().col(k);
    v.normalize();
    const double ov = std::abs(v.dot(c.cast<std::complex<double>>()));
    if (ov > best.overlap + 1e-12) best = {es.eigenvalues()[k].real() + heff.e_shift, ov};
  }
  return best;
}

// ---------------------------------------------------------- enumeration

long long ses_ccsd_count(int n_o, int n_v) {
  return static_cast<long long>(n_o) * ((1LL << n_v) - 1) + static_cast<long long>(n_v) * ((1LL << n_o) - 1) -
         static_cast<long long>(n_o) * n_v;
}

namespace {

std::vector<SesAlgebra> enumerate_pairs(const std::vector<int>& occ, const std::vector<int>& vir) {
  if (occ.empty() || vir.empty()) throw Error(ErrorCode::empty_space, "SES enumeration needs occupied and virtual orbitals");
  if (occ.size() > 30 || vir.size() > 30) throw Error(ErrorCode::usage, "too many orbitals for SES enumeration");
  std::set<SesAlgebra> found;
  auto subset_mask = [](const std::vector<int>& pool, unsigned long sub) {
    std::uint64_t m = 0;
    for (std::size_t k = 0; k < pool.size(); ++k)
      if ((sub >> k) & 1U) m |= spatial_pair(pool[k]);
    return m;
  };
  for (int i : occ)
    for (unsigned long sub = 1; sub < (1UL << vir.size()); ++sub)
      found.insert(SesAlgebra{spatial_pair(i), subset_mask(vir, sub), AlgebraMode::spatial});
  for (int a : vir)
    for (unsigned long sub = 1; sub < (1UL << occ.size()); ++sub)
      found.insert(SesAlgebra{subset_mask(occ, sub), spatial_pair(a), AlgebraMode::spatial});
  return {found.begin(), found.end()};
}

}  // namespace

std::vector<SesAlgebra> enumerate_ses_ccsd(int n_o, int n_v) {
  if (n_o < 1 || n_v < 1) throw Error(ErrorCode::usage, "SES enumeration needs n_o, n_v >= 1");
  std::vector<int> occ(static_cast<std::size_t>(n_o)), vir(static_cast<std::size_t>(n_v));
  for (int k = 0; k < n_o; ++k) occ[static_cast<std::size_t>(k)] = k;
  for (int k = 0; k < n_v; ++k) vir[static_cast<std::size_t>(k)] = n_o + k;
  return enumerate_pairs(occ, vir);
}

std::vector<SesAlgebra> enumerate_ses_ccsd(const Determinant& reference, int n_spatial) {
  std::vector<int> occ, vir;
  for (int i = 0; i < n_spatial; ++i) {
    const bool a = reference.occupied(spin_orbital(i, 0)), b = reference.occupied(spin_orbital(i, 1));
    if (a != b) throw Error(ErrorCode::usage, "spatial SES enumeration needs a closed-shell reference");
    (a ? occ : vir).push_back(i);
  }
  return enumerate_pairs(occ, vir);
}

SesReport verify_algebra(const OperatorMatrix& h, const ClusterOperator& t, double e_cc, const SesAlgebra& algebra) {
  const auto [t_int, t_ext] = partition_cluster(t, algebra);
  const EffectiveHamiltonian heff = build_heff_ses(h, t_ext, algebra);
  SesReport report;
  report.algebra = algebra;
  report.active_dimension = heff.matrix.rows();
  report.residual = verify_ses_theorem(heff, t_int, e_cc);
  report.eigenvalue = identify_cc_root(heff, t_int).eigenvalue;
  report.delta_e = std::abs(report.eigenvalue - e_cc);
  report.max_asymmetry = heff.asymmetry_before_hermitization;
  return report;
}

}  // namespace ccdf
