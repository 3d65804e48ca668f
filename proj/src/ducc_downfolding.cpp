#include "ccdf/ducc_downfolding.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <unordered_map>

#include "ccdf/error.hpp"

namespace ccdf {

namespace {

void check_external(const ClusterOperator& t_ext, const SesAlgebra& algebra) {
  for (const auto& [label, value] : t_ext.amplitudes())
    if (algebra.contains(label))
      throw Error(ErrorCode::contamination, "internal label " + label.to_string() + " found in T_ext for " +
                                                algebra.to_string());
}

Provenance provenance_of(DuccVariant v) {
  switch (canonical(v)) {
    case DuccVariant::a1:
      return Provenance::ducc_a1;
    case DuccVariant::a3:
      return Provenance::ducc_a3;
    case DuccVariant::a4:
      return Provenance::ducc_a4;
    case DuccVariant::a6:
      return Provenance::ducc_a6;
    default:
      return Provenance::ducc_a7;
  }
}

std::string alias_note(DuccVariant v) {
  if (v == DuccVariant::a2) return "A2 evaluated as A4";
  if (v == DuccVariant::a5) return "A5 evaluated as A7";
  return {};
}

// Projects, records the asymmetry, then Hermitizes.
OperatorMatrix project_hermitian(const OperatorMatrix& m, const ActiveProjector& projector, double& asymmetry) {
  const OperatorMatrix p = projector.project(m.with_hint(false));
  asymmetry = p.max_asymmetry();
  return p.hermitized();
}

}  // namespace

SigmaOperator build_sigma_ext(const ClusterOperator& t_ext, SpacePtr space, const std::optional<SesAlgebra>& algebra) {
  if (algebra) check_external(t_ext, *algebra);
  const OperatorMatrix t = build_cluster_matrix(t_ext, std::move(space));
  return {t_ext, t - t.adjoint()};
}

EffectiveHamiltonian exact_ducc_heff(const OperatorMatrix& h, const SigmaOperator& sigma, const SesAlgebra& algebra) {
  check_external(sigma.generator, algebra);
  const ActiveProjector projector(algebra, sigma.generator.reference(), h.space());
  OperatorMatrix m = project_similarity(h, sigma.matrix, TransformMode::unitary, projector);
  const double asym = m.max_asymmetry();
  return {m.hermitized(), Provenance::ducc_exact, algebra, sigma.generator.reference(), 0.0, asym, {}, {}};
}

DuccVariant parse_variant(const std::string& name) {
  std::string s;
  for (char c : name)
    if (c != '(' && c != ')' && !std::isspace(static_cast<unsigned char>(c)))
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "a1") return DuccVariant::a1;
  if (s == "a2") return DuccVariant::a2;
  if (s == "a3") return DuccVariant::a3;
  if (s == "a4") return DuccVariant::a4;
  if (s == "a5") return DuccVariant::a5;
  if (s == "a6") return DuccVariant::a6;
  if (s == "a7") return DuccVariant::a7;
  throw Error(ErrorCode::usage, "unknown DUCC variant '" + name + "'");
}

std::string to_string(DuccVariant v) {
  switch (v) {
    case DuccVariant::a1:
      return "A1";
    case DuccVariant::a2:
      return "A2";
    case DuccVariant::a3:
      return "A3";
    case DuccVariant::a4:
      return "A4";
    case DuccVariant::a5:
      return "A5";
    case DuccVariant::a6:
      return "A6";
    case DuccVariant::a7:
      return "A7";
  }
  return "?";
}

DuccVariant canonical(DuccVariant v) {
  if (v == DuccVariant::a2) return DuccVariant::a4;
  if (v == DuccVariant::a5) return DuccVariant::a7;
  return v;
}

OperatorMatrix commutator_expansion(const OperatorMatrix& h, const OperatorMatrix& sigma, DuccVariant variant,
                                    const OperatorMatrix& f_n, double e_ref_expectation) {
  const DuccVariant v = canonical(variant);
  if (v == DuccVariant::a1) return h;
  const OperatorMatrix h_n = h - OperatorMatrix::identity(h.space()) * e_ref_expectation;
  const OperatorMatrix c1 = commutator(h_n, sigma);
  OperatorMatrix out = h + c1;
  if (v == DuccVariant::a4 || v == DuccVariant::a7) {
    const OperatorMatrix f1 = commutator(f_n, sigma);
    const OperatorMatrix f2 = commutator(f1, sigma);
    if (v == DuccVariant::a4) return out + f2 * 0.5;
    out += commutator(c1, sigma) * 0.5;
    out += commutator(f2, sigma) * (1.0 / 6.0);
    return out;
  }
  if (v == DuccVariant::a6) out += commutator(c1, sigma) * 0.5;
  return out;
}

EffectiveHamiltonian commutator_heff(const OperatorMatrix& h, const SigmaOperator& sigma, DuccVariant variant,
                                     const ReferencePartition& partition, const SesAlgebra& algebra) {
  check_external(sigma.generator, algebra);
  const ActiveProjector projector(algebra, partition.reference, h.space());
  const auto ref = h.space()->find(partition.reference);
  if (!ref) throw Error(ErrorCode::shape, "reference missing from the Hamiltonian's space");
  const OperatorMatrix f_n = normal_fock_matrix(partition, h.space());
  const OperatorMatrix full = commutator_expansion(h, sigma.matrix, variant, f_n, h(*ref, *ref));
  double asym = 0.0;
  OperatorMatrix m = project_hermitian(full, projector, asym);
  return {std::move(m), provenance_of(variant), algebra, partition.reference, 0.0, asym, alias_note(variant), {}};
}

namespace {

OperatorMatrix sector_transform(const SpinIntegralSet& integrals, const ReferencePartition& partition,
                                const ClusterOperator& t_ext, const SesAlgebra& algebra,
                                std::optional<DuccVariant> variant, const SpacePtr& space, double& asymmetry) {
  const ActiveProjector projector(algebra, partition.reference, space);
  const OperatorMatrix h = build_hamiltonian_matrix(integrals, space);
  const OperatorMatrix t = build_cluster_matrix(t_ext, space);
  const OperatorMatrix sigma = t - t.adjoint();
  if (!variant) {
    OperatorMatrix m = project_similarity(h, sigma, TransformMode::unitary, projector);
    asymmetry = m.max_asymmetry();
    return m.hermitized();
  }
  const OperatorMatrix f_n = normal_fock_matrix(partition, space);
  return project_hermitian(commutator_expansion(h, sigma, *variant, f_n, partition.e_ref), projector, asymmetry);
}

}  // namespace

EffectiveHamiltonian ducc_family(const SpinIntegralSet& integrals, const ReferencePartition& partition,
                                 const ClusterOperator& t_ext, const SesAlgebra& algebra,
                                 std::optional<DuccVariant> variant, const std::vector<int>& electron_counts) {
  check_external(t_ext, algebra);
  const int n_spin = integrals.n_spin();
  const int n = partition.reference.count();
  std::vector<int> counts = electron_counts;
  if (std::find(counts.begin(), counts.end(), n) == counts.end()) counts.push_back(n);
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  std::map<int, OperatorMatrix> sectors;
  double asym_n = 0.0;
  for (int count : counts) {
    if (count < 0 || count > n_spin) throw Error(ErrorCode::empty_space, "sector with " + std::to_string(count) + " electrons");
    double asym = 0.0;
    sectors.emplace(count, sector_transform(integrals, partition, t_ext, algebra, variant,
                                            enumerate_space(n_spin, count), asym));
    if (count == n) asym_n = asym;
  }
  // N-electron block on the reference's ms2 sector.
  const OperatorMatrix& full_n = sectors.at(n);
  std::vector<Determinant> same_ms2;
  for (const auto& d : full_n.space()->basis())
    if (d.ms2() == partition.reference.ms2()) same_ms2.push_back(d);
  OperatorMatrix m = restrict_to(full_n, make_space(n_spin, n, partition.reference.ms2(), std::move(same_ms2)));
  const Provenance prov = variant ? provenance_of(*variant) : Provenance::ducc_exact;
  return {std::move(m), prov, algebra, partition.reference, 0.0, asym_n, variant ? alias_note(*variant) : "",
          std::move(sectors)};
}

EffectiveHamiltonian bare_family(const SpinIntegralSet& integrals, const Determinant& reference,
                                 const SesAlgebra& algebra, const std::vector<int>& electron_counts) {
  ReferencePartition partition;
  partition.reference = reference;
  partition.fock = Eigen::MatrixXd::Zero(integrals.n_spin(), integrals.n_spin());
  EffectiveHamiltonian out =
      ducc_family(integrals, partition, ClusterOperator(reference), algebra, DuccVariant::a1, electron_counts);
  return out;
}

// ------------------------------------------------------------ extraction

namespace {

struct Block {
  std::vector<Determinant> dets;  // compressed, ascending
  Eigen::MatrixXd m;              // phase-adjusted source matrix
  bool is_n = false;
};

struct Compression {
  std::vector<int> active;  // parent index of each active index
  std::uint64_t active_mask = 0;

  [[nodiscard]] Determinant compress(Determinant d) const {
    std::uint64_t c = 0;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (d.occupied(active[k])) c |= bit(static_cast<int>(k));
    return Determinant{c};
  }
  // Sign of reordering the creation string so that inactive occupied orbitals come first.
  [[nodiscard]] int sign(Determinant d) const {
    const std::uint64_t core = d.bits & ~active_mask;
    int swaps = 0;
    for (int a : active)
      if (d.occupied(a)) swaps += std::popcount(a + 1 >= 64 ? std::uint64_t{0} : core >> (a + 1));
    return (swaps & 1) ? -1 : 1;
  }
};

Block make_block(const OperatorMatrix& m, const Compression& comp) {
  Block b;
  const auto& basis = m.space()->basis();
  b.dets.reserve(basis.size());
  Eigen::VectorXd eps(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) {
    b.dets.push_back(comp.compress(basis[k]));
    eps[static_cast<Eigen::Index>(k)] = comp.sign(basis[k]);
  }
  if (!std::is_sorted(b.dets.begin(), b.dets.end()))
    throw Error(ErrorCode::shape, "active determinants do not share one inactive occupation");
  b.m = eps.asDiagonal() * m.to_dense() * eps.asDiagonal();
  return b;
}

std::vector<ManyBodyTerm> operator_basis(int n_act, int max_rank) {
  std::vector<ManyBodyTerm> out;
  out.push_back({{}, {}, 0.0});
  std::vector<std::vector<std::vector<int>>> subsets(static_cast<std::size_t>(max_rank + 1));
  std::vector<int> pick;
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (static_cast<int>(pick.size()) == k) {
      subsets[static_cast<std::size_t>(k)].push_back(pick);
      return;
    }
    for (int p = start; p < n_act; ++p) {
      pick.push_back(p);
      rec(p + 1, k);
      pick.pop_back();
    }
  };
  for (int k = 1; k <= max_rank; ++k) rec(0, k);
  auto ms2 = [](const std::vector<int>& s) {
    int m = 0;
    for (int p : s) m += spin_of(p) == 0 ? 1 : -1;
    return m;
  };
  for (int k = 1; k <= max_rank; ++k)
    for (const auto& cre_set : subsets[static_cast<std::size_t>(k)])
      for (const auto& ann_set : subsets[static_cast<std::size_t>(k)])
        if (ms2(cre_set) == ms2(ann_set)) out.push_back({cre_set, ann_set, 0.0});
  return out;
}

std::vector<LadderOp> term_string(const ManyBodyTerm& t) {
  std::vector<LadderOp> ops;
  for (int p : t.creators) ops.push_back(cre(p));
  for (auto it = t.annihilators.rbegin(); it != t.annihilators.rend(); ++it) ops.push_back(ann(*it));
  return ops;
}

struct Hit {
  Eigen::Index op;
  double value;
};

// Nonzero entries of every basis operator on one block, grouped by position.
std::unordered_map<std::uint64_t, std::vector<Hit>> block_hits(const Block& b, const std::vector<ManyBodyTerm>& ops) {
  std::unordered_map<std::uint64_t, std::vector<Hit>> hits;
  const auto n = static_cast<std::uint64_t>(b.dets.size());
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto str = term_string(ops[k]);
    for (std::size_t c = 0; c < b.dets.size(); ++c) {
      const auto act = apply_string(str, b.dets[c]);
      if (!act) continue;
      const auto it = std::lower_bound(b.dets.begin(), b.dets.end(), act->det);
      if (it == b.dets.end() || *it != act->det) continue;
      const auto r = static_cast<std::uint64_t>(it - b.dets.begin());
      hits[r * n + c].push_back({static_cast<Eigen::Index>(k), static_cast<double>(act->phase)});
    }
  }
  return hits;
}

Eigen::MatrixXd recompose_block(const Block& b, const std::vector<ManyBodyTerm>& terms) {
  const auto n = static_cast<Eigen::Index>(b.dets.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : terms) {
    if (t.value == 0.0) continue;
    const auto str = term_string(t);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto act = apply_string(str, b.dets[static_cast<std::size_t>(c)]);
      if (!act) continue;
      const auto it = std::lower_bound(b.dets.begin(), b.dets.end(), act->det);
      if (it == b.dets.end() || *it != act->det) continue;
      out(it - b.dets.begin(), c) += t.value * act->phase;
    }
  }
  return out;
}

Compression compression_for(const EffectiveHamiltonian& heff) {
  Compression comp;
  comp.active = heff.algebra.active_orbitals();
  comp.active_mask = heff.algebra.active_mask();
  return comp;
}

}  // namespace

DowncoefExport extract_many_body(const EffectiveHamiltonian& heff, int max_rank) {
  if (max_rank < 0) throw Error(ErrorCode::usage, "max_rank must be >= 0");
  const Compression comp = compression_for(heff);
  const int n_act = static_cast<int>(comp.active.size());
  if (n_act > 16) throw Error(ErrorCode::usage, "extraction supports at most 16 active spin orbitals");
  const int n = heff.reference.count();
  const int n_core = std::popcount(heff.reference.bits & ~comp.active_mask);

  std::vector<Block> blocks;
  std::vector<int> fitted;
  if (heff.sectors.empty()) {
    blocks.push_back(make_block(heff.matrix, comp));
    blocks.back().is_n = true;
    fitted.push_back(n);
  } else {
    for (const auto& [count, m] : heff.sectors) {
      blocks.push_back(make_block(m, comp));
      fitted.push_back(count);
    }
  }
  Block n_block = make_block(heff.matrix, comp);

  std::vector<ManyBodyTerm> ops = operator_basis(n_act, max_rank);
  const auto n_ops = static_cast<Eigen::Index>(ops.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_ops, n_ops);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ops);
  for (const auto& b : blocks) {
    const auto nb = static_cast<std::uint64_t>(b.dets.size());
    for (const auto& [pos, list] : block_hits(b, ops)) {
      const double target = b.m(static_cast<Eigen::Index>(pos / nb), static_cast<Eigen::Index>(pos % nb));
      for (const auto& x : list) {
        rhs[x.op] += x.value * target;
        for (const auto& y : list) gram(x.op, y.op) += x.value * y.value;
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::linear_solve, "Gram eigendecomposition failed");
  const double cutoff = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n_ops);
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < n_ops; ++k) {
    if (es.eigenvalues()[k] > cutoff) {
      inv[k] = 1.0 / es.eigenvalues()[k];
      ++rank;
    }
  }
  const Eigen::VectorXd coef = es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * rhs);

  DowncoefExport out;
  out.active_orbitals = comp.active;
  out.n_active_electrons = n - n_core;
  out.provenance = to_string(heff.provenance);
  out.max_rank = max_rank;
  out.gram_size = n_ops;
  out.gram_rank = rank;
  out.rank_deficient = rank < n_ops;
  out.fitted_sectors = fitted;
  out.one_body = Eigen::MatrixXd::Zero(n_act, n_act);
  out.two_body = SpinIntegralSet(n_act);
  for (Eigen::Index k = 0; k < n_ops; ++k) {
    ManyBodyTerm t = ops[static_cast<std::size_t>(k)];
    t.value = coef[k];
    const std::size_t rank_k = t.creators.size();
    if (rank_k == 0) {
      out.e_scalar = t.value + heff.e_shift;
    } else if (rank_k == 1) {
      out.one_body(t.creators[0], t.annihilators[0]) = t.value;
    } else if (rank_k == 2) {
      const int p = t.creators[0], q = t.creators[1], r = t.annihilators[0], s = t.annihilators[1];
      out.two_body.set_v(p, q, r, s, t.value);
      out.two_body.set_v(q, p, r, s, -t.value);
      out.two_body.set_v(p, q, s, r, -t.value);
      out.two_body.set_v(q, p, s, r, t.value);
    }
    out.terms.push_back(std::move(t));
  }
  out.two_body.e_core = out.e_scalar;
  out.two_body.h = out.one_body;

  auto terms_no_shift = out.terms;
  const Eigen::MatrixXd rebuilt = recompose_block(n_block, terms_no_shift);
  out.recomposition_error = rebuilt.size() == 0 ? 0.0 : (rebuilt - n_block.m).cwiseAbs().maxCoeff();
  return out;
}

OperatorMatrix recompose(const DowncoefExport& coef, const EffectiveHamiltonian& heff) {
  const Compression comp = compression_for(heff);
  if (comp.active != coef.active_orbitals) throw Error(ErrorCode::shape, "export does not match the active space");
  Block b = make_block(heff.matrix, comp);
  Eigen::MatrixXd m = recompose_block(b, coef.terms);
  // Undo the phase adjustment so the result lives on heff's own basis.
  Eigen::VectorXd eps(static_cast<Eigen::Index>(b.dets.size()));
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = comp.sign((*heff.matrix.space())[k]);
  m = eps.asDiagonal() * m * eps.asDiagonal();
  m += heff.e_shift * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  OperatorMatrix out(heff.matrix.space(), std::move(m));
  return out.max_asymmetry() < 1e-10 ? out.hermitized() : out;
}

void write_downcoef(std::ostream& out, const DowncoefExport& coef) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(16);
  out << "# ccdf downfolded Hamiltonian, 0-based active spin-orbital indices\n";
  out << "provenance " << coef.provenance << '\n';
  out << "active_orbitals";
  for (int p : coef.active_orbitals) out << ' ' << p;
  out << '\n';
  out << "n_active " << coef.active_orbitals.size() << '\n';
  out << "n_active_electrons " << coef.n_active_electrons << '\n';
  out << "max_rank " << coef.max_rank << '\n';
  out << "e_scalar " << coef.e_scalar << '\n';
  out << "recomposition_error " << coef.recomposition_error << '\n';
  out << "rank_deficient " << (coef.rank_deficient ? 1 : 0) << '\n';
  for (std::size_t rank = 1; rank <= static_cast<std::size_t>(coef.max_rank); ++rank) {
    out << (rank == 1 ? "one_body" : rank == 2 ? "two_body" : "rank_" + std::to_string(rank)) << '\n';
    for (const auto& t : coef.terms) {
      if (t.creators.size() != rank || std::abs(t.value) < 1e-14) continue;
      for (int p : t.creators) out << p << ' ';
      for (int q : t.annihilators) out << q << ' ';
      out << t.value << '\n';
    }
  }
  out.flags(flags);
  out.precision(prec);
}

ActiveSpectrum diagonalize_active(const EffectiveHamiltonian& heff) {
  if (heff.provenance == Provenance::ses_cc)
    throw Error(ErrorCode::usage, "diagonalize_active needs a Hermitian DUCC effective Hamiltonian");
  const double asym = heff.matrix.max_asymmetry();
  if (!(asym < 1e-10)) throw Error(ErrorCode::shape, "effective Hamiltonian asymmetry " + std::to_string(asym));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(heff.matrix.to_dense());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::convergence, "active-space eigensolver failed");
  ActiveSpectrum out;
  out.eigenvalues = es.eigenvalues().array() + heff.e_shift;
  Eigen::VectorXd v = es.eigenvectors().col(0);
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  out.ground_vector = v[k] < 0 ? Eigen::VectorXd(-v) : v;
  return out;
}

}  // namespace ccdf
