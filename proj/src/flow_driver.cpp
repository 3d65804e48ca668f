#include "ccdf/flow_driver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ccdf/error.hpp"

namespace ccdf {

FlowPlan make_plan(const std::vector<SesAlgebra>& algebras, const ReferencePartition& partition,
                   const FlowOptions& options) {
  if (algebras.empty()) throw Error(ErrorCode::usage, "flow plan needs at least one algebra");
  FlowPlan plan;
  plan.ordering = options.ordering;
  plan.sweep_tol = options.sweep_tol;
  plan.max_sweeps = options.max_sweeps;
  plan.local_tol = options.local_tol;
  plan.reference = partition.reference;
  plan.n_spin = static_cast<int>(partition.fock.rows());
  plan.orbital_energies = partition.orbital_energies();
  plan.algebras = algebras;

  if (options.ordering == FlowOrdering::energy) {
    auto key = [&](const SesAlgebra& h) {
      double s = 0.0;
      for (int i : Determinant{h.active_occupied}.occupied_list()) s += partition.fock(i, i);
      return s;
    };
    std::stable_sort(plan.algebras.begin(), plan.algebras.end(), [&](const SesAlgebra& a, const SesAlgebra& b) {
      const double ka = key(a), kb = key(b);
      if (ka != kb) return ka > kb;
      const auto ra = Determinant{a.active_occupied}.occupied_list(), rb = Determinant{b.active_occupied}.occupied_list();
      if (ra != rb) return ra < rb;
      return Determinant{a.active_virtual}.occupied_list() < Determinant{b.active_virtual}.occupied_list();
    });
  }

  const int max_rank = options.max_rank < 0 ? partition.reference.count() : options.max_rank;
  const auto all = manifold(partition.reference, plan.n_spin, std::max(1, max_rank));
  for (std::size_t i = 0; i < plan.algebras.size(); ++i) {
    const auto& h = plan.algebras[i];
    auto local = partition_labels(all, h).first;
    if (!is_ses(h, local, partition.reference, plan.n_spin))
      throw Error(ErrorCode::not_ses, "algebra " + h.to_string() + " is not an SES for its local manifold");
    for (const auto& label : local) plan.owner.try_emplace(label, i);
    plan.local_manifolds.push_back(std::move(local));
  }
  return plan;
}

std::vector<ExcitationLabel> union_manifold(const FlowPlan& plan) {
  std::vector<ExcitationLabel> out;
  for (const auto& local : plan.local_manifolds) out.insert(out.end(), local.begin(), local.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FlowResult run_flow(const OperatorMatrix& h, const FlowPlan& plan) {
  FlowResult result;
  result.pool = ClusterOperator(plan.reference);
  for (const auto& label : union_manifold(plan)) result.pool.set(label, 0.0);

  for (int sweep = 1; sweep <= plan.max_sweeps; ++sweep) {
    double sweep_change = 0.0;
    for (std::size_t i = 0; i < plan.algebras.size(); ++i) {
      const auto& alg = plan.algebras[i];
      auto [t_int, t_ext] = partition_cluster(result.pool, alg);
      const EffectiveHamiltonian heff = build_heff_ses(h, t_ext, alg);
      CcOptions local;
      local.tol = plan.local_tol;
      local.initial = t_int;
      CcResult solved;
      try {
        solved = solve_cc(heff.matrix, plan.reference, plan.orbital_energies, plan.local_manifolds[i], local);
      } catch (const Error& e) {
        throw Error(e.code(), "flow algebra " + alg.to_string() + ": " + e.what());
      }
      double change = 0.0;
      for (const auto& [label, value] : solved.t.amplitudes()) {
        if (plan.owner.at(label) < i) continue;
        change = std::max(change, std::abs(value - result.pool.get(label)));
        result.pool.set(label, value);
      }
      result.trace.push_back({sweep, i, solved.energy, change});
      sweep_change = std::max(sweep_change, change);
    }
    result.sweep_changes.push_back(sweep_change);
    result.sweeps = sweep;
    if (sweep_change < plan.sweep_tol) {
      result.energy = cc_residuals(h, plan.reference, result.pool, union_manifold(plan)).energy;
      return result;
    }
  }
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  for (double c : result.sweep_changes) os << ' ' << c;
  throw Error(ErrorCode::convergence, "flow did not converge in " + std::to_string(plan.max_sweeps) +
                                          " sweeps; amplitude changes per sweep:" + os.str());
}

EquivalenceCheck check_equivalence(const OperatorMatrix& h, const FlowPlan& plan, const FlowResult& flow,
                                   const CcOptions& direct_options) {
  const auto labels = union_manifold(plan);
  const CcResult direct = solve_cc(h, plan.reference, plan.orbital_energies, labels, direct_options);
  const CcResiduals at_pool = cc_residuals(h, plan.reference, flow.pool, labels);
  EquivalenceCheck out;
  out.flow_energy = flow.energy;
  out.direct_energy = direct.energy;
  out.max_union_residual = at_pool.r.size() == 0 ? 0.0 : at_pool.r.cwiseAbs().maxCoeff();
  return out;
}

std::vector<ExcitationLabel> scsaf_manifold(const Determinant& reference, int n_spin) {
  std::vector<ExcitationLabel> out;
  std::vector<int> occ_spatial;
  for (int i = 0; 2 * i + 1 < n_spin; ++i)
    if (reference.occupied(spin_orbital(i, 0)) || reference.occupied(spin_orbital(i, 1))) occ_spatial.push_back(i);
  for (auto& label : manifold(reference, n_spin, std::min(4, reference.count()))) {
    if (label.rank() <= 2) {
      out.push_back(std::move(label));
      continue;
    }
    bool inside_pair = false;
    for (std::size_t a = 0; a < occ_spatial.size() && !inside_pair; ++a) {
      for (std::size_t b = a + 1; b < occ_spatial.size() && !inside_pair; ++b) {
        const std::uint64_t pair = bit(spin_orbital(occ_spatial[a], 0)) | bit(spin_orbital(occ_spatial[a], 1)) |
                                   bit(spin_orbital(occ_spatial[b], 0)) | bit(spin_orbital(occ_spatial[b], 1));
        inside_pair = (label.occupied_mask() & ~pair) == 0;
      }
    }
    if (inside_pair) out.push_back(std::move(label));
  }
  return out;
}

std::vector<SesAlgebra> pair_algebras(const Determinant& reference, int n_spatial) {
  std::vector<int> occ, vir;
  for (int i = 0; i < n_spatial; ++i) {
    const bool a = reference.occupied(spin_orbital(i, 0)), b = reference.occupied(spin_orbital(i, 1));
    if (a != b) throw Error(ErrorCode::usage, "pair algebras need a closed-shell reference");
    (a ? occ : vir).push_back(i);
  }
  std::vector<SesAlgebra> out;
  for (std::size_t x = 0; x < occ.size(); ++x)
    for (std::size_t y = x + 1; y < occ.size(); ++y) out.push_back(make_spatial_algebra(reference, {occ[x], occ[y]}, vir));
  return out;
}

FlowDensity flow_density(const SesAlgebra& algebra, const ClusterOperator& pool, const OperatorMatrix& h) {
  const auto [t_int, t_ext] = partition_cluster(pool, algebra);
  const EffectiveHamiltonian heff = build_heff_ses(h, t_ext, algebra);
  const SpacePtr& space = heff.matrix.space();
  const auto labels = t_int.labels();

  const CcResiduals local = cc_residuals(heff.matrix, pool.reference(), t_int, labels);
  const ClusterOperator lambda = solve_lambda(heff.matrix, t_int, labels, local.energy);

  const OperatorMatrix tm = build_cluster_matrix(t_int, space);
  const OperatorMatrix minus_t = tm * -1.0;
  const Eigen::VectorXd bra = lambda_bra(*space, lambda);
  const Eigen::VectorXd ket = internal_ket(heff, t_int);

  FlowDensity out;
  out.algebra = algebra;
  out.orbitals = algebra.active_orbitals();
  out.local_energy = local.energy;
  const auto n = static_cast<Eigen::Index>(out.orbitals.size());
  out.gamma = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) {
      const int pp = out.orbitals[static_cast<std::size_t>(p)], qq = out.orbitals[static_cast<std::size_t>(q)];
      if (spin_of(pp) != spin_of(qq)) continue;
      const OperatorMatrix e_pq = build_operator_matrix({OperatorTerm{1.0, {cre(pp), ann(qq)}}}, space, space);
      out.gamma(p, q) = bra.dot(exp_nilpotent_apply(minus_t, e_pq.apply(ket)));
    }
  }
  return out;
}

}  // namespace ccdf
