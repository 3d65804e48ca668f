#include "ccdf/cc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "ccdf/error.hpp"

namespace ccdf {

namespace {

Eigen::Index reference_index(const DeterminantSpace& space, const Determinant& reference) {
  const auto idx = space.find(reference);
  if (!idx) throw Error(ErrorCode::shape, "reference " + reference.to_string(space.n_spin()) + " is not in the space");
  return *idx;
}

Eigen::VectorXd unit(Eigen::Index n, Eigen::Index k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[k] = 1.0;
  return v;
}

// exp(-T) H exp(T) v
Eigen::VectorXd hbar_apply(const OperatorMatrix& h, const OperatorMatrix& t, const OperatorMatrix& minus_t,
                           const Eigen::VectorXd& v) {
  return exp_nilpotent_apply(minus_t, h.apply(exp_nilpotent_apply(t, v)));
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

ClusterOperator to_cluster(const Determinant& reference, const std::vector<ExcitationLabel>& manifold,
                           const Eigen::VectorXd& amps) {
  ClusterOperator t(reference);
  for (std::size_t k = 0; k < manifold.size(); ++k) t.set(manifold[k], amps[static_cast<Eigen::Index>(k)]);
  return t;
}

std::string format_history(const std::vector<double>& history) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  const std::size_t from = history.size() > 6 ? history.size() - 6 : 0;
  if (from > 0) os << "... ";
  for (std::size_t k = from; k < history.size(); ++k) os << history[k] << (k + 1 < history.size() ? " " : "");
  return os.str();
}

}  // namespace

std::vector<ExcitedDeterminant> excited_determinants(const DeterminantSpace& space, const Determinant& reference,
                                                     const std::vector<ExcitationLabel>& manifold) {
  std::vector<ExcitedDeterminant> out;
  out.reserve(manifold.size());
  for (const auto& label : manifold) {
    const auto act = excite(label, reference);
    if (!act) throw Error(ErrorCode::usage, "label " + label.to_string() + " does not excite the reference");
    const auto idx = space.find(act->det);
    if (!idx) throw Error(ErrorCode::shape, "excited determinant of " + label.to_string() + " is outside the space");
    out.push_back({act->det, act->phase, *idx});
  }
  return out;
}

CcResiduals cc_residuals(const OperatorMatrix& h, const Determinant& reference, const ClusterOperator& t,
                         const std::vector<ExcitationLabel>& manifold) {
  const auto& space = *h.space();
  const Eigen::Index ref = reference_index(space, reference);
  const auto dets = excited_determinants(space, reference, manifold);
  const OperatorMatrix tm = build_cluster_matrix(t, h.space());
  const Eigen::VectorXd z = hbar_apply(h, tm, tm * -1.0, unit(space.size(), ref));
  CcResiduals out;
  out.energy = z[ref];
  out.r.resize(static_cast<Eigen::Index>(manifold.size()));
  for (std::size_t k = 0; k < dets.size(); ++k) out.r[static_cast<Eigen::Index>(k)] = dets[k].sign * z[dets[k].index];
  return out;
}

CcResult solve_cc(const OperatorMatrix& h, const Determinant& reference, const std::vector<double>& orbital_energies,
                  const std::vector<ExcitationLabel>& manifold, const CcOptions& options) {
  const auto& space = *h.space();
  const Eigen::Index ref = reference_index(space, reference);
  const auto dets = excited_determinants(space, reference, manifold);
  const auto n_amp = static_cast<Eigen::Index>(manifold.size());

  Eigen::VectorXd denom(n_amp);
  for (Eigen::Index k = 0; k < n_amp; ++k) {
    const auto& label = manifold[static_cast<std::size_t>(k)];
    double d = 0.0;
    for (int i : label.occupied) d += orbital_energies.at(static_cast<std::size_t>(i));
    for (int a : label.virtuals) d -= orbital_energies.at(static_cast<std::size_t>(a));
    if (std::abs(d) < 1e-8)
      throw Error(ErrorCode::quasi_degenerate, "orbital-energy denominator " + std::to_string(d) + " for label " +
                                                   label.to_string());
    denom[k] = d;
  }

  const ClusterMatrixBuilder builder(manifold, h.space());
  const Eigen::VectorXd e_ref = unit(space.size(), ref);

  auto evaluate = [&](const Eigen::VectorXd& amps, double& energy) {
    const OperatorMatrix tm = builder.build(amps);
    const Eigen::VectorXd z = hbar_apply(h, tm, tm * -1.0, e_ref);
    energy = z[ref];
    Eigen::VectorXd r(n_amp);
    for (Eigen::Index k = 0; k < n_amp; ++k)
      r[k] = dets[static_cast<std::size_t>(k)].sign * z[dets[static_cast<std::size_t>(k)].index];
    return r;
  };

  Eigen::VectorXd amps = Eigen::VectorXd::Zero(n_amp);
  if (options.initial) {
    for (Eigen::Index k = 0; k < n_amp; ++k) amps[k] = options.initial->get(manifold[static_cast<std::size_t>(k)]);
  } else if (options.guess == InitialGuess::mp2) {
    double e0 = 0.0;
    const Eigen::VectorXd r0 = evaluate(amps, e0);
    for (Eigen::Index k = 0; k < n_amp; ++k)
      if (manifold[static_cast<std::size_t>(k)].rank() == 2) amps[k] = r0[k] / denom[k];
  }

  CcResult result;
  std::deque<Eigen::VectorXd> diis_t, diis_r;
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    double energy = 0.0;
    const Eigen::VectorXd r = evaluate(amps, energy);
    const double norm = max_abs(r);
    result.residual_history.push_back(norm);
    if (!std::isfinite(norm) || !std::isfinite(energy)) break;
    if (norm <= options.tol) {
      result.t = to_cluster(reference, manifold, amps);
      result.energy = energy;
      result.iterations = iter;
      result.residual_norm = norm;
      return result;
    }
    if (iter == options.max_iter) break;

    Eigen::VectorXd next = amps + r.cwiseQuotient(denom);
    if (options.diis_depth > 1) {
      diis_t.push_back(next);
      diis_r.push_back(r);
      while (static_cast<int>(diis_t.size()) > options.diis_depth) {
        diis_t.pop_front();
        diis_r.pop_front();
      }
      const auto m = static_cast<Eigen::Index>(diis_t.size());
      if (m >= 2) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m + 1, m + 1);
        for (Eigen::Index i = 0; i < m; ++i)
          for (Eigen::Index j = 0; j < m; ++j)
            b(i, j) = diis_r[static_cast<std::size_t>(i)].dot(diis_r[static_cast<std::size_t>(j)]);
        const double scale = b.topLeftCorner(m, m).diagonal().maxCoeff();
        if (scale > 0.0) {
          b.topLeftCorner(m, m) /= scale;
          b.row(m).head(m).setConstant(-1.0);
          b.col(m).head(m).setConstant(-1.0);
          Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
          rhs[m] = -1.0;
          const Eigen::VectorXd c = b.colPivHouseholderQr().solve(rhs);
          if (c.allFinite()) {
            Eigen::VectorXd mix = Eigen::VectorXd::Zero(n_amp);
            for (Eigen::Index i = 0; i < m; ++i) mix += c[i] * diis_t[static_cast<std::size_t>(i)];
            next = mix;
          }
        }
      }
    }
    amps = next;
  }
  throw Error(ErrorCode::convergence, "CC equations did not converge in " + std::to_string(options.max_iter) +
                                          " iterations; residual history " + format_history(result.residual_history));
}

CcResult solve_cc(const OperatorMatrix& h, const ReferencePartition& partition,
                  const std::vector<ExcitationLabel>& manifold, const CcOptions& options) {
  return solve_cc(h, partition.reference, partition.orbital_energies(), manifold, options);
}

ClusterOperator solve_lambda(const OperatorMatrix& h, const ClusterOperator& t,
                             const std::vector<ExcitationLabel>& manifold, double energy) {
  const auto& space = *h.space();
  const Determinant reference = t.reference();
  const Eigen::Index ref = reference_index(space, reference);
  const auto dets = excited_determinants(space, reference, manifold);
  const auto n_amp = static_cast<Eigen::Index>(manifold.size());
  ClusterOperator lambda(reference);
  if (n_amp == 0) return lambda;

  const OperatorMatrix tm = build_cluster_matrix(t, h.space());
  const OperatorMatrix minus_t = tm * -1.0;
  // Column D_mu of Hbar restricted to the rows {ref} and {D_nu}.
  Eigen::MatrixXd a(n_amp, n_amp);
  Eigen::VectorXd b(n_amp);
  for (Eigen::Index mu = 0; mu < n_amp; ++mu) {
    const auto& dm = dets[static_cast<std::size_t>(mu)];
    const Eigen::VectorXd col = hbar_apply(h, tm, minus_t, unit(space.size(), dm.index));
    b[mu] = -dm.sign * col[ref];
    for (Eigen::Index nu = 0; nu < n_amp; ++nu) {
      const auto& dn = dets[static_cast<std::size_t>(nu)];
      a(mu, nu) = dm.sign * dn.sign * col[dn.index];
    }
    a(mu, mu) -= energy;
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  if (!lu.isInvertible() || !(rcond > 1e-14))
    throw Error(ErrorCode::linear_solve, "Lambda equations are singular (rcond " + std::to_string(rcond) + ")");
  const Eigen::VectorXd x = lu.solve(b);
  for (Eigen::Index k = 0; k < n_amp; ++k) lambda.set(manifold[static_cast<std::size_t>(k)], x[k]);
  return lambda;
}

Eigen::VectorXd lambda_bra(const DeterminantSpace& space, const ClusterOperator& lambda) {
  Eigen::VectorXd bra = Eigen::VectorXd::Zero(space.size());
  bra[reference_index(space, lambda.reference())] = 1.0;
  for (const auto& [label, value] : lambda.amplitudes()) {
    const auto act = excite(label, lambda.reference());
    if (!act) continue;
    const auto idx = space.find(act->det);
    if (!idx) throw Error(ErrorCode::shape, "Lambda label " + label.to_string() + " leaves the space");
    bra[*idx] += act->phase * value;
  }
  return bra;
}

Eigen::VectorXd cc_ket(const DeterminantSpace& space, const ClusterOperator& t) {
  auto sp = std::make_shared<const DeterminantSpace>(space);
  const OperatorMatrix tm = build_cluster_matrix(t, sp);
  return exp_nilpotent_apply(tm, unit(space.size(), reference_index(space, t.reference())));
}

double lambda_energy(const OperatorMatrix& h, const ClusterOperator& t, const ClusterOperator& lambda) {
  const auto& space = *h.space();
  const OperatorMatrix tm = build_cluster_matrix(t, h.space());
  const Eigen::VectorXd z = hbar_apply(h, tm, tm * -1.0, unit(space.size(), reference_index(space, t.reference())));
  return lambda_bra(space, lambda).dot(z);
}

}  // namespace ccdf
