#include "ccdf/greens_function.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "ccdf/error.hpp"

namespace ccdf {

void FrequencyGrid::validate() const {
  if (!(omega_min < omega_max)) throw Error(ErrorCode::usage, "frequency grid needs omega_min < omega_max");
  if (n_points < 2) throw Error(ErrorCode::usage, "frequency grid needs at least 2 points");
  if (!(eta > 0.0)) throw Error(ErrorCode::usage, "broadening eta must be positive");
}

std::vector<OrbitalPair> diagonal_pairs(const std::vector<int>& orbitals) {
  std::vector<OrbitalPair> out;
  for (int p : orbitals) out.emplace_back(p, p);
  return out;
}

namespace {

struct SideInput {
  SpacePtr space;
  Eigen::MatrixXd h;
  OperatorMatrix t;
};

// Solves (z + s * hbar) x = b for many z, either by one Schur factorization or by LU per z.
class ShiftedSolver {
 public:
  ShiftedSolver(const Eigen::MatrixXd& hbar, double sign, ResolventMethod method)
      : sign_(sign), method_(method), hbar_(hbar.cast<Complex>()) {
    if (method_ == ResolventMethod::schur && hbar_.rows() > 0) {
      Eigen::ComplexSchur<Eigen::MatrixXcd> schur(hbar_);
      if (schur.info() != Eigen::Success) throw Error(ErrorCode::linear_solve, "complex Schur factorization failed");
      u_ = schur.matrixT();
      q_ = schur.matrixU();
    }
  }

  void prepare(const std::map<int, Eigen::VectorXd>& kets, const std::map<int, Eigen::RowVectorXd>& bras) {
    for (const auto& [p, v] : kets)
      kets_[p] = method_ == ResolventMethod::schur ? Eigen::VectorXcd(q_.adjoint() * v.cast<Complex>())
                                                   : Eigen::VectorXcd(v.cast<Complex>());
    for (const auto& [p, v] : bras)
      bras_[p] = method_ == ResolventMethod::schur ? Eigen::RowVectorXcd(v.cast<Complex>() * q_)
                                                   : Eigen::RowVectorXcd(v.cast<Complex>());
  }

  // Returns bra_q (z + s hbar)^-1 ket_p for every requested (p, q).
  std::vector<Complex> solve(Complex z, double omega, const std::vector<OrbitalPair>& pq) const {
    const Eigen::Index n = hbar_.rows();
    std::vector<Complex> out(pq.size(), Complex{0.0, 0.0});
    if (n == 0) return out;
    std::map<int, Eigen::VectorXcd> solved;
    if (method_ == ResolventMethod::schur) {
      Eigen::MatrixXcd m = sign_ * u_;
      m.diagonal().array() += z;
      const Eigen::VectorXd d = m.diagonal().cwiseAbs();
      const double dmin = d.minCoeff(), dmax = d.maxCoeff();
      if (!(dmin > 1e-300) || dmax / dmin > 1e14) throw breakdown(omega, dmin / dmax);
      for (const auto& [p, q] : pq)
        if (!solved.count(p)) solved[p] = m.triangularView<Eigen::Upper>().solve(kets_.at(p));
    } else {
      Eigen::MatrixXcd m = sign_ * hbar_;
      m.diagonal().array() += z;
      const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
      const double rcond = lu.rcond();
      if (!(rcond > 1e-14)) throw breakdown(omega, rcond);
      for (const auto& [p, q] : pq)
        if (!solved.count(p)) solved[p] = lu.solve(kets_.at(p));
    }
    for (std::size_t k = 0; k < pq.size(); ++k) out[k] = (bras_.at(pq[k].second) * solved.at(pq[k].first))(0);
    return out;
  }

 private:
  static Error breakdown(double omega, double rcond) {
    std::ostringstream os;
    os << "shifted linear system breaks down at omega = " << omega << " (reciprocal condition estimate " << rcond
       << ")";
    return Error(ErrorCode::linear_solve, os.str());
  }

  double sign_;
  ResolventMethod method_;
  Eigen::MatrixXcd hbar_;
  Eigen::MatrixXcd u_;
  Eigen::MatrixXcd q_;
  std::map<int, Eigen::VectorXcd> kets_;
  std::map<int, Eigen::RowVectorXcd> bras_;
};

struct Transformed {
  Eigen::MatrixXd hbar;
  Eigen::MatrixXd e_t;
  Eigen::MatrixXd e_minus_t;
};

Transformed transform_side(const SideInput& side, double energy) {
  Transformed out;
  out.e_t = exp_nilpotent(side.t).to_dense();
  out.e_minus_t = exp_nilpotent(side.t * -1.0).to_dense();
  out.hbar = out.e_minus_t * side.h * out.e_t;
  out.hbar.diagonal().array() -= energy;
  return out;
}

std::set<int> orbitals_of(const std::vector<OrbitalPair>& pairs) {
  std::set<int> out;
  for (const auto& [p, q] : pairs) {
    out.insert(p);
    out.insert(q);
  }
  return out;
}

// c0 = exp(T)|ref> and b0 = <ref|(1+L) exp(-T), both on the N space.
GreensResult contract(const SpacePtr& n_space, const Eigen::VectorXd& c0, const Eigen::RowVectorXd& b0,
                      double energy, const SideInput& minus, const SideInput& plus,
                      const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid, ResolventMethod method) {
  grid.validate();
  const Transformed tm = transform_side(minus, energy);
  const Transformed tp = transform_side(plus, energy);

  std::map<int, Eigen::VectorXd> ip_kets, ea_kets;
  std::map<int, Eigen::RowVectorXd> ip_bras, ea_bras;
  for (int p : orbitals_of(pairs)) {
    const OperatorMatrix a_minus = ladder_matrix(ann(p), n_space, minus.space);  // N -> N-1
    const OperatorMatrix c_plus = ladder_matrix(cre(p), n_space, plus.space);    // N -> N+1
    ip_kets[p] = tm.e_minus_t * a_minus.apply(c0);
    ip_bras[p] = Eigen::RowVectorXd(a_minus.apply(Eigen::VectorXd(b0.transpose())).transpose()) * tm.e_t;
    ea_kets[p] = tp.e_minus_t * c_plus.apply(c0);
    ea_bras[p] = Eigen::RowVectorXd(c_plus.apply(Eigen::VectorXd(b0.transpose())).transpose()) * tp.e_t;
  }
  // IP: bra uses a+_q, i.e. <b0| a+_q = (a_q |b0>)^T; ket uses a_p.
  // EA: bra uses a_p, i.e. <b0| a_p = (a+_p |b0>)^T; ket uses a+_q.
  std::vector<OrbitalPair> ip_pq = pairs;                    // (ket p, bra q)
  std::vector<OrbitalPair> ea_pq;                            // (ket q, bra p)
  for (const auto& [p, q] : pairs) ea_pq.emplace_back(q, p);

  ShiftedSolver ip(tm.hbar, 1.0, method);
  ip.prepare(ip_kets, ip_bras);
  ShiftedSolver ea(tp.hbar, -1.0, method);
  ea.prepare(ea_kets, ea_bras);

  GreensResult out;
  out.grid = grid;
  out.pairs = pairs;
  const auto np = static_cast<std::size_t>(grid.n_points);
  out.g.assign(pairs.size(), std::vector<Complex>(np));
  out.g_ip = out.g;
  out.g_ea = out.g;
  out.spectral.assign(np, 0.0);
  out.spectral_ip.assign(np, 0.0);
  out.spectral_ea.assign(np, 0.0);
  for (int k = 0; k < grid.n_points; ++k) {
    const double w = grid.omega(k);
    const auto gi = ip.solve(Complex{w, -grid.eta}, w, ip_pq);
    const auto ge = ea.solve(Complex{w, grid.eta}, w, ea_pq);
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t x = 0; x < pairs.size(); ++x) {
      out.g_ip[x][kk] = gi[x];
      out.g_ea[x][kk] = ge[x];
      out.g[x][kk] = gi[x] + ge[x];
      if (pairs[x].first == pairs[x].second) {
        out.spectral_ip[kk] += gi[x].imag() / std::numbers::pi;
        out.spectral_ea[kk] -= ge[x].imag() / std::numbers::pi;
      }
    }
    out.spectral[kk] = out.spectral_ip[kk] + out.spectral_ea[kk];
  }
  return out;
}

Eigen::VectorXd reference_vector(const DeterminantSpace& space, const Determinant& reference) {
  const auto idx = space.find(reference);
  if (!idx) throw Error(ErrorCode::shape, "reference missing from the space");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(space.size());
  v[*idx] = 1.0;
  return v;
}

}  // namespace

GreensResult gfcc(const SpinIntegralSet& integrals, const ClusterOperator& t, const ClusterOperator& lambda,
                  double energy, const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid,
                  const GfOptions& options) {
  grid.validate();
  const int n_spin = integrals.n_spin();
  const Determinant& ref = t.reference();
  const int n = ref.count();
  for (const auto& [p, q] : pairs)
    if (p < 0 || q < 0 || p >= n_spin || q >= n_spin) throw Error(ErrorCode::index, "orbital pair out of range");
  if (n < 1 || n >= n_spin) throw Error(ErrorCode::empty_space, "Green's function needs N-1 and N+1 sectors");

  const SpacePtr n_space = enumerate_space(n_spin, n, ref.ms2());
  const OperatorMatrix t_n = build_cluster_matrix(t, n_space);
  const Eigen::VectorXd c0 = exp_nilpotent_apply(t_n, reference_vector(*n_space, ref));
  const Eigen::RowVectorXd b0 = exp_nilpotent(t_n * -1.0).adjoint().apply(lambda_bra(*n_space, lambda)).transpose();

  auto side = [&](int count) {
    const SpacePtr s = enumerate_space(n_spin, count);
    return SideInput{s, build_hamiltonian_matrix(integrals, s).to_dense(), build_cluster_matrix(t, s)};
  };
  return contract(n_space, c0, b0, energy, side(n - 1), side(n + 1), pairs, grid, options.method);
}

GreensResult ducc_gfcc(const EffectiveHamiltonian& gamma, const std::vector<double>& orbital_energies,
                       const std::vector<OrbitalPair>& active_pairs, const FrequencyGrid& grid,
                       const DuccGfOptions& options) {
  grid.validate();
  const Determinant& ref = gamma.reference;
  const SesAlgebra& alg = gamma.algebra;
  if ((ref.bits & ~alg.active_occupied) != 0)
    throw Error(ErrorCode::usage, "DUCC Green's function needs every occupied orbital active");
  for (const auto& [p, q] : active_pairs)
    if (p < 0 || q < 0 || p >= kMaxSpinOrbitals || q >= kMaxSpinOrbitals || !((alg.active_mask() >> p) & 1U) ||
        !((alg.active_mask() >> q) & 1U))
      throw Error(ErrorCode::usage, "orbital pair (" + std::to_string(p) + "," + std::to_string(q) +
                                        ") is not in the active space");
  const int n = ref.count();
  if (!gamma.sectors.count(n - 1) || !gamma.sectors.count(n + 1))
    throw Error(ErrorCode::shape, "Gamma lacks the N-1 or N+1 sector");

  const OperatorMatrix& g_n = gamma.matrix;
  const SpacePtr n_space = g_n.space();
  const int n_spin = n_space->n_spin();
  const auto labels = partition_labels(manifold(ref, n_spin, options.max_rank), alg).first;
  const CcResult cc = solve_cc(g_n, ref, orbital_energies, labels, options.cc);
  const ClusterOperator lambda = solve_lambda(g_n, cc.t, labels, cc.energy);

  const OperatorMatrix t_n = build_cluster_matrix(cc.t, n_space);
  const Eigen::VectorXd c0 = exp_nilpotent_apply(t_n, reference_vector(*n_space, ref));
  const Eigen::RowVectorXd b0 = exp_nilpotent(t_n * -1.0).adjoint().apply(lambda_bra(*n_space, lambda)).transpose();

  auto side = [&](int count) {
    const OperatorMatrix& m = gamma.sectors.at(count);
    return SideInput{m.space(), m.to_dense(), build_cluster_matrix(cc.t, m.space())};
  };
  return contract(n_space, c0, b0, cc.energy, side(n - 1), side(n + 1),
                  active_pairs, grid, options.method);
}

// ----------------------------------------------------------- Lehmann

LehmannOracle::LehmannOracle(const SpinIntegralSet& integrals, const Determinant& reference) {
  const int n_spin = integrals.n_spin();
  const int n = reference.count();
  if (n < 1 || n >= n_spin) throw Error(ErrorCode::empty_space, "Lehmann oracle needs N-1 and N+1 sectors");
  n_space_ = enumerate_space(n_spin, n, reference.ms2());
  const auto h_n = build_hamiltonian_matrix(integrals, n_space_);
  if (n_space_->size() > kDenseLimit) throw Error(ErrorCode::usage, "Lehmann oracle limited to dense sectors");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_n.to_dense());
  e0_ = es.eigenvalues()[0];
  psi0_ = es.eigenvectors().col(0);
  auto sector = [&](int count) {
    Sector s;
    s.space = enumerate_space(n_spin, count);
    if (s.space->size() > kDenseLimit) throw Error(ErrorCode::usage, "Lehmann oracle limited to dense sectors");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e(build_hamiltonian_matrix(integrals, s.space).to_dense());
    s.energies = e.eigenvalues();
    s.states = e.eigenvectors();
    return s;
  };
  minus_ = sector(n - 1);
  plus_ = sector(n + 1);
}

Eigen::VectorXd LehmannOracle::remove_amplitudes(int p) const {
  return minus_.states.transpose() * ladder_matrix(ann(p), n_space_, minus_.space).apply(psi0_);
}

Eigen::VectorXd LehmannOracle::add_amplitudes(int p) const {
  return plus_.states.transpose() * ladder_matrix(cre(p), n_space_, plus_.space).apply(psi0_);
}

std::vector<LehmannPole> LehmannOracle::poles(int p, int q, double cutoff) const {
  std::vector<LehmannPole> out;
  const Eigen::VectorXd rp = remove_amplitudes(p), rq = remove_amplitudes(q);
  for (Eigen::Index k = 0; k < rp.size(); ++k) {
    const double w = rp[k] * rq[k];
    if (std::abs(w) > cutoff) out.push_back({e0_ - minus_.energies[k], w, true});
  }
  const Eigen::VectorXd ap = add_amplitudes(p), aq = add_amplitudes(q);
  for (Eigen::Index k = 0; k < ap.size(); ++k) {
    const double w = ap[k] * aq[k];
    if (std::abs(w) > cutoff) out.push_back({plus_.energies[k] - e0_, w, false});
  }
  return out;
}

GreensResult LehmannOracle::evaluate(const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid) const {
  grid.validate();
  GreensResult out;
  out.grid = grid;
  out.pairs = pairs;
  const auto np = static_cast<std::size_t>(grid.n_points);
  out.g.assign(pairs.size(), std::vector<Complex>(np));
  out.g_ip = out.g;
  out.g_ea = out.g;
  out.spectral.assign(np, 0.0);
  out.spectral_ip.assign(np, 0.0);
  out.spectral_ea.assign(np, 0.0);
  for (std::size_t x = 0; x < pairs.size(); ++x) {
    const auto [p, q] = pairs[x];
    const Eigen::VectorXd rp = remove_amplitudes(p), rq = remove_amplitudes(q);
    const Eigen::VectorXd ap = add_amplitudes(p), aq = add_amplitudes(q);
    for (int k = 0; k < grid.n_points; ++k) {
      const double w = grid.omega(k);
      Complex gi{0.0, 0.0}, ge{0.0, 0.0};
      for (Eigen::Index s = 0; s < rp.size(); ++s)
        gi += rp[s] * rq[s] / (Complex{w + minus_.energies[s] - e0_, -grid.eta});
      for (Eigen::Index s = 0; s < ap.size(); ++s)
        ge += ap[s] * aq[s] / (Complex{w - (plus_.energies[s] - e0_), grid.eta});
      const auto kk = static_cast<std::size_t>(k);
      out.g_ip[x][kk] = gi;
      out.g_ea[x][kk] = ge;
      out.g[x][kk] = gi + ge;
      if (p == q) {
        out.spectral_ip[kk] += gi.imag() / std::numbers::pi;
        out.spectral_ea[kk] -= ge.imag() / std::numbers::pi;
      }
    }
  }
  for (std::size_t k = 0; k < np; ++k) out.spectral[k] = out.spectral_ip[k] + out.spectral_ea[k];
  return out;
}

GreensResult fci_lehmann_oracle(const SpinIntegralSet& integrals, const Determinant& reference,
                                const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid) {
  return LehmannOracle(integrals, reference).evaluate(pairs, grid);
}

// ------------------------------------------------------------- peaks

std::vector<Peak> find_peaks(const std::vector<double>& omega, const std::vector<double>& values, double floor) {
  if (omega.size() != values.size()) throw Error(ErrorCode::shape, "peak search with mismatched arrays");
  std::vector<Peak> out;
  for (std::size_t k = 1; k + 1 < values.size(); ++k) {
    const double a = values[k - 1], b = values[k], c = values[k + 1];
    if (!(b > a && b > c && b > floor)) continue;
    const double curv = a - 2.0 * b + c;
    const double offset = curv != 0.0 ? 0.5 * (a - c) / curv : 0.0;
    const double h = omega[k + 1] - omega[k];
    out.push_back({omega[k] + offset * h, b - 0.25 * (a - c) * offset});
  }
  return out;
}

std::vector<Peak> find_peaks(const GreensResult& result, double floor) {
  std::vector<double> w(static_cast<std::size_t>(result.grid.n_points));
  for (int k = 0; k < result.grid.n_points; ++k) w[static_cast<std::size_t>(k)] = result.grid.omega(k);
  return find_peaks(w, result.spectral, floor);
}

Peak first_ionization_peak(const GreensResult& result, double floor) {
  std::vector<double> w(static_cast<std::size_t>(result.grid.n_points));
  for (int k = 0; k < result.grid.n_points; ++k) w[static_cast<std::size_t>(k)] = result.grid.omega(k);
  const auto peaks = find_peaks(w, result.spectral_ip, floor);
  if (peaks.empty()) throw Error(ErrorCode::empty_space, "no ionization peak inside the frequency window");
  return *std::max_element(peaks.begin(), peaks.end(),
                           [](const Peak& a, const Peak& b) { return a.omega < b.omega; });
}

void write_spectrum_csv(std::ostream& out, const GreensResult& result) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << "omega";
  for (const auto& [p, q] : result.pairs)
    out << ",re_g_" << p << '_' << q << ",im_g_" << p << '_' << q;
  out << ",a\n";
  for (int k = 0; k < result.grid.n_points; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    out << std::fixed << std::setprecision(10) << result.grid.omega(k);
    out << std::scientific << std::setprecision(10);
    for (std::size_t x = 0; x < result.pairs.size(); ++x) out << ',' << result.g[x][kk].real() << ',' << result.g[x][kk].imag();
    out << ',' << result.spectral[kk] << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace ccdf
