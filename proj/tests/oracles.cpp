#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>

namespace oracle {

std::string data_path(const std::string& name) { return std::string(CCDF_DATA_DIR) + "/" + name; }

double one_body(const ccdf::IntegralSet& s, int p, int q) {
  if (p % 2 != q % 2) return 0.0;
  return s.h(p / 2, q / 2);
}

namespace {

// <pq|rs> in physicist notation = (pr|qs) with spin delta.
double coulomb(const ccdf::IntegralSet& s, int p, int q, int r, int t) {
  if (p % 2 != r % 2 || q % 2 != t % 2) return 0.0;
  return s.eri(p / 2, r / 2, q / 2, t / 2);
}

std::vector<int> occupied(std::uint64_t d) {
  std::vector<int> out;
  for (int p = 0; p < 64; ++p)
    if ((d >> p) & 1U) out.push_back(p);
  return out;
}

// Parity of the permutation that sorts `v` (all entries distinct).
int sort_parity(std::vector<int> v) {
  int sign = 1;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j + 1 < v.size() - i; ++j)
      if (v[j] > v[j + 1]) {
        std::swap(v[j], v[j + 1]);
        sign = -sign;
      }
  return sign;
}

}  // namespace

double anti(const ccdf::IntegralSet& s, int p, int q, int r, int t) {
  return coulomb(s, p, q, r, t) - coulomb(s, p, q, t, r);
}

std::vector<std::uint64_t> determinants(int n_spin, int n, int ms2) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t d = 0; d < (std::uint64_t{1} << n_spin); ++d) {
    if (std::popcount(d) != n) continue;
    if (ms2 != 999) {
      int m = 0;
      for (int p = 0; p < n_spin; ++p)
        if ((d >> p) & 1U) m += (p % 2 == 0) ? 1 : -1;
      if (m != ms2) continue;
    }
    out.push_back(d);
  }
  return out;
}

Eigen::MatrixXd slater_condon(const ccdf::IntegralSet& s, const std::vector<std::uint64_t>& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const std::uint64_t bra = basis[a], ket = basis[b];
      const std::uint64_t only_ket = ket & ~bra, only_bra = bra & ~ket;
      const int diff = std::popcount(only_ket);
      if (diff > 2) continue;
      const auto ko = occupied(ket);
      if (diff == 0) {
        double e = s.e_core();
        for (int i : ko) e += one_body(s, i, i);
        for (int i : ko)
          for (int j : ko) e += 0.5 * anti(s, i, j, i, j);
        m(a, b) = e;
        continue;
      }
      // Replace the ket's orbitals that the bra lacks by the bra's extras, in
      // place, then sort: the sort parity is the relative phase.
      const auto holes = occupied(only_ket);
      const auto parts = occupied(only_bra);
      std::vector<int> replaced = ko;
      for (std::size_t k = 0; k < holes.size(); ++k)
        *std::find(replaced.begin(), replaced.end(), holes[k]) = parts[k];
      const int phase = sort_parity(replaced);
      double v = 0.0;
      if (diff == 1) {
        const int i = holes[0], p = parts[0];
        v = one_body(s, p, i);
        for (int j : ko)
          if (j != i) v += anti(s, p, j, i, j);
      } else {
        v = anti(s, parts[0], parts[1], holes[0], holes[1]);
      }
      m(a, b) = phase * v;
    }
  }
  return m;
}

Fci fci(const ccdf::IntegralSet& s, int n, int ms2) {
  Fci out;
  out.basis = determinants(2 * s.n_spatial(), n, ms2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(slater_condon(s, out.basis));
  out.energies = es.eigenvalues();
  out.states = es.eigenvectors();
  return out;
}

double reference_energy(const ccdf::IntegralSet& s, std::uint64_t ref) {
  return slater_condon(s, {ref})(0, 0);
}

Action annihilate(int p, std::uint64_t d) {
  if (!((d >> p) & 1U)) return {0, 0};
  const int below = std::popcount(d & ((std::uint64_t{1} << p) - 1));
  return {below % 2 ? -1 : 1, d & ~(std::uint64_t{1} << p)};
}

Action create(int p, std::uint64_t d) {
  if ((d >> p) & 1U) return {0, 0};
  const int below = std::popcount(d & ((std::uint64_t{1} << p) - 1));
  return {below % 2 ? -1 : 1, d | (std::uint64_t{1} << p)};
}

namespace {

Eigen::Index index_of(const std::vector<std::uint64_t>& basis, std::uint64_t d) {
  const auto it = std::lower_bound(basis.begin(), basis.end(), d);
  if (it == basis.end() || *it != d) return -1;
  return it - basis.begin();
}

}  // namespace

std::vector<Pole> lehmann_poles(const ccdf::IntegralSet& s, int n, int ms2, int p, double cutoff) {
  const Fci g = fci(s, n, ms2);
  const Eigen::VectorXd psi = g.states.col(0);
  const double e0 = g.energies(0);
  std::vector<Pole> out;
  for (int dn : {-1, +1}) {
    const Fci side = fci(s, n + dn);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(side.basis.size()));
    for (std::size_t k = 0; k < g.basis.size(); ++k) {
      const Action a = dn < 0 ? annihilate(p, g.basis[k]) : create(p, g.basis[k]);
      if (a.sign == 0) continue;
      phi(index_of(side.basis, a.det)) += a.sign * psi(static_cast<Eigen::Index>(k));
    }
    const Eigen::VectorXd amp = side.states.transpose() * phi;
    for (Eigen::Index k = 0; k < amp.size(); ++k) {
      const double w = amp(k) * amp(k);
      if (w < cutoff) continue;
      const double omega = dn < 0 ? e0 - side.energies(k) : side.energies(k) - e0;
      out.push_back({omega, w, dn < 0});
    }
  }
  return out;
}

long long ses_count_brute(int n_o, int n_v) {
  long long count = 0;
  for (unsigned r = 1; r < (1U << n_o); ++r) {
    for (unsigned sv = 1; sv < (1U << n_v); ++sv) {
      const int nr = 2 * std::popcount(r), ns = 2 * std::popcount(sv);
      // Spin-orbital hole sets within R and particle sets within S; alpha
      // spin orbitals are the even bits.
      int max_rank = 0;
      for (unsigned h = 0; h < (1U << nr); ++h) {
        for (unsigned pt = 0; pt < (1U << ns); ++pt) {
          if (std::popcount(h) != std::popcount(pt)) continue;
          const int h_alpha = std::popcount(h & 0x55555555U), p_alpha = std::popcount(pt & 0x55555555U);
          if (h_alpha != p_alpha) continue;
          max_rank = std::max(max_rank, std::popcount(h));
        }
      }
      if (max_rank <= 2) ++count;
    }
  }
  return count;
}

Eigen::MatrixXd pairing_matrix(int n_levels, double spacing, double g, const std::vector<std::uint64_t>& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const std::uint64_t ket = basis[b];
    for (int p = 0; p < 2 * n_levels; ++p)
      if ((ket >> p) & 1U) m(b, b) += spacing * (p / 2);
    for (int k = 0; k < n_levels; ++k) {
      for (int l = 0; l < n_levels; ++l) {
        Action a = annihilate(2 * l, ket);
        if (!a.sign) continue;
        Action b2 = annihilate(2 * l + 1, a.det);
        if (!b2.sign) continue;
        Action c = create(2 * k + 1, b2.det);
        if (!c.sign) continue;
        Action d = create(2 * k, c.det);
        if (!d.sign) continue;
        const Eigen::Index row = index_of(basis, d.det);
        if (row >= 0) m(row, b) += -g * a.sign * b2.sign * c.sign * d.sign;
      }
    }
  }
  return m;
}

}  // namespace oracle
