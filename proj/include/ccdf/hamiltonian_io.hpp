#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <istream>
#include <vector>

#include "ccdf/determinant.hpp"

namespace ccdf {

/// Spatial-orbital integrals as read from an FCIDUMP file.
///
/// Two-electron integrals are in chemists' notation (pq|rs) and stored once
/// per 8-fold permutational class; every access expands the symmetry.
/// Indices are 0-based.
class IntegralSet {
 public:
  IntegralSet(int n_spatial, int n_electrons, int ms2);

  [[nodiscard]] int n_spatial() const noexcept { return n_spatial_; }
  [[nodiscard]] int n_electrons() const noexcept { return n_electrons_; }
  [[nodiscard]] int ms2() const noexcept { return ms2_; }

  [[nodiscard]] double e_core() const noexcept { return e_core_; }
  void set_e_core(double value) noexcept { e_core_ = value; }

  [[nodiscard]] double h(int p, int q) const;
  void set_h(int p, int q, double value);

  [[nodiscard]] double eri(int p, int q, int r, int s) const;
  void set_eri(int p, int q, int r, int s, double value);

  // Point-group labels are carried through for provenance only.
  std::vector<int> orbsym;
  int isym = 1;

  /// Canonical storage slot shared by all 8 permutations of (pq|rs).
  [[nodiscard]] std::size_t eri_slot(int p, int q, int r, int s) const;
  [[nodiscard]] std::size_t eri_slot_count() const noexcept { return eri_.size(); }

 private:
  void check(int p) const;

  int n_spatial_;
  int n_electrons_;
  int ms2_;
  double e_core_ = 0.0;
  std::vector<double> h_;    // packed lower triangle
  std::vector<double> eri_;  // packed over pair-of-pairs
};

/// Spin-orbital integrals with antisymmetrized two-electron part <pq||rs>.
class SpinIntegralSet {
 public:
  explicit SpinIntegralSet(int n_spin);

  [[nodiscard]] int n_spin() const noexcept { return n_spin_; }

  double e_core = 0.0;
  Eigen::MatrixXd h;

  [[nodiscard]] double v(int p, int q, int r, int s) const noexcept {
    return v_anti_[index(p, q, r, s)];
  }
  void set_v(int p, int q, int r, int s, double value) noexcept { v_anti_[index(p, q, r, s)] = value; }

  /// Sets <pq||rs> together with every antisymmetry and Hermitian partner.
  void set_v_antisymmetric(int p, int q, int r, int s, double value) noexcept;

 private:
  [[nodiscard]] std::size_t index(int p, int q, int r, int s) const noexcept {
    const auto n = static_cast<std::size_t>(n_spin_);
    return ((static_cast<std::size_t>(p) * n + q) * n + r) * n + s;
  }

  int n_spin_;
  std::vector<double> v_anti_;
};

/// Reference determinant plus the normal-ordered split H = e_ref + F_N + V_N.
/// F_N and V_N are realized as matrices by fock_space; here they are carried
/// as their coefficient tensors (fock and integrals.v).
struct ReferencePartition {
  Determinant reference;
  double e_ref = 0.0;
  Eigen::MatrixXd fock;
  SpinIntegralSet integrals{0};

  [[nodiscard]] std::vector<double> orbital_energies() const;
};

IntegralSet parse_fcidump(std::istream& in);
IntegralSet read_fcidump(const std::filesystem::path& path);

SpinIntegralSet to_spin_orbitals(const IntegralSet& s);

/// Aufbau reference with the two-pass Fock rule: fill by h diagonal, build F,
/// refill by F diagonal, rebuild F. Ties break toward the lower index.
ReferencePartition build_reference_partition(const SpinIntegralSet& s, int n_electrons, int ms2);

/// Fock matrix F_pq = h_pq + sum_i <pi||qi> for a given occupation.
Eigen::MatrixXd fock_matrix(const SpinIntegralSet& s, const Determinant& occupation);

/// Reduced BCS pairing model: levels k * spacing (k = 0..n_levels-1), each
/// holding an alpha/beta pair, with pair hopping -g P_k^dagger P_l for all k, l
/// (the k == l term included).
SpinIntegralSet model_pairing(int n_levels, double spacing, double g);

}  // namespace ccdf
