#pragma once

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <utility>
#include <vector>

#include "ccdf/cc_solver.hpp"
#include "ccdf/excitation.hpp"
#include "ccdf/fock_space.hpp"
#include "ccdf/hamiltonian_io.hpp"
#include "ccdf/ses_downfolding.hpp"

namespace ccdf {

struct FrequencyGrid {
  double omega_min = -1.0;
  double omega_max = 1.0;
  int n_points = 400;
  double eta = 0.01;

  /// Throws usage unless omega_min < omega_max, n_points >= 2 and eta > 0.
  void validate() const;
  [[nodiscard]] double spacing() const { return (omega_max - omega_min) / (n_points - 1); }
  [[nodiscard]] double omega(int k) const { return omega_min + k * spacing(); }
};

using Complex = std::complex<double>;
using OrbitalPair = std::pair<int, int>;

/// G_pq(w) = G^IP_pq(w) + G^EA_pq(w) with
///   G^IP = <(1+L) a+_q (w + (H - E) - i eta)^-1 a_p>   (N-1 electrons)
///   G^EA = <(1+L) a_p (w - (H - E) + i eta)^-1 a+_q>   (N+1 electrons).
/// The spectral function is (1/pi) sum over diagonal pairs of
/// Im G^IP_pp - Im G^EA_pp, which is nonnegative for exact states.
struct GreensResult {
  FrequencyGrid grid;
  std::vector<OrbitalPair> pairs;
  std::vector<std::vector<Complex>> g;     // [pair][omega]
  std::vector<std::vector<Complex>> g_ip;  // [pair][omega]
  std::vector<std::vector<Complex>> g_ea;  // [pair][omega]
  std::vector<double> spectral;
  std::vector<double> spectral_ip;
  std::vector<double> spectral_ea;
};

enum class ResolventMethod {
  schur,  // one complex Schur factorization per sector, triangular solves per omega
  direct  // dense LU of the shifted matrix at every omega
};

struct GfOptions {
  ResolventMethod method = ResolventMethod::schur;
};

/// Full-space CC Green's function from converged T and Lambda. Sector
/// Hamiltonians are built from `integrals`; N-1 and N+1 sectors span all ms2.
GreensResult gfcc(const SpinIntegralSet& integrals, const ClusterOperator& t, const ClusterOperator& lambda,
                  double energy, const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid,
                  const GfOptions& options = {});

struct DuccGfOptions {
  int max_rank = 2;  // rank of the internal CC problem on Gamma
  CcOptions cc;
  ResolventMethod method = ResolventMethod::schur;
};

/// Internal CC problem (T, E, Lambda) solved on Gamma's N-electron block, then
/// the same resolvent contraction on Gamma's N-1 and N+1 sector blocks.
/// Requires every reference-occupied orbital to be active and Gamma to carry
/// the N-1 and N+1 sectors (see ducc_family).
GreensResult ducc_gfcc(const EffectiveHamiltonian& gamma, const std::vector<double>& orbital_energies,
                       const std::vector<OrbitalPair>& active_pairs, const FrequencyGrid& grid,
                       const DuccGfOptions& options = {});

struct LehmannPole {
  double omega;   // pole position on the frequency axis
  double weight;  // residue
  bool ionization;
};

/// Exact Green's function from full diagonalization of the N (reference ms2),
/// N-1 and N+1 sectors.
class LehmannOracle {
 public:
  LehmannOracle(const SpinIntegralSet& integrals, const Determinant& reference);

  [[nodiscard]] double ground_energy() const noexcept { return e0_; }
  /// Poles of G_pq; weights below `cutoff` are dropped.
  [[nodiscard]] std::vector<LehmannPole> poles(int p, int q, double cutoff = 0.0) const;
  [[nodiscard]] GreensResult evaluate(const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid) const;

 private:
  struct Sector {
    SpacePtr space;
    Eigen::VectorXd energies;
    Eigen::MatrixXd states;
  };
  // <k|a_p|Psi0> over N-1 states and <k|a+_p|Psi0> over N+1 states.
  [[nodiscard]] Eigen::VectorXd remove_amplitudes(int p) const;
  [[nodiscard]] Eigen::VectorXd add_amplitudes(int p) const;

  SpacePtr n_space_;
  Eigen::VectorXd psi0_;
  double e0_ = 0.0;
  Sector minus_;
  Sector plus_;
};

GreensResult fci_lehmann_oracle(const SpinIntegralSet& integrals, const Determinant& reference,
                                const std::vector<OrbitalPair>& pairs, const FrequencyGrid& grid);

struct Peak {
  double omega;
  double height;
};

/// Strict local maxima above `floor`, refined by a three-point parabola.
std::vector<Peak> find_peaks(const std::vector<double>& omega, const std::vector<double>& values,
                             double floor = 1e-3);
std::vector<Peak> find_peaks(const GreensResult& result, double floor = 1e-3);

/// Ionization peak nearest the Fermi level: the highest-frequency peak of the
/// ionization part of the spectrum. Throws empty_space when there is none.
Peak first_ionization_peak(const GreensResult& result, double floor = 1e-3);

/// Columns: omega, Re/Im G per pair, A.
void write_spectrum_csv(std::ostream& out, const GreensResult& result);

/// Diagonal pairs (p, p) for the listed orbitals.
std::vector<OrbitalPair> diagonal_pairs(const std::vector<int>& orbitals);

}  // namespace ccdf
