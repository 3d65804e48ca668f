#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "ccdf/cc_solver.hpp"
#include "ccdf/ducc_downfolding.hpp"
#include "ccdf/error.hpp"
#include "ccdf/greens_function.hpp"
#include "oracles.hpp"

using namespace ccdf;

namespace {

struct Problem {
  IntegralSet spatial;
  SpinIntegralSet spin;
  ReferencePartition partition;
  OperatorMatrix h;
  CcResult cc;
  ClusterOperator lambda;
};

Problem load(const std::string& name, int rank = 2) {
  IntegralSet s = read_fcidump(oracle::data_path(name + ".fcidump"));
  SpinIntegralSet so = to_spin_orbitals(s);
  ReferencePartition rp = build_reference_partition(so, s.n_electrons(), s.ms2());
  const SpacePtr space = enumerate_space(so.n_spin(), s.n_electrons(), s.ms2());
  OperatorMatrix h = build_hamiltonian_matrix(so, space);
  const auto m = manifold(rp.reference, so.n_spin(), rank);
  CcResult cc = solve_cc(h, rp, m);
  ClusterOperator lambda = solve_lambda(h, cc.t, m, cc.energy);
  return {std::move(s), std::move(so), std::move(rp), std::move(h), std::move(cc), std::move(lambda)};
}

std::vector<int> all_orbitals(int n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) out[static_cast<std::size_t>(p)] = p;
  return out;
}

double max_diff(const GreensResult& a, const GreensResult& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.g.size(); ++k)
    for (std::size_t w = 0; w < a.g[k].size(); ++w) worst = std::max(worst, std::abs(a.g[k][w] - b.g[k][w]));
  return worst;
}

}  // namespace

TEST(Grid, Validation) {
  EXPECT_NO_THROW((FrequencyGrid{-1, 1, 10, 0.1}.validate()));
  EXPECT_THROW((FrequencyGrid{1, -1, 10, 0.1}.validate()), Error);
  EXPECT_THROW((FrequencyGrid{-1, 1, 1, 0.1}.validate()), Error);
  EXPECT_THROW((FrequencyGrid{-1, 1, 10, 0.0}.validate()), Error);
  const FrequencyGrid g{-1, 1, 5, 0.1};
  EXPECT_DOUBLE_EQ(g.spacing(), 0.5);
  EXPECT_DOUBLE_EQ(g.omega(4), 1.0);
}

TEST(Lehmann, LibraryOracleAgreesWithTestOracle) {
  const Problem p = load("h2_631g");
  const LehmannOracle lib(p.spin, p.partition.reference);
  // Degenerate eigenvectors split weight arbitrarily, so compare the total
  // weight at each distinct pole position.
  auto merge = [](const auto& poles) {
    std::map<long long, std::pair<double, bool>> out;
    for (const auto& pole : poles) {
      auto& slot = out[std::llround(pole.omega * 1e7)];
      slot.first += pole.weight;
      slot.second = pole.ionization;
    }
    for (auto it = out.begin(); it != out.end();) it = it->second.first < 1e-9 ? out.erase(it) : std::next(it);
    return out;
  };
  for (int orb : {0, 1, 2, 5}) {
    const auto mine = merge(oracle::lehmann_poles(p.spatial, 2, 0, orb, 0.0));
    const auto theirs = merge(lib.poles(orb, orb, 0.0));
    ASSERT_EQ(mine.size(), theirs.size()) << orb;
    for (auto a = mine.begin(), b = theirs.begin(); a != mine.end(); ++a, ++b) {
      EXPECT_EQ(a->first, b->first);
      EXPECT_NEAR(a->second.first, b->second.first, 1e-10);
      EXPECT_EQ(a->second.second, b->second.second);
    }
  }
}

TEST(Lehmann, SpectralFunctionIsNonNegativeAndSumRule) {
  const Problem p = load("h2_sto3g");
  const FrequencyGrid grid{-3.0, 3.0, 400, 0.05};
  const GreensResult r = fci_lehmann_oracle(p.spin, p.partition.reference, diagonal_pairs(all_orbitals(4)), grid);
  for (double a : r.spectral) EXPECT_GE(a, -1e-12);
  // Each orbital carries unit total weight (anticommutator sum rule).
  const LehmannOracle lib(p.spin, p.partition.reference);
  for (int q = 0; q < 4; ++q) {
    double total = 0.0;
    for (const auto& pole : lib.poles(q, q)) total += pole.weight;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Gfcc, TwoElectronsMatchLehmannPointwise) {
  const Problem p = load("h2_sto3g");
  const FrequencyGrid grid{-1.5, 1.5, 400, 0.01};
  const auto pairs = diagonal_pairs(all_orbitals(4));
  const GreensResult cc = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid);
  const GreensResult ex = fci_lehmann_oracle(p.spin, p.partition.reference, pairs, grid);
  EXPECT_LT(max_diff(cc, ex), 1e-7);
}

TEST(Gfcc, PeaksSitAtOraclePoles) {
  const Problem p = load("h2_sto3g");
  const FrequencyGrid grid{-1.5, 1.5, 400, 0.01};
  const GreensResult cc = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, diagonal_pairs(all_orbitals(4)), grid);
  std::vector<double> poles;
  for (int orb = 0; orb < 4; ++orb)
    for (const auto& pole : oracle::lehmann_poles(p.spatial, 2, 0, orb, 1e-6))
      if (pole.omega > grid.omega_min && pole.omega < grid.omega_max) poles.push_back(pole.omega);
  const auto peaks = find_peaks(cc);
  ASSERT_FALSE(peaks.empty());
  for (const auto& peak : peaks) {
    double nearest = 1e9;
    for (double w : poles) nearest = std::min(nearest, std::abs(w - peak.omega));
    EXPECT_LT(nearest, grid.spacing()) << peak.omega;
  }
}

TEST(Gfcc, FullRankClusterIsExactForFourElectrons) {
  const Problem p = load("h4_sto3g", 4);
  const FrequencyGrid grid{-1.0, 1.0, 80, 0.02};
  const auto pairs = std::vector<OrbitalPair>{{0, 0}, {2, 2}, {3, 3}, {4, 4}, {0, 2}, {2, 6}};
  const GreensResult cc = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid);
  const GreensResult ex = fci_lehmann_oracle(p.spin, p.partition.reference, pairs, grid);
  EXPECT_LT(max_diff(cc, ex), 1e-7);
}

TEST(Gfcc, SchurAndDirectResolventsAgree) {
  const Problem p = load("h4_sto3g");
  const FrequencyGrid grid{-1.0, 1.0, 50, 0.02};
  const auto pairs = diagonal_pairs({0, 3, 4});
  GfOptions direct;
  direct.method = ResolventMethod::direct;
  const GreensResult a = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid);
  const GreensResult b = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid, direct);
  EXPECT_LT(max_diff(a, b), 1e-10);
  for (std::size_t k = 0; k < a.g.size(); ++k)
    for (std::size_t w = 0; w < a.g[k].size(); ++w)
      EXPECT_LT(std::abs(a.g[k][w] - (a.g_ip[k][w] + a.g_ea[k][w])), 1e-14);
}

TEST(Gfcc, CcsdIsCloseToExactOnH4) {
  const Problem p = load("h4_sto3g");
  const FrequencyGrid grid{-1.5, 1.5, 400, 0.01};
  const auto pairs = diagonal_pairs(all_orbitals(8));
  const GreensResult cc = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid);
  const GreensResult ex = fci_lehmann_oracle(p.spin, p.partition.reference, pairs, grid);
  EXPECT_NEAR(first_ionization_peak(cc).omega, first_ionization_peak(ex).omega, 5e-3);
}

TEST(DuccGf, ZeroSigmaOnFullSpaceReproducesGfcc) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = full_algebra(p.partition.reference, 8);
  const EffectiveHamiltonian gamma =
      ducc_family(p.spin, p.partition, ClusterOperator(p.partition.reference), g, DuccVariant::a7, {3, 4, 5});
  const FrequencyGrid grid{-1.0, 1.0, 60, 0.02};
  const auto pairs = diagonal_pairs({0, 1, 2, 3, 4});
  const GreensResult d = ducc_gfcc(gamma, p.partition.orbital_energies(), pairs, grid);
  const GreensResult full = gfcc(p.spin, p.cc.t, p.lambda, p.cc.energy, pairs, grid);
  EXPECT_LT(max_diff(d, full), 1e-7);
}

TEST(DuccGf, Preconditions) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra partial = make_spatial_algebra(p.partition.reference, {1}, {2});
  const auto t_ext = partition_cluster(p.cc.t, partial).second;
  const FrequencyGrid grid{-1.0, 1.0, 20, 0.02};
  const EffectiveHamiltonian gamma = ducc_family(p.spin, p.partition, t_ext, partial, DuccVariant::a7, {3, 4, 5});
  try {
    ducc_gfcc(gamma, p.partition.orbital_energies(), diagonal_pairs({2}), grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::usage);
  }
  const SesAlgebra full_occ = make_spatial_algebra(p.partition.reference, {0, 1}, {2});
  const auto t2 = partition_cluster(p.cc.t, full_occ).second;
  const EffectiveHamiltonian no_sectors = ducc_family(p.spin, p.partition, t2, full_occ, DuccVariant::a7, {4});
  try {
    ducc_gfcc(no_sectors, p.partition.orbital_energies(), diagonal_pairs({0}), grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
  const EffectiveHamiltonian ok = ducc_family(p.spin, p.partition, t2, full_occ, DuccVariant::a7, {3, 4, 5});
  try {
    ducc_gfcc(ok, p.partition.orbital_energies(), diagonal_pairs({7}), grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::usage);
  }
}

TEST(Peaks, ParabolicRefinementOfLorentzians) {
  const double eta = 0.01, w0 = 0.1234567, w1 = -0.4321;
  std::vector<double> omega, values;
  for (int k = 0; k < 400; ++k) {
    const double w = -1.0 + 2.0 * k / 399.0;
    omega.push_back(w);
    values.push_back(eta / ((w - w0) * (w - w0) + eta * eta) + 0.5 * eta / ((w - w1) * (w - w1) + eta * eta));
  }
  const auto peaks = find_peaks(omega, values);
  ASSERT_EQ(peaks.size(), 2U);
  EXPECT_NEAR(peaks[0].omega, w1, 0.25 * (omega[1] - omega[0]));
  EXPECT_NEAR(peaks[1].omega, w0, 0.25 * (omega[1] - omega[0]));
  EXPECT_TRUE(find_peaks(omega, std::vector<double>(400, 0.0)).empty());
}

TEST(Peaks, FirstIonizationIsHighestIpPeak) {
  const Problem p = load("h2_sto3g");
  const FrequencyGrid grid{-1.5, 1.5, 400, 0.01};
  const GreensResult ex = fci_lehmann_oracle(p.spin, p.partition.reference, diagonal_pairs(all_orbitals(4)), grid);
  double best = -1e9;
  for (int orb = 0; orb < 4; ++orb)
    for (const auto& pole : oracle::lehmann_poles(p.spatial, 2, 0, orb, 1e-6))
      if (pole.ionization && pole.omega > grid.omega_min) best = std::max(best, pole.omega);
  EXPECT_NEAR(first_ionization_peak(ex).omega, best, grid.spacing());
  const FrequencyGrid above{0.0, 1.5, 100, 0.01};
  const GreensResult none = fci_lehmann_oracle(p.spin, p.partition.reference, diagonal_pairs({0}), above);
  EXPECT_THROW(first_ionization_peak(none), Error);
}

TEST(Csv, HeaderAndRows) {
  const Problem p = load("h2_sto3g");
  const FrequencyGrid grid{-1.0, 1.0, 5, 0.1};
  const GreensResult r = fci_lehmann_oracle(p.spin, p.partition.reference, {{0, 0}, {1, 3}}, grid);
  std::ostringstream os;
  write_spectrum_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "omega,re_g_0_0,im_g_0_0,re_g_1_3,im_g_1_3,a");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}
