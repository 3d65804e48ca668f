#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <sstream>

#include "ccdf/cc_solver.hpp"
#include "ccdf/ducc_downfolding.hpp"
#include "ccdf/error.hpp"
#include "oracles.hpp"

using namespace ccdf;

namespace {

struct Problem {
  IntegralSet spatial;
  SpinIntegralSet spin;
  ReferencePartition partition;
  SpacePtr space;
  OperatorMatrix h;
  CcResult cc;
};

Problem load(const std::string& name) {
  IntegralSet s = read_fcidump(oracle::data_path(name + ".fcidump"));
  SpinIntegralSet so = to_spin_orbitals(s);
  ReferencePartition rp = build_reference_partition(so, s.n_electrons(), s.ms2());
  SpacePtr space = enumerate_space(so.n_spin(), s.n_electrons(), s.ms2());
  OperatorMatrix h = build_hamiltonian_matrix(so, space);
  CcResult cc = solve_cc(h, rp, manifold(rp.reference, so.n_spin(), 2));
  return {std::move(s), std::move(so), std::move(rp), space, std::move(h), std::move(cc)};
}

Eigen::MatrixXd comm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return a * b - b * a; }

double lowest(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

// Rows of the variant table written out with dense matrices.
Eigen::MatrixXd variant_oracle(const Eigen::MatrixXd& h, const Eigen::MatrixXd& s, const Eigen::MatrixXd& f,
                               double e_ref, int k) {
  const Eigen::MatrixXd hn = h - e_ref * Eigen::MatrixXd::Identity(h.rows(), h.cols());
  const Eigen::MatrixXd c1 = comm(hn, s);
  switch (k) {
    case 1:
      return h;
    case 3:
      return h + c1;
    case 4:
      return h + c1 + 0.5 * comm(comm(f, s), s);
    case 6:
      return h + c1 + 0.5 * comm(c1, s);
    case 7:
      return h + c1 + 0.5 * comm(c1, s) + (1.0 / 6.0) * comm(comm(comm(f, s), s), s);
  }
  return {};
}

Eigen::MatrixXd restrict_dense(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = m(idx[i], idx[j]);
  return out;
}

}  // namespace

TEST(Sigma, AntiHermitianAndRejectsInternalAmplitudes) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {2});
  const auto t_ext = partition_cluster(p.cc.t, g).second;
  const SigmaOperator s = build_sigma_ext(t_ext, p.space, g);
  EXPECT_LT(s.matrix.max_symmetry(), 1e-12);
  EXPECT_GT(s.matrix.max_abs(), 1e-3);
  EXPECT_TRUE(build_sigma_ext(ClusterOperator(p.partition.reference), p.space).matrix.is_zero());
  try {
    build_sigma_ext(p.cc.t, p.space, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::contamination);
  }
}

TEST(ExactDucc, ZeroSigmaOnFullSpaceGivesFciSpectrum) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = full_algebra(p.partition.reference, 8);
  const auto heff = exact_ducc_heff(p.h, build_sigma_ext(ClusterOperator(p.partition.reference), p.space), g);
  EXPECT_EQ(heff.provenance, Provenance::ducc_exact);
  const ActiveSpectrum sp = diagonalize_active(heff);
  const auto fci = oracle::fci(p.spatial, 4, 0);
  EXPECT_LT((sp.eigenvalues - fci.energies).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactDucc, MatchesDenseUnitaryTransform) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {2});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  const EffectiveHamiltonian heff = exact_ducc_heff(p.h, s, g);
  EXPECT_LT(heff.matrix.max_asymmetry(), 1e-10);
  const Eigen::MatrixXd sd = s.matrix.to_dense();
  const Eigen::MatrixXd full = (-sd).exp() * p.h.to_dense() * sd.exp();
  const ActiveProjector proj(g, p.partition.reference, p.space);
  EXPECT_LT((heff.matrix.to_dense() - restrict_dense(full, proj.embedding())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactDucc, ImprovesOnBareProjection) {
  const Problem p = load("h2_631g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0}, {1});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  const double e_fci = oracle::fci(p.spatial, 2, 0).energies(0);
  const double e_exact = diagonalize_active(exact_ducc_heff(p.h, s, g)).ground_energy();
  const double e_bare = diagonalize_active(commutator_heff(p.h, s, DuccVariant::a1, p.partition, g)).ground_energy();
  EXPECT_LT(std::abs(e_exact - e_fci), std::abs(e_bare - e_fci));
}

TEST(Commutators, VariantsMatchDenseOracle) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {3});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  const OperatorMatrix f_n = normal_fock_matrix(p.partition, p.space);
  const Eigen::MatrixXd h = p.h.to_dense(), sd = s.matrix.to_dense(), f = f_n.to_dense();
  const ActiveProjector proj(g, p.partition.reference, p.space);
  for (auto [v, k] : {std::pair{DuccVariant::a1, 1}, {DuccVariant::a3, 3}, {DuccVariant::a4, 4},
                      {DuccVariant::a6, 6}, {DuccVariant::a7, 7}}) {
    const Eigen::MatrixXd expected = variant_oracle(h, sd, f, p.partition.e_ref, k);
    const Eigen::MatrixXd got = commutator_expansion(p.h, s.matrix, v, f_n, p.partition.e_ref).to_dense();
    EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-12) << k;
    const EffectiveHamiltonian heff = commutator_heff(p.h, s, v, p.partition, g);
    const Eigen::MatrixXd pe = restrict_dense(expected, proj.embedding());
    EXPECT_LT((heff.matrix.to_dense() - 0.5 * (pe + pe.transpose())).cwiseAbs().maxCoeff(), 1e-12) << k;
    EXPECT_LT(heff.matrix.max_asymmetry(), 1e-10);
  }
}

TEST(Commutators, FockOperatorIsNormalOrdered) {
  const Problem p = load("h4_sto3g");
  const OperatorMatrix f_n = normal_fock_matrix(p.partition, p.space);
  EXPECT_NEAR(f_n(*p.space->find(p.partition.reference), *p.space->find(p.partition.reference)), 0.0, 1e-12);
  // Diagonal on a double excitation 0,1 -> 4,5 equals the orbital energy difference.
  const auto eps = p.partition.orbital_energies();
  const auto d = excite(make_label({0, 1}, {4, 5}), p.partition.reference)->det;
  EXPECT_NEAR(f_n(*p.space->find(d), *p.space->find(d)), eps[4] + eps[5] - eps[0] - eps[1], 1e-12);
}

TEST(Commutators, ZeroSigmaAndA1GiveBareHamiltonian) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {1}, {2, 3});
  const ActiveProjector proj(g, p.partition.reference, p.space);
  const Eigen::MatrixXd bare = proj.project(p.h).to_dense();
  const SigmaOperator zero = build_sigma_ext(ClusterOperator(p.partition.reference), p.space, g);
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  for (auto v : {DuccVariant::a1, DuccVariant::a3, DuccVariant::a4, DuccVariant::a6, DuccVariant::a7})
    EXPECT_LT((commutator_heff(p.h, zero, v, p.partition, g).matrix.to_dense() - bare).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((commutator_heff(p.h, s, DuccVariant::a1, p.partition, g).matrix.to_dense() - bare).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(Commutators, AsymmetryShrinksWithSigma) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {2});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  for (auto v : {DuccVariant::a3, DuccVariant::a4, DuccVariant::a6, DuccVariant::a7}) {
    double previous = std::numeric_limits<double>::infinity();
    for (double scale : {1.0, 0.5, 0.25}) {
      const SigmaOperator scaled{s.generator, s.matrix * scale};
      const double asym = commutator_heff(p.h, scaled, v, p.partition, g).asymmetry_before_hermitization;
      EXPECT_LE(asym, previous);
      EXPECT_LT(asym, 1e-10);
      previous = asym;
    }
  }
}

TEST(Commutators, HigherVariantsTrackExactTransform) {
  const Problem p = load("h2_631g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0}, {1});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  const double exact = diagonalize_active(exact_ducc_heff(p.h, s, g)).ground_energy();
  auto e = [&](DuccVariant v) { return diagonalize_active(commutator_heff(p.h, s, v, p.partition, g)).ground_energy(); };
  EXPECT_LE(std::abs(e(DuccVariant::a7) - exact), std::abs(e(DuccVariant::a3) - exact));
}

TEST(Commutators, ApproximantsCloserToCcsdThanBare) {
  for (const char* name : {"h2_631g", "h4_631g_6mo"}) {
    const Problem p = load(name);
    for (std::vector<int> virt : {std::vector<int>{p.spatial.n_electrons() / 2},
                                  std::vector<int>{p.spatial.n_electrons() / 2, p.spatial.n_electrons() / 2 + 1}}) {
      std::vector<int> occ;
      for (int i = 0; i < p.spatial.n_electrons() / 2; ++i) occ.push_back(i);
      const SesAlgebra g = make_spatial_algebra(p.partition.reference, occ, virt);
      const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
      auto e = [&](DuccVariant v) {
        return diagonalize_active(commutator_heff(p.h, s, v, p.partition, g)).ground_energy();
      };
      const double bare = std::abs(e(DuccVariant::a1) - p.cc.energy);
      for (auto v : {DuccVariant::a4, DuccVariant::a6, DuccVariant::a7})
        EXPECT_LT(std::abs(e(v) - p.cc.energy), bare) << name << " " << g.to_string() << " " << to_string(v);
    }
  }
}

TEST(Variants, ParsingAndAliases) {
  EXPECT_EQ(parse_variant("A7"), DuccVariant::a7);
  EXPECT_EQ(parse_variant("a3"), DuccVariant::a3);
  EXPECT_EQ(parse_variant("A(6)"), DuccVariant::a6);
  EXPECT_EQ(canonical(DuccVariant::a2), DuccVariant::a4);
  EXPECT_EQ(canonical(DuccVariant::a5), DuccVariant::a7);
  try {
    parse_variant("A8");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::usage);
  }
  const Problem p = load("h2_sto3g");
  const SesAlgebra g = full_algebra(p.partition.reference, 4);
  const SigmaOperator zero = build_sigma_ext(ClusterOperator(p.partition.reference), p.space, g);
  EXPECT_FALSE(commutator_heff(p.h, zero, DuccVariant::a5, p.partition, g).note.empty());
}

TEST(Family, SectorsAndReferenceBlock) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {2});
  const auto t_ext = partition_cluster(p.cc.t, g).second;
  const EffectiveHamiltonian fam = ducc_family(p.spin, p.partition, t_ext, g, DuccVariant::a7, {3, 4, 5});
  EXPECT_EQ(fam.sectors.size(), 3U);
  const SigmaOperator s = build_sigma_ext(t_ext, p.space, g);
  const EffectiveHamiltonian direct = commutator_heff(p.h, s, DuccVariant::a7, p.partition, g);
  EXPECT_EQ(fam.matrix.rows(), direct.matrix.rows());
  EXPECT_LT((fam.matrix.to_dense() - direct.matrix.to_dense()).cwiseAbs().maxCoeff(), 1e-12);
  const EffectiveHamiltonian ex = ducc_family(p.spin, p.partition, t_ext, g, std::nullopt, {3, 4, 5});
  EXPECT_NEAR(diagonalize_active(ex).ground_energy(), diagonalize_active(exact_ducc_heff(p.h, s, g)).ground_energy(),
              1e-10);
}

TEST(Extraction, BareHamiltonianRepresentsItself) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = full_algebra(p.partition.reference, 8);
  const EffectiveHamiltonian bare = bare_family(p.spin, p.partition.reference, g, {3, 4, 5});
  const DowncoefExport c = extract_many_body(bare);
  EXPECT_LT(c.recomposition_error, 1e-9);
  EXPECT_FALSE(c.rank_deficient);
  EXPECT_NEAR(c.e_scalar, p.spin.e_core, 1e-9);
  EXPECT_LT((c.one_body - p.spin.h).cwiseAbs().maxCoeff(), 1e-9);
  double worst = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      for (int r = 0; r < 8; ++r)
        for (int s = 0; s < 8; ++s) worst = std::max(worst, std::abs(c.two_body.v(a, b, r, s) - p.spin.v(a, b, r, s)));
  EXPECT_LT(worst, 1e-9);
}

TEST(Extraction, OneBodyInputHasNoTwoBodyPart) {
  const Problem p = load("h4_sto3g");
  SpinIntegralSet one(8);
  one.h = p.partition.fock;
  one.e_core = 0.25;
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0, 1}, {2, 3});
  const DowncoefExport c = extract_many_body(bare_family(one, p.partition.reference, g, {3, 4, 5}));
  EXPECT_LT(c.recomposition_error, 1e-9);
  double worst = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      for (int r = 0; r < 8; ++r)
        for (int s = 0; s < 8; ++s) worst = std::max(worst, std::abs(c.two_body.v(a, b, r, s)));
  EXPECT_LT(worst, 1e-9);
}

TEST(Extraction, FullRankFitIsExact) {
  const Problem p = load("h2_631g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {0}, {1});
  const auto t_ext = partition_cluster(p.cc.t, g).second;
  const EffectiveHamiltonian fam = ducc_family(p.spin, p.partition, t_ext, g, DuccVariant::a7, {2});
  EXPECT_LT(extract_many_body(fam, 2).recomposition_error, 1e-9);
}

TEST(Extraction, A7RecompositionBound) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spatial_algebra(p.partition.reference, {1}, {2});
  const auto t_ext = partition_cluster(p.cc.t, g).second;
  const EffectiveHamiltonian fam = ducc_family(p.spin, p.partition, t_ext, g, DuccVariant::a7, {3, 4, 5});
  const DowncoefExport c = extract_many_body(fam);
  const OperatorMatrix rec = recompose(c, fam);
  const double dim = static_cast<double>(fam.matrix.rows());
  EXPECT_GE(c.recomposition_error, 0.0);
  EXPECT_LE(std::abs(lowest(rec.to_dense()) - diagonalize_active(fam).ground_energy()),
            10.0 * c.recomposition_error * dim + 1e-12);
  EXPECT_NEAR((rec.to_dense() - fam.matrix.to_dense()).cwiseAbs().maxCoeff(), c.recomposition_error, 1e-12);
}

TEST(Extraction, ExportFormat) {
  const Problem p = load("h2_sto3g");
  const SesAlgebra g = full_algebra(p.partition.reference, 4);
  const DowncoefExport c = extract_many_body(bare_family(p.spin, p.partition.reference, g, {1, 2, 3}));
  std::ostringstream os;
  write_downcoef(os, c);
  std::istringstream in(os.str());
  std::string line, section;
  int one = 0, two = 0;
  bool saw_provenance = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok[0] == "provenance") saw_provenance = true;
    if (tok.size() == 1) {
      section = tok[0];
      continue;
    }
    if (section == "one_body") {
      ASSERT_EQ(tok.size(), 3U);
      EXPECT_NEAR(std::stod(tok[2]), c.one_body(std::stoi(tok[0]), std::stoi(tok[1])), 1e-15);
      ++one;
    } else if (section == "two_body") {
      ASSERT_EQ(tok.size(), 5U);
      EXPECT_NEAR(std::stod(tok[4]), c.two_body.v(std::stoi(tok[0]), std::stoi(tok[1]), std::stoi(tok[2]), std::stoi(tok[3])),
                  1e-15);
      ++two;
    }
  }
  EXPECT_TRUE(saw_provenance);
  EXPECT_GT(one, 0);
  EXPECT_GT(two, 0);
}

TEST(Diagonalize, OneDimensionalAndRejections) {
  const Problem p = load("h4_sto3g");
  const SesAlgebra g = make_spin_algebra(p.partition.reference, {}, {});
  const SigmaOperator s = build_sigma_ext(partition_cluster(p.cc.t, g).second, p.space, g);
  const EffectiveHamiltonian one = commutator_heff(p.h, s, DuccVariant::a7, p.partition, g);
  ASSERT_EQ(one.matrix.rows(), 1);
  EXPECT_DOUBLE_EQ(diagonalize_active(one).ground_energy(), one.matrix(0, 0));
  const SesAlgebra h1 = make_spatial_algebra(p.partition.reference, {1}, {2});
  const EffectiveHamiltonian ses = build_heff_ses(p.h, partition_cluster(p.cc.t, h1).second, h1);
  EXPECT_THROW(diagonalize_active(ses), Error);
}
