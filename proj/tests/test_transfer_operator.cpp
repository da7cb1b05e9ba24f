#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "detdiff/io.hpp"
#include "detdiff/markov_partition.hpp"
#include "detdiff/transfer_operator.hpp"

using namespace detdiff;

namespace {

PartitionSolution load_solution(const std::string& name) {
  return solve_partition_system(partition_system_from_json(
      load_spec_argument(std::string(DETDIFF_DATA_DIR) + "/partition_systems/" + name, "partition system")));
}

}  // namespace

TEST(DominantEigen, KnownSpectrum) {
  Eigen::MatrixXcd a(3, 3);
  a << 2, 1, 0, 1, 3, 1, 0, 1, 4;
  const auto pair = leading_eigenpair<double>(a);
  EXPECT_NEAR(pair.value.real(), 3.0 + std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(pair.value.imag(), 0.0, 1e-12);
  EXPECT_LT(pair.residual, 1e-12);
  EXPECT_THROW(leading_eigenpair<double>(Eigen::MatrixXcd::Zero(2, 2)), numerical_error);
}

TEST(TransferMatrices, OddIntegerSlopeIsScalarWalk) {
  const auto set = build_transition_matrices(PiecewiseLinearLiftMap::linear(3.0), MarkovPartition::unit());
  ASSERT_EQ(set.matrices().size(), 3u);
  for (const auto& sm : set.matrices()) EXPECT_NEAR(sm.p(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(set.min_shift(), -1);
  EXPECT_EQ(set.max_shift(), 1);
  EXPECT_LT(set.mass_defect(), 1e-14);
}

TEST(TransferMatrices, EvenSlopeTwoCells) {
  // cells ordered by position: 0 = [-1/2, 0), 1 = [0, 1/2)
  const auto set = build_transition_matrices(PiecewiseLinearLiftMap::linear(4.0),
                                             MarkovPartition::symmetric(std::span<const double>{}, true));
  EXPECT_EQ(set.min_shift(), -2);
  EXPECT_EQ(set.max_shift(), 2);
  const Eigen::MatrixXd p2 = set.at(2);
  EXPECT_DOUBLE_EQ(p2(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(p2.sum(), 0.25);
  const Eigen::MatrixXd p0 = set.at(0);
  EXPECT_TRUE(p0.isApprox(0.25 * Eigen::MatrixXd::Identity(2, 2)));
  const Eigen::MatrixXd p1 = set.at(1);
  EXPECT_DOUBLE_EQ(p1(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(p1(1, 1), 0.25);
}

TEST(TransferMatrices, MatchPrintedCharacteristicMatrix) {
  const auto sol = load_solution("example-1.json");
  const double L = sol.lambda;
  const auto set = build_transition_matrices(PiecewiseLinearLiftMap::linear(L), sol.partition);
  const double l = 0.37;
  const std::complex<double> I(0, 1);
  const auto e = [&](double k) { return std::exp(I * k * l); };
  Eigen::MatrixXcd expected(3, 3);
  expected << e(-1), 1.0, e(1) + e(2), e(-1), 1.0, e(1), e(-1) + e(-2), 1.0, e(1);
  expected /= L;
  EXPECT_LT((characteristic_matrix(set, l) - expected).cwiseAbs().maxCoeff(), 1e-14);
  // z(l) = (1/L)(1 + cos l + sqrt(cos^2 l + 2 cos l))
  const double z = (1 + std::cos(l) + std::sqrt(std::cos(l) * std::cos(l) + 2 * std::cos(l))) / L;
  EXPECT_NEAR(std::abs(leading_eigenvalue(characteristic_matrix(set, l))), z, 1e-13);
}

TEST(TransferMatrices, RejectsInconsistentPartition) {
  EXPECT_THROW(build_transition_matrices(PiecewiseLinearLiftMap::linear(3.7), MarkovPartition::unit()),
               validation_error);
}

TEST(Spectral, IntegerSlopes) {
  for (int L : {3, 5, 7}) {
    const auto r = diffusion_spectral(build_transition_matrices(PiecewiseLinearLiftMap::linear(L), MarkovPartition::unit()));
    EXPECT_NEAR(r.D, (L * L - 1) / 24.0, 1e-10);
    EXPECT_NEAR(r.drift, 0.0, 1e-12);
    ASSERT_EQ(r.alpha.size(), 1u);
    EXPECT_NEAR(r.alpha[0], 1.0, 1e-14);
  }
  const auto r4 = diffusion_spectral(build_transition_matrices(
      PiecewiseLinearLiftMap::linear(4.0), MarkovPartition::symmetric(std::span<const double>{}, true)));
  EXPECT_NEAR(r4.D, 0.25, 1e-10);
}

TEST(Spectral, SqrtThree) {
  const auto sol = load_solution("example-1.json");
  const auto r = diffusion_spectral(build_transition_matrices(PiecewiseLinearLiftMap::linear(sol.lambda), sol.partition));
  EXPECT_NEAR(r.D, std::sqrt(3.0) / 6.0, 1e-10);
  const double outer = (2 * std::sqrt(3.0) + 3) / 6;
  const double inner = (3 + std::sqrt(3.0)) / 6;
  ASSERT_EQ(r.alpha.size(), 3u);
  EXPECT_NEAR(r.alpha[0], outer, 1e-10);
  EXPECT_NEAR(r.alpha[1], inner, 1e-10);
  EXPECT_NEAR(r.alpha[2], outer, 1e-10);
  EXPECT_LT(r.diagnostics.at("richardson_gap"), 1e-8);
}

TEST(Spectral, DriftOfShiftedMap) {
  // f(x) = 3x + 1 on I_0: every step adds one cell on average.
  const PiecewiseLinearLiftMap f({-0.5, 0.5}, {{-0.5, 2.5}});
  const auto r = diffusion_spectral(build_transition_matrices(f, MarkovPartition::unit()));
  EXPECT_NEAR(r.drift, 1.0, 1e-10);
  EXPECT_NEAR(r.D, 1.0 / 3.0, 1e-10);
}

TEST(Stationary, RejectsReducible) {
  const TransitionMatrixSet set({{0, Eigen::MatrixXd::Identity(2, 2)}}, {0.5, 0.5});
  EXPECT_THROW(stationary_density(set), validation_error);
}

TEST(Stationary, NormalisedMass) {
  for (const char* file : {"example-4.json", "example-6.json", "example-8.json"}) {
    const auto sol = load_solution(file);
    const auto set = build_transition_matrices(PiecewiseLinearLiftMap::linear(sol.lambda), sol.partition);
    const auto alpha = stationary_density(set);
    double mass = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) mass += alpha[j] * set.cell_lengths()[j];
    EXPECT_NEAR(mass, 1.0, 1e-12) << file;
  }
}

TEST(TransitionSet, Validation) {
  EXPECT_THROW(TransitionMatrixSet({{0, Eigen::MatrixXd::Constant(1, 1, -1.0)}}, {1.0}), validation_error);
  EXPECT_THROW(TransitionMatrixSet({{0, Eigen::MatrixXd::Identity(2, 2)}}, {1.0}), validation_error);
  EXPECT_THROW(TransitionMatrixSet({{0, Eigen::MatrixXd::Identity(1, 1)}}, {0.7}), validation_error);
  const auto s = TransitionMatrixSet::scalar({{-1, 0.5}, {1, 0.5}});
  EXPECT_EQ(s.cell_count(), 1u);
  EXPECT_LT(s.mass_defect(), 1e-15);
}
