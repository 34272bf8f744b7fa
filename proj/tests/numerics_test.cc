#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "kvmemnn/numerics.h"
#include "kvmemnn/params.h"
#include "test_util.h"

namespace kvmemnn {
namespace {

TEST(SparseVec, FromUnsortedSortsMergesAndDropsZeros) {
  auto v = SparseVec::FromUnsorted(10, {{7, 1.0}, {2, 0.5}, {7, 2.0}, {4, 1.0}, {4, -1.0}});
  ASSERT_EQ(v.nnz(), 2u);
  EXPECT_EQ(v.entries()[0], SparseVec::Entry(2, 0.5));
  EXPECT_EQ(v.entries()[1], SparseVec::Entry(7, 3.0));
  EXPECT_EQ(v.Get(4), 0.0);
  EXPECT_THROW(SparseVec::FromUnsorted(3, {{3, 1.0}}), ConfigError);
}

TEST(SparseVec, CombineMatchesDenseArithmetic) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = testing::RandomSparse(12, 6, rng);
    auto b = testing::RandomSparse(12, 6, rng);
    auto c = SparseVec::Combine(2.0, a, -0.5, b).ToDense();
    auto da = a.ToDense(), db = b.ToDense();
    for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(c[i], 2.0 * da[i] - 0.5 * db[i]);
  }
}

TEST(Embed, MatchesDenseMatVec) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = testing::RandomMat(6, 15, 1.0, rng);
    auto phi = testing::RandomSparse(15, 5, rng);
    auto sparse = Embed(m, phi);
    auto dense = MatVec(m, phi.ToDense());
    for (std::size_t r = 0; r < 6; ++r) EXPECT_NEAR(sparse[r], dense[r], 1e-12);
  }
  EXPECT_THROW(Embed(DenseMat(2, 3), SparseVec(4)), ConfigError);
}

TEST(MatTransposeVec, AgreesWithExplicitTranspose) {
  std::mt19937_64 rng(9);
  auto m = testing::RandomMat(4, 7, 1.0, rng);
  DenseVec x = {0.3, -1.2, 2.0, 0.7};
  auto got = MatTransposeVec(m, x);
  for (std::size_t c = 0; c < 7; ++c) {
    double want = 0.0;
    for (std::size_t r = 0; r < 4; ++r) want += m(r, c) * x[r];
    EXPECT_NEAR(got[c], want, 1e-12);
  }
}

// Reference softmax in long double, without max subtraction.
std::vector<long double> ReferenceSoftmax(const DenseVec& z) {
  std::vector<long double> out(z.size());
  long double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += out[i] = std::exp(static_cast<long double>(z[i]));
  for (auto& v : out) v /= sum;
  return out;
}

TEST(Softmax, MatchesExtendedPrecisionReference) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    DenseVec z(1 + trial % 9);
    for (double& x : z) x = u(rng);
    auto got = Softmax(z);
    auto want = ReferenceSoftmax(z);
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      EXPECT_NEAR(got[i], static_cast<double>(want[i]), 1e-14);
      total += got[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Softmax, StableForHugeLogits) {
  auto p = Softmax(DenseVec{1000.0, 1000.0, -1000.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_TRUE(Softmax(DenseVec{}).empty());
}

TEST(CrossEntropy, SumsGoldMassOnce) {
  DenseVec p = {0.1, 0.2, 0.3, 0.4};
  const std::uint32_t one[] = {3};
  const std::uint32_t two[] = {1, 3, 3};
  EXPECT_NEAR(CrossEntropyLoss(p, one), -std::log(0.4), 1e-15);
  EXPECT_NEAR(CrossEntropyLoss(p, two), -std::log(0.6), 1e-15);
  EXPECT_THROW(CrossEntropyLoss(p, std::span<const std::uint32_t>{}), DataError);
  const std::uint32_t bad[] = {4};
  EXPECT_THROW(CrossEntropyLoss(p, bad), DataError);
  const std::uint32_t zero[] = {0};
  EXPECT_TRUE(std::isinf(CrossEntropyLoss(DenseVec{0.0, 1.0}, zero)));
}

TEST(FiniteDifference, RecoversQuadraticGradient) {
  std::mt19937_64 rng(13);
  ModelParams p;
  p.tied = false;
  p.A = testing::RandomMat(2, 3, 1.0, rng);
  p.B = testing::RandomMat(2, 3, 1.0, rng);
  p.R = {testing::RandomMat(2, 2, 1.0, rng)};
  // f = sum a^2 + 3 sum b + sum r^3; gradient 2a, 3, 3r^2.
  auto f = [](const ModelParams& m) {
    double s = 0.0;
    for (double a : m.A.data()) s += a * a;
    for (double b : m.B.data()) s += 3.0 * b;
    for (double r : m.R[0].data()) s += r * r * r;
    return s;
  };
  auto g = FiniteDifferenceGrad(f, p, 1e-5);
  for (std::size_t i = 0; i < p.A.size(); ++i) EXPECT_NEAR(g.dA.data()[i], 2 * p.A.data()[i], 1e-8);
  for (std::size_t i = 0; i < p.B.size(); ++i) EXPECT_NEAR(g.dB.data()[i], 3.0, 1e-8);
  for (std::size_t i = 0; i < p.R[0].size(); ++i) {
    const double r = p.R[0].data()[i];
    EXPECT_NEAR(g.dR[0].data()[i], 3 * r * r, 1e-8);
  }
}

TEST(Sgd, UntiedStepsEachMatrixOnItsOwnGradient) {
  std::mt19937_64 rng(17);
  ModelParams p;
  p.tied = false;
  p.A = testing::RandomMat(2, 4, 1.0, rng);
  p.B = testing::RandomMat(2, 4, 1.0, rng);
  p.R = {testing::RandomMat(2, 2, 1.0, rng)};
  auto g = GradientSet::ZerosLike(p);
  g.dA.Fill(1.0);
  g.dB.Fill(-2.0);
  g.dR[0].Fill(0.5);
  ModelParams q = p;
  SgdStep(q, g, 0.1);
  for (std::size_t i = 0; i < p.A.size(); ++i) {
    EXPECT_DOUBLE_EQ(q.A.data()[i], p.A.data()[i] - 0.1);
    EXPECT_DOUBLE_EQ(q.B.data()[i], p.B.data()[i] + 0.2);
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(q.R[0].data()[i], p.R[0].data()[i] - 0.05);
}

TEST(Sgd, TiedAppliesSumOfBothGradients) {
  std::mt19937_64 rng(19);
  ModelParams p;
  p.tied = true;
  p.A = testing::RandomMat(2, 3, 1.0, rng);
  auto g = GradientSet::ZerosLike(p);
  g.dA = DenseMat(2, 3, 1.0);
  g.dB = DenseMat(2, 3, 2.0);
  ModelParams q = p;
  SgdStep(q, g, 0.5);
  for (std::size_t i = 0; i < p.A.size(); ++i) EXPECT_DOUBLE_EQ(q.A.data()[i], p.A.data()[i] - 1.5);
  EXPECT_TRUE(q.B.empty());
}

TEST(Clip, RescalesToMaxNorm) {
  ModelParams p;
  p.tied = false;
  p.A = DenseMat(1, 2);
  p.B = DenseMat(1, 2);
  auto g = GradientSet::ZerosLike(p);
  g.dA(0, 0) = 3.0;
  g.dB(0, 1) = 4.0;
  EXPECT_DOUBLE_EQ(ClipGradients(g, 1.0), 5.0);
  EXPECT_NEAR(std::sqrt(g.SquaredNorm()), 1.0, 1e-15);
  EXPECT_NEAR(g.dA(0, 0), 0.6, 1e-15);
  auto h = GradientSet::ZerosLike(p);
  h.dA(0, 0) = 0.5;
  ClipGradients(h, 1.0);
  EXPECT_EQ(h.dA(0, 0), 0.5);
}

TEST(InitParams, SeededUniformWithinBound) {
  HyperParams h;
  h.dim = 16;
  h.hops = 2;
  h.init_scale = 0.1;
  auto a = InitParams(h, 40);
  auto b = InitParams(h, 40);
  EXPECT_EQ(a, b);
  const double bound = 0.1 / std::sqrt(16.0);
  double mx = 0.0;
  for (double x : a.A.data()) mx = std::max(mx, std::fabs(x));
  for (const auto& r : a.R) for (double x : r.data()) mx = std::max(mx, std::fabs(x));
  EXPECT_LE(mx, bound);
  EXPECT_GT(mx, 0.9 * bound);
  ASSERT_EQ(a.R.size(), 2u);
  h.seed = 2;
  EXPECT_NE(InitParams(h, 40).A, a.A);
}

TEST(InitParams, HopIdentityAddsOnlyToTheDiagonal) {
  HyperParams h;
  h.dim = 6;
  h.hops = 3;
  const auto plain = InitParams(h, 10);
  h.hop_identity_init = true;
  const auto ident = InitParams(h, 10);
  EXPECT_EQ(ident.A, plain.A);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_DOUBLE_EQ(ident.R[k](i, j), plain.R[k](i, j) + (i == j ? 1.0 : 0.0));
      }
    }
  }
}

TEST(HyperParams, ValidateRejectsNonsense) {
  HyperParams h;
  EXPECT_NO_THROW(h.Validate());
  h.window = 4;
  EXPECT_THROW(h.Validate(), ConfigError);
  h = {};
  h.lr = -1.0;
  EXPECT_THROW(h.Validate(), ConfigError);
  h = {};
  h.init_scale = std::numeric_limits<double>::infinity();
  EXPECT_THROW(h.Validate(), ConfigError);
  h = {};
  h.dropout_memory = 1.5;
  EXPECT_THROW(h.Validate(), ConfigError);
}

}  // namespace
}  // namespace kvmemnn
