#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "saleval/metrics.hpp"

using namespace saleval;

namespace {

using Vec = std::vector<double>;

std::span<const double> sp(const Vec& v) { return v; }

Vec uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = d(eng);
  return v;
}

// Quadratic-time ranks: count of smaller values plus the midpoint of the tie block.
Vec brute_ranks(const Vec& v) {
  Vec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

// Textbook correlation written without shared helpers.
double textbook_pearson(const Vec& a, const Vec& b) {
  const double n = double(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

LatentGaussian gaussian(Vec mean, Vec diag) {
  LatentGaussian g;
  g.mean = Eigen::Map<Vector>(mean.data(), Eigen::Index(mean.size()));
  g.cov = Eigen::Map<Vector>(diag.data(), Eigen::Index(diag.size())).asDiagonal();
  g.n = 2;
  return g;
}

}  // namespace

TEST(Distances, L1AndMse) {
  const Vec a(784, 0.2), b(784, 0.7);
  EXPECT_DOUBLE_EQ(l1_distance(sp(a), sp(a)), 0.0);
  EXPECT_DOUBLE_EQ(mse(sp(a), sp(a)), 0.0);
  EXPECT_NEAR(l1_distance(sp(a), sp(b)), 0.5, 1e-12);
  EXPECT_NEAR(mse(sp(a), sp(b)), 0.25, 1e-12);
}

TEST(Pearson, AffineAndNegation) {
  const Vec a = uniform(784, 1);
  Vec b(a.size()), c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    b[i] = 2 * a[i] + 3;
    c[i] = -a[i];
  }
  EXPECT_NEAR(pearson(sp(a), sp(b)).value, 1.0, 1e-12);
  EXPECT_NEAR(pearson(sp(a), sp(c)).value, -1.0, 1e-12);
}

TEST(Pearson, SmallHandExample) {
  const Vec a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(pearson(sp(a), sp(b)).value, 0.8, 1e-12);
}

TEST(Pearson, MatchesTextbookFormula) {
  const Vec a = uniform(784, 2), b = uniform(784, 3);
  EXPECT_NEAR(pearson(sp(a), sp(b)).value, textbook_pearson(a, b), 1e-10);
}

TEST(Pearson, ConstantInputSentinel) {
  const Vec a(10, 0.5), b = uniform(10, 4);
  const auto r = pearson(sp(a), sp(b));
  EXPECT_TRUE(r.constant_input);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(spearman(sp(b), sp(a)).constant_input);
}

TEST(Spearman, MonotoneInvariance) {
  const Vec a = uniform(784, 5);
  Vec cube(a.size()), expo(a.size()), rev(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    cube[i] = std::pow(a[i] - 0.5, 3);
    expo[i] = std::exp(3 * a[i]);
    rev[i] = -a[i];
  }
  EXPECT_NEAR(spearman(sp(a), sp(cube)).value, 1.0, 1e-12);
  EXPECT_NEAR(spearman(sp(a), sp(expo)).value, 1.0, 1e-12);
  EXPECT_NEAR(spearman(sp(a), sp(rev)).value, -1.0, 1e-12);
}

TEST(Spearman, ReverseSortedDistinct) {
  const Vec a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(sp(a), sp(b)).value, -1.0, 1e-12);
}

TEST(Spearman, TiesUseAverageRanks) {
  const Vec a{1, 2, 2, 4}, b{1, 2, 3, 4};
  const Vec ra = brute_ranks(a);
  EXPECT_EQ(ra, (Vec{1, 2.5, 2.5, 4}));
  EXPECT_NEAR(spearman(sp(a), sp(b)).value, textbook_pearson(ra, brute_ranks(b)), 1e-12);
}

TEST(Spearman, HeavyTiesMatchBruteForce) {
  std::mt19937_64 eng(6);
  std::uniform_int_distribution<int> d(0, 9);
  Vec a(784), b(784);
  for (auto& x : a) x = d(eng);
  for (auto& x : b) x = d(eng);
  EXPECT_EQ(average_ranks(sp(a)), brute_ranks(a));
  EXPECT_NEAR(spearman(sp(a), sp(b)).value, textbook_pearson(brute_ranks(a), brute_ranks(b)), 1e-10);
}

TEST(TopK, Identity) {
  const Vec a = uniform(784, 7);
  EXPECT_EQ(topk_accuracy(sp(a), sp(a), 0.25), 1.0);
}

TEST(TopK, DisjointTopQuartiles) {
  Vec a(784, 0.0), b(784, 0.0);
  for (std::size_t i = 0; i < 196; ++i) a[i] = 1.0;
  for (std::size_t i = 196; i < 392; ++i) b[i] = 1.0;
  EXPECT_EQ(topk_accuracy(sp(a), sp(b), 0.25), 0.0);
}

TEST(TopK, TieBreakByLowerIndex) {
  const Vec flat(784, 0.3);
  EXPECT_EQ(topk_indices(sp(flat), 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(topk_count(784, 0.25), 196u);
  EXPECT_EQ(topk_count(10, 0.25), 3u);
}

TEST(TopK, EqualSizedSetsGiveSameOverlapBothWays) {
  // Both directions share the same k here, so overlap counts agree; the
  // asymmetry is only in which map defines the denominator.
  const Vec a = uniform(784, 8), b = uniform(784, 9);
  EXPECT_EQ(topk_accuracy(sp(a), sp(b)), topk_accuracy(sp(b), sp(a)));
}

TEST(TopK, RandomPairsAverageK) {
  double sum = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vec a = uniform(784, 1000 + 2 * t), b = uniform(784, 1001 + 2 * t);
    sum += topk_accuracy(sp(a), sp(b), 0.25);
  }
  EXPECT_NEAR(sum / 1000, 0.25, 0.01);
}

TEST(Ssim, IdentityAndConstants) {
  const Vec a = uniform(784, 10);
  EXPECT_NEAR(ssim_global(sp(a), sp(a)), 1.0, 1e-12);
  const Vec zero(784, 0.0), one(784, 1.0);
  const double c1 = 1e-4, c2 = 9e-4;
  // Zero variances leave (c1 * c2) / ((1 + c1) * c2).
  EXPECT_NEAR(ssim_global(sp(zero), sp(one)), c1 / (1 + c1), 1e-15);
}

TEST(Ssim, ConstantShift) {
  const Vec a = uniform(784, 11);
  Vec b(a);
  for (auto& x : b) x += 0.1;
  const double s = ssim_global(sp(a), sp(b));
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(Symmetry, PairwiseMeasures) {
  const Vec a = uniform(784, 12), b = uniform(784, 13);
  EXPECT_EQ(pearson(sp(a), sp(b)).value, pearson(sp(b), sp(a)).value);
  EXPECT_EQ(spearman(sp(a), sp(b)).value, spearman(sp(b), sp(a)).value);
  EXPECT_NEAR(ssim_global(sp(a), sp(b)), ssim_global(sp(b), sp(a)), 1e-15);
}

TEST(Bounds, RandomPairs) {
  for (int t = 0; t < 50; ++t) {
    const Vec a = uniform(784, 200 + t), b = uniform(784, 300 + t);
    const auto m = compare_maps(sp(a), sp(b));
    EXPECT_GE(m.pc, -1.0);
    EXPECT_LE(m.pc, 1.0);
    EXPECT_GE(m.sc, -1.0);
    EXPECT_LE(m.sc, 1.0);
    EXPECT_GE(m.ta, 0.0);
    EXPECT_LE(m.ta, 1.0);
    EXPECT_LE(m.ssim, 1.0);
    EXPECT_GE(m.l1, 0.0);
    EXPECT_GE(m.mse, 0.0);
  }
}

TEST(FitGaussian, HandCases) {
  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  const auto g = fit_gaussian(same);
  EXPECT_EQ(g.mean, Vector(Eigen::Vector3d(1, 2, 3)));
  EXPECT_EQ(g.cov, Matrix::Zero(3, 3));

  Matrix two(2, 2);
  two << 0, 0, 2, 0;
  const auto h = fit_gaussian(two);
  EXPECT_EQ(h.mean, Vector(Eigen::Vector2d(1, 0)));
  EXPECT_NEAR(h.cov(0, 0), 2.0, 1e-15);
  EXPECT_EQ(h.cov(1, 1), 0.0);
  EXPECT_EQ(h.cov(0, 1), 0.0);
}

TEST(FitGaussian, TooFewSamples) {
  try {
    fit_gaussian(Matrix::Zero(1, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
}

TEST(FitGaussian, StandardNormalStatistics) {
  std::mt19937_64 eng(14);
  std::normal_distribution<double> d;
  Matrix x(10000, 128);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = d(eng);
  const auto g = fit_gaussian(x);
  EXPECT_LT(g.mean.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((g.cov - Matrix::Identity(128, 128)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Frechet, IdenticalIsZero) {
  std::mt19937_64 eng(15);
  std::normal_distribution<double> d;
  Matrix x(300, 16);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = d(eng);
  const auto g = fit_gaussian(x);
  EXPECT_NEAR(frechet_distance(g, g), 0.0, 1e-9);
}

TEST(Frechet, OneDimensionalClosedForm) {
  const double cases[][4] = {{0, 1, 0, 1}, {1, 4, -2, 9}, {0.3, 0.01, 0.5, 2.25}, {5, 0, 5, 16}};
  for (const auto& c : cases) {
    const auto g1 = gaussian({c[0]}, {c[1]}), g2 = gaussian({c[2]}, {c[3]});
    const double expect = std::pow(c[0] - c[2], 2) + std::pow(std::sqrt(c[1]) - std::sqrt(c[3]), 2);
    EXPECT_NEAR(frechet_distance(g1, g2), expect, 1e-10);
    EXPECT_NEAR(frechet_distance(g2, g1), expect, 1e-10);
  }
}

TEST(Frechet, DiagonalClosedForm) {
  const Vec m1{0, 1, 2, -1}, v1{1, 4, 0.25, 9}, m2{1, 1, 0, 0}, v2{4, 1, 1, 0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    expect += std::pow(m1[i] - m2[i], 2) + std::pow(std::sqrt(v1[i]) - std::sqrt(v2[i]), 2);
  EXPECT_NEAR(frechet_distance(gaussian(m1, v1), gaussian(m2, v2)), expect, 1e-10);
}

TEST(Frechet, SymmetricAndNonnegativeOnFullCovariances) {
  std::mt19937_64 eng(16);
  std::normal_distribution<double> d;
  Matrix a(60, 32), b(60, 32);
  for (Eigen::Index i = 0; i < 60; ++i)
    for (Eigen::Index j = 0; j < 32; ++j) {
      a(i, j) = d(eng);
      b(i, j) = 1.5 * d(eng) + 0.2;
    }
  const auto ga = fit_gaussian(a), gb = fit_gaussian(b);
  const double ab = frechet_distance(ga, gb), ba = frechet_distance(gb, ga);
  EXPECT_GT(ab, 0.0);
  EXPECT_NEAR(ab, ba, 1e-8 * ab);
  const Matrix sa = sqrt_psd(ga.cov);
  EXPECT_NEAR(frechet_distance(ga, gb, &sa), ab, 1e-12 * ab);
}

TEST(Frechet, DimensionMismatch) {
  try {
    frechet_distance(gaussian({0, 0}, {1, 1}), gaussian({0}, {1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}
