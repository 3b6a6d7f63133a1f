#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mcdrop/errors.hpp"
#include "mcdrop/math_core.hpp"
#include "mcdrop/rng.hpp"

using namespace mcdrop;

namespace {

// Reference softmax in long double, no max shift (inputs kept small).
std::vector<long double> softmax_ref(const std::vector<long double>& z) {
    long double total = 0.0L;
    std::vector<long double> e;
    for (long double v : z) {
        e.push_back(std::exp(v));
        total += e.back();
    }
    for (auto& v : e) {
        v /= total;
    }
    return e;
}

Matrix random_symmetric(std::size_t n, RngStream& rng) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
        }
    }
    return a;
}

Matrix random_spd(std::size_t n, RngStream& rng) {
    Matrix g(n, n);
    for (double& v : g.values()) {
        v = rng.normal();
    }
    Matrix b = matmul(g, transpose(g));
    for (std::size_t i = 0; i < n; ++i) {
        b(i, i) += 0.5;
    }
    return b;
}

double residual_inf(const Matrix& a, const Matrix& b, const EigenDecomposition& eig, std::size_t j) {
    const std::size_t n = a.rows();
    const Vector v = eig.vectors.column(j);
    const Vector av = matvec(a, v);
    const Vector bv = matvec(b, v);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(av[i] - eig.values[j] * bv[i]));
    }
    return worst;
}

}  // namespace

TEST(Relu, Examples) {
    EXPECT_EQ(relu(-3.5), 0.0);
    EXPECT_EQ(relu(0.0), 0.0);
    EXPECT_EQ(relu(2.25), 2.25);
}

TEST(Relu, IdempotentElementwise) {
    RngStream rng(3);
    Vector t(200);
    for (double& v : t) {
        v = rng.uniform(-10.0, 10.0);
    }
    const Vector once = relu(t);
    EXPECT_EQ(relu(once), once);
    for (double v : once) {
        EXPECT_GE(v, 0.0);
    }
}

TEST(Softmax, Examples) {
    const Vector half = softmax(Vector{0.0, 0.0});
    EXPECT_EQ(half[0], 0.5);
    EXPECT_EQ(half[1], 0.5);

    const Vector big = softmax(Vector{1000.0, 1000.0, 1000.0});
    for (double v : big) {
        EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }

    const Vector p = softmax(Vector{1.0, 2.0, 3.0});
    const auto ref = softmax_ref({1.0L, 2.0L, 3.0L});
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(p[i], static_cast<double>(ref[i]), 1e-15);
    }
    EXPECT_NEAR(p[0], 0.09003057, 5e-9);
    EXPECT_NEAR(p[1], 0.24472847, 5e-9);
    EXPECT_NEAR(p[2], 0.66524096, 5e-9);
}

TEST(Softmax, RejectsShortOrNonFinite) {
    EXPECT_THROW(softmax(Vector{}), InvalidArgument);
    EXPECT_THROW(softmax(Vector{1.0}), InvalidArgument);
    EXPECT_THROW(softmax(Vector{1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
    EXPECT_THROW(softmax(Vector{1.0, std::numeric_limits<double>::infinity()}), InvalidArgument);
}

TEST(Softmax, ShiftInvarianceAndNormalization) {
    RngStream rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t c = 2 + rng.below(9);
        Vector z(c);
        for (double& v : z) {
            v = rng.uniform(-50.0, 50.0);
        }
        const double shift = rng.uniform(-100.0, 100.0);
        Vector zs = z;
        for (double& v : zs) {
            v += shift;
        }
        const Vector p = softmax(z);
        const Vector q = softmax(zs);
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            EXPECT_NEAR(p[i], q[i], 1e-12);
            EXPECT_GE(p[i], 0.0);
            EXPECT_LE(p[i], 1.0);
            total += p[i];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(CrossEntropy, Examples) {
    EXPECT_NEAR(cross_entropy(Vector{0.0, 1.0, 0.0}, Vector{0.0, 1.0, 0.0}), 0.0, 1e-12);

    const Vector uniform(7, 1.0 / 7.0);
    for (std::size_t k = 0; k < 7; ++k) {
        Vector target(7, 0.0);
        target[k] = 1.0;
        EXPECT_NEAR(cross_entropy(uniform, target), std::log(7.0), 1e-12);
    }
    EXPECT_NEAR(cross_entropy(uniform, Vector{0, 0, 0, 1, 0, 0, 0}), 1.945910, 5e-7);

    EXPECT_NEAR(cross_entropy(Vector{0.7, 0.2, 0.1}, Vector{0.0, 1.0, 0.0}), -std::log(0.2), 1e-15);
    EXPECT_NEAR(cross_entropy(Vector{0.7, 0.2, 0.1}, Vector{0.0, 1.0, 0.0}), 1.609438, 5e-7);
}

TEST(CrossEntropy, ClampsZeroProbability) {
    const double loss = cross_entropy(Vector{1.0, 0.0}, Vector{0.0, 1.0});
    EXPECT_NEAR(loss, -std::log(kCrossEntropyClamp), 1e-9);
}

TEST(CrossEntropy, NonNegativeAndUniformEqualsLogC) {
    RngStream rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng.below(8);
        Vector z(c);
        for (double& v : z) {
            v = rng.uniform(-5.0, 5.0);
        }
        Vector target(c, 0.0);
        target[rng.below(c)] = 1.0;
        EXPECT_GE(cross_entropy(softmax(z), target), 0.0);
        EXPECT_NEAR(cross_entropy(Vector(c, 1.0 / static_cast<double>(c)), target),
                    std::log(static_cast<double>(c)), 1e-12);
    }
}

TEST(CrossEntropy, FromLogitsMatchesLongDoubleOracle) {
    RngStream rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng.below(8);
        Vector z(c);
        for (double& v : z) {
            v = rng.uniform(-60.0, 60.0);
        }
        const std::size_t t = rng.below(c);
        long double sum = 0.0L;
        for (double v : z) {
            sum += std::exp(static_cast<long double>(v));
        }
        const double expected = static_cast<double>(std::log(sum) - static_cast<long double>(z[t]));
        EXPECT_NEAR(softmax_cross_entropy(z, t), expected, 1e-12 * std::max(1.0, std::abs(expected)));
    }
    // No clamp: a confidently wrong prediction keeps its full loss.
    EXPECT_NEAR(softmax_cross_entropy(Vector{50.0, 0.0}, 1), 50.0, 1e-12);
    EXPECT_NEAR(softmax_cross_entropy(Vector{0.0, std::log(0.2 / 0.7), std::log(0.1 / 0.7)}, 1), -std::log(0.2),
                1e-15);
    EXPECT_THROW(softmax_cross_entropy(Vector{1.0, 2.0}, 2), InvalidArgument);
    EXPECT_THROW(softmax_cross_entropy(Vector{1.0, INFINITY}, 0), InvalidArgument);
}

TEST(CrossEntropy, RejectsMismatchedLengths) {
    EXPECT_THROW(cross_entropy(Vector{0.5, 0.5}, Vector{1.0, 0.0, 0.0}), DimensionError);
}

TEST(MatrixOps, ShapesAndProducts) {
    const Matrix a{{1, 2, 3}, {4, 5, 6}};
    const Matrix b{{1, 0}, {0, 1}, {1, 1}};
    const Matrix c = matmul(a, b);
    EXPECT_EQ(c, (Matrix{{4, 5}, {10, 11}}));
    EXPECT_EQ(transpose(a), (Matrix{{1, 4}, {2, 5}, {3, 6}}));
    EXPECT_EQ(matvec(a, Vector{1, 1, 1}), (Vector{6, 15}));
    EXPECT_EQ(matvec_transposed(a, Vector{1, 1}), (Vector{5, 7, 9}));
    EXPECT_THROW(matmul(a, a), DimensionError);
    EXPECT_THROW(matvec(a, Vector{1, 1}), DimensionError);
    EXPECT_THROW(dot(Vector{1, 2}, Vector{1}), DimensionError);
}

TEST(MatrixOps, PairwiseSumMatchesExactSmallIntegers) {
    Vector v;
    for (int i = 1; i <= 1000; ++i) {
        v.push_back(i);
    }
    EXPECT_EQ(pairwise_sum(v), 500500.0);
    EXPECT_EQ(pairwise_sum(Vector{}), 0.0);
}

TEST(Eigen, DiagonalCase) {
    const Matrix a = Matrix::diagonal(Vector{2.0, 1.0});
    const EigenDecomposition eig = symmetric_generalized_eig(a, Matrix::identity(2));
    EXPECT_NEAR(eig.values[0], 2.0, 1e-14);
    EXPECT_NEAR(eig.values[1], 1.0, 1e-14);
    EXPECT_NEAR(std::abs(eig.vectors(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(eig.vectors(1, 0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(eig.vectors(1, 1)), 1.0, 1e-14);
    EXPECT_NEAR(eig.vectors(0, 1), 0.0, 1e-14);
    EXPECT_FALSE(eig.ridge_applied);
}

TEST(Eigen, IdentityPair) {
    const EigenDecomposition eig = symmetric_generalized_eig(Matrix::identity(4), Matrix::identity(4));
    for (double v : eig.values) {
        EXPECT_NEAR(v, 1.0, 1e-14);
    }
}

TEST(Eigen, RandomFiveByFiveResiduals) {
    RngStream rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_symmetric(5, rng);
        const Matrix b = random_spd(5, rng);
        const EigenDecomposition eig = symmetric_generalized_eig(a, b);
        for (std::size_t j = 0; j < 5; ++j) {
            EXPECT_LT(residual_inf(a, b, eig, j), 1e-8);
        }
    }
}

TEST(Eigen, ResidualsBOrthonormalityAndOrderUpToSixteen) {
    RngStream rng(77);
    for (std::size_t n = 1; n <= 16; ++n) {
        const Matrix a = random_symmetric(n, rng);
        const Matrix b = random_spd(n, rng);
        const EigenDecomposition eig = symmetric_generalized_eig(a, b);
        ASSERT_EQ(eig.values.size(), n);
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_LT(residual_inf(a, b, eig, j), 1e-8) << "n=" << n << " j=" << j;
            if (j > 0) {
                EXPECT_GE(eig.values[j - 1], eig.values[j]);
            }
        }
        const Matrix gram = matmul(transpose(eig.vectors), matmul(b, eig.vectors));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_NEAR(gram(i, j), i == j ? 1.0 : 0.0, 1e-9);
            }
        }
    }
}

TEST(Eigen, StandardSymmetricResiduals) {
    RngStream rng(8);
    const Matrix a = random_symmetric(12, rng);
    const EigenDecomposition eig = symmetric_eig(a);
    for (std::size_t j = 0; j < 12; ++j) {
        EXPECT_LT(residual_inf(a, Matrix::identity(12), eig, j), 1e-10);
    }
}

TEST(Eigen, RidgeFallbackOnSingularB) {
    const Matrix a = Matrix::diagonal(Vector{1.0, 2.0});
    const Matrix b = Matrix::diagonal(Vector{1.0, 0.0});
    const EigenDecomposition eig = symmetric_generalized_eig(a, b);
    EXPECT_TRUE(eig.ridge_applied);
    for (double v : eig.values) {
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Eigen, RejectsIndefiniteB) {
    const Matrix b = Matrix::diagonal(Vector{-1.0, -2.0});
    EXPECT_THROW(symmetric_generalized_eig(Matrix::identity(2), b), NotPositiveDefinite);
}

TEST(Cholesky, ReconstructsAndSolves) {
    RngStream rng(19);
    const Matrix b = random_spd(6, rng);
    const Matrix l = cholesky(b);
    const Matrix back = matmul(l, transpose(l));
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_NEAR(back(i, j), b(i, j), 1e-12);
            if (j > i) {
                EXPECT_EQ(l(i, j), 0.0);
            }
        }
    }
    const Vector x{1.0, -2.0, 0.5, 3.0, 0.0, -1.0};
    const Vector rhs = matvec(b, x);
    const Vector solved = solve_spd(b, rhs);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(solved[i], x[i], 1e-10);
    }
}
