#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mcdrop {

using Vector = std::vector<double>;

// Row-major dense matrix of doubles. A default-constructed Matrix is the
// empty placeholder; every sized Matrix has strictly positive dimensions.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    Vector column(std::size_t c) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
// a * x
Vector matvec(const Matrix& a, std::span<const double> x);
// a^T * x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Order-fixed pairwise (cascade) summation; the result depends only on the
// values and their order, never on how the caller scheduled their production.
double pairwise_sum(std::span<const double> values);

bool all_finite(std::span<const double> values);

double relu(double t);
Vector relu(std::span<const double> t);

// Max-shifted softmax. Rejects inputs with fewer than two components or
// non-finite entries.
Vector softmax(std::span<const double> logits);

inline constexpr double kCrossEntropyClamp = 1e-12;

// -sum_i target_i * log(clamp(pred_i, 1e-12, 1)).
double cross_entropy(std::span<const double> pred, std::span<const double> target);

// -log softmax(logits)[target] via log-sum-exp, no clamping. Its gradient with
// respect to the logits is exactly softmax(logits) - onehot(target).
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);

struct EigenDecomposition {
    Vector values;   // descending
    Matrix vectors;  // column j pairs with values[j]
    bool ridge_applied = false;
};

// Symmetric eigenproblem A v = lambda v by cyclic Jacobi rotations.
EigenDecomposition symmetric_eig(const Matrix& a);

// Generalized problem A v = lambda B v for symmetric A and SPD B, reduced to
// a standard one through the Cholesky factor of B. If B is not positive
// definite, a ridge of 1e-9 * trace(B) / n is added once before giving up
// with NotPositiveDefinite. Returned vectors are B-orthonormal.
EigenDecomposition symmetric_generalized_eig(const Matrix& a, const Matrix& b);

// Lower-triangular L with L L^T = a; throws NotPositiveDefinite.
Matrix cholesky(const Matrix& a);

// Solves a x = b for SPD a.
Vector solve_spd(const Matrix& a, std::span<const double> b);

}  // namespace mcdrop
