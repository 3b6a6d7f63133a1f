#include "mcdrop/math_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mcdrop/errors.hpp"

namespace mcdrop {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("Matrix: dimensions must be positive");
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("Matrix: dimensions must be positive");
    }
    if (values_.size() != rows * cols) {
        throw DimensionError("Matrix: value count does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    if (rows_ == 0 || cols_ == 0) {
        throw DimensionError("Matrix: dimensions must be positive");
    }
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("Matrix: ragged initializer");
        }
        values_.insert(values_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        m(i, i) = diag[i];
    }
    return m;
}

Vector Matrix::column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        out[r] = (*this)(r, c);
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            t(c, r) = a(r, c);
        }
    }
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DimensionError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                             std::to_string(x.size()) + " entries");
    }
    Vector out(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        out[r] = dot(a.row(r), x);
    }
    return out;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) {
        throw DimensionError("matvec_transposed: matrix has " + std::to_string(a.rows()) +
                             " rows, vector has " + std::to_string(x.size()) + " entries");
    }
    Vector out(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double xr = x[r];
        auto arow = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out[c] += arow[c] * xr;
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kBlock = 8;
    if (values.size() <= kBlock) {
        double s = 0.0;
        for (double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double relu(double t) {
    return t > 0.0 ? t : 0.0;
}

Vector relu(std::span<const double> t) {
    Vector out(t.size());
    std::transform(t.begin(), t.end(), out.begin(), [](double v) { return relu(v); });
    return out;
}

Vector softmax(std::span<const double> logits) {
    if (logits.size() < 2) {
        throw InvalidArgument("softmax: need at least two components");
    }
    if (!all_finite(logits)) {
        throw InvalidArgument("softmax: non-finite logit");
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double cross_entropy(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw DimensionError("cross_entropy: prediction and target lengths differ");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target[i] != 0.0) {
            loss -= target[i] * std::log(std::clamp(pred[i], kCrossEntropyClamp, 1.0));
        }
    }
    return loss;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw InvalidArgument("softmax_cross_entropy: target out of range");
    }
    if (!all_finite(logits)) {
        throw InvalidArgument("softmax_cross_entropy: non-finite logits");
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) {
        z += std::exp(l - top);
    }
    return std::log(z) + top - logits[target];
}

namespace {

void require_square_symmetric(const Matrix& a, const char* who) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(who) + ": matrix is not square");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double scale = std::max({1.0, std::abs(a(i, j)), std::abs(a(j, i))});
            if (std::abs(a(i, j) - a(j, i)) > 1e-10 * scale) {
                throw InvalidArgument(std::string(who) + ": matrix is not symmetric");
            }
        }
    }
}

// Flips each column so its largest-magnitude entry is positive.
void canonicalize_signs(Matrix& vectors) {
    for (std::size_t c = 0; c < vectors.cols(); ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < vectors.rows(); ++r) {
            if (std::abs(vectors(r, c)) > std::abs(vectors(best, c))) {
                best = r;
            }
        }
        if (vectors(best, c) < 0.0) {
            for (std::size_t r = 0; r < vectors.rows(); ++r) {
                vectors(r, c) = -vectors(r, c);
            }
        }
    }
}

void sort_descending(EigenDecomposition& eig) {
    const std::size_t n = eig.values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return eig.values[i] > eig.values[j]; });
    Vector values(n);
    Matrix vectors(eig.vectors.rows(), n);
    for (std::size_t k = 0; k < n; ++k) {
        values[k] = eig.values[order[k]];
        for (std::size_t r = 0; r < vectors.rows(); ++r) {
            vectors(r, k) = eig.vectors(r, order[k]);
        }
    }
    eig.values = std::move(values);
    eig.vectors = std::move(vectors);
}

// Solves L y = b in place on the columns of m (L lower triangular).
void forward_substitute_columns(const Matrix& l, Matrix& m) {
    const std::size_t n = l.rows();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = m(i, c);
            for (std::size_t k = 0; k < i; ++k) {
                s -= l(i, k) * m(k, c);
            }
            m(i, c) = s / l(i, i);
        }
    }
}

// Solves L^T y = b in place on the columns of m.
void backward_substitute_columns(const Matrix& l, Matrix& m) {
    const std::size_t n = l.rows();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = m(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) {
                s -= l(k, ii) * m(k, c);
            }
            m(ii, c) = s / l(ii, ii);
        }
    }
}

}  // namespace

EigenDecomposition symmetric_eig(const Matrix& input) {
    require_square_symmetric(input, "symmetric_eig");
    const std::size_t n = input.rows();
    Matrix a = input;
    // Symmetrize exactly so rotations act on a truly symmetric matrix.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = m;
            a(j, i) = m;
        }
    }
    Matrix v = Matrix::identity(n);

    double frob = 0.0;
    for (double x : a.values()) {
        frob += x * x;
    }
    frob = std::sqrt(frob);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                off += a(i, j) * a(i, j);
            }
        }
        if (std::sqrt(off) <= 1e-15 * frob || off == 0.0) {
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition eig;
    eig.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        eig.values[i] = a(i, i);
    }
    eig.vectors = std::move(v);
    sort_descending(eig);
    canonicalize_signs(eig.vectors);
    return eig;
}

Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("cholesky: matrix is not square");
    }
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            d -= l(j, k) * l(j, k);
        }
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw NotPositiveDefinite("cholesky: leading minor " + std::to_string(j + 1) +
                                      " is not positive");
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Vector solve_spd(const Matrix& a, std::span<const double> b) {
    const Matrix l = cholesky(a);
    Matrix m(b.size(), 1, Vector(b.begin(), b.end()));
    forward_substitute_columns(l, m);
    backward_substitute_columns(l, m);
    return m.column(0);
}

EigenDecomposition symmetric_generalized_eig(const Matrix& a, const Matrix& b) {
    require_square_symmetric(a, "symmetric_generalized_eig");
    require_square_symmetric(b, "symmetric_generalized_eig");
    if (a.rows() != b.rows()) {
        throw DimensionError("symmetric_generalized_eig: A and B differ in size");
    }
    const std::size_t n = a.rows();

    bool ridge = false;
    Matrix l;
    try {
        l = cholesky(b);
    } catch (const NotPositiveDefinite&) {
        double trace = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            trace += b(i, i);
        }
        Matrix regularized = b;
        const double eps = 1e-9 * std::abs(trace) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            regularized(i, i) += eps;
        }
        try {
            l = cholesky(regularized);
        } catch (const NotPositiveDefinite&) {
            throw NotPositiveDefinite(
                "symmetric_generalized_eig: B is not positive definite even after ridge");
        }
        ridge = true;
    }

    // C = L^-1 A L^-T
    Matrix c = a;
    forward_substitute_columns(l, c);
    c = transpose(c);
    forward_substitute_columns(l, c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (c(i, j) + c(j, i));
            c(i, j) = m;
            c(j, i) = m;
        }
    }

    EigenDecomposition eig = symmetric_eig(c);
    backward_substitute_columns(l, eig.vectors);
    canonicalize_signs(eig.vectors);
    eig.ridge_applied = ridge;
    return eig;
}

}  // namespace mcdrop
