#pragma once

// Small dense linear algebra: exactly the decompositions and projections the
// online predictors need. Matrices here are at most a few dozen rows, so every
// kernel is a straightforward O(n^3) routine with no blocking.

#include <nonstop/error.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nonstop::linalg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw InvalidInput("Matrix: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(double a) noexcept {
        for (auto& v : data_) v *= a;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw InvalidInput("Matrix product: inner dimensions differ");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend Vector operator*(const Matrix& a, std::span<const double> x) {
        if (a.cols_ != x.size()) throw InvalidInput("Matrix-vector product: dimension mismatch");
        Vector y(a.rows_, 0.0);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < a.cols_; ++j) acc += a(i, j) * x[j];
            y[i] = acc;
        }
        return y;
    }
    friend Vector operator*(const Matrix& a, const Vector& x) {
        return a * std::span<const double>(x);
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw InvalidInput("Matrix: shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("dot: dimension mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double norm1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double frobenius_norm(const Matrix& a) { return norm2(a.values()); }

/// Rank-one outer product u v^T.
inline Matrix outer(std::span<const double> u, std::span<const double> v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Euclidean projection onto the max-norm ball {w : |w_i| <= radius}.
inline Vector project_box(std::span<const double> v, double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw InvalidInput("project_box: radius must be a finite nonnegative number");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw InvalidInput("project_box: non-finite entry at index " + std::to_string(i));
        out[i] = std::clamp(v[i], -radius, radius);
    }
    return out;
}

/// In-place variant of project_box for hot loops; entries assumed finite.
inline void clamp_box(std::span<double> v, double radius) noexcept {
    for (double& x : v) x = std::clamp(x, -radius, radius);
}

/// Euclidean projection onto the l1 ball {w : ||w||_1 <= radius}.
///
/// Sort-and-scan: with magnitudes u sorted in decreasing order, the soft
/// threshold is theta = (sum_{j<=r} u_j - radius) / r for the largest r with
/// u_r > theta_r. Ties need no special handling.
inline Vector project_l1_ball(std::span<const double> v, double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw InvalidInput("project_l1_ball: radius must be a finite nonnegative number");
    if (!all_finite(v)) throw InvalidInput("project_l1_ball: non-finite entry");
    if (norm1(v) <= radius) return Vector(v.begin(), v.end());
    if (radius == 0.0) return Vector(v.size(), 0.0);

    Vector mags(v.size());
    std::transform(v.begin(), v.end(), mags.begin(), [](double x) { return std::abs(x); });
    std::sort(mags.begin(), mags.end(), std::greater<>());

    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        cumsum += mags[j];
        const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
        if (mags[j] > candidate) theta = candidate;
        else break;
    }

    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double shrunk = std::max(std::abs(v[i]) - theta, 0.0);
        out[i] = std::copysign(shrunk, v[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Singular value decomposition (one-sided Jacobi)
// ---------------------------------------------------------------------------

struct Svd {
    Matrix u;      ///< rows(A) x k, orthonormal columns
    Vector sigma;  ///< k = min(rows, cols), nonincreasing
    Matrix v;      ///< cols(A) x k, orthonormal columns
};

namespace detail {

inline constexpr std::size_t kSvdMaxSweeps = 100;
inline constexpr double kSvdOrthTol = 1e-14;

// Fills the zero columns of q (marked by `filled == false`) with unit vectors
// orthogonal to every other column, by Gram-Schmidt over the standard basis.
inline void complete_orthonormal(Matrix& q, std::vector<bool>& filled) {
    const std::size_t m = q.rows();
    std::size_t basis = 0;
    for (std::size_t col = 0; col < q.cols(); ++col) {
        if (filled[col]) continue;
        while (basis < m) {
            Vector cand(m, 0.0);
            cand[basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t other = 0; other < q.cols(); ++other) {
                    if (!filled[other]) continue;
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) proj += q(i, other) * cand[i];
                    for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * q(i, other);
                }
            const double n = norm2(cand);
            if (n > 1e-8) {
                for (std::size_t i = 0; i < m; ++i) q(i, col) = cand[i] / n;
                filled[col] = true;
                break;
            }
        }
    }
}

// Requires a.rows() >= a.cols().
inline Svd svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix w = a;
    Matrix v = Matrix::identity(n);

    std::size_t sweep = 0;
    for (;; ++sweep) {
        if (sweep == kSvdMaxSweeps) throw NumericFailure("svd: Jacobi sweeps did not converge", sweep);
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += w(i, p) * w(i, p);
                    beta += w(i, q) * w(i, q);
                    gamma += w(i, p) * w(i, q);
                }
                if (gamma == 0.0 || alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= kSvdOrthTol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    Vector sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double smax = n ? sigma[order[0]] : 0.0;
    const double cutoff = smax * 1e-15 * static_cast<double>(std::max<std::size_t>(m, 1));

    Svd out{Matrix(m, n), Vector(n), Matrix(n, n)};
    std::vector<bool> filled(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = sigma[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
        if (sigma[j] > cutoff && sigma[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w(i, j) / sigma[j];
            filled[k] = true;
        }
    }
    complete_orthonormal(out.u, filled);
    return out;
}

}  // namespace detail

/// Thin SVD A = U diag(sigma) V^T via one-sided (Hestenes) Jacobi rotations.
inline Svd svd(const Matrix& a) {
    if (!all_finite(a.values())) throw InvalidInput("svd: non-finite entry");
    if (a.rows() >= a.cols()) return detail::svd_tall(a);
    Svd t = detail::svd_tall(a.transposed());
    return Svd{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

inline Vector singular_values(const Matrix& a) { return svd(a).sigma; }

inline double nuclear_norm(const Matrix& a) {
    const Vector s = singular_values(a);
    return std::accumulate(s.begin(), s.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblem (cyclic Jacobi)
// ---------------------------------------------------------------------------

struct SymmetricEigen {
    Vector values;   ///< ascending
    Matrix vectors;  ///< column k pairs with values[k]
};

inline constexpr double kSymmetryTol = 1e-10;

inline void require_symmetric(const Matrix& a, const char* who) {
    if (!a.square()) throw InvalidInput(std::string(who) + ": matrix is not square");
    if (!all_finite(a.values())) throw InvalidInput(std::string(who) + ": non-finite entry");
    const double scale = std::max(1.0, max_abs(a.values()));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol * scale)
                throw InvalidInput(std::string(who) + ": matrix is not symmetric");
}

namespace detail {

// Cyclic Jacobi on a copy of the symmetric part of `a`. When `vectors` is null
// the rotations are not accumulated.
inline Vector jacobi_eigenvalues(Matrix a, Matrix* vectors) {
    const std::size_t n = a.rows();
    constexpr std::size_t kMaxSweeps = 100;
    if (vectors) *vectors = Matrix::identity(n);

    for (std::size_t sweep = 0;; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off == 0.0 || off <= 1e-32 * diag) break;
        if (sweep == kMaxSweeps)
            throw NumericFailure("symmetric eigensolver: Jacobi sweeps did not converge", sweep);

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                // Entries already negligible against both diagonals are zeroed
                // outright; rotating them would only add rounding noise.
                if (sweep > 3 && std::abs(apq) < 1e-18 * std::min(std::abs(app), std::abs(aqq))) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p), arq = a(r, q);
                    const double nrp = arp - s * (arq + tau * arp);
                    const double nrq = arq + s * (arp - tau * arq);
                    a(r, p) = a(p, r) = nrp;
                    a(r, q) = a(q, r) = nrq;
                }
                if (vectors) {
                    Matrix& z = *vectors;
                    for (std::size_t r = 0; r < n; ++r) {
                        const double zp = z(r, p), zq = z(r, q);
                        z(r, p) = zp - s * (zq + tau * zp);
                        z(r, q) = zq + s * (zp - tau * zq);
                    }
                }
            }
        }
    }

    Vector values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
    return values;
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
inline SymmetricEigen symmetric_eigen(const Matrix& a) {
    require_symmetric(a, "symmetric_eigen");
    Matrix vecs;
    Vector vals = detail::jacobi_eigenvalues(a, &vecs);
    const std::size_t n = vals.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return vals[x] < vals[y]; });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = vals[order[k]];
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = vecs(r, order[k]);
    }
    return out;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double symmetric_min_eigenvalue(const Matrix& a) {
    require_symmetric(a, "symmetric_min_eigenvalue");
    if (a.rows() == 0) throw InvalidInput("symmetric_min_eigenvalue: empty matrix");
    const Vector vals = detail::jacobi_eigenvalues(a, nullptr);
    return *std::min_element(vals.begin(), vals.end());
}

// ---------------------------------------------------------------------------
// Least squares by Householder QR
// ---------------------------------------------------------------------------

struct QrLeastSquares {
    Vector x;  ///< argmin ||A x - b||
    Matrix r;  ///< n x n upper triangle with A = Q R
};

/// Works on A itself, so the conditioning is that of A rather than A^T A.
/// Needs rows >= cols and full column rank.
inline QrLeastSquares qr_least_squares(Matrix a, Vector b) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m < n || n == 0) throw InvalidInput("qr_least_squares: need rows >= cols >= 1");
    if (b.size() != m) throw InvalidInput("qr_least_squares: right-hand side has wrong length");
    Vector v(m);
    for (std::size_t k = 0; k < n; ++k) {
        double scale = 0.0;
        for (std::size_t i = k; i < m; ++i) scale = std::max(scale, std::abs(a(i, k)));
        if (scale == 0.0) throw NumericFailure("qr_least_squares: matrix is rank deficient", k);
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i) norm += (a(i, k) / scale) * (a(i, k) / scale);
        norm = scale * std::sqrt(norm);
        const double alpha = a(k, k) > 0.0 ? -norm : norm;
        v[k] = a(k, k) - alpha;
        for (std::size_t i = k + 1; i < m; ++i) v[i] = a(i, k);
        double vv = 0.0;
        for (std::size_t i = k; i < m; ++i) vv += v[i] * v[i];
        auto reflect = [&](auto&& col) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i] * col(i);
            const double f = 2.0 * s / vv;
            for (std::size_t i = k; i < m; ++i) col(i) -= f * v[i];
        };
        for (std::size_t j = k; j < n; ++j) reflect([&](std::size_t i) -> double& { return a(i, j); });
        reflect([&](std::size_t i) -> double& { return b[i]; });
    }
    QrLeastSquares out{Vector(n), Matrix(n, n)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) out.r(i, j) = a(i, j);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= out.r(i, j) * out.x[j];
        if (out.r(i, i) == 0.0) throw NumericFailure("qr_least_squares: matrix is rank deficient", i);
        out.x[i] = s / out.r(i, i);
    }
    return out;
}

/// Inverse of a nonsingular upper-triangular matrix.
inline Matrix upper_triangular_inverse(const Matrix& r) {
    const std::size_t n = r.rows();
    Matrix inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        inv(j, j) = 1.0 / r(j, j);
        for (std::size_t i = j; i-- > 0;) {
            double s = 0.0;
            for (std::size_t k = i + 1; k <= j; ++k) s += r(i, k) * inv(k, j);
            inv(i, j) = -s / r(i, i);
        }
    }
    return inv;
}

// ---------------------------------------------------------------------------
// Nonsymmetric eigenvalues (balance, Hessenberg reduction, Francis QR)
// ---------------------------------------------------------------------------

namespace detail {

inline void balance(Matrix& a) {
    const std::size_t n = a.rows();
    constexpr double radix = std::numeric_limits<double>::radix;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations; entries below the subdiagonal are cleared on exit.
inline void to_hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t m = 1; m + 1 < n; ++m) {
        double x = 0.0;
        std::size_t piv = m;
        for (std::size_t j = m; j < n; ++j)
            if (std::abs(a(j, m - 1)) > std::abs(x)) {
                x = a(j, m - 1);
                piv = j;
            }
        if (piv != m) {
            for (std::size_t j = m - 1; j < n; ++j) std::swap(a(piv, j), a(m, j));
            for (std::size_t j = 0; j < n; ++j) std::swap(a(j, piv), a(j, m));
        }
        if (x == 0.0) continue;
        for (std::size_t i = m + 1; i < n; ++i) {
            double y = a(i, m - 1);
            if (y == 0.0) continue;
            y /= x;
            a(i, m - 1) = 0.0;
            for (std::size_t j = m; j < n; ++j) a(i, j) -= y * a(m, j);
            for (std::size_t j = 0; j < n; ++j) a(j, m) += y * a(j, i);
        }
    }
    for (std::size_t i = 2; i < n; ++i)
        for (std::size_t j = 0; j + 1 < i; ++j) a(i, j) = 0.0;
}

// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
// iteration with exceptional shifts at iterations 10 and 20.
inline std::vector<std::complex<double>> hessenberg_eigenvalues(Matrix a) {
    const int n = static_cast<int>(a.rows());
    constexpr int kMaxIterations = 60;
    const double eps = std::numeric_limits<double>::epsilon();
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    auto A = [&a](int i, int j) -> double& {
        return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };
    auto sign = [](double x, double y) { return y >= 0.0 ? std::abs(x) : -std::abs(x); };

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(A(i, j));

    int nn = n - 1;
    double t = 0.0;
    std::size_t total = 0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l > 0; --l) {
                double s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(A(l, l - 1)) <= eps * s) {
                    A(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = A(nn, nn);
            if (l == nn) {
                w[static_cast<std::size_t>(nn)] = x + t;
                --nn;
            } else {
                double y = A(nn - 1, nn - 1);
                double ww = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + ww;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign(z, p);
                        w[static_cast<std::size_t>(nn - 1)] = w[static_cast<std::size_t>(nn)] = x + z;
                        if (z != 0.0) w[static_cast<std::size_t>(nn)] = x - ww / z;
                    } else {
                        w[static_cast<std::size_t>(nn)] = {x + p, -z};
                        w[static_cast<std::size_t>(nn - 1)] = {x + p, z};
                    }
                    nn -= 2;
                } else {
                    if (its == kMaxIterations)
                        throw NumericFailure("eigenvalues: QR iteration did not converge", total);
                    if (its == 10 || its == 20) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) A(i, i) -= x;
                        const double s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        ww = -0.4375 * s * s;
                    }
                    ++its;
                    ++total;
                    int m = nn - 2;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (; m >= l; --m) {
                        z = A(m, m);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - ww) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - r - s;
                        r = A(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(A(m - 1, m - 1)) + std::abs(z) +
                                                        std::abs(A(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        A(i + 2, i) = 0.0;
                        if (i != m) A(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = A(k + 2, k - 1);
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = sign(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) A(k, k - 1) = -A(k, k - 1);
                        } else {
                            A(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = A(k, j) + q * A(k + 1, j);
                            if (k + 1 != nn) {
                                p += r * A(k + 2, j);
                                A(k + 2, j) -= p * z;
                            }
                            A(k + 1, j) -= p * y;
                            A(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * A(i, k) + y * A(i, k + 1);
                            if (k + 1 != nn) {
                                p += z * A(i, k + 2);
                                A(i, k + 2) -= p * r;
                            }
                            A(i, k + 1) -= p * q;
                            A(i, k) -= p;
                        }
                    }
                }
            }
        } while (l + 1 < nn);
    }
    return w;
}

}  // namespace detail

/// All eigenvalues of a real square matrix (complex pairs included).
inline std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    if (!a.square()) throw InvalidInput("eigenvalues: matrix is not square");
    if (!all_finite(a.values())) throw InvalidInput("eigenvalues: non-finite entry");
    Matrix h = a;
    detail::balance(h);
    detail::to_hessenberg(h);
    return detail::hessenberg_eigenvalues(std::move(h));
}

/// max |lambda| over the eigenvalues of a real square matrix; 0 for an empty matrix.
inline double spectral_radius(const Matrix& a) {
    double r = 0.0;
    for (const auto& lambda : eigenvalues(a)) r = std::max(r, std::abs(lambda));
    return r;
}

}  // namespace nonstop::linalg
