#pragma once

// Series containers, differencing transforms and their inverses, process
// simulators, and invertibility diagnostics for (S)ARIMA and EC-VARMA models.

#include <nonstop/error.hpp>
#include <nonstop/linalg.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace nonstop::core {

using linalg::Matrix;
using linalg::Vector;

using Series = std::vector<double>;

/// Vector-valued series; values[t] holds the k components at time t.
struct MultiSeries {
    std::size_t dim = 0;
    std::vector<Vector> values;

    std::size_t size() const noexcept { return values.size(); }

    void validate() const {
        if (dim == 0) throw InvalidInput("MultiSeries: dimension must be positive");
        for (std::size_t t = 0; t < values.size(); ++t) {
            if (values[t].size() != dim)
                throw InvalidInput("MultiSeries: row " + std::to_string(t) + " has wrong length");
            if (!linalg::all_finite(values[t]))
                throw InvalidInput("MultiSeries: non-finite value at row " + std::to_string(t));
        }
    }
};

/// Differencing orders: tau(x) = (1-B)^d (1-B^s)^D x.
struct TransformSpec {
    int d = 0;
    int seasonal_D = 0;
    int s = 1;

    static constexpr int kMaxD = 3;
    static constexpr int kMaxSeasonalD = 2;

    static TransformSpec identity() { return {}; }
    static TransformSpec trend(int d = 1) { return {d, 0, 1}; }
    static TransformSpec seasonal(int d, int seasonal_D, int s) { return {d, seasonal_D, s}; }

    void validate() const {
        if (d < 0 || d > kMaxD) throw InvalidInput("TransformSpec: d must lie in [0, 3]");
        if (seasonal_D < 0 || seasonal_D > kMaxSeasonalD)
            throw InvalidInput("TransformSpec: seasonal_D must lie in [0, 2]");
        if (seasonal_D > 0 && s < 2) throw InvalidInput("TransformSpec: seasonal period must be >= 2");
    }

    /// Number of past observations consumed by one application of tau.
    std::size_t order() const noexcept {
        return static_cast<std::size_t>(d) +
               (seasonal_D > 0 ? static_cast<std::size_t>(seasonal_D) * static_cast<std::size_t>(s) : 0);
    }

    bool is_identity() const noexcept { return d == 0 && seasonal_D == 0; }

    /// Coefficients c_0..c_order of the lag polynomial (1-B)^d (1-B^s)^D, c_0 = 1.
    Vector filter() const {
        Vector c{1.0};
        auto multiply = [&c](std::size_t lag) {
            Vector out(c.size() + lag, 0.0);
            for (std::size_t i = 0; i < c.size(); ++i) {
                out[i] += c[i];
                out[i + lag] -= c[i];
            }
            c = std::move(out);
        };
        for (int i = 0; i < d; ++i) multiply(1);
        for (int i = 0; i < seasonal_D; ++i) multiply(static_cast<std::size_t>(s));
        return c;
    }

    friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

struct SarimaParams {
    Vector ar;           ///< phi_1..phi_p, phi(B) = 1 - sum phi_i B^i
    Vector seasonal_ar;  ///< Phi_1..Phi_P
    Vector ma;           ///< theta_1..theta_q, theta(B) = 1 + sum theta_i B^i
    Vector seasonal_ma;  ///< Theta_1..Theta_Q
    TransformSpec spec;
    double noise_sd = 1.0;
};

struct EcVarmaParams {
    Matrix pi;                  ///< k x k cointegrating matrix
    std::vector<Matrix> gammas; ///< Gamma_1..Gamma_{p-1}
    std::vector<Matrix> thetas; ///< Theta_1..Theta_q
    double noise_sd = 1.0;

    std::size_t dim() const noexcept { return pi.rows(); }
};

struct InvertibilityReport {
    bool invertible = true;
    double lambda_max = 0.0;
    std::size_t companion_dim = 0;
};

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// tau(x): ordinary differencing d times, then seasonal differencing D times.
inline Series difference(std::span<const double> x, const TransformSpec& spec) {
    spec.validate();
    if (x.size() <= spec.order())
        throw InsufficientHistory("difference: series too short", x.size(), spec.order() + 1);
    Series out(x.begin(), x.end());
    for (int i = 0; i < spec.d; ++i) {
        for (std::size_t t = out.size() - 1; t >= 1; --t) out[t] -= out[t - 1];
        out.erase(out.begin());
    }
    const auto lag = static_cast<std::size_t>(spec.s);
    for (int i = 0; i < spec.seasonal_D; ++i) {
        for (std::size_t t = out.size() - 1; t >= lag; --t) out[t] -= out[t - lag];
        out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lag));
    }
    return out;
}

/// zeta(y): the level x_t whose transform equals y, given the past
/// observations ending at x_{t-1}.
inline double inverse_transform(double y, std::span<const double> history, const TransformSpec& spec) {
    const std::size_t order = spec.order();
    if (history.size() < order)
        throw InsufficientHistory("inverse_transform: not enough past observations", history.size(), order);
    const Vector c = spec.filter();
    double level = y;
    for (std::size_t j = 1; j <= order; ++j) level -= c[j] * history[history.size() - j];
    return level;
}

enum class LogMode { identity, natural_log };

inline Series log_transform(std::span<const double> x, LogMode mode) {
    Series out(x.begin(), x.end());
    if (mode == LogMode::identity) return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0.0))
            throw InvalidInput("log_transform: nonpositive value at index " + std::to_string(i));
        out[i] = std::log(out[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lag polynomials and invertibility
// ---------------------------------------------------------------------------

/// Coefficients (lag 1..q+Qs) of theta(B) Theta(B^s); the leading 1 is implicit.
inline Vector expand_ma_polynomial(std::span<const double> ma, std::span<const double> seasonal_ma, int s) {
    if (!seasonal_ma.empty() && s < 1) throw InvalidInput("expand_ma_polynomial: seasonal period must be positive");
    const std::size_t q = ma.size();
    const std::size_t span_s = seasonal_ma.empty() ? 0 : seasonal_ma.size() * static_cast<std::size_t>(s);
    Vector full(q + span_s + 1, 0.0);
    Vector left(q + 1, 0.0), right(span_s + 1, 0.0);
    left[0] = right[0] = 1.0;
    for (std::size_t i = 0; i < q; ++i) left[i + 1] = ma[i];
    for (std::size_t i = 0; i < seasonal_ma.size(); ++i) right[(i + 1) * static_cast<std::size_t>(s)] = seasonal_ma[i];
    for (std::size_t i = 0; i < left.size(); ++i)
        for (std::size_t j = 0; j < right.size(); ++j) full[i + j] += left[i] * right[j];
    return Vector(full.begin() + 1, full.end());
}

/// Coefficients a_1..a_{p+Ps} with phi(B) Phi(B^s) = 1 - sum a_k B^k.
inline Vector expand_ar_polynomial(std::span<const double> ar, std::span<const double> seasonal_ar, int s) {
    Vector neg_ar(ar.size()), neg_sar(seasonal_ar.size());
    for (std::size_t i = 0; i < ar.size(); ++i) neg_ar[i] = -ar[i];
    for (std::size_t i = 0; i < seasonal_ar.size(); ++i) neg_sar[i] = -seasonal_ar[i];
    Vector prod = expand_ma_polynomial(neg_ar, neg_sar, s);
    for (double& v : prod) v = -v;
    return prod;
}

/// Companion matrix of y_t = -sum beta_i y_{t-i}: first row -beta, identity subdiagonal.
inline Matrix companion_matrix(std::span<const double> beta) {
    const std::size_t n = beta.size();
    Matrix f(n, n);
    for (std::size_t j = 0; j < n; ++j) f(0, j) = -beta[j];
    for (std::size_t i = 1; i < n; ++i) f(i, i - 1) = 1.0;
    return f;
}

inline InvertibilityReport check_invertibility(std::span<const double> ma_coeffs) {
    if (ma_coeffs.empty()) return {true, 0.0, 0};
    const double radius = linalg::spectral_radius(companion_matrix(ma_coeffs));
    return {radius < 1.0 - 1e-8, radius, ma_coeffs.size()};
}

/// AR truncation length ceil(log(2 kappa T L M_max sqrt(l_m)) / log(1/lambda_max)) + l_a,
/// never less than l_a + 1.
inline std::size_t truncation_length(double lambda_max, double kappa, std::size_t T, double L, double M_max,
                                     std::size_t l_m, std::size_t l_a) {
    if (!(lambda_max > 0.0 && lambda_max < 1.0))
        throw InvalidInput("truncation_length: lambda_max must lie in (0, 1)");
    if (!(kappa >= 1.0)) throw InvalidInput("truncation_length: kappa must be >= 1");
    if (!(L > 0.0) || !(M_max > 0.0)) throw InvalidInput("truncation_length: L and M_max must be positive");
    const std::size_t floor_value = l_a + 1;
    if (T == 0 || l_m == 0) return floor_value;
    const double arg = 2.0 * kappa * static_cast<double>(T) * L * M_max * std::sqrt(static_cast<double>(l_m));
    const double lags = std::ceil(std::log(arg) / std::log(1.0 / lambda_max));
    if (!(lags > 0.0)) return floor_value;
    return std::max(floor_value, static_cast<std::size_t>(lags) + l_a);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Stationary ARMA core phi(B)Phi(B^s) w_t = theta(B)Theta(B^s) eps_t, started
/// from zero and returned after discarding `burn_in` samples.
inline Series simulate_arma_core(const SarimaParams& params, std::size_t T, std::size_t burn_in, std::mt19937_64& rng) {
    if (!(params.noise_sd > 0.0)) throw InvalidInput("simulate: noise_sd must be positive");
    const Vector beta = expand_ma_polynomial(params.ma, params.seasonal_ma, params.spec.s);
    const InvertibilityReport report = check_invertibility(beta);
    if (!report.invertible)
        throw InvalidInput("simulate: MA polynomial is not invertible (lambda_max = " +
                           std::to_string(report.lambda_max) + ")");
    const Vector a = expand_ar_polynomial(params.ar, params.seasonal_ar, params.spec.s);

    std::normal_distribution<double> noise(0.0, params.noise_sd);
    const std::size_t n = burn_in + T;
    Series eps(n), w(n);
    for (std::size_t t = 0; t < n; ++t) {
        eps[t] = noise(rng);
        double v = eps[t];
        for (std::size_t j = 1; j <= beta.size() && j <= t; ++j) v += beta[j - 1] * eps[t - j];
        for (std::size_t j = 1; j <= a.size() && j <= t; ++j) v += a[j - 1] * w[t - j];
        w[t] = v;
    }
    return Series(w.begin() + static_cast<std::ptrdiff_t>(burn_in), w.end());
}

/// Inverts the differencing: x_t = w_t - sum_{j>=1} c_j x_{t-j}. `presample`
/// supplies x values before the first output (most recent last); missing
/// pre-sample values are zero.
inline Series integrate(std::span<const double> w, const TransformSpec& spec, std::span<const double> presample = {}) {
    spec.validate();
    const Vector c = spec.filter();
    const std::size_t order = spec.order();
    Series buf(order, 0.0);
    const std::size_t take = std::min(order, presample.size());
    std::copy(presample.end() - static_cast<std::ptrdiff_t>(take), presample.end(),
              buf.end() - static_cast<std::ptrdiff_t>(take));
    buf.reserve(order + w.size());
    for (double wt : w) {
        double x = wt;
        for (std::size_t j = 1; j <= order; ++j) x -= c[j] * buf[buf.size() - j];
        buf.push_back(x);
    }
    return Series(buf.begin() + static_cast<std::ptrdiff_t>(order), buf.end());
}

inline Series simulate_sarima(const SarimaParams& params, std::size_t T, std::size_t burn_in, std::uint64_t seed) {
    params.spec.validate();
    if (T == 0) throw InvalidInput("simulate_sarima: T must be at least 1");
    std::mt19937_64 rng(seed);
    const Series w = simulate_arma_core(params, T, burn_in, rng);
    return integrate(w, params.spec);
}

inline MultiSeries simulate_ecvarma(const EcVarmaParams& params, std::size_t T, std::size_t burn_in, std::uint64_t seed) {
    const std::size_t k = params.pi.rows();
    if (k == 0 || !params.pi.square()) throw InvalidInput("simulate_ecvarma: Pi must be square and nonempty");
    for (const auto& g : params.gammas)
        if (g.rows() != k || g.cols() != k) throw InvalidInput("simulate_ecvarma: Gamma has wrong shape");
    for (const auto& th : params.thetas)
        if (th.rows() != k || th.cols() != k) throw InvalidInput("simulate_ecvarma: Theta has wrong shape");
    if (!(params.noise_sd > 0.0)) throw InvalidInput("simulate_ecvarma: noise_sd must be positive");
    if (T == 0) throw InvalidInput("simulate_ecvarma: T must be at least 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, params.noise_sd);
    const std::size_t n = burn_in + T;
    const std::size_t p1 = params.gammas.size();
    const std::size_t q = params.thetas.size();

    std::vector<Vector> eps(n, Vector(k)), dx(n, Vector(k)), x(n, Vector(k));
    Vector prev(k, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        for (auto& e : eps[t]) e = noise(rng);
        Vector d = params.pi * prev;
        for (std::size_t i = 1; i <= p1 && i <= t; ++i) {
            const Vector g = params.gammas[i - 1] * dx[t - i];
            for (std::size_t r = 0; r < k; ++r) d[r] += g[r];
        }
        for (std::size_t i = 1; i <= q && i <= t; ++i) {
            const Vector m = params.thetas[i - 1] * eps[t - i];
            for (std::size_t r = 0; r < k; ++r) d[r] += m[r];
        }
        for (std::size_t r = 0; r < k; ++r) {
            d[r] += eps[t][r];
            x[t][r] = prev[r] + d[r];
        }
        dx[t] = std::move(d);
        prev = x[t];
    }
    MultiSeries out{k, {}};
    out.values.assign(x.begin() + static_cast<std::ptrdiff_t>(burn_in), x.end());
    return out;
}

}  // namespace nonstop::core
