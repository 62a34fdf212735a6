#pragma once

// Transform-aware online gradient descent for univariate series (ARMA-OGD,
// ARIMA-OGD, SARIMA-OGD share one implementation parameterized by the
// differencing spec), plus follow-the-leader / recursive least squares and
// its data-dependent regret-bound evaluator.

#include <nonstop/core.hpp>
#include <nonstop/error.hpp>
#include <nonstop/lag_buffer.hpp>
#include <nonstop/linalg.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nonstop::univariate {

using core::TransformSpec;
using linalg::Matrix;
using linalg::Vector;

/// Step size eta_t: either a constant or base / sqrt(t) for round t >= 1.
struct LearningRate {
    enum class Schedule { constant, inverse_sqrt_t };

    double base = 0.01;
    Schedule schedule = Schedule::constant;

    static LearningRate constant(double eta) { return {eta, Schedule::constant}; }
    static LearningRate inverse_sqrt(double eta0) { return {eta0, Schedule::inverse_sqrt_t}; }

    double at(std::size_t round) const noexcept {
        if (schedule == Schedule::constant) return base;
        return base / std::sqrt(static_cast<double>(round == 0 ? 1 : round));
    }
};

struct OgdConfig {
    std::size_t M = 1;
    LearningRate learning_rate;
    double box_radius = 1.0;

    void validate() const {
        if (M < 1) throw InvalidInput("OgdConfig: M must be at least 1");
        if (!(learning_rate.base >= 0.0) || !std::isfinite(learning_rate.base))
            throw InvalidInput("OgdConfig: learning rate must be a finite nonnegative number");
        if (!(box_radius > 0.0)) throw InvalidInput("OgdConfig: box_radius must be positive");
    }

    /// Euclidean diameter of the feasible box.
    double diameter() const noexcept { return 2.0 * box_radius * std::sqrt(static_cast<double>(M)); }
};

/// l(x, y) = (x - y)^2 / 2.
struct SquaredLoss {
    static double value(double observed, double predicted) noexcept {
        const double r = observed - predicted;
        return 0.5 * r * r;
    }
    /// d l / d predicted.
    static double derivative(double observed, double predicted) noexcept { return predicted - observed; }
};

enum class PredictorKind { arma, arima, sarima };

inline const char* to_string(PredictorKind kind) noexcept {
    switch (kind) {
        case PredictorKind::arma: return "arma";
        case PredictorKind::arima: return "arima";
        case PredictorKind::sarima: return "sarima";
    }
    return "?";
}

/// Online AR(M) predictor on the transformed scale.
///
/// Each round forms tau(x~_t) = sum_i gamma_i tau(x_{t-i}), maps it back with
/// zeta, and after observing x_t takes a projected gradient step on the box
/// {||gamma||_max <= box_radius}. Because zeta is an additive shift for every
/// supported transform, d x~_t / d gamma_i = tau(x_{t-i}).
///
/// Transformed lags that cannot be formed yet count as zero. Until enough raw
/// history exists to apply zeta, predict() throws and prediction() falls back
/// to the last observed value (zero before the first observation).
template <class Loss = SquaredLoss>
class ArPredictor {
public:
    using value_type = double;

    ArPredictor(TransformSpec spec, OgdConfig config)
        : spec_(spec),
          config_(config),
          filter_((spec.validate(), spec.filter())),
          gamma_((config.validate(), config.M), 0.0),
          raw_(config.M + spec.order() + 1),
          transformed_(config.M) {}

    const TransformSpec& spec() const noexcept { return spec_; }
    const OgdConfig& config() const noexcept { return config_; }
    const Vector& gamma() const noexcept { return gamma_; }
    std::size_t step() const noexcept { return step_; }
    std::size_t raw_history_size() const noexcept { return raw_.size(); }
    std::size_t transformed_history_size() const noexcept { return transformed_.size(); }

    /// True once zeta can be applied.
    bool ready() const noexcept { return raw_.size() >= spec_.order(); }

    /// Lag vector (tau(x_{t-1}), ..., tau(x_{t-M})), zero where unavailable.
    Vector features() const {
        Vector f(config_.M, 0.0);
        for (std::size_t i = 1; i <= transformed_.size(); ++i) f[i - 1] = transformed_.lag(i);
        return f;
    }

    /// zeta applied to a transformed-scale prediction.
    double untransform(double y) const {
        if (!ready())
            throw InsufficientHistory("ArPredictor: not enough history to invert the transform", raw_.size(),
                                      spec_.order());
        double level = y;
        for (std::size_t j = 1; j < filter_.size(); ++j) level -= filter_[j] * raw_.lag(j);
        return level;
    }

    double predict() const { return predict_with(gamma_); }

    double predict_with(std::span<const double> gamma) const {
        return untransform(linalg::dot(gamma, features()));
    }

    double default_prediction() const noexcept { return raw_.empty() ? 0.0 : raw_.lag(1); }

    /// The prediction emitted this round, with the cold-start fallback.
    double prediction() const { return ready() ? predict() : default_prediction(); }

    /// l_t^M(gamma) for the current history and observation x.
    double loss_with(std::span<const double> gamma, double x) const { return Loss::value(x, predict_with(gamma)); }

    /// Analytic gradient of l_t^M at gamma.
    Vector gradient_with(std::span<const double> gamma, double x) const {
        Vector g = features();
        const double scale = Loss::derivative(x, predict_with(gamma));
        for (double& v : g) v *= scale;
        return g;
    }

    /// Observes x_t: returns the loss of this round's prediction, takes the
    /// projected OGD step, and advances the histories.
    double update(double x) {
        if (!std::isfinite(x)) throw InvalidInput("ArPredictor::update: non-finite observation");
        ++step_;
        double loss;
        if (ready()) {
            const Vector f = features();
            const double pred = untransform(linalg::dot(gamma_, f));
            loss = Loss::value(x, pred);
            const double scale = config_.learning_rate.at(step_) * Loss::derivative(x, pred);
            if (scale != 0.0) {
                for (std::size_t i = 0; i < gamma_.size(); ++i) gamma_[i] -= scale * f[i];
                linalg::clamp_box(gamma_, config_.box_radius);
            }
        } else {
            loss = Loss::value(x, default_prediction());
        }
        transformed_.push(transform_of(x));
        raw_.push(x);
        return loss;
    }

    void set_gamma(std::span<const double> gamma) {
        if (gamma.size() != gamma_.size()) throw InvalidInput("ArPredictor::set_gamma: wrong length");
        gamma_ = linalg::project_box(gamma, config_.box_radius);
    }

private:
    // tau(x_t) given the raw history before x_t; zero during cold start.
    double transform_of(double x) const noexcept {
        if (raw_.size() < spec_.order()) return 0.0;
        double y = x;
        for (std::size_t j = 1; j < filter_.size(); ++j) y += filter_[j] * raw_.lag(j);
        return y;
    }

    TransformSpec spec_;
    OgdConfig config_;
    Vector filter_;
    Vector gamma_;
    LagBuffer<double> raw_;
    LagBuffer<double> transformed_;
    std::size_t step_ = 0;
};

/// Builds ARMA-OGD, ARIMA-OGD or SARIMA-OGD; gamma starts at zero.
inline ArPredictor<> make_predictor(PredictorKind kind, TransformSpec spec, OgdConfig config) {
    spec.validate();
    switch (kind) {
        case PredictorKind::arma:
            if (spec.d != 0 || spec.seasonal_D != 0)
                throw InvalidInput("make_predictor: arma requires d = 0 and seasonal_D = 0");
            break;
        case PredictorKind::arima:
            if (spec.seasonal_D != 0) throw InvalidInput("make_predictor: arima requires seasonal_D = 0");
            break;
        case PredictorKind::sarima:
            if (spec.seasonal_D == 0) throw InvalidInput("make_predictor: sarima requires seasonal_D >= 1");
            break;
    }
    return ArPredictor<>(spec, config);
}

// ---------------------------------------------------------------------------
// Follow-the-leader for squared loss == recursive least squares
// ---------------------------------------------------------------------------

/// FTL iterate for l_t(gamma) = (x_t - gamma^T psi_t)^2 / 2.
///
/// While the Gram matrix G = sum psi psi^T is singular (or too ill-conditioned
/// to invert reliably) the iterate is the least-squares solution closest to the
/// initial gamma, gamma_0 + G^+ (b - G gamma_0). Once G is well conditioned,
/// V = G^{-1} is formed once and both rank-one recursions take over.
class RlsState {
public:
    static constexpr double kMaxSwitchCondition = 1e8;

    explicit RlsState(std::size_t dim, Vector initial_gamma = {}, bool track_lambda_min = false)
        : gamma_(initial_gamma.empty() ? Vector(dim, 0.0) : std::move(initial_gamma)),
          prior_(gamma_),
          gram_(dim, dim),
          moment_(dim, 0.0),
          track_(track_lambda_min) {
        if (dim == 0) throw InvalidInput("RlsState: dimension must be positive");
        if (gamma_.size() != dim) throw InvalidInput("RlsState: initial gamma has wrong length");
    }

    std::size_t dim() const noexcept { return gamma_.size(); }
    const Vector& gamma() const noexcept { return gamma_; }
    bool recursive() const noexcept { return recursive_; }
    std::size_t count() const noexcept { return count_; }
    /// Running inverse Gram V_t; meaningful only once recursive() is true.
    const Matrix& inverse_gram() const noexcept { return v_; }
    const Vector& lambda_min_trace() const noexcept { return lambda_trace_; }

    double step(std::span<const double> psi, double x) {
        if (psi.size() != dim()) throw InvalidInput("rls_step: psi has wrong dimension");
        if (!linalg::all_finite(psi) || !std::isfinite(x)) throw InvalidInput("rls_step: non-finite input");
        const double residual = x - linalg::dot(gamma_, psi);
        const double loss = 0.5 * residual * residual;
        ++count_;

        if (recursive_) {
            const Vector vpsi = v_ * psi;
            const double denom = 1.0 + linalg::dot(psi, vpsi);
            for (std::size_t i = 0; i < dim(); ++i) gamma_[i] += residual / denom * vpsi[i];
            for (std::size_t i = 0; i < dim(); ++i)
                for (std::size_t j = 0; j < dim(); ++j) v_(i, j) -= vpsi[i] * vpsi[j] / denom;
            symmetrize(v_);
            if (track_) {
                const auto eig = linalg::symmetric_eigen(v_);
                lambda_trace_.push_back(1.0 / (eig.values.back() * static_cast<double>(count_)));
            }
            return loss;
        }

        for (std::size_t i = 0; i < dim(); ++i) {
            moment_[i] += psi[i] * x;
            for (std::size_t j = 0; j < dim(); ++j) gram_(i, j) += psi[i] * psi[j];
        }
        rows_.emplace_back(psi.begin(), psi.end());
        targets_.push_back(x);
        const auto eig = linalg::symmetric_eigen(gram_);
        const double lmax = eig.values.back();
        const double lmin = eig.values.front();
        if (track_) lambda_trace_.push_back(std::max(lmin, 0.0) / static_cast<double>(count_));

        if (lmin > 0.0 && lmax / lmin < kMaxSwitchCondition) {
            // Solve from the stored rows; going through the Gram matrix would
            // square the condition number at the moment it is worst.
            Matrix design(rows_.size(), dim());
            for (std::size_t r = 0; r < rows_.size(); ++r)
                for (std::size_t c = 0; c < dim(); ++c) design(r, c) = rows_[r][c];
            const auto qr = linalg::qr_least_squares(std::move(design), std::move(targets_));
            const Matrix rinv = linalg::upper_triangular_inverse(qr.r);
            v_ = rinv * rinv.transposed();
            symmetrize(v_);
            gamma_ = qr.x;
            rows_.clear();
            rows_.shrink_to_fit();
            targets_ = {};
            recursive_ = true;
        } else {
            const double cutoff = lmax * 1e-12 * static_cast<double>(dim());
            const Matrix pinv =
                reconstruct(eig, [cutoff](double lambda) { return lambda > cutoff ? 1.0 / lambda : 0.0; });
            Vector rhs = gram_ * prior_;
            for (std::size_t i = 0; i < dim(); ++i) rhs[i] = moment_[i] - rhs[i];
            const Vector delta = pinv * rhs;
            for (std::size_t i = 0; i < dim(); ++i) gamma_[i] = prior_[i] + delta[i];
        }
        return loss;
    }

private:
    template <class F>
    static Matrix reconstruct(const linalg::SymmetricEigen& eig, F&& f) {
        const std::size_t n = eig.values.size();
        Matrix out(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            const double scale = f(eig.values[k]);
            if (scale == 0.0) continue;
            for (std::size_t i = 0; i < n; ++i) {
                const double a = eig.vectors(i, k) * scale;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += a * eig.vectors(j, k);
            }
        }
        return out;
    }

    static void symmetrize(Matrix& m) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
    }

    Vector gamma_;
    Vector prior_;
    Matrix gram_;
    Vector moment_;
    std::vector<Vector> rows_;  ///< kept only until the switch to the recursion
    Vector targets_;
    Matrix v_;
    bool recursive_ = false;
    bool track_ = false;
    std::size_t count_ = 0;
    Vector lambda_trace_;
};

/// One FTL round: returns the loss of the current iterate on (psi, x), then updates.
inline double rls_step(RlsState& state, std::span<const double> psi, double x) { return state.step(psi, x); }

/// FTL on the transformed lags, run online like ArPredictor: predicts
/// zeta(gamma^T psi_t) and then feeds (psi_t, tau(x_t)) to the RLS recursion.
class FtlPredictor {
public:
    using value_type = double;

    FtlPredictor(TransformSpec spec, std::size_t M)
        : spec_(spec),
          filter_((spec.validate(), spec.filter())),
          M_(M),
          rls_((M == 0 ? throw InvalidInput("FtlPredictor: M must be at least 1") : M)),
          raw_(M + spec.order() + 1),
          transformed_(M) {}

    const TransformSpec& spec() const noexcept { return spec_; }
    const Vector& gamma() const noexcept { return rls_.gamma(); }
    const RlsState& rls() const noexcept { return rls_; }
    bool ready() const noexcept { return raw_.size() >= spec_.order(); }

    Vector features() const {
        Vector f(M_, 0.0);
        for (std::size_t i = 1; i <= transformed_.size(); ++i) f[i - 1] = transformed_.lag(i);
        return f;
    }

    double prediction() const {
        if (!ready()) return raw_.empty() ? 0.0 : raw_.lag(1);
        double level = linalg::dot(rls_.gamma(), features());
        for (std::size_t j = 1; j < filter_.size(); ++j) level -= filter_[j] * raw_.lag(j);
        return level;
    }

    double update(double x) {
        if (!std::isfinite(x)) throw InvalidInput("FtlPredictor::update: non-finite observation");
        const double loss = SquaredLoss::value(x, prediction());
        double tx = 0.0;
        if (ready()) {
            tx = x;
            for (std::size_t j = 1; j < filter_.size(); ++j) tx += filter_[j] * raw_.lag(j);
            rls_.step(features(), tx);
        }
        transformed_.push(tx);
        raw_.push(x);
        return loss;
    }

private:
    TransformSpec spec_;
    Vector filter_;
    std::size_t M_;
    RlsState rls_;
    LagBuffer<double> raw_;
    LagBuffer<double> transformed_;
};

/// Partial sums of sum_t 1 / (t * lambda_min(t)), lambda_min(t) the smallest
/// eigenvalue of (1/t) sum_{i<=t} psi_i psi_i^T.
struct RegretBoundTrace {
    std::size_t first_step = 0;  ///< 1-based t_0 of partial_sums[0]; 0 when empty
    Vector partial_sums;
};

inline constexpr double kSingularGramThreshold = 1e-12;

inline RegretBoundTrace ftl_regret_bound(std::span<const Vector> psis) {
    RegretBoundTrace out;
    if (psis.empty()) return out;
    const std::size_t dim = psis.front().size();
    Matrix gram(dim, dim);
    Matrix scaled(dim, dim);
    double sum = 0.0;
    for (std::size_t t = 1; t <= psis.size(); ++t) {
        const Vector& psi = psis[t - 1];
        if (psi.size() != dim) throw InvalidInput("ftl_regret_bound: psi vectors differ in dimension");
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) gram(i, j) += psi[i] * psi[j];
        const double inv_t = 1.0 / static_cast<double>(t);
        for (std::size_t k = 0; k < gram.values().size(); ++k) scaled.values()[k] = gram.values()[k] * inv_t;
        const double lambda = linalg::symmetric_min_eigenvalue(scaled);
        if (out.partial_sums.empty() && !(lambda > kSingularGramThreshold)) continue;
        if (out.partial_sums.empty()) out.first_step = t;
        if (lambda > kSingularGramThreshold) sum += 1.0 / (static_cast<double>(t) * lambda);
        out.partial_sums.push_back(sum);
    }
    return out;
}

/// Lagged feature vectors (z_{t-1}, ..., z_{t-M}) for t = M..n-1, paired with
/// their targets z_t.
struct LaggedDesign {
    std::vector<Vector> psis;
    Vector targets;
};

inline LaggedDesign lagged_design(std::span<const double> z, std::size_t M) {
    LaggedDesign out;
    if (M == 0) throw InvalidInput("lagged_design: M must be positive");
    for (std::size_t t = M; t < z.size(); ++t) {
        Vector psi(M);
        for (std::size_t i = 1; i <= M; ++i) psi[i - 1] = z[t - i];
        out.psis.push_back(std::move(psi));
        out.targets.push_back(z[t]);
    }
    return out;
}

}  // namespace nonstop::univariate
