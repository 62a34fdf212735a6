#pragma once

// EC-VARMA-OGD: online prediction of cointegrated vector series through the
// error-corrected form x~_t = x_{t-1} + Pi x_{t-1} + sum_i Gamma_i dx_{t-i},
// with Pi kept in a nuclear-norm ball and each Gamma_i in a max-norm box.
// With `differenced = false` the same machinery runs the plain VAR(M) model
// on levels (VARMA-OGD).

#include <nonstop/error.hpp>
#include <nonstop/lag_buffer.hpp>
#include <nonstop/linalg.hpp>
#include <nonstop/univariate.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace nonstop::multivariate {

using linalg::Matrix;
using linalg::Vector;
using univariate::LearningRate;

/// Frobenius projection onto {X : ||X||_* <= rho}: l1-project the singular values.
inline Matrix project_nuclear(const Matrix& a, double rho) {
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidInput("project_nuclear: rho must be nonnegative");
    if (rho == 0.0) return Matrix(a.rows(), a.cols());
    const linalg::Svd dec = linalg::svd(a);
    double total = 0.0;
    for (double s : dec.sigma) total += s;
    if (total <= rho) return a;
    const Vector shrunk = linalg::project_l1_ball(dec.sigma, rho);
    Matrix out(a.rows(), a.cols());
    for (std::size_t k = 0; k < shrunk.size(); ++k) {
        if (shrunk[k] == 0.0) continue;
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double left = dec.u(i, k) * shrunk[k];
            for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += left * dec.v(j, k);
        }
    }
    return out;
}

struct EcVarmaConfig {
    std::size_t M = 1;
    LearningRate learning_rate = LearningRate::constant(0.01);
    double rho = 0.5;
    double gamma_box_radius = 1.0;
    bool differenced = true;

    void validate() const {
        if (M < 1) throw InvalidInput("EcVarmaConfig: M must be at least 1");
        if (!(learning_rate.base >= 0.0)) throw InvalidInput("EcVarmaConfig: learning rate must be nonnegative");
        if (!(rho >= 0.0)) throw InvalidInput("EcVarmaConfig: rho must be nonnegative");
        if (!(gamma_box_radius > 0.0)) throw InvalidInput("EcVarmaConfig: gamma_box_radius must be positive");
        if (!differenced && rho != 0.0) throw InvalidInput("EcVarmaConfig: level (VARMA) mode requires rho = 0");
    }

    static EcVarmaConfig varma(std::size_t M, LearningRate rate, double box = 1.0) {
        return {M, rate, 0.0, box, false};
    }
};

/// Parameter block {Pi, Gamma_1..Gamma_M}.
struct EcVarmaParameters {
    Matrix pi;
    std::vector<Matrix> gammas;
};

class EcVarmaPredictor {
public:
    using value_type = Vector;

    EcVarmaPredictor(std::size_t dim, EcVarmaConfig config)
        : dim_(dim), config_(config), history_(config.M + 2) {
        if (dim == 0) throw InvalidInput("EcVarmaPredictor: dimension must be positive");
        config_.validate();
        params_.pi = Matrix(dim, dim);
        params_.gammas.assign(config.M, Matrix(dim, dim));
    }

    std::size_t dim() const noexcept { return dim_; }
    const EcVarmaConfig& config() const noexcept { return config_; }
    const EcVarmaParameters& parameters() const noexcept { return params_; }
    const Matrix& pi_hat() const noexcept { return params_.pi; }
    const std::vector<Matrix>& gamma_hats() const noexcept { return params_.gammas; }
    std::size_t step() const noexcept { return step_; }
    std::size_t history_size() const noexcept { return history_.size(); }
    bool ready() const noexcept { return !history_.empty(); }

    /// Regressor paired with Gamma_i: dx_{t-i} in EC mode, x_{t-i} in level
    /// mode; the zero vector when unavailable.
    Vector regressor(std::size_t i) const {
        if (config_.differenced) {
            if (!history_.has_lag(i + 1)) return Vector(dim_, 0.0);
            Vector d = history_.lag(i);
            const Vector& older = history_.lag(i + 1);
            for (std::size_t r = 0; r < dim_; ++r) d[r] -= older[r];
            return d;
        }
        if (!history_.has_lag(i)) return Vector(dim_, 0.0);
        return history_.lag(i);
    }

    Vector predict() const { return predict_with(params_); }

    Vector predict_with(const EcVarmaParameters& p) const {
        if (!ready()) throw InsufficientHistory("EcVarmaPredictor: no past observations", 0, 1);
        Vector out(dim_, 0.0);
        if (config_.differenced) {
            const Vector& last = history_.lag(1);
            out = p.pi * last;
            for (std::size_t r = 0; r < dim_; ++r) out[r] += last[r];
        }
        for (std::size_t i = 1; i <= config_.M; ++i) {
            const Vector term = p.gammas[i - 1] * regressor(i);
            for (std::size_t r = 0; r < dim_; ++r) out[r] += term[r];
        }
        return out;
    }

    /// Emitted before any observation has arrived.
    Vector default_prediction() const { return Vector(dim_, 0.0); }

    Vector prediction() const { return ready() ? predict() : default_prediction(); }

    double loss_with(const EcVarmaParameters& p, std::span<const double> x) const {
        check_dim(x);
        const Vector pred = predict_with(p);
        double s = 0.0;
        for (std::size_t r = 0; r < dim_; ++r) s += (x[r] - pred[r]) * (x[r] - pred[r]);
        return 0.5 * s;
    }

    /// Analytic gradient of 0.5 ||x - x~||^2: with r = x~ - x, dPi = r x_{t-1}^T
    /// (EC mode only) and dGamma_i = r * regressor(i)^T.
    EcVarmaParameters gradient_with(const EcVarmaParameters& p, std::span<const double> x) const {
        check_dim(x);
        Vector r = predict_with(p);
        for (std::size_t i = 0; i < dim_; ++i) r[i] -= x[i];
        EcVarmaParameters g;
        g.pi = config_.differenced ? linalg::outer(r, history_.lag(1)) : Matrix(dim_, dim_);
        g.gammas.reserve(config_.M);
        for (std::size_t i = 1; i <= config_.M; ++i) g.gammas.push_back(linalg::outer(r, regressor(i)));
        return g;
    }

    double update(std::span<const double> x) {
        check_dim(x);
        if (!linalg::all_finite(x)) throw InvalidInput("EcVarmaPredictor::update: non-finite observation");
        ++step_;
        double loss;
        if (ready()) {
            const double eta = config_.learning_rate.at(step_);
            const EcVarmaParameters g = gradient_with(params_, x);
            loss = loss_with(params_, x);
            if (eta != 0.0 && loss != 0.0) {
                for (std::size_t i = 0; i < config_.M; ++i) {
                    params_.gammas[i] -= g.gammas[i] * eta;
                    linalg::clamp_box(params_.gammas[i].values(), config_.gamma_box_radius);
                }
                if (config_.differenced) {
                    params_.pi -= g.pi * eta;
                    params_.pi = project_nuclear(params_.pi, config_.rho);
                }
            }
        } else {
            double s = 0.0;
            for (double v : x) s += v * v;
            loss = 0.5 * s;
        }
        history_.push(Vector(x.begin(), x.end()));
        return loss;
    }

    double update(const Vector& x) { return update(std::span<const double>(x)); }

    void set_parameters(EcVarmaParameters p) {
        if (p.pi.rows() != dim_ || p.pi.cols() != dim_ || p.gammas.size() != config_.M)
            throw InvalidInput("EcVarmaPredictor::set_parameters: wrong shape");
        params_ = std::move(p);
    }

private:
    void check_dim(std::span<const double> x) const {
        if (x.size() != dim_) throw InvalidInput("EcVarmaPredictor: observation has wrong dimension");
    }

    std::size_t dim_;
    EcVarmaConfig config_;
    EcVarmaParameters params_;
    LagBuffer<Vector> history_;
    std::size_t step_ = 0;
};

}  // namespace nonstop::multivariate
