#pragma once

// NonSTOP: randomized weighted majority over transformation experts. Every
// expert learns on every round; the meta-learner samples which expert's
// prediction to play and shrinks each weight by (1 - eta)^(l_t(h) / b_t),
// where b_t is the largest loss any expert suffered over the last window_k
// rounds (the current one included).

#include <nonstop/error.hpp>
#include <nonstop/lag_buffer.hpp>
#include <nonstop/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace nonstop::ensemble {

using linalg::Vector;

template <class E>
concept OnlineExpert = requires(E& e, const E& ce, const typename E::value_type& x) {
    typename E::value_type;
    { ce.prediction() } -> std::convertible_to<typename E::value_type>;
    { e.update(x) } -> std::convertible_to<double>;
};

enum class PredictionMode {
    randomized,        ///< play one expert drawn from w_t / W_t
    weighted_average,  ///< play the w_t / W_t convex combination of expert predictions
};

inline double squared_loss(double x, double pred) noexcept { return 0.5 * (x - pred) * (x - pred); }

inline double squared_loss(std::span<const double> x, std::span<const double> pred) {
    if (x.size() != pred.size()) throw InvalidInput("squared_loss: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - pred[i]) * (x[i] - pred[i]);
    return 0.5 * s;
}

template <class Value>
struct NonstopStepRecord {
    std::size_t chosen_expert = 0;
    double realized_loss = 0.0;  ///< per_expert_losses[chosen_expert]
    Vector per_expert_losses;
    Vector weights_after;        ///< normalized, after this round's update
    double b_t = 0.0;
    Value meta_prediction{};
    double meta_loss = 0.0;      ///< loss of meta_prediction (differs from realized_loss only when averaging)
};

namespace detail {

inline double combine(std::span<const double> shares, const std::vector<double>& preds) {
    double s = 0.0;
    for (std::size_t h = 0; h < preds.size(); ++h) s += shares[h] * preds[h];
    return s;
}

inline Vector combine(std::span<const double> shares, const std::vector<Vector>& preds) {
    Vector s(preds.front().size(), 0.0);
    for (std::size_t h = 0; h < preds.size(); ++h)
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += shares[h] * preds[h][i];
    return s;
}

}  // namespace detail

/// eta = min(sqrt(ln |experts| / T), 0.5).
inline double nonstop_learning_rate(std::size_t num_experts, std::size_t horizon) {
    if (num_experts < 2) throw InvalidInput("nonstop: at least two experts are required");
    if (horizon < 1) throw InvalidInput("nonstop: horizon T must be at least 1");
    return std::min(std::sqrt(std::log(static_cast<double>(num_experts)) / static_cast<double>(horizon)), 0.5);
}

template <OnlineExpert Expert>
class ExpertEnsemble {
public:
    using value_type = typename Expert::value_type;
    using Record = NonstopStepRecord<value_type>;

    ExpertEnsemble(std::vector<Expert> experts, std::size_t window_k, std::size_t horizon, std::uint64_t seed,
                   PredictionMode mode = PredictionMode::randomized)
        : experts_(std::move(experts)),
          eta_(nonstop_learning_rate(experts_.size(), horizon)),
          window_k_(window_k),
          log_weights_(experts_.size(), 0.0),
          rng_(seed),
          seed_(seed),
          mode_(mode) {
        if (window_k == 0) throw InvalidInput("nonstop: window length must be positive");
        windows_.assign(experts_.size(), LagBuffer<double>(window_k));
    }

    /// Same as the horizon constructor but with eta given directly; must lie in (0, 1).
    static ExpertEnsemble with_eta(std::vector<Expert> experts, std::size_t window_k, double eta, std::uint64_t seed,
                                   PredictionMode mode = PredictionMode::randomized) {
        if (!(eta > 0.0 && eta < 1.0)) throw InvalidInput("nonstop: eta must lie in (0, 1)");
        ExpertEnsemble e(std::move(experts), window_k, 1, seed, mode);
        e.eta_ = eta;
        return e;
    }

    std::size_t size() const noexcept { return experts_.size(); }
    double eta() const noexcept { return eta_; }
    std::size_t window_k() const noexcept { return window_k_; }
    std::size_t step() const noexcept { return step_; }
    std::uint64_t seed() const noexcept { return seed_; }
    PredictionMode mode() const noexcept { return mode_; }
    const std::vector<Expert>& experts() const noexcept { return experts_; }
    const Expert& expert(std::size_t h) const { return experts_.at(h); }
    const LagBuffer<double>& loss_window(std::size_t h) const { return windows_.at(h); }

    /// Weights are stored as logarithms so long runs never underflow to zero.
    const Vector& log_weights() const noexcept { return log_weights_; }

    Vector weights() const {
        Vector w(log_weights_.size());
        std::transform(log_weights_.begin(), log_weights_.end(), w.begin(), [](double lw) { return std::exp(lw); });
        return w;
    }

    /// w_t / W_t.
    Vector weight_snapshot() const {
        const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
        Vector w(log_weights_.size());
        double total = 0.0;
        for (std::size_t h = 0; h < w.size(); ++h) total += (w[h] = std::exp(log_weights_[h] - top));
        for (double& v : w) v /= total;
        return w;
    }

    /// One round: sample h_t, play it, update every expert on x_t, then the weights.
    Record step(const value_type& x) {
        Record rec;
        const Vector shares = weight_snapshot();
        rec.chosen_expert = sample(shares);

        std::vector<value_type> preds;
        preds.reserve(experts_.size());
        for (const auto& e : experts_) preds.push_back(e.prediction());
        rec.meta_prediction =
            mode_ == PredictionMode::randomized ? preds[rec.chosen_expert] : detail::combine(shares, preds);
        rec.meta_loss = squared_loss(x, rec.meta_prediction);

        rec.per_expert_losses.resize(experts_.size());
        for (std::size_t h = 0; h < experts_.size(); ++h) {
            const double loss = experts_[h].update(x);
            if (!(loss >= 0.0)) throw InvalidInput("nonstop: expert produced a negative or NaN loss");
            rec.per_expert_losses[h] = loss;
            windows_[h].push(loss);
        }
        rec.realized_loss = rec.per_expert_losses[rec.chosen_expert];

        double b = 0.0;
        for (const auto& win : windows_)
            for (std::size_t i = 1; i <= win.size(); ++i) b = std::max(b, win.lag(i));
        rec.b_t = b;

        if (b > 0.0) {
            const double log_decay = std::log1p(-eta_);
            for (std::size_t h = 0; h < experts_.size(); ++h)
                log_weights_[h] += (rec.per_expert_losses[h] / b) * log_decay;
        }
        ++step_;
        rec.weights_after = weight_snapshot();
        return rec;
    }

private:
    std::size_t sample(std::span<const double> shares) {
        // 53 random bits mapped to [0, 1); identical on every platform.
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        double cumulative = 0.0;
        for (std::size_t h = 0; h < shares.size(); ++h) {
            cumulative += shares[h];
            if (u < cumulative) return h;
        }
        return shares.size() - 1;
    }

    std::vector<Expert> experts_;
    double eta_;
    std::size_t window_k_;
    Vector log_weights_;
    std::vector<LagBuffer<double>> windows_;
    std::mt19937_64 rng_;
    std::uint64_t seed_;
    PredictionMode mode_;
    std::size_t step_ = 0;
};

template <OnlineExpert Expert>
ExpertEnsemble<Expert> make_ensemble(std::vector<Expert> experts, std::size_t window_k, std::size_t horizon,
                                     std::uint64_t seed, PredictionMode mode = PredictionMode::randomized) {
    return ExpertEnsemble<Expert>(std::move(experts), window_k, horizon, seed, mode);
}

}  // namespace nonstop::ensemble
