#include <nonstop/core.hpp>
#include <nonstop/univariate.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"

using namespace nonstop;
using namespace nonstop::univariate;
using core::TransformSpec;

namespace {

OgdConfig cfg(std::size_t M, double eta) { return {M, LearningRate::constant(eta), 1.0}; }

template <class P>
void feed(P& p, std::initializer_list<double> xs) {
    for (double x : xs) p.update(x);
}

}  // namespace

TEST(MakePredictor, KindsAndContracts) {
    const auto arma = make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(3, 0.1));
    EXPECT_TRUE(arma.spec().is_identity());
    EXPECT_EQ(arma.gamma(), Vector(3, 0.0));
    EXPECT_EQ(arma.step(), 0u);
    const auto sarima = make_predictor(PredictorKind::sarima, TransformSpec::seasonal(1, 1, 12), cfg(24, 0.1));
    EXPECT_EQ(sarima.config().M, 24u);
    EXPECT_EQ(sarima.raw_history_size(), 0u);
    EXPECT_THROW(make_predictor(PredictorKind::arima, TransformSpec::seasonal(1, 1, 12), cfg(2, 0.1)), InvalidInput);
    EXPECT_THROW(make_predictor(PredictorKind::arma, TransformSpec::trend(1), cfg(2, 0.1)), InvalidInput);
    EXPECT_THROW(make_predictor(PredictorKind::sarima, TransformSpec::trend(1), cfg(2, 0.1)), InvalidInput);
    EXPECT_THROW(make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(0, 0.1)), InvalidInput);
}

TEST(Predict, ZeroGammaTrendIsRandomWalk) {
    auto p = make_predictor(PredictorKind::arima, TransformSpec::trend(1), cfg(2, 0.0));
    feed(p, {3.0, 7.0});
    EXPECT_DOUBLE_EQ(p.predict(), 7.0);
}

TEST(Predict, ZeroGammaIdentityIsZero) {
    auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(2, 0.0));
    feed(p, {3.0, 7.0});
    EXPECT_DOUBLE_EQ(p.predict(), 0.0);
}

TEST(Predict, CopiesLastTransformedValue) {
    auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(1, 0.0));
    p.update(3.0);
    p.set_gamma(Vector{1.0});
    EXPECT_DOUBLE_EQ(p.predict(), 3.0);
}

TEST(Predict, InsufficientHistoryThrows) {
    auto p = make_predictor(PredictorKind::sarima, TransformSpec::seasonal(1, 1, 4), cfg(2, 0.0));
    feed(p, {1, 2, 3});
    EXPECT_THROW(p.predict(), InsufficientHistory);
    EXPECT_DOUBLE_EQ(p.prediction(), 3.0);
}

TEST(Update, ExactPredictionLeavesGamma) {
    auto p = make_predictor(PredictorKind::arima, TransformSpec::trend(1), cfg(2, 0.5));
    feed(p, {1.0, 2.0, 4.0});
    const Vector before = p.gamma();
    EXPECT_EQ(p.update(p.predict()), 0.0);
    EXPECT_EQ(p.gamma(), before);
    EXPECT_EQ(p.step(), 4u);
}

TEST(Update, HandComputedStep) {
    auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(1, 0.1));
    p.update(2.0);  // history tau(x_{t-1}) = 2
    const Vector g = p.gradient_with(p.gamma(), 1.0);
    EXPECT_DOUBLE_EQ(g[0], -2.0);
    const Vector fd = oracle::numeric_gradient([&](const Vector& gm) { return p.loss_with(gm, 1.0); }, p.gamma());
    EXPECT_NEAR(fd[0], -2.0, 1e-8);
    EXPECT_DOUBLE_EQ(p.update(1.0), 0.5);
    EXPECT_NEAR(p.gamma()[0], 0.2, 1e-15);
}

TEST(Update, ZeroLearningRateFreezesGamma) {
    auto p = make_predictor(PredictorKind::arima, TransformSpec::trend(1), cfg(3, 0.0));
    std::mt19937_64 rng(1);
    for (double x : oracle::random_vector(50, rng, 10.0)) p.update(x);
    EXPECT_EQ(p.gamma(), Vector(3, 0.0));
}

TEST(Update, GammaStaysInBox) {
    OgdConfig c{4, LearningRate::constant(5.0), 0.7};
    auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), c);
    std::mt19937_64 rng(2);
    for (double x : oracle::random_vector(300, rng, 3.0)) {
        p.update(x);
        EXPECT_LE(linalg::max_abs(p.gamma()), 0.7);
    }
}

TEST(Update, RejectsNonFinite) {
    auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), cfg(1, 0.1));
    EXPECT_THROW(p.update(NAN), InvalidInput);
}

TEST(Update, HistoriesRespectCapacity) {
    auto p = make_predictor(PredictorKind::sarima, TransformSpec::seasonal(1, 1, 3), cfg(2, 0.01));
    for (int t = 0; t < 40; ++t) p.update(std::sin(t));
    EXPECT_EQ(p.raw_history_size(), 2u + 4u + 1u);
    EXPECT_EQ(p.transformed_history_size(), 2u);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 rng(3);
    const TransformSpec specs[] = {TransformSpec::identity(), TransformSpec::trend(1), TransformSpec::trend(2),
                                   TransformSpec::seasonal(1, 1, 4), TransformSpec::seasonal(0, 2, 3)};
    for (int k = 0; k < 50; ++k) {
        const TransformSpec spec = specs[k % 5];
        const std::size_t M = 1 + rng() % 6;
        ArPredictor<> p(spec, cfg(M, 0.0));
        for (double x : oracle::random_vector(M + spec.order() + 5, rng)) p.update(x);
        Vector gamma = oracle::random_vector(M, rng, 0.5);
        const double x = oracle::random_vector(1, rng, 3.0)[0];
        const Vector analytic = p.gradient_with(gamma, x);
        const Vector fd = oracle::numeric_gradient([&](const Vector& g) { return p.loss_with(g, x); }, gamma);
        EXPECT_LT(oracle::relative_error(analytic, fd), 1e-5);
    }
}

TEST(Equivariance, LevelErrorEqualsTransformedError) {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 30; ++k) {
        const TransformSpec spec{static_cast<int>(rng() % 3), static_cast<int>(rng() % 2), 5};
        const std::size_t M = 3;
        ArPredictor<> p(spec, cfg(M, 0.0));
        const Vector hist = oracle::random_vector(M + spec.order() + 4, rng, 4.0);
        for (double x : hist) p.update(x);
        p.set_gamma(oracle::random_vector(M, rng, 0.3));
        const double x_new = 2.5;
        const double pred = p.predict();
        Vector with_x = hist, with_pred = hist;
        with_x.push_back(x_new);
        with_pred.push_back(pred);
        const double tau_x = core::difference(with_x, spec).back();
        const double tau_pred = core::difference(with_pred, spec).back();
        EXPECT_NEAR(x_new - pred, tau_x - tau_pred, 1e-10);
    }
}

TEST(ArmaOgd, AverageLossNearNoiseFloorOnStationaryData) {
    core::SarimaParams params;
    params.ar = {0.5};
    params.ma = {0.3};
    const std::size_t T = 10000;
    double avg = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto x = core::simulate_sarima(params, T, 200, seed);
        auto p = make_predictor(PredictorKind::arma, TransformSpec::identity(), {8, LearningRate::inverse_sqrt(0.2)});
        double total = 0.0;
        for (double v : x) total += p.update(v);
        avg += total / static_cast<double>(T) / 5.0;
    }
    EXPECT_LT(avg, 0.5 * 1.10);
    EXPECT_GT(avg, 0.5 * 0.90);
}

TEST(LearningRate, Schedules) {
    EXPECT_DOUBLE_EQ(LearningRate::constant(0.3).at(100), 0.3);
    EXPECT_DOUBLE_EQ(LearningRate::inverse_sqrt(0.3).at(4), 0.15);
    EXPECT_DOUBLE_EQ(LearningRate::inverse_sqrt(0.3).at(1), 0.3);
}

// ---------------------------------------------------------------------------
// RLS / FTL
// ---------------------------------------------------------------------------

TEST(Rls, ConsistentPointHasZeroLoss) {
    RlsState s(2, Vector{1.0, -2.0});
    EXPECT_EQ(s.step(Vector{3.0, 1.0}, 1.0), 0.0);
    EXPECT_EQ(s.gamma(), (Vector{1.0, -2.0}));
}

TEST(Rls, FivePointsMatchBatch) {
    std::mt19937_64 rng(5);
    std::vector<Vector> psis;
    Vector xs;
    RlsState s(2);
    for (int t = 0; t < 5; ++t) {
        psis.push_back(oracle::random_vector(2, rng));
        xs.push_back(oracle::random_vector(1, rng)[0]);
        const double predicted = linalg::dot(s.gamma(), psis.back());
        EXPECT_NEAR(rls_step(s, psis.back(), xs.back()), 0.5 * (xs.back() - predicted) * (xs.back() - predicted),
                    1e-15);
    }
    const Vector batch = oracle::normal_equations(psis, xs);
    EXPECT_NEAR(s.gamma()[0], batch[0], 1e-8);
    EXPECT_NEAR(s.gamma()[1], batch[1], 1e-8);
}

TEST(Rls, UninformativeDirectionNeverMoves) {
    RlsState s(2, Vector{0.0, 0.7});
    for (int t = 0; t < 50; ++t) s.step(Vector{1.0, 0.0}, 3.0);
    EXPECT_NEAR(s.gamma()[0], 3.0, 1e-12);
    EXPECT_EQ(s.gamma()[1], 0.7);
}

TEST(Rls, InverseGramSymmetricPositive) {
    std::mt19937_64 rng(6);
    RlsState s(4);
    for (int t = 0; t < 100; ++t) s.step(oracle::random_vector(4, rng), oracle::random_vector(1, rng)[0]);
    ASSERT_TRUE(s.recursive());
    const auto& v = s.inverse_gram();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(v(i, j), v(j, i), 1e-8);
    EXPECT_GT(linalg::symmetric_min_eigenvalue(v), 0.0);
}

TEST(Rls, DimensionMismatch) {
    RlsState s(3);
    EXPECT_THROW(s.step(Vector{1.0}, 0.0), InvalidInput);
}

TEST(Rls, EveryStepAfterFullRankMatchesBatch) {
    std::mt19937_64 rng(7);
    for (int stream = 0; stream < 10; ++stream) {
        const std::size_t n = 1 + rng() % 10;
        RlsState s(n);
        std::vector<Vector> psis;
        Vector xs;
        for (int t = 0; t < 60; ++t) {
            psis.push_back(oracle::random_vector(n, rng));
            xs.push_back(oracle::random_vector(1, rng)[0]);
            s.step(psis.back(), xs.back());
            if (psis.size() >= n + 2) {
                const Vector batch = oracle::normal_equations(psis, xs);
                for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(s.gamma()[i], batch[i], 1e-8);
            }
        }
    }
}

TEST(FtlBound, AlternatingBasisHarmonic) {
    std::vector<Vector> psis;
    for (int t = 0; t < 200; ++t) psis.push_back(t % 2 == 0 ? Vector{1.0, 0.0} : Vector{0.0, 1.0});
    const auto trace = ftl_regret_bound(psis);
    ASSERT_EQ(trace.first_step, 2u);
    // Even t: lambda_min = 1/2, term 2/t. Odd t: lambda_min = (t-1)/(2t), term 2/(t-1).
    double expected = 0.0;
    for (std::size_t t = 2; t <= 200; ++t) {
        expected += (t % 2 == 0) ? 2.0 / static_cast<double>(t) : 2.0 / static_cast<double>(t - 1);
        EXPECT_NEAR(trace.partial_sums[t - 2], expected, 1e-10);
    }
}

TEST(FtlBound, IdenticalVectorsNeverFullRank) {
    std::vector<Vector> psis(50, Vector{1.0, 2.0});
    EXPECT_TRUE(ftl_regret_bound(psis).partial_sums.empty());
    EXPECT_EQ(ftl_regret_bound(psis).first_step, 0u);
}

TEST(FtlBound, ScalarUnitIsHarmonicNumber) {
    std::vector<Vector> psis(100, Vector{1.0});
    const auto trace = ftl_regret_bound(psis);
    EXPECT_EQ(trace.first_step, 1u);
    double h = 0.0;
    for (int t = 1; t <= 100; ++t) h += 1.0 / t;
    EXPECT_NEAR(trace.partial_sums.back(), h, 1e-12);
}

TEST(FtlPredictor, LossesMatchRlsOnTransformedSeries) {
    std::mt19937_64 rng(8);
    const TransformSpec spec = TransformSpec::trend(1);
    const Vector x = core::integrate(oracle::random_vector(200, rng), spec);
    FtlPredictor p(spec, 3);
    RlsState reference(3);
    // Missing lags count as zero and x_0 contributes a placeholder 0, so the
    // reference design is built from the padded transformed series.
    Vector padded(4, 0.0);
    const Vector z = core::difference(x, spec);
    padded.insert(padded.end(), z.begin(), z.end());
    const auto design = lagged_design(padded, 3);
    std::vector<double> losses;
    for (double v : x) losses.push_back(p.update(v));
    for (std::size_t k = 1; k < design.psis.size(); ++k) {
        const double expected = reference.step(design.psis[k], design.targets[k]);
        EXPECT_NEAR(losses[k], expected, 1e-9 * std::max(1.0, expected));
    }
}

TEST(LaggedDesign, Shape) {
    const auto d = lagged_design(Vector{1, 2, 3, 4, 5}, 2);
    ASSERT_EQ(d.psis.size(), 3u);
    EXPECT_EQ(d.psis[0], (Vector{2, 1}));
    EXPECT_EQ(d.targets[0], 3.0);
    EXPECT_THROW(lagged_design(Vector{1, 2}, 0), InvalidInput);
}
