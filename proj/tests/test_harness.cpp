#include <nonstop/harness.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace nonstop;
using namespace nonstop::harness;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("nonstop_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig small_config(Algorithm a, std::size_t T = 300, std::size_t seeds = 3) {
    ExperimentConfig cfg;
    cfg.algorithm = a;
    cfg.dgp = SarimaDgp{presets::airline()};
    cfg.T = T;
    cfg.num_seeds = seeds;
    cfg.workers = 1;
    return cfg;
}

}  // namespace

TEST(LoadCsv, TwoColumns) {
    TempDir dir;
    std::string text = "a,b\n";
    for (int t = 0; t < 100; ++t) text += std::to_string(t) + "," + std::to_string(-0.5 * t) + "\n";
    write_file(dir / "x.csv", text);
    const auto data = load_csv(dir / "x.csv");
    const auto& m = std::get<MultiSeries>(data);
    EXPECT_EQ(m.dim, 2u);
    ASSERT_EQ(m.values.size(), 100u);
    EXPECT_EQ(m.values[99][1], -49.5);
}

TEST(LoadCsv, ReportsBadCellPosition) {
    TempDir dir;
    write_file(dir / "x.csv", "a,b\n1,2\n3,4\n5,nan\n");
    try {
        load_csv(dir / "x.csv");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_EQ(e.column(), 2u);
    }
    write_file(dir / "y.csv", "a\n1\nabc\n");
    EXPECT_THROW(load_csv(dir / "y.csv"), ParseError);
    write_file(dir / "z.csv", "a,b\n1,2\n3\n");
    EXPECT_THROW(load_csv(dir / "z.csv"), ParseError);
}

TEST(LoadCsv, SingleColumnWithBomAndCrlf) {
    TempDir dir;
    write_file(dir / "x.csv", "\xEF\xBB\xBFprice\r\n1.5\r\n2.5\r\n\r\n");
    EXPECT_EQ(std::get<Series>(load_csv(dir / "x.csv")), (Series{1.5, 2.5}));
}

TEST(LoadCsv, EmptyAndMissing) {
    TempDir dir;
    write_file(dir / "empty.csv", "");
    EXPECT_THROW(load_csv(dir / "empty.csv"), InvalidInput);
    write_file(dir / "header.csv", "a\n");
    EXPECT_THROW(load_csv(dir / "header.csv"), InvalidInput);
    EXPECT_THROW(load_csv(dir / "missing.csv"), IoError);
}

TEST(Trace, RoundTripIsBitExact) {
    TempDir dir;
    RunTrace t;
    t.per_step_loss = {0.1, 1.0 / 3.0, 2e-300};
    t.log_avg_loss = log_average_loss(t.per_step_loss);
    t.expert_labels = {"arma", "sarima"};
    t.weight_trace = {{0.5, 0.5}, {0.25, 0.75}, {std::nextafter(0.1, 1.0), 0.9}};
    t.bound_labels = {"identity", "seasonal"};
    t.regret_bound_trace = {{NAN, 1.5, 2.25}, {NAN, NAN, 1e-17}};
    save_trace(dir / "t.csv", t);
    const RunTrace back = load_trace(dir / "t.csv");
    EXPECT_EQ(back.per_step_loss, t.per_step_loss);
    EXPECT_EQ(back.log_avg_loss, t.log_avg_loss);
    EXPECT_EQ(back.weight_trace, t.weight_trace);
    EXPECT_EQ(back.bound_labels, t.bound_labels);
    EXPECT_EQ(back.expert_labels, (std::vector<std::string>{"expert_0", "expert_1"}));
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < 3; ++r) {
            const double a = t.regret_bound_trace[c][r], b = back.regret_bound_trace[c][r];
            EXPECT_TRUE((std::isnan(a) && std::isnan(b)) || a == b);
        }
}

TEST(Trace, LogAverageLoss) {
    const Vector losses{1.0, 3.0, 0.5, 2.0};
    const Vector got = log_average_loss(losses);
    double sum = 0.0;
    for (std::size_t t = 0; t < losses.size(); ++t) {
        sum += losses[t];
        EXPECT_NEAR(got[t], std::log(sum / static_cast<double>(t + 1)), 1e-12);
    }
}

TEST(Trace, NoPartialFileOnFailure) {
    TempDir dir;
    RunTrace t;
    t.per_step_loss = {1.0};
    t.log_avg_loss = {0.0};
    const fs::path bad = dir / "no_such_dir" / "out.csv";
    EXPECT_THROW(save_trace(bad, t), IoError);
    EXPECT_FALSE(fs::exists(bad));
    EXPECT_FALSE(fs::exists(dir / "no_such_dir"));
}

TEST(Experiment, OutputIsDeterministicAcrossWorkerCounts) {
    TempDir dir;
    ExperimentConfig cfg = small_config(Algorithm::nonstop_uni, 400, 4);
    cfg.output_path = dir / "a.csv";
    run_experiment(cfg);
    cfg.output_path = dir / "b.csv";
    cfg.workers = 3;
    run_experiment(cfg);
    EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
    EXPECT_FALSE(read_file(dir / "a.csv").empty());
}

TEST(Experiment, TraceColumnsPerAlgorithm) {
    const RunTrace single = run_experiment(small_config(Algorithm::sarima_ogd));
    EXPECT_EQ(trace_header(single), (std::vector<std::string>{"step", "loss", "log_avg_loss"}));
    EXPECT_EQ(single.per_step_loss.size(), 300u);
    const RunTrace ens = run_experiment(small_config(Algorithm::nonstop_uni));
    EXPECT_EQ(ens.expert_labels, (std::vector<std::string>{"arma", "arima", "sarima"}));
    ASSERT_EQ(ens.weight_trace.size(), 300u);
    const RunTrace bound = run_experiment(small_config(Algorithm::regret_bound, 200, 2));
    EXPECT_EQ(bound.bound_labels.size(), 3u);
}

TEST(Experiment, SingleRunLogLossMatchesLosses) {
    const RunTrace t = run_experiment(small_config(Algorithm::arima_ogd, 300, 1));
    const Vector expected = log_average_loss(t.per_step_loss);
    for (std::size_t i = 0; i < t.per_step_loss.size(); ++i) EXPECT_NEAR(t.log_avg_loss[i], expected[i], 1e-12);
}

TEST(Experiment, SeedAverageIsMeanOfLogCurves) {
    const ExperimentConfig cfg = small_config(Algorithm::arima_ogd, 300, 3);
    const auto runs = run_seeds(cfg);
    const RunTrace avg = run_experiment(cfg);
    for (std::size_t i = 0; i < 300; ++i) {
        double mean = 0.0;
        for (const auto& r : runs) mean += r.log_avg_loss[i] / 3.0;
        EXPECT_NEAR(avg.log_avg_loss[i], mean, 1e-12);
    }
}

TEST(Experiment, SeasonalBeatsIdentityOnSeasonalData) {
    const double sarima = run_experiment(small_config(Algorithm::sarima_ogd, 2000, 4)).log_avg_loss.back();
    const double arma = run_experiment(small_config(Algorithm::arma_ogd, 2000, 4)).log_avg_loss.back();
    EXPECT_LT(sarima, arma);
}

TEST(Experiment, FileInputRunsOnce) {
    TempDir dir;
    std::string text = "x\n";
    for (int t = 0; t < 60; ++t) text += std::to_string(10.0 + std::sin(0.4 * t)) + "\n";
    write_file(dir / "in.csv", text);
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::arima_ogd;
    cfg.input_path = dir / "in.csv";
    cfg.log_input = true;
    EXPECT_EQ(run_experiment(cfg).per_step_loss.size(), 60u);
}

TEST(Experiment, ConfigValidation) {
    ExperimentConfig cfg = small_config(Algorithm::sarima_ogd);
    cfg.T = 0;
    EXPECT_THROW(run_experiment(cfg), InvalidInput);
    cfg = small_config(Algorithm::ecvarma_ogd);
    EXPECT_THROW(run_experiment(cfg), InvalidInput);
    cfg = small_config(Algorithm::sarima_ogd);
    cfg.input_path = "x.csv";
    EXPECT_THROW(run_experiment(cfg), InvalidInput);
    cfg = small_config(Algorithm::regret_bound);
    cfg.spec = TransformSpec::trend(1);
    EXPECT_THROW(run_experiment(cfg), InvalidInput);
    EXPECT_THROW(parse_algorithm("sarima"), InvalidInput);
}

TEST(Experiment, LogInputRejectsNonPositive) {
    ExperimentConfig cfg = small_config(Algorithm::arma_ogd, 50, 1);
    cfg.log_input = true;
    EXPECT_THROW(run_experiment(cfg), InvalidInput);
}

TEST(Switching, ArgumentChecks) {
    const auto a = presets::airline(), b = presets::arima011();
    EXPECT_THROW(make_switching_series(a, b, 0, 100, 1), InvalidInput);
    EXPECT_THROW(make_switching_series(a, b, 100, 100, 1), InvalidInput);
    EXPECT_EQ(make_switching_series(a, b, 40, 100, 1).size(), 100u);
    EXPECT_THROW(simulate(SwitchingDgp{a, b, 4000}, 0, 1), InvalidInput);
}

TEST(Switching, PrefixMatchesSingleRegime) {
    const auto a = presets::airline(), b = presets::arima011();
    const Series x = make_switching_series(a, b, 150, 400, 9);
    const Series ref = core::simulate_sarima(a, 150, kDefaultBurnIn, 9);
    EXPECT_TRUE(std::equal(ref.begin(), ref.end(), x.begin()));
}

TEST(Switching, SecondSegmentFollowsArimaRecursion) {
    // After the switch the first difference is an MA(1) with unit-variance noise;
    // its lag-1 autocorrelation is theta / (1 + theta^2) = 0.4.
    const Series x = make_switching_series(presets::airline(), presets::arima011(), 100, 20100, 3);
    Series dx;
    for (std::size_t t = 101; t < x.size(); ++t) dx.push_back(x[t] - x[t - 1]);
    double mean = 0.0;
    for (double v : dx) mean += v;
    mean /= static_cast<double>(dx.size());
    double c0 = 0.0, c1 = 0.0;
    for (std::size_t t = 0; t < dx.size(); ++t) {
        c0 += (dx[t] - mean) * (dx[t] - mean);
        if (t > 0) c1 += (dx[t] - mean) * (dx[t - 1] - mean);
    }
    EXPECT_NEAR(c1 / c0, 0.4, 0.03);
}

TEST(DgpJson, ParsesEachKind) {
    const Dgp s = parse_dgp_json(R"({"kind":"sarima","ma":[-0.5],"d":1,"burn_in":10})");
    EXPECT_EQ(std::get<SarimaDgp>(s).params.ma, (Vector{-0.5}));
    EXPECT_EQ(std::get<SarimaDgp>(s).burn_in, 10u);
    const Dgp w = parse_dgp_json(
        R"({"kind":"switching","t_switch":50,"first":{"ma":[0.2]},"second":{"d":1,"seasonal_d":1,"s":4}})");
    EXPECT_EQ(std::get<SwitchingDgp>(w).t_switch, 50u);
    EXPECT_EQ(std::get<SwitchingDgp>(w).second.spec.s, 4);
    const Dgp e = parse_dgp_json(R"({"kind":"ecvarma","pi":[[-0.2,0],[0,0]],"gammas":[[[0.1,0],[0,0.1]]]})");
    EXPECT_EQ(std::get<EcVarmaDgp>(e).params.dim(), 2u);
    EXPECT_EQ(std::get<EcVarmaDgp>(e).params.gammas.size(), 1u);
}

TEST(DgpJson, Rejects) {
    EXPECT_THROW(parse_dgp_json("{"), InvalidInput);
    EXPECT_THROW(parse_dgp_json(R"({"kind":"garch"})"), InvalidInput);
    EXPECT_THROW(parse_dgp_json(R"({"kind":"sarima","d":9})"), InvalidInput);
    EXPECT_THROW(parse_dgp_json(R"({"kind":"ecvarma","pi":[[1,2],[3]]})"), InvalidInput);
    EXPECT_THROW(resolve_dgp("/nonexistent/dgp.json"), InvalidInput);
    for (auto name : kPresetNames) EXPECT_TRUE(find_preset(name).has_value());
}

TEST(ParallelMap, KeepsOrderAndRethrows) {
    const auto v = parallel_map(20, 4, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(v[i], i * i);
    EXPECT_THROW(parallel_map(5, 2,
                              [](std::size_t i) {
                                  if (i == 3) throw NumericFailure("boom", 0);
                                  return i;
                              }),
                 NumericFailure);
}

#ifdef NONSTOP_CLI_PATH
namespace {

struct CliResult {
    int code;
    std::string err;
};

CliResult run_cli(const std::string& args, const TempDir& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(NONSTOP_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

}  // namespace

TEST(Cli, SuccessWritesOutput) {
    TempDir dir;
    const auto r = run_cli("--algo arima-ogd --dgp arima011 --t 200 --seeds 2 --output " + (dir / "o.csv").string(), dir);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_trace(dir / "o.csv").per_step_loss.size(), 200u);
}

TEST(Cli, ErrorsAreSingleMachineReadableLines) {
    TempDir dir;
    const auto bad_algo = run_cli("--algo foo --dgp arima011", dir);
    EXPECT_NE(bad_algo.code, 0);
    EXPECT_EQ(bad_algo.err.rfind("error: invalid-input: ", 0), 0u) << bad_algo.err;
    EXPECT_EQ(std::count(bad_algo.err.begin(), bad_algo.err.end(), '\n'), 1);

    write_file(dir / "in.csv", "a\n1\nx\n");
    const auto parse = run_cli("--algo arma-ogd --input " + (dir / "in.csv").string(), dir);
    EXPECT_EQ(parse.err.rfind("error: parse-error: ", 0), 0u) << parse.err;

    const auto usage = run_cli("--dgp arima011 --input x.csv", dir);
    EXPECT_EQ(usage.err.rfind("error: usage: ", 0), 0u) << usage.err;

    const auto io = run_cli("--algo arma-ogd --input " + (dir / "missing.csv").string(), dir);
    EXPECT_EQ(io.err.rfind("error: io-error: ", 0), 0u) << io.err;

    const auto sw = run_cli("--algo arima-ogd --dgp arima011 --switch-at 10", dir);
    EXPECT_EQ(sw.err.rfind("error: invalid-input: ", 0), 0u) << sw.err;
}
#endif
