// Command-line front end for the experiment harness.
//
//   nonstop --algo sarima-ogd --dgp airline --t 5000 --seeds 20 --output out.csv
//   nonstop --algo nonstop-uni --input series.csv --log-input --output trace.csv
//
// On failure prints one line "error: <kind>: <message>" to stderr.

#include <nonstop/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

namespace h = nonstop::harness;

int fail(const char* kind, const std::string& message) {
    std::string line = message;
    for (char& c : line)
        if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "error: " << kind << ": " << line << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online prediction of nonstationary time series"};

    std::string algo = "sarima-ogd";
    int d = 1, seasonal_d = 1, s = 12;
    std::size_t m = 24, window = 10, t = 5000, seeds = 20, switch_at = 0, jobs = 0;
    std::uint64_t seed = 1;
    double eta = -1.0, rho = 0.5;
    std::string schedule, dgp, input, output, experts;
    bool log_input = false, avg_mode = false;

    app.add_option("--algo", algo, "arma-ogd | arima-ogd | sarima-ogd | nonstop-uni | varma-ogd | ecvarma-ogd | "
                                   "nonstop-multi | ftl-rls | regret-bound")
        ->capture_default_str();
    app.add_option("--d", d, "ordinary differencing order")->capture_default_str();
    app.add_option("--seasonal-d", seasonal_d, "seasonal differencing order")->capture_default_str();
    app.add_option("--s", s, "seasonal period")->capture_default_str();
    app.add_option("--m", m, "AR truncation length M")->capture_default_str();
    app.add_option("--eta", eta, "base learning rate (default: 1.5/M univariate, 0.001 multivariate)");
    app.add_option("--eta-schedule", schedule, "constant | inv-sqrt (default: inv-sqrt)")
        ->check(CLI::IsMember({"constant", "inv-sqrt"}));
    app.add_option("--rho", rho, "nuclear-norm radius for Pi")->capture_default_str();
    app.add_option("--window", window, "NonSTOP sliding-window length")->capture_default_str();
    app.add_option("--t", t, "series length for simulated runs")->capture_default_str();
    app.add_option("--seeds", seeds, "number of simulated series")->capture_default_str();
    app.add_option("--seed", seed, "first seed")->capture_default_str();
    app.add_flag("--log-input", log_input, "take natural logs of the input first");
    auto* dgp_opt = app.add_option("--dgp", dgp, "preset name or JSON file describing the simulator");
    auto* input_opt = app.add_option("--input", input, "CSV file with a header row");
    dgp_opt->excludes(input_opt);
    app.add_option("--output", output, "trace CSV to write");
    app.add_option("--switch-at", switch_at, "switch point for the switching preset");
    app.add_option("--experts", experts, "comma-separated NonSTOP experts (default arma,arima,sarima)");
    app.add_flag("--avg-mode", avg_mode, "NonSTOP plays the weighted average instead of sampling");
    app.add_option("--jobs", jobs, "worker threads (0: one per core)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        h::ExperimentConfig cfg;
        cfg.algorithm = h::parse_algorithm(algo);
        cfg.spec = {d, seasonal_d, s};
        cfg.M = m;
        if (eta >= 0.0) cfg.eta = eta;
        else if (app.count("--eta")) throw nonstop::InvalidInput("eta must be nonnegative");
        if (schedule == "constant") cfg.eta_schedule = nonstop::univariate::LearningRate::Schedule::constant;
        if (schedule == "inv-sqrt") cfg.eta_schedule = nonstop::univariate::LearningRate::Schedule::inverse_sqrt_t;
        cfg.rho = rho;
        cfg.window_k = window;
        cfg.T = t;
        cfg.num_seeds = seeds;
        cfg.base_seed = seed;
        cfg.log_input = log_input;
        cfg.workers = jobs;
        cfg.output_path = output;
        if (avg_mode) cfg.mode = nonstop::ensemble::PredictionMode::weighted_average;
        if (!experts.empty()) {
            cfg.experts.clear();
            for (const auto& name : CLI::detail::split(experts, ','))
                cfg.experts.push_back(h::parse_predictor_kind(CLI::detail::trim_copy(name)));
        }
        if (!dgp.empty()) cfg.dgp = h::resolve_dgp(dgp);
        if (!input.empty()) cfg.input_path = input;
        if (app.count("--switch-at")) {
            auto* sw = cfg.dgp ? std::get_if<h::SwitchingDgp>(&*cfg.dgp) : nullptr;
            if (!sw) throw nonstop::InvalidInput("--switch-at applies only to a switching dgp");
            sw->t_switch = switch_at;
        }

        const h::RunTrace trace = h::run_experiment(cfg);
        if (output.empty()) h::write_trace(std::cout, trace);
        else
            std::cerr << "wrote " << trace.per_step_loss.size() << " rows to " << output << "; final log_avg_loss "
                      << h::format_double(trace.log_avg_loss.back()) << '\n';
        return 0;
    } catch (const h::ParseError& e) {
        return fail("parse-error", e.what());
    } catch (const nonstop::InvalidInput& e) {
        return fail("invalid-input", e.what());
    } catch (const nonstop::InsufficientHistory& e) {
        return fail("insufficient-history", e.what());
    } catch (const nonstop::NumericFailure& e) {
        return fail("numeric-failure", e.what());
    } catch (const h::IoError& e) {
        return fail("io-error", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
