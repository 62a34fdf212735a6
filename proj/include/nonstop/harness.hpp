#pragma once

// Experiment runner: data ingestion, DGP presets, multi-seed orchestration and
// CSV traces. Seeds fan out across a small worker pool; results are reduced in
// seed order, so output never depends on scheduling.

#include <nonstop/core.hpp>
#include <nonstop/ensemble.hpp>
#include <nonstop/error.hpp>
#include <nonstop/linalg.hpp>
#include <nonstop/multivariate.hpp>
#include <nonstop/univariate.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <variant>
#include <vector>

namespace nonstop::harness {

using core::MultiSeries;
using core::SarimaParams;
using core::Series;
using core::TransformSpec;
using linalg::Matrix;
using linalg::Vector;
using univariate::LearningRate;
using univariate::PredictorKind;

/// Malformed input file; the message carries "line L, column C".
class ParseError : public InvalidInput {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : InvalidInput(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// File system trouble while reading or writing.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

enum class Algorithm {
    arma_ogd,
    arima_ogd,
    sarima_ogd,
    nonstop_uni,
    varma_ogd,
    ecvarma_ogd,
    nonstop_multi,
    ftl_rls,
    regret_bound,
};

inline constexpr std::pair<Algorithm, std::string_view> kAlgorithmNames[] = {
    {Algorithm::arma_ogd, "arma-ogd"},         {Algorithm::arima_ogd, "arima-ogd"},
    {Algorithm::sarima_ogd, "sarima-ogd"},     {Algorithm::nonstop_uni, "nonstop-uni"},
    {Algorithm::varma_ogd, "varma-ogd"},       {Algorithm::ecvarma_ogd, "ecvarma-ogd"},
    {Algorithm::nonstop_multi, "nonstop-multi"}, {Algorithm::ftl_rls, "ftl-rls"},
    {Algorithm::regret_bound, "regret-bound"},
};

inline std::string_view to_string(Algorithm a) noexcept {
    for (const auto& [value, name] : kAlgorithmNames)
        if (value == a) return name;
    return "unknown";
}

inline Algorithm parse_algorithm(std::string_view name) {
    for (const auto& [value, label] : kAlgorithmNames)
        if (label == name) return value;
    throw InvalidInput("unknown algorithm '" + std::string(name) + "'");
}

inline bool is_multivariate(Algorithm a) noexcept {
    return a == Algorithm::varma_ogd || a == Algorithm::ecvarma_ogd || a == Algorithm::nonstop_multi;
}

inline PredictorKind parse_predictor_kind(std::string_view name) {
    if (name == "arma") return PredictorKind::arma;
    if (name == "arima") return PredictorKind::arima;
    if (name == "sarima") return PredictorKind::sarima;
    throw InvalidInput("unknown expert '" + std::string(name) + "' (expected arma, arima or sarima)");
}

/// The member of the transform family a predictor kind uses, given the
/// experiment's (d, D, s).
inline TransformSpec spec_for(PredictorKind kind, const TransformSpec& spec) {
    switch (kind) {
        case PredictorKind::arma: return TransformSpec::identity();
        case PredictorKind::arima: return TransformSpec::trend(spec.d);
        case PredictorKind::sarima:
            if (spec.seasonal_D < 1) throw InvalidInput("sarima expert requires seasonal-d >= 1");
            return spec;
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Data-generating processes
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultBurnIn = 200;

struct SarimaDgp {
    SarimaParams params;
    std::size_t burn_in = kDefaultBurnIn;
};

/// params_a for t < t_switch, params_b afterwards.
struct SwitchingDgp {
    SarimaParams first;
    SarimaParams second;
    std::size_t t_switch = 4000;
    std::size_t burn_in = kDefaultBurnIn;
};

struct EcVarmaDgp {
    core::EcVarmaParams params;
    std::size_t burn_in = kDefaultBurnIn;
};

using Dgp = std::variant<SarimaDgp, SwitchingDgp, EcVarmaDgp>;

inline bool is_multivariate(const Dgp& dgp) noexcept { return std::holds_alternative<EcVarmaDgp>(dgp); }

namespace presets {

/// (1-B)(1-B^12) x_t = (1 - 0.95B)(1 - 0.4B^12) eps_t.
inline SarimaParams airline() {
    SarimaParams p;
    p.ma = {-0.95};
    p.seasonal_ma = {-0.4};
    p.spec = TransformSpec::seasonal(1, 1, 12);
    return p;
}

/// (1-B) x_t = (1 + 0.5B) eps_t.
inline SarimaParams arima011() {
    SarimaParams p;
    p.ma = {0.5};
    p.spec = TransformSpec::trend(1);
    return p;
}

/// Four cointegrated random walks: Pi = -0.5 u u^T with unit u, so rank 1
/// and nuclear norm 0.5.
inline core::EcVarmaParams ecvarma_rank1() {
    core::EcVarmaParams p;
    const Vector u{0.5, -0.5, 0.5, -0.5};
    p.pi = linalg::outer(u, u) * -0.5;
    p.gammas = {Matrix::identity(4) * 0.2};
    return p;
}

}  // namespace presets

inline constexpr std::string_view kPresetNames[] = {"airline", "arima011", "switching", "ecvarma-rank1",
                                                    "white-noise"};

inline std::optional<Dgp> find_preset(std::string_view name) {
    if (name == "airline") return SarimaDgp{presets::airline()};
    if (name == "arima011") return SarimaDgp{presets::arima011()};
    if (name == "switching") return SwitchingDgp{presets::airline(), presets::arima011()};
    if (name == "ecvarma-rank1") return EcVarmaDgp{presets::ecvarma_rank1()};
    if (name == "white-noise") return SarimaDgp{SarimaParams{}};
    return std::nullopt;
}

namespace detail {

using nlohmann::json;

inline Vector json_vector(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    return j.at(key).get<Vector>();
}

inline Matrix json_matrix(const json& j) {
    const auto rows = j.get<std::vector<Vector>>();
    if (rows.empty()) throw InvalidInput("dgp file: empty matrix");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw InvalidInput("dgp file: ragged matrix");
        for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
    }
    return m;
}

inline SarimaParams sarima_from_json(const json& j) {
    SarimaParams p;
    p.ar = json_vector(j, "ar");
    p.seasonal_ar = json_vector(j, "seasonal_ar");
    p.ma = json_vector(j, "ma");
    p.seasonal_ma = json_vector(j, "seasonal_ma");
    p.spec = {j.value("d", 0), j.value("seasonal_d", 0), j.value("s", 1)};
    p.noise_sd = j.value("noise_sd", 1.0);
    p.spec.validate();
    return p;
}

}  // namespace detail

/// JSON DGP description. kind is "sarima" (ar, seasonal_ar, ma, seasonal_ma,
/// d, seasonal_d, s, noise_sd), "switching" (first, second, t_switch) or
/// "ecvarma" (pi, gammas, thetas, noise_sd); burn_in is optional everywhere.
inline Dgp parse_dgp_json(std::string_view text) {
    using detail::json;
    try {
        const json j = json::parse(text);
        const std::string kind = j.at("kind").get<std::string>();
        const std::size_t burn_in = j.value("burn_in", kDefaultBurnIn);
        if (kind == "sarima") return SarimaDgp{detail::sarima_from_json(j), burn_in};
        if (kind == "switching")
            return SwitchingDgp{detail::sarima_from_json(j.at("first")), detail::sarima_from_json(j.at("second")),
                                j.at("t_switch").get<std::size_t>(), burn_in};
        if (kind == "ecvarma") {
            core::EcVarmaParams p;
            p.pi = detail::json_matrix(j.at("pi"));
            if (j.contains("gammas"))
                for (const auto& g : j.at("gammas")) p.gammas.push_back(detail::json_matrix(g));
            if (j.contains("thetas"))
                for (const auto& th : j.at("thetas")) p.thetas.push_back(detail::json_matrix(th));
            p.noise_sd = j.value("noise_sd", 1.0);
            return EcVarmaDgp{std::move(p), burn_in};
        }
        throw InvalidInput("dgp file: unknown kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("dgp file: ") + e.what());
    }
}

/// A preset name, or a path to a JSON description.
inline Dgp resolve_dgp(const std::string& name_or_path) {
    if (auto preset = find_preset(name_or_path)) return *preset;
    std::ifstream in(name_or_path);
    if (!in) throw InvalidInput("dgp '" + name_or_path + "' is neither a preset nor a readable file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_dgp_json(buf.str());
}

/// Level-continuous splice: segment two is integrated starting from the tail
/// of segment one.
inline Series make_switching_series(const SarimaParams& params_a, const SarimaParams& params_b, std::size_t t_switch,
                                    std::size_t T, std::uint64_t seed, std::size_t burn_in = kDefaultBurnIn) {
    if (t_switch == 0 || t_switch >= T)
        throw InvalidInput("make_switching_series: need 0 < t_switch < T (t_switch = " + std::to_string(t_switch) +
                           ", T = " + std::to_string(T) + ")");
    params_a.spec.validate();
    params_b.spec.validate();
    std::mt19937_64 rng(seed);
    const Series wa = core::simulate_arma_core(params_a, t_switch, burn_in, rng);
    Series x = core::integrate(wa, params_a.spec);
    const Series wb = core::simulate_arma_core(params_b, T - t_switch, burn_in, rng);
    const Series tail = core::integrate(wb, params_b.spec, x);
    x.insert(x.end(), tail.begin(), tail.end());
    return x;
}

using Data = std::variant<Series, MultiSeries>;

inline Data simulate(const Dgp& dgp, std::size_t T, std::uint64_t seed) {
    if (T == 0) throw InvalidInput("T must be at least 1");
    if (const auto* s = std::get_if<SarimaDgp>(&dgp)) return core::simulate_sarima(s->params, T, s->burn_in, seed);
    if (const auto* w = std::get_if<SwitchingDgp>(&dgp))
        return make_switching_series(w->first, w->second, w->t_switch, T, seed, w->burn_in);
    const auto& e = std::get<EcVarmaDgp>(dgp);
    return core::simulate_ecvarma(e.params, T, e.burn_in, seed);
}

// ---------------------------------------------------------------------------
// Input CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) return cells;
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Whole-cell decimal parse; nullopt on anything else.
inline std::optional<double> parse_double(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) lines.front().erase(0, 3);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

}  // namespace detail

/// Header row then numeric rows; one column gives a Series, more give a MultiSeries.
inline Data load_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw InvalidInput("'" + path.string() + "' is empty");
    const std::size_t width = detail::split_commas(lines.front()).size();
    if (lines.size() < 2) throw InvalidInput("'" + path.string() + "' has a header but no data rows");

    std::vector<Vector> rows;
    rows.reserve(lines.size() - 1);
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto cells = detail::split_commas(lines[l]);
        if (cells.size() != width)
            throw ParseError("expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()),
                             l + 1, std::min(cells.size(), width) + 1);
        Vector row(width);
        for (std::size_t c = 0; c < width; ++c) {
            const std::string_view cell = detail::trim(cells[c]);
            const auto v = detail::parse_double(cell);
            if (!v) throw ParseError("non-numeric cell '" + std::string(cell) + "'", l + 1, c + 1);
            if (!std::isfinite(*v)) throw ParseError("non-finite cell '" + std::string(cell) + "'", l + 1, c + 1);
            row[c] = *v;
        }
        rows.push_back(std::move(row));
    }
    if (width == 1) {
        Series s(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) s[t] = rows[t][0];
        return s;
    }
    return MultiSeries{width, std::move(rows)};
}

// ---------------------------------------------------------------------------
// Configuration and traces
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::sarima_ogd;
    TransformSpec spec = TransformSpec::seasonal(1, 1, 12);
    std::size_t M = 24;
    std::optional<double> eta;  ///< unset: family default
    std::optional<LearningRate::Schedule> eta_schedule;
    double rho = 0.5;
    std::size_t window_k = 10;
    std::size_t T = 5000;
    std::size_t num_seeds = 20;
    std::uint64_t base_seed = 1;
    bool log_input = false;
    std::optional<Dgp> dgp;
    std::optional<std::filesystem::path> input_path;
    std::filesystem::path output_path;
    std::vector<PredictorKind> experts{PredictorKind::arma, PredictorKind::arima, PredictorKind::sarima};
    ensemble::PredictionMode mode = ensemble::PredictionMode::randomized;
    std::size_t workers = 0;  ///< 0: one per hardware thread

    void validate() const {
        spec.validate();
        if (dgp.has_value() == input_path.has_value())
            throw InvalidInput("exactly one of a dgp and an input file must be given");
        if (M < 1) throw InvalidInput("M must be at least 1");
        if (dgp && T == 0) throw InvalidInput("T must be at least 1");
        if (dgp && num_seeds == 0) throw InvalidInput("number of seeds must be at least 1");
        if (window_k == 0) throw InvalidInput("window must be at least 1");
        if (eta && (!(*eta >= 0.0) || !std::isfinite(*eta))) throw InvalidInput("eta must be finite and nonnegative");
        if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidInput("rho must be finite and nonnegative");
        if (dgp && is_multivariate(*dgp) != is_multivariate(algorithm))
            throw InvalidInput("dgp and algorithm disagree on univariate versus multivariate");
        if (algorithm == Algorithm::nonstop_uni) {
            if (experts.size() < 2) throw InvalidInput("nonstop-uni needs at least two experts");
            for (PredictorKind k : experts) (void)spec_for(k, spec);
        }
        if (algorithm == Algorithm::sarima_ogd) (void)spec_for(PredictorKind::sarima, spec);
        if (algorithm == Algorithm::regret_bound && (spec.d < 1 || spec.seasonal_D < 1))
            throw InvalidInput("regret-bound compares identity, trend and seasonal transforms; need d >= 1 and "
                               "seasonal-d >= 1");
    }

    /// Defaults: eta_t = eta_0 / sqrt(t) with eta_0 = 1.5 / M univariate and
    /// 1e-3 multivariate.
    LearningRate learning_rate() const {
        const auto schedule = eta_schedule.value_or(LearningRate::Schedule::inverse_sqrt_t);
        const double base = eta.value_or(is_multivariate(algorithm) ? 1e-3 : 1.5 / static_cast<double>(M));
        return {base, schedule};
    }
};

struct RunTrace {
    Vector per_step_loss;
    Vector log_avg_loss;
    std::vector<std::string> expert_labels;  ///< empty unless an ensemble ran
    std::vector<Vector> weight_trace;        ///< [step][expert], normalized
    std::vector<std::string> bound_labels;   ///< identity, trend, seasonal
    std::vector<Vector> regret_bound_trace;  ///< [curve][row]; NaN where undefined
};

/// ln of the running mean loss.
inline Vector log_average_loss(std::span<const double> losses) {
    Vector out(losses.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < losses.size(); ++t) {
        sum += losses[t];
        out[t] = std::log(sum / static_cast<double>(t + 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

namespace detail {

template <class Predictor, class Values>
Vector run_predictor(Predictor& p, const Values& xs) {
    Vector losses;
    losses.reserve(xs.size());
    for (const auto& x : xs) losses.push_back(p.update(x));
    return losses;
}

template <class Expert, class Values>
void run_ensemble(ensemble::ExpertEnsemble<Expert>& ens, const Values& xs, RunTrace& out) {
    out.per_step_loss.reserve(xs.size());
    out.weight_trace.reserve(xs.size());
    for (const auto& x : xs) {
        auto rec = ens.step(x);
        out.per_step_loss.push_back(ens.mode() == ensemble::PredictionMode::randomized ? rec.realized_loss
                                                                                       : rec.meta_loss);
        out.weight_trace.push_back(std::move(rec.weights_after));
    }
}

/// Bound curve for one transform, indexed by the count of complete lag vectors.
inline Vector bound_curve(const Series& x, const TransformSpec& spec, std::size_t M, std::size_t rows) {
    Vector curve(rows, std::numeric_limits<double>::quiet_NaN());
    if (x.size() <= spec.order()) return curve;
    const Series z = core::difference(x, spec);
    const auto design = univariate::lagged_design(z, M);
    const auto trace = univariate::ftl_regret_bound(design.psis);
    for (std::size_t i = 0; i < trace.partial_sums.size(); ++i) {
        const std::size_t row = trace.first_step - 1 + i;
        if (row < rows) curve[row] = trace.partial_sums[i];
    }
    return curve;
}

}  // namespace detail

inline RunTrace run_univariate(const ExperimentConfig& cfg, const Series& x, std::uint64_t seed) {
    RunTrace out;
    const univariate::OgdConfig ogd{cfg.M, cfg.learning_rate()};
    auto single = [&](PredictorKind kind) {
        auto p = univariate::make_predictor(kind, spec_for(kind, cfg.spec), ogd);
        out.per_step_loss = detail::run_predictor(p, x);
    };
    switch (cfg.algorithm) {
        case Algorithm::arma_ogd: single(PredictorKind::arma); break;
        case Algorithm::arima_ogd: single(PredictorKind::arima); break;
        case Algorithm::sarima_ogd: single(PredictorKind::sarima); break;
        case Algorithm::nonstop_uni: {
            std::vector<univariate::ArPredictor<>> experts;
            for (PredictorKind k : cfg.experts) {
                experts.push_back(univariate::make_predictor(k, spec_for(k, cfg.spec), ogd));
                out.expert_labels.emplace_back(univariate::to_string(k));
            }
            auto ens = ensemble::make_ensemble(std::move(experts), cfg.window_k, x.size(), seed, cfg.mode);
            detail::run_ensemble(ens, x, out);
            break;
        }
        case Algorithm::ftl_rls:
        case Algorithm::regret_bound: {
            univariate::FtlPredictor p(cfg.spec, cfg.M);
            out.per_step_loss = detail::run_predictor(p, x);
            if (cfg.algorithm == Algorithm::regret_bound) {
                out.bound_labels = {"identity", "trend", "seasonal"};
                const TransformSpec specs[] = {TransformSpec::identity(), TransformSpec::trend(cfg.spec.d), cfg.spec};
                for (const auto& s : specs) out.regret_bound_trace.push_back(detail::bound_curve(x, s, cfg.M, x.size()));
            }
            break;
        }
        default: throw InvalidInput(std::string(to_string(cfg.algorithm)) + " needs multivariate data");
    }
    out.log_avg_loss = log_average_loss(out.per_step_loss);
    return out;
}

inline RunTrace run_multivariate(const ExperimentConfig& cfg, const MultiSeries& x, std::uint64_t seed) {
    x.validate();
    RunTrace out;
    const LearningRate rate = cfg.learning_rate();
    const multivariate::EcVarmaConfig ec{cfg.M, rate, cfg.rho, 1.0, true};
    const auto level = multivariate::EcVarmaConfig::varma(cfg.M, rate);
    switch (cfg.algorithm) {
        case Algorithm::varma_ogd: {
            multivariate::EcVarmaPredictor p(x.dim, level);
            out.per_step_loss = detail::run_predictor(p, x.values);
            break;
        }
        case Algorithm::ecvarma_ogd: {
            multivariate::EcVarmaPredictor p(x.dim, ec);
            out.per_step_loss = detail::run_predictor(p, x.values);
            break;
        }
        case Algorithm::nonstop_multi: {
            std::vector<multivariate::EcVarmaPredictor> experts{{x.dim, level}, {x.dim, ec}};
            out.expert_labels = {"varma", "ecvarma"};
            auto ens = ensemble::make_ensemble(std::move(experts), cfg.window_k, x.size(), seed, cfg.mode);
            detail::run_ensemble(ens, x.values, out);
            break;
        }
        default: throw InvalidInput(std::string(to_string(cfg.algorithm)) + " needs univariate data");
    }
    out.log_avg_loss = log_average_loss(out.per_step_loss);
    return out;
}

namespace detail {

inline Data apply_log(Data data) {
    if (auto* s = std::get_if<Series>(&data)) return core::log_transform(*s, core::LogMode::natural_log);
    auto& m = std::get<MultiSeries>(data);
    for (std::size_t t = 0; t < m.values.size(); ++t)
        for (std::size_t c = 0; c < m.dim; ++c) {
            if (!(m.values[t][c] > 0.0))
                throw InvalidInput("log_transform: nonpositive value at row " + std::to_string(t) + ", column " +
                                   std::to_string(c));
            m.values[t][c] = std::log(m.values[t][c]);
        }
    return data;
}

}  // namespace detail

/// Runs the configured algorithm on one data set.
inline RunTrace run_single(const ExperimentConfig& cfg, Data data, std::uint64_t seed) {
    if (cfg.log_input) data = detail::apply_log(std::move(data));
    if (is_multivariate(cfg.algorithm)) {
        if (auto* s = std::get_if<Series>(&data)) {
            MultiSeries m{1, {}};
            for (double v : *s) m.values.push_back({v});
            return run_multivariate(cfg, m, seed);
        }
        return run_multivariate(cfg, std::get<MultiSeries>(data), seed);
    }
    const auto* s = std::get_if<Series>(&data);
    if (!s) throw InvalidInput(std::string(to_string(cfg.algorithm)) + " expects a single-column series");
    if (s->empty()) throw InvalidInput("series is empty");
    return run_univariate(cfg, *s, seed);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Pointwise means; bound entries average over the seeds where they exist.
inline RunTrace average_traces(const std::vector<RunTrace>& runs) {
    if (runs.empty()) throw InvalidInput("average_traces: no runs");
    RunTrace out;
    const std::size_t n = runs.front().per_step_loss.size();
    const double inv = 1.0 / static_cast<double>(runs.size());
    out.per_step_loss.assign(n, 0.0);
    out.log_avg_loss.assign(n, 0.0);
    out.expert_labels = runs.front().expert_labels;
    out.bound_labels = runs.front().bound_labels;
    if (!runs.front().weight_trace.empty())
        out.weight_trace.assign(n, Vector(runs.front().weight_trace.front().size(), 0.0));
    out.regret_bound_trace.assign(runs.front().regret_bound_trace.size(), Vector(n, 0.0));
    std::vector<std::vector<std::size_t>> counts(out.regret_bound_trace.size(), std::vector<std::size_t>(n, 0));

    for (const auto& r : runs) {
        if (r.per_step_loss.size() != n) throw InvalidInput("average_traces: runs differ in length");
        for (std::size_t t = 0; t < n; ++t) {
            out.per_step_loss[t] += r.per_step_loss[t] * inv;
            out.log_avg_loss[t] += r.log_avg_loss[t] * inv;
            for (std::size_t h = 0; h < out.expert_labels.size() && !out.weight_trace.empty(); ++h)
                out.weight_trace[t][h] += r.weight_trace[t][h] * inv;
        }
        for (std::size_t c = 0; c < out.regret_bound_trace.size(); ++c)
            for (std::size_t t = 0; t < n; ++t)
                if (!std::isnan(r.regret_bound_trace[c][t])) {
                    out.regret_bound_trace[c][t] += r.regret_bound_trace[c][t];
                    ++counts[c][t];
                }
    }
    for (std::size_t c = 0; c < out.regret_bound_trace.size(); ++c)
        for (std::size_t t = 0; t < n; ++t)
            out.regret_bound_trace[c][t] = counts[c][t] == 0
                                               ? std::numeric_limits<double>::quiet_NaN()
                                               : out.regret_bound_trace[c][t] / static_cast<double>(counts[c][t]);
    return out;
}

/// fn(i) for i in [0, n) on up to `workers` threads; results land in index order.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Result = decltype(fn(std::size_t{}));
    std::vector<std::optional<Result>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<Result> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Output CSV
// ---------------------------------------------------------------------------

/// 17 significant digits: parses back to the identical double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> trace_header(const RunTrace& trace) {
    std::vector<std::string> cols{"step", "loss", "log_avg_loss"};
    for (std::size_t h = 0; h < trace.expert_labels.size(); ++h) cols.push_back("w_expert_" + std::to_string(h));
    for (const auto& label : trace.bound_labels) cols.push_back("bound_" + label);
    return cols;
}

inline void write_trace(std::ostream& os, const RunTrace& trace) {
    const auto cols = trace_header(trace);
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << '\n';
    for (std::size_t t = 0; t < trace.per_step_loss.size(); ++t) {
        os << (t + 1) << ',' << format_double(trace.per_step_loss[t]) << ',' << format_double(trace.log_avg_loss[t]);
        for (std::size_t h = 0; h < trace.expert_labels.size(); ++h) os << ',' << format_double(trace.weight_trace[t][h]);
        for (const auto& curve : trace.regret_bound_trace) os << ',' << format_double(curve[t]);
        os << '\n';
    }
}

/// Writes through a sibling temporary so a failed write never leaves a partial file.
inline void save_trace(const std::filesystem::path& path, const RunTrace& trace) {
    std::filesystem::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        write_trace(out, trace);
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write to '" + path.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

/// Reads a trace written by save_trace; expert names are not stored, so the
/// labels come back as "expert_<i>".
inline RunTrace load_trace(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw InvalidInput("'" + path.string() + "' is empty");
    const auto header = detail::split_commas(lines.front());
    if (header.size() < 3 || header[0] != "step" || header[1] != "loss" || header[2] != "log_avg_loss")
        throw ParseError("not a trace header", 1, 1);
    RunTrace out;
    std::vector<std::size_t> weight_cols, bound_cols;
    for (std::size_t c = 3; c < header.size(); ++c) {
        const std::string_view h = header[c];
        if (h.rfind("w_expert_", 0) == 0) {
            weight_cols.push_back(c);
            out.expert_labels.push_back("expert_" + std::string(h.substr(9)));
        } else if (h.rfind("bound_", 0) == 0) {
            bound_cols.push_back(c);
            out.bound_labels.emplace_back(h.substr(6));
        } else {
            throw ParseError("unknown column '" + std::string(h) + "'", 1, c + 1);
        }
    }
    out.regret_bound_trace.resize(bound_cols.size());
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto cells = detail::split_commas(lines[l]);
        if (cells.size() != header.size()) throw ParseError("wrong number of cells", l + 1, 1);
        auto cell = [&](std::size_t c) {
            const auto v = detail::parse_double(detail::trim(cells[c]));
            if (!v) throw ParseError("non-numeric cell", l + 1, c + 1);
            return *v;
        };
        out.per_step_loss.push_back(cell(1));
        out.log_avg_loss.push_back(cell(2));
        if (!weight_cols.empty()) {
            Vector w;
            for (std::size_t c : weight_cols) w.push_back(cell(c));
            out.weight_trace.push_back(std::move(w));
        }
        for (std::size_t b = 0; b < bound_cols.size(); ++b) out.regret_bound_trace[b].push_back(cell(bound_cols[b]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Per-seed traces for a simulator-driven config, in seed order.
inline std::vector<RunTrace> run_seeds(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.dgp) throw InvalidInput("run_seeds needs a dgp");
    return parallel_map(cfg.num_seeds, cfg.workers, [&cfg](std::size_t i) {
        const std::uint64_t seed = cfg.base_seed + i;
        return run_single(cfg, simulate(*cfg.dgp, cfg.T, seed), seed);
    });
}

/// Averages over seeds for simulator-driven configs, runs once on file
/// input, and writes the trace when an output path is set.
inline RunTrace run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    RunTrace trace = cfg.dgp ? average_traces(run_seeds(cfg)) : run_single(cfg, load_csv(*cfg.input_path), cfg.base_seed);
    if (!cfg.output_path.empty()) save_trace(cfg.output_path, trace);
    return trace;
}

}  // namespace nonstop::harness
