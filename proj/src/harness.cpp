#include "tdlam/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <thread>

#include "tdlam/errors.hpp"

namespace tdlam {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void parallel_for(int n_tasks, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int n_threads = std::min(jobs, n_tasks);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (chain_length < 4) throw ContractError("config: chain_length must be >= 4");
    if (n_runs < 1) throw ContractError("config: n_runs must be >= 1");
    if (alpha < 0.0) throw ContractError("config: alpha must be >= 0");
    if (eta <= 0.0) throw ContractError("config: eta must be > 0");
    if (gamma <= 0.0 || gamma > 1.0) throw ContractError("config: gamma must be in (0,1]");
    if (mu_right <= 0.0 || mu_right >= 1.0)
        throw ContractError("config: mu_right must be in (0,1)");
    if (initial_lambda && (*initial_lambda < 0.0 || *initial_lambda > 1.0))
        throw ContractError("config: initial_lambda outside [0,1]");
    schedule.validate();
    if (feature_mode == FeatureMode::aliased && alias_pairs.empty())
        throw ContractError("config: aliased features need alias pairs");
}

ExperimentContext make_context(const ExperimentConfig& config) {
    config.validate();
    ExperimentContext ctx;
    RingWorld rw = build_ringworld(config.chain_length);
    ctx.model = std::move(rw.model);
    ctx.target = std::move(rw.target);
    ctx.behavior = config.regime == Regime::on_policy
                       ? ctx.target
                       : make_ring_policy(config.chain_length, config.mu_right);
    ctx.gamma = terminal_cut_fn(ctx.model, config.gamma);

    ctx.features = config.feature_mode == FeatureMode::tabular
                       ? tabular_features(config.chain_length)
                       : aliased_features(config.chain_length, config.alias_pairs);
    zero_terminal_rows(ctx.features, ctx.model);
    ctx.x.reserve(config.chain_length);
    for (int s = 0; s < config.chain_length; ++s) ctx.x.push_back(ctx.features.row(s));

    ctx.true_v = true_values(ctx.model, ctx.target, ctx.gamma);
    ctx.d = stationary_distribution(ctx.model, ctx.behavior);
    if (config.schedule.kind == ScheduleKind::oracle)
        // the sigma_max gate is sufficient-only; the oracle path accepts any
        // config whose Neumann series actually converges
        ctx.oracle_moments = exact_moments(ctx.model, ctx.target, ctx.behavior,
                                           ctx.gamma, VarianceGate::spectral_radius);
    for (int s = 0; s < config.chain_length; ++s)
        if (!ctx.model.is_terminal(s)) ctx.nonterminal.push_back(s);
    return ctx;
}

namespace {

double run_error(const ExperimentConfig& config, const ExperimentContext& ctx,
                 const Vec& w) {
    if (config.error_metric == ErrorMetric::mean_abs) {
        double sum = 0.0;
        for (int s : ctx.nonterminal) sum += std::abs(ctx.x[s].dot(w) - ctx.true_v[s]);
        return sum / static_cast<double>(ctx.nonterminal.size());
    }
    double sum = 0.0;
    for (int s = 0; s < ctx.model.n_states; ++s) {
        double diff = ctx.x[s].dot(w) - ctx.true_v[s];
        sum += ctx.d[s] * diff * diff;
    }
    return sum;
}

double initial_lambda_for(const ExperimentConfig& config, const ExperimentContext& ctx,
                          const LambdaGreedyState* greedy, const Vec& w0) {
    if (config.initial_lambda) return *config.initial_lambda;
    if (config.schedule.kind == ScheduleKind::greedy) return greedy->initial_lambda;
    OracleContext oracle_ctx;
    if (config.schedule.kind == ScheduleKind::oracle) {
        oracle_ctx.exact = &*ctx.oracle_moments;
        oracle_ctx.features = &ctx.features;
        oracle_ctx.w_main = &w0;
    }
    return schedule_lambda(config.schedule, 0, ctx.model.restart_state, nullptr,
                           config.schedule.kind == ScheduleKind::oracle ? &oracle_ctx
                                                                        : nullptr);
}

Vec final_lambda_per_state(const ExperimentConfig& config, const ExperimentContext& ctx,
                           const GtdState& main, const LambdaGreedyState* greedy,
                           long n_steps) {
    int n = ctx.model.n_states;
    Vec out = Vec::Zero(n);
    switch (config.schedule.kind) {
        case ScheduleKind::fixed:
            out.setConstant(config.schedule.fixed_c);
            break;
        case ScheduleKind::decay:
            out.setConstant(config.schedule.decay_k /
                            (config.schedule.decay_k + static_cast<double>(n_steps)));
            break;
        case ScheduleKind::oracle:
            for (int s = 0; s < n; ++s)
                out[s] = oracle_lambda(s, main.w, *ctx.oracle_moments, ctx.features);
            break;
        case ScheduleKind::greedy:
            for (int s = 0; s < n; ++s) {
                double g = ctx.x[s].dot(greedy->w_err());
                double err = g - ctx.x[s].dot(main.w);
                double var_g = var_estimate(greedy->w_sq(), greedy->w_err(), ctx.x[s]);
                out[s] = lambda_from_bias_variance(err * err, var_g);
            }
            break;
    }
    return out;
}

}  // namespace

RunResult run_one(const ExperimentConfig& config, int run_index) {
    ExperimentContext ctx = make_context(config);
    return run_one(config, ctx, run_index);
}

RunResult run_one(const ExperimentConfig& config, const ExperimentContext& ctx,
                  int run_index) {
    const long n_steps = config.resolved_steps();
    RandomStream rng(config.base_seed + static_cast<std::uint64_t>(run_index));

    GtdState main = GtdState::zeros(ctx.features.n_features, config.alpha,
                                    config.alpha * config.eta);
    std::optional<LambdaGreedyState> greedy;
    if (config.schedule.kind == ScheduleKind::greedy)
        greedy = init_lambda_greedy(ctx.features.n_features, config.regime,
                                    config.gamma, config.r_max, config.alpha,
                                    config.off_policy_squared_init);

    RunResult result;
    result.error_series.reserve(n_steps);
    result.lambda_series.reserve(n_steps);

    double lambda_t =
        initial_lambda_for(config, ctx, greedy ? &*greedy : nullptr, main.w);
    int s = ctx.model.restart_state;

    for (long t = 0; t < n_steps; ++t) {
        Transition tr;
        double rho;
        if (ctx.model.is_terminal(s)) {
            tr = Transition{s, 0, ctx.model.restart_state, 0.0, false};  // teleport
            rho = 1.0;
        } else {
            tr = sample_step(ctx.model, ctx.behavior, s, rng);
            rho = importance_ratio(ctx.target, ctx.behavior, s, tr.a);
        }
        const Vec& x_t = ctx.x[s];
        const Vec& x_next = ctx.x[tr.s_next];
        double gamma_t = ctx.gamma(s);
        double gamma_next = ctx.gamma(tr.s_next);

        try {
            double lambda_next;
            switch (config.schedule.kind) {
                case ScheduleKind::greedy: {
                    GreedyStepContext gctx{&*greedy, &main.w,    &x_t,    &x_next,
                                           tr.reward, rho,       gamma_t, gamma_next};
                    lambda_next =
                        schedule_lambda(config.schedule, t + 1, tr.s_next, &gctx, nullptr);
                    break;
                }
                case ScheduleKind::oracle: {
                    OracleContext octx{&*ctx.oracle_moments, &ctx.features, &main.w};
                    lambda_next =
                        schedule_lambda(config.schedule, t + 1, tr.s_next, nullptr, &octx);
                    break;
                }
                default:
                    lambda_next =
                        schedule_lambda(config.schedule, t + 1, tr.s_next, nullptr, nullptr);
            }
            gtd_step(main, x_t, x_next, tr.reward, rho, gamma_t, gamma_next, lambda_t,
                     lambda_next);
            lambda_t = lambda_next;
        } catch (const DivergenceError&) {
            result.diverged = true;
            result.diverged_step = t;
            break;
        }

        result.error_series.push_back(run_error(config, ctx, main.w));
        result.lambda_series.push_back(lambda_t);
        s = tr.s_next;
    }

    if (!result.diverged)
        result.final_lambda_per_state = final_lambda_per_state(
            config, ctx, main, greedy ? &*greedy : nullptr, n_steps);
    else
        result.final_lambda_per_state = Vec::Zero(ctx.model.n_states);
    return result;
}

AveragedResult aggregate_runs(const std::vector<RunResult>& runs, long n_steps,
                              int n_states) {
    AveragedResult out;
    out.n_runs = static_cast<int>(runs.size());
    std::vector<const RunResult*> completed;
    for (const auto& r : runs) {
        if (r.diverged)
            ++out.n_diverged;
        else
            completed.push_back(&r);
    }
    if (completed.empty()) {
        out.final_lambda_per_state = Vec::Zero(n_states);
        return out;
    }

    const double n = static_cast<double>(completed.size());
    out.mean_error.assign(n_steps, 0.0);
    out.stderr_error.assign(n_steps, 0.0);
    out.mean_lambda.assign(n_steps, 0.0);
    out.final_lambda_per_state = Vec::Zero(n_states);

    for (const RunResult* r : completed) {
        for (long t = 0; t < n_steps; ++t) {
            out.mean_error[t] += r->error_series[t];
            out.mean_lambda[t] += r->lambda_series[t];
        }
        out.final_lambda_per_state += r->final_lambda_per_state;
    }
    for (long t = 0; t < n_steps; ++t) {
        out.mean_error[t] /= n;
        out.mean_lambda[t] /= n;
    }
    out.final_lambda_per_state /= n;

    if (completed.size() > 1) {
        for (const RunResult* r : completed)
            for (long t = 0; t < n_steps; ++t) {
                double diff = r->error_series[t] - out.mean_error[t];
                out.stderr_error[t] += diff * diff;
            }
        for (long t = 0; t < n_steps; ++t)
            out.stderr_error[t] = std::sqrt(out.stderr_error[t] / (n - 1.0) / n);
    }
    return out;
}

AveragedResult run_averaged(const ExperimentConfig& config, int jobs) {
    ExperimentContext ctx = make_context(config);
    std::vector<RunResult> runs(config.n_runs);
    parallel_for(config.n_runs, jobs,
                 [&](int i) { runs[i] = run_one(config, ctx, i); });
    return aggregate_runs(runs, config.resolved_steps(), ctx.model.n_states);
}

SweepResult sweep(const ExperimentConfig& config_template,
                  const std::vector<double>& alpha_grid,
                  const std::vector<double>& eta_grid, int jobs) {
    if (alpha_grid.empty() || eta_grid.empty())
        throw ContractError("sweep: empty grid");
    SweepResult result;
    for (double alpha : alpha_grid)
        for (double eta : eta_grid) {
            ExperimentConfig config = config_template;
            config.alpha = alpha;
            config.eta = eta;
            AveragedResult avg = run_averaged(config, jobs);

            SweepCell cell{alpha, eta, std::numeric_limits<double>::infinity(), false};
            if (avg.n_diverged > 0 || avg.mean_error.empty()) {
                cell.diverged = true;
            } else {
                double auc = 0.0;
                for (double e : avg.mean_error) auc += e;
                cell.mean_error = auc / static_cast<double>(avg.mean_error.size());
            }
            result.cells.push_back(cell);
            if (!cell.diverged &&
                (result.best_index < 0 ||
                 cell.mean_error < result.cells[result.best_index].mean_error))
                result.best_index = static_cast<int>(result.cells.size()) - 1;
        }
    if (result.best_index < 0) throw NumericalError("sweep: all cells diverged");
    return result;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int j = -6; j <= 6; ++j) grid.push_back(0.1 * std::pow(2.0, j));
    return grid;
}

std::vector<double> default_eta_grid() {
    std::vector<double> grid;
    for (int j : {-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16})
        grid.push_back(std::pow(2.0, j));
    return grid;
}

namespace {

std::string schedule_tag(const LambdaSchedule& s) {
    char buf[48];
    switch (s.kind) {
        case ScheduleKind::greedy:
            return "greedy";
        case ScheduleKind::oracle:
            return "oracle";
        case ScheduleKind::decay:
            std::snprintf(buf, sizeof(buf), "decay%g", s.decay_k);
            return buf;
        case ScheduleKind::fixed:
            std::snprintf(buf, sizeof(buf), "fixed%g", s.fixed_c);
            return buf;
    }
    return "unknown";
}

}  // namespace

std::vector<ExperimentConfig> ringworld_suite(const ExperimentConfig& defaults,
                                              const std::vector<int>& sizes,
                                              const std::vector<double>& off_policy_mus) {
    std::vector<LambdaSchedule> schedules;
    schedules.push_back(LambdaSchedule::greedy());
    schedules.push_back(LambdaSchedule::oracle());
    for (int i = 0; i <= 10; ++i) schedules.push_back(LambdaSchedule::fixed(0.1 * i));
    schedules.push_back(LambdaSchedule::decay(10.0));
    schedules.push_back(LambdaSchedule::decay(100.0));

    std::vector<ExperimentConfig> configs;
    auto emit = [&](const ExperimentConfig& base) {
        for (const auto& sched : schedules) {
            ExperimentConfig c = base;
            c.schedule = sched;
            c.name = base.name + "_" + schedule_tag(sched);
            c.validate();
            configs.push_back(std::move(c));
        }
    };

    for (int n : sizes) {
        ExperimentConfig base = defaults;
        base.chain_length = n;
        base.regime = Regime::on_policy;
        base.gamma = 0.99;
        base.n_steps = 0;  // N x 100
        base.name = "on" + std::to_string(n);
        emit(base);
    }
    for (double mu : off_policy_mus) {
        ExperimentConfig base = defaults;
        base.chain_length = 10;
        base.regime = Regime::off_policy;
        base.mu_right = mu;
        base.gamma = 0.95;
        base.n_steps = 0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "off10_mu%g", mu);
        base.name = buf;
        emit(base);
    }
    return configs;
}

using nlohmann::json;

namespace {

json schedule_to_json(const LambdaSchedule& s) {
    switch (s.kind) {
        case ScheduleKind::greedy:
            return {{"kind", "greedy"}};
        case ScheduleKind::oracle:
            return {{"kind", "oracle"}};
        case ScheduleKind::fixed:
            return {{"kind", "fixed"}, {"value", s.fixed_c}};
        case ScheduleKind::decay:
            return {{"kind", "decay"}, {"k", s.decay_k}};
    }
    throw ContractError("schedule_to_json: unknown kind");
}

LambdaSchedule schedule_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "greedy") return LambdaSchedule::greedy();
    if (kind == "oracle") return LambdaSchedule::oracle();
    if (kind == "fixed") return LambdaSchedule::fixed(j.at("value").get<double>());
    if (kind == "decay") return LambdaSchedule::decay(j.at("k").get<double>());
    throw ContractError("config: unknown schedule kind '" + kind + "'");
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["chain_length"] = c.chain_length;
    j["regime"] = c.regime == Regime::on_policy ? "on_policy" : "off_policy";
    if (c.regime == Regime::off_policy) j["mu_right"] = c.mu_right;
    j["gamma"] = c.gamma;
    j["schedule"] = schedule_to_json(c.schedule);
    j["alpha"] = c.alpha;
    j["eta"] = c.eta;
    if (c.feature_mode == FeatureMode::tabular) {
        j["features"] = "tabular";
    } else {
        json pairs = json::array();
        for (auto [a, b] : c.alias_pairs) pairs.push_back({a, b});
        j["features"] = {{"aliased", pairs}};
    }
    j["n_steps"] = c.n_steps;
    j["n_runs"] = c.n_runs;
    j["base_seed"] = c.base_seed;
    j["error_metric"] =
        c.error_metric == ErrorMetric::mean_abs ? "mean_abs" : "msve_d_weighted";
    if (c.initial_lambda) j["initial_lambda"] = *c.initial_lambda;
    j["off_policy_squared_init"] = c.off_policy_squared_init;
    j["r_max"] = c.r_max;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
    try {
        ExperimentConfig c;
        c.name = j.value("name", c.name);
        c.chain_length = j.value("chain_length", c.chain_length);
        std::string regime = j.value("regime", "on_policy");
        if (regime == "on_policy")
            c.regime = Regime::on_policy;
        else if (regime == "off_policy")
            c.regime = Regime::off_policy;
        else
            throw ContractError("config: unknown regime '" + regime + "'");
        c.mu_right = j.value("mu_right", c.mu_right);
        c.gamma = j.value("gamma", c.gamma);
        if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
        c.alpha = j.value("alpha", c.alpha);
        c.eta = j.value("eta", c.eta);
        if (j.contains("features")) {
            const json& f = j.at("features");
            if (f.is_string() && f.get<std::string>() == "tabular") {
                c.feature_mode = FeatureMode::tabular;
            } else if (f.is_object() && f.contains("aliased")) {
                c.feature_mode = FeatureMode::aliased;
                for (const auto& p : f.at("aliased"))
                    c.alias_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
            } else {
                throw ContractError("config: bad features spec");
            }
        }
        c.n_steps = j.value("n_steps", c.n_steps);
        c.n_runs = j.value("n_runs", c.n_runs);
        c.base_seed = j.value("base_seed", c.base_seed);
        std::string metric = j.value("error_metric", "mean_abs");
        if (metric == "mean_abs")
            c.error_metric = ErrorMetric::mean_abs;
        else if (metric == "msve_d_weighted")
            c.error_metric = ErrorMetric::msve_d_weighted;
        else
            throw ContractError("config: unknown error_metric '" + metric + "'");
        if (j.contains("initial_lambda"))
            c.initial_lambda = j.at("initial_lambda").get<double>();
        c.off_policy_squared_init =
            j.value("off_policy_squared_init", c.off_policy_squared_init);
        c.r_max = j.value("r_max", c.r_max);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return config_from_json(text);
}

void write_results(const ExperimentConfig& config, const AveragedResult& result,
                   const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        std::ofstream out(fs::path(dir) / "curves.csv", std::ios::binary);
        out << "step,mean_error,stderr_error,mean_lambda\n";
        for (size_t t = 0; t < result.mean_error.size(); ++t)
            out << t << ',' << fmt(result.mean_error[t]) << ','
                << fmt(result.stderr_error[t]) << ',' << fmt(result.mean_lambda[t])
                << '\n';
    }
    {
        std::ofstream out(fs::path(dir) / "final_lambda.csv", std::ios::binary);
        out << "state,final_lambda\n";
        for (int s = 0; s < result.final_lambda_per_state.size(); ++s)
            out << s << ',' << fmt(result.final_lambda_per_state[s]) << '\n';
    }
    {
        json manifest;
        manifest["artifact_version"] = kArtifactVersion;
        manifest["config"] = json::parse(config_to_json(config));
        json seeds = json::array();
        for (int i = 0; i < config.n_runs; ++i)
            seeds.push_back(config.base_seed + static_cast<std::uint64_t>(i));
        manifest["seeds"] = seeds;
        manifest["n_diverged"] = result.n_diverged;
        std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
}

}  // namespace tdlam
