// Command-line front end: run single experiments, parameter sweeps, the
// full ring-world suite, and closed-form diagnostics.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "tdlam/exact.hpp"
#include "tdlam/harness.hpp"

namespace {

using namespace tdlam;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CommonOpts {
    std::string config_path;
    std::string out = "results";
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> eta;
    std::optional<long> steps;
    std::optional<int> runs;
};

void apply_overrides(ExperimentConfig& config, const CommonOpts& opts) {
    if (opts.seed) config.base_seed = *opts.seed;
    if (opts.alpha) config.alpha = *opts.alpha;
    if (opts.eta) config.eta = *opts.eta;
    if (opts.steps) config.n_steps = *opts.steps;
    if (opts.runs) config.n_runs = *opts.runs;
    config.validate();
}

// lambda for closed-form diagnostics: the fixed schedule's constant,
// otherwise 1 (the value the adapter's internal estimators use)
double diagnostic_lambda(const ExperimentConfig& config) {
    return config.schedule.kind == ScheduleKind::fixed ? config.schedule.fixed_c : 1.0;
}

int cmd_run(const CommonOpts& opts) {
    ExperimentConfig config = load_config(opts.config_path);
    apply_overrides(config, opts);
    AveragedResult result = run_averaged(config, opts.jobs);
    write_results(config, result, opts.out);
    std::cout << "wrote " << opts.out << " (" << config.n_runs << " runs, "
              << result.n_diverged << " diverged)\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, std::vector<double> alphas,
              std::vector<double> etas) {
    ExperimentConfig config = load_config(opts.config_path);
    apply_overrides(config, opts);
    if (alphas.empty()) alphas = default_alpha_grid();
    if (etas.empty()) etas = default_eta_grid();

    SweepResult result = sweep(config, alphas, etas, opts.jobs);

    namespace fs = std::filesystem;
    fs::create_directories(opts.out);
    std::ofstream out(fs::path(opts.out) / "sweep.csv", std::ios::binary);
    out << "alpha,eta,mean_error,diverged\n";
    for (const auto& cell : result.cells)
        out << fmt(cell.alpha) << ',' << fmt(cell.eta) << ','
            << (cell.diverged ? "inf" : fmt(cell.mean_error)) << ','
            << (cell.diverged ? 1 : 0) << '\n';
    const SweepCell& best = result.best();
    std::ofstream best_out(fs::path(opts.out) / "best.csv", std::ios::binary);
    best_out << "alpha,eta,mean_error\n"
             << fmt(best.alpha) << ',' << fmt(best.eta) << ',' << fmt(best.mean_error)
             << '\n';
    std::cout << "best alpha=" << fmt(best.alpha) << " eta=" << fmt(best.eta)
              << " mean_error=" << fmt(best.mean_error) << '\n';
    return 0;
}

int cmd_suite(const CommonOpts& opts, const std::vector<int>& sizes) {
    ExperimentConfig defaults;
    defaults.alpha = opts.alpha.value_or(0.05);
    defaults.eta = opts.eta.value_or(1.0);
    defaults.n_runs = opts.runs.value_or(100);
    defaults.base_seed = opts.seed.value_or(1234);
    if (opts.steps) defaults.n_steps = *opts.steps;

    std::vector<ExperimentConfig> configs = ringworld_suite(defaults, sizes);
    for (const auto& config : configs) {
        AveragedResult result = run_averaged(config, opts.jobs);
        write_results(config, result,
                      (std::filesystem::path(opts.out) / config.name).string());
    }
    std::cout << "wrote " << configs.size() << " result sets under " << opts.out
              << '\n';
    return 0;
}

int cmd_oracle(const CommonOpts& opts) {
    ExperimentConfig config = load_config(opts.config_path);
    apply_overrides(config, opts);
    ExperimentContext ctx = make_context(config);
    ExactMoments exact = exact_moments(ctx.model, ctx.target, ctx.behavior, ctx.gamma,
                                       VarianceGate::spectral_radius);
    std::cout << "state,v,m2,variance,d\n";
    for (int s = 0; s < ctx.model.n_states; ++s)
        std::cout << s << ',' << fmt(exact.v[s]) << ',' << fmt(exact.m2[s]) << ','
                  << fmt(exact.clamped_variance(s)) << ',' << fmt(ctx.d[s]) << '\n';
    return 0;
}

int cmd_check_variance(const CommonOpts& opts) {
    ExperimentConfig config = load_config(opts.config_path);
    apply_overrides(config, opts);
    ExperimentContext ctx = make_context(config);

    StateFn lambda = constant_fn(ctx.model.n_states, diagnostic_lambda(config));
    StateFn lambda_bar = constant_fn(ctx.model.n_states, 1.0);
    Vec v_first = lambda_return_values(ctx.model, ctx.target, ctx.gamma, lambda,
                                       Vec::Zero(ctx.features.n_features), ctx.features);
    SquaredReturnModel sq =
        squared_return_model(ctx.model, ctx.target, ctx.behavior, ctx.gamma, lambda,
                             Vec::Zero(ctx.model.n_states), v_first, lambda_bar);
    auto [passes, sigma_max] = finite_variance_check(sq);
    std::cout << "sigma_max=" << fmt(sigma_max) << ' ' << (passes ? "PASS" : "FAIL")
              << '\n';
    std::cout << "spectral_radius=" << fmt(squared_return_spectral_radius(sq)) << '\n';
    return passes ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Policy evaluation with adaptive trace parameters on ring-worlds"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::vector<double> alphas, etas;
    std::vector<int> sizes{10, 25, 50};

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", opts.config_path, "JSON config file")
                ->required();
        cmd->add_option("--out", opts.out, "output directory");
        cmd->add_option("--jobs", opts.jobs, "worker threads");
        cmd->add_option("--seed", opts.seed, "override base_seed");
        cmd->add_option("--alpha", opts.alpha, "override step-size");
        cmd->add_option("--eta", opts.eta, "override eta (alpha_h = alpha*eta)");
        cmd->add_option("--steps", opts.steps, "override n_steps");
        cmd->add_option("--runs", opts.runs, "override n_runs");
    };

    CLI::App* run = app.add_subcommand("run", "run one config, write CSV results");
    add_common(run, true);
    CLI::App* sweep = app.add_subcommand("sweep", "grid-sweep alpha and eta");
    add_common(sweep, true);
    sweep->add_option("--alphas", alphas, "alpha grid (default 0.1*2^j, j=-6..6)");
    sweep->add_option("--etas", etas, "eta grid (default 2^j, 11 values)");
    CLI::App* suite = app.add_subcommand("suite", "full ring-world experiment matrix");
    add_common(suite, false);
    suite->add_option("--sizes", sizes, "on-policy chain sizes");
    CLI::App* oracle =
        app.add_subcommand("oracle", "print exact v, m2, variance and d");
    add_common(oracle, true);
    CLI::App* check =
        app.add_subcommand("check-variance", "finite-variance condition report");
    add_common(check, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts);
        if (sweep->parsed()) return cmd_sweep(opts, alphas, etas);
        if (suite->parsed()) return cmd_suite(opts, sizes);
        if (oracle->parsed()) return cmd_oracle(opts);
        if (check->parsed()) return cmd_check_variance(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
