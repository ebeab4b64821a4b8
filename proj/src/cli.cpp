#include "edgeslice/cli.hpp"

#include "edgeslice/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>

namespace edgeslice {

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config, bool needs_out) {
    auto* cfg = cmd->add_option("--config", c.config, "experiment configuration (JSON)");
    if (needs_config) cfg->required();
    cmd->add_option("--seed", c.seed, "override the configuration seed");
    auto* out = cmd->add_option("--out", c.out_dir, "output directory");
    if (needs_out) out->required();
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig config = load_config(c.config);
    if (c.seed) config.seed = *c.seed;
    return config;
}

std::ofstream open_file(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Decentralized network-slicing orchestration lab"};
    app.name("edgeslice");
    app.require_subcommand(1);

    Common train_opts, run_opts, sweep_opts, grid_opts;
    std::string train_policy, run_policy, checkpoints, report_run, report_out;
    std::optional<long> train_steps;
    bool full_scale = false;
    std::vector<int> sweep_ras, sweep_slices;
    std::vector<double> sweep_alphas;
    std::vector<std::string> sweep_policies;
    std::optional<double> granularity;

    auto* train = app.add_subcommand("train", "train one orchestration agent per RA profile offline");
    add_common(train, train_opts, true, true);
    train->add_option("--policy", train_policy, "edgeslice or edgeslice-nt (default: config policy)");
    train->add_option("--steps", train_steps, "training steps per agent");
    train->add_flag("--full-scale", full_scale, "train for the full 1e6 steps");

    auto* run = app.add_subcommand("run", "run the coordinated orchestration loop with one policy");
    add_common(run, run_opts, true, true);
    run->add_option("--policy", run_policy, "edgeslice, edgeslice-nt, taro or oracle (default: config policy)");
    run->add_option("--checkpoints", checkpoints, "directory with ra_<id>.agent files from `train`");

    auto* sweep = app.add_subcommand("sweep", "scalability / alpha sweeps");
    add_common(sweep, sweep_opts, true, true);
    sweep->add_option("--ras", sweep_ras, "RA counts")->delimiter(',');
    sweep->add_option("--slices", sweep_slices, "slice counts")->delimiter(',');
    sweep->add_option("--alphas", sweep_alphas, "performance exponents")->delimiter(',');
    sweep->add_option("--policies", sweep_policies, "policies to compare")->delimiter(',');

    auto* grid = app.add_subcommand("grid", "build the grid-search regression dataset per slice");
    add_common(grid, grid_opts, true, true);
    grid->add_option("--granularity", granularity, "grid step (default: config, 0.1)");

    auto* report = app.add_subcommand("report", "plot-ready CSV from a finished run");
    report->add_option("--run", report_run, "run directory written by `run`")->required();
    report->add_option("--out", report_out, "output directory (default: the run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    auto progress = [&err](const std::string& msg) { err << msg << '\n'; };

    try {
        if (*train) {
            ExperimentConfig config = load(train_opts);
            const PolicyKind kind = train_policy.empty() ? config.policy : policy_from_string(train_policy);
            if (!is_learned(kind)) throw ConfigError("train: policy " + to_string(kind) + " has nothing to train");
            if (full_scale) config.agent.train_steps = full_scale_train_steps;
            if (train_steps) config.agent.train_steps = *train_steps;
            config.policy = kind;
            validate(config);
            const std::filesystem::path dir = train_opts.out_dir;
            const TrainedAgents agents = train_agents(config, layout_for(kind), progress);
            save_agents(agents, config, dir / "checkpoints");
            auto curve = open_file(dir / "learning_curve.csv");
            write_learning_curve(agents, config, curve);
            auto snap = open_file(dir / "config.json");
            snap << config_to_json(config);
            out << "trained " << to_string(kind) << " agents for " << config.num_ras() << " RAs into " << dir.string()
                << '\n';
        } else if (*run) {
            ExperimentConfig config = load(run_opts);
            const PolicyKind kind = run_policy.empty() ? config.policy : policy_from_string(run_policy);
            config.policy = kind;
            const std::filesystem::path dir = run_opts.out_dir;
            TrainedAgents agents;
            if (is_learned(kind)) {
                if (!checkpoints.empty()) {
                    agents = load_agents(config, layout_for(kind), checkpoints);
                } else {
                    agents = train_agents(config, layout_for(kind), progress);
                }
                save_agents(agents, config, dir / "checkpoints");
            }
            auto policies = make_policies(config, kind, is_learned(kind) ? &agents : nullptr);
            const RunResult result = run_orchestration(config, policies);
            write_run(result, config, dir);
            out << to_string(kind) << ": " << result.periods.size() << " periods, "
                << (result.converged ? "converged at " + std::to_string(result.convergence_iteration)
                                     : std::string("not converged"))
                << ", final system performance " << result.final_performance << " (" << result.wall_clock_seconds
                << " s)\n";
        } else if (*sweep) {
            const ExperimentConfig config = load(sweep_opts);
            SweepRequest req;
            for (const auto& p : sweep_policies) req.policies.push_back(policy_from_string(p));
            req.ra_counts = sweep_ras;
            req.slice_counts = sweep_slices;
            req.alphas = sweep_alphas;
            const auto rows = scalability_sweep(config, req, progress);
            auto file = open_file(std::filesystem::path(sweep_opts.out_dir) / "sweep.csv");
            write_sweep(rows, file);
            write_sweep(rows, out);
        } else if (*grid) {
            const ExperimentConfig config = load(grid_opts);
            const double step = granularity.value_or(config.service.granularity);
            for (const auto& s : config.slices) {
                const Vector w = s.demand_weights;
                const auto data = build_grid_dataset([w](const Vector& f) { return bottleneck_service(f, w, 1.0); },
                                                     config.num_resources, step);
                const auto path = std::filesystem::path(grid_opts.out_dir) / ("grid_slice_" + std::to_string(s.id) + ".csv");
                auto file = open_file(path);
                data.write_csv(file);
                out << path.string() << ": " << data.size() << " points\n";
            }
        } else if (*report) {
            const std::filesystem::path dir = report_out.empty() ? report_run : report_out;
            auto file = open_file(dir / "report.csv");
            write_report(report_run, file);
            out << (dir / "report.csv").string() << '\n';
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace edgeslice
