#include "viablearn/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "viablearn/log.hpp"

namespace viablearn::cli {

namespace {

void check_greedy_sufficiency(const Metrics& m) {
    if (m.admissible.value_or(false) && m.deviation_max.value_or(0.0) != 0.0) {
        throw GreedySufficiencyViolation("K-hat is admissible but the learned policy deviates by " +
                                         io::format_double(*m.deviation_max) + "% of the action range");
    }
}

const NominalPolicy& policy_of(const io::Config& c) { return c.experiment.policy; }

}  // namespace

void apply(io::Config& config, const Overrides& o) {
    if (o.seed) {
        config.experiment.seed = *o.seed;
        config.normalized["experiment"]["seed"] = *o.seed;
    }
    if (o.out) {
        config.output_dir = o.out->string();
        config.normalized["output_dir"] = config.output_dir;
    }
    if (o.conservative_membership) {
        config.experiment.membership = Membership::Conservative;
        config.normalized["experiment"]["membership"] = "conservative";
    }
}

CommandResult cmd_viability(const io::Config& config) {
    const auto result = compute_viability(config.experiment.model, config.experiment.grid);
    const fs::path out = config.output_dir;
    io::save_oracle(out, result, config.model_name);
    return {out,
            {{"kernel_count", result.kernel.count()},
             {"viable_count", result.viable.count()},
             {"iterations", result.iterations}}};
}

CommandResult cmd_critical(const io::Config& config) {
    const auto result = compute_viability(config.experiment.model, config.experiment.grid);
    const fs::path out = config.output_dir;
    io::save_oracle(out, result, config.model_name);
    io::save_critical(out, result, policy_of(config), config.model_name);
    const QSet crit =
        policy_of(config).deterministic() ? critical_set(result, policy_of(config)) : critical_set_stochastic(result);
    return {out,
            {{"kernel_count", result.kernel.count()},
             {"viable_count", result.viable.count()},
             {"critical_count", crit.count()}}};
}

CommandResult cmd_learn(const io::Config& config) {
    const RunRecord record = run_experiment(config.experiment);
    const auto oracle = compute_viability(config.experiment.model, config.experiment.grid);
    const Metrics m = compute_metrics(record, oracle, policy_of(config));
    const fs::path out = config.output_dir;
    io::save_run(out, record, config.normalized, m);
    check_greedy_sufficiency(m);
    return {out, io::metrics_to_json(m)};
}

CommandResult cmd_evaluate(const fs::path& run_dir, const std::optional<io::Config>& config,
                           const std::optional<fs::path>& oracle_dir) {
    const RunRecord record = io::load_run(run_dir);
    const io::Config cfg = config ? *config : io::parse_config(io::read_json(run_dir / "run.json").at("config"));
    const ViabilityResult oracle = oracle_dir ? io::load_oracle(*oracle_dir)
                                              : compute_viability(cfg.experiment.model, cfg.experiment.grid);
    if (!(oracle.viable.grid() == record.khat_final.grid())) {
        throw GridMismatch("run K-hat and oracle use different grids");
    }
    const Metrics m = compute_metrics(record, oracle, policy_of(cfg));
    io::json report = io::metrics_to_json(m);
    if (policy_of(cfg).deterministic()) {
        const auto verdict = is_admissible(record.khat_final, oracle, policy_of(cfg));
        report["missing_optimum_count"] = verdict.missing_optimum.size();
        report["critical_hit_count"] = verdict.critical_hits.size();
    }
    report["verdict"] = m.admissible ? (*m.admissible ? "admissible" : "not-admissible") : "n/a";
    io::write_atomic(run_dir / "evaluation.json", report.dump(2) + "\n");
    check_greedy_sufficiency(m);
    return {run_dir, report};
}

int exit_code(const std::exception& e) {
    if (const auto* ce = dynamic_cast<const io::ConfigError*>(&e)) {
        switch (ce->config_kind()) {
            case io::ConfigErrorKind::Parse: return 3;
            case io::ConfigErrorKind::Schema: return 4;
            case io::ConfigErrorKind::Range: return 5;
        }
    }
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        const auto& k = err->kind();
        if (k == "missing-artifact" || k == "artifact-format" || k == "set-format") return 6;
        if (k == "grid-mismatch") return 7;
        if (k == "greedy-sufficiency") return 8;
        if (k == "unrecoverable-constraint") return 9;
        if (k == "precondition") return 10;
        if (k == "integration-divergence") return 11;
        if (k == "ill-conditioned") return 12;
    }
    return 1;
}

namespace {

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    return s;
}

std::string kind_of(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        return err->kind();
    }
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Viability kernels, critical sets and greedy constraint learning on grids"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::string run_dir;
    std::string oracle_dir;
    std::uint64_t seed = 0;
    bool conservative = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "JSON configuration file");
        if (config_required) {
            opt->required();
        }
        sub->add_option("--seed", seed, "experiment seed (overrides the config)");
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_flag("--conservative-membership", conservative,
                      "use conservative (all enclosing grid points) state membership");
    };
    auto* viability = app.add_subcommand("viability", "compute the viability kernel and viable set");
    auto* critical = app.add_subcommand("critical", "compute the critical set and OPT(Q_V) for the nominal policy");
    auto* learn = app.add_subcommand("learn", "run greedy on-policy constraint learning");
    auto* evaluate = app.add_subcommand("evaluate", "recompute metrics and admissibility for a stored run");
    add_common(viability, true);
    add_common(critical, true);
    add_common(learn, true);
    add_common(evaluate, false);
    evaluate->add_option("--run", run_dir, "run directory written by 'learn'")->required();
    evaluate->add_option("--oracle", oracle_dir, "directory written by 'viability' (default: recompute)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "viablearn: error kind=usage msg=" << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        Overrides o;
        if (app.got_subcommand(viability) || app.got_subcommand(critical) || app.got_subcommand(learn) ||
            app.got_subcommand(evaluate)) {
            auto* sub = app.get_subcommands().front();
            if (sub->count("--seed")) {
                o.seed = seed;
            }
            if (!out_dir.empty()) {
                o.out = out_dir;
            }
            o.conservative_membership = conservative;
        }
        std::optional<io::Config> config;
        if (!config_path.empty()) {
            config = io::load_config(config_path);
            apply(*config, o);
        }
        CommandResult r;
        if (app.got_subcommand(viability)) {
            r = cmd_viability(*config);
        } else if (app.got_subcommand(critical)) {
            r = cmd_critical(*config);
        } else if (app.got_subcommand(learn)) {
            r = cmd_learn(*config);
        } else {
            if (!config && (o.seed || o.conservative_membership)) {
                config = io::parse_config(io::read_json(fs::path(run_dir) / "run.json").at("config"));
                apply(*config, o);
            }
            r = cmd_evaluate(run_dir, config, oracle_dir.empty() ? std::nullopt : std::optional<fs::path>(oracle_dir));
        }
        std::cout << r.report.dump() << '\n';
        log::info("wrote " + r.out_dir.string());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "viablearn: error kind=" << kind_of(e) << " msg=" << one_line(e.what()) << '\n';
        return exit_code(e);
    }
}

}  // namespace viablearn::cli
