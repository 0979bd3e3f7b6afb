#include "viablearn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "viablearn/errors.hpp"
#include "viablearn/log.hpp"

namespace viablearn {

std::vector<Sample> seeds_on_graph(const NominalPolicy& policy, const State& operating_point, double half_width,
                                   std::size_t count) {
    if (count == 0) {
        throw PreconditionError("seed region needs at least one sample");
    }
    std::vector<Sample> seeds;
    for (std::size_t k = 0; k < count; ++k) {
        State s = operating_point;
        if (count > 1) {
            s[0] += -half_width + 2.0 * half_width * static_cast<double>(k) / static_cast<double>(count - 1);
        }
        seeds.push_back({s, policy.evaluate(s), 1.0});
    }
    return seeds;
}

Learner::Learner(LearnerConfig config, GridSpec grid) : config_(std::move(config)), grid_(std::move(grid)) {
    if (!(config_.threshold > 0.0 && config_.threshold < 1.0)) {
        throw PreconditionError("learner threshold must lie strictly between 0 and 1");
    }
    if (config_.seeds.empty()) {
        throw PreconditionError("learner needs a nonempty seed region");
    }
    gp_ = GpModel::fit(config_.seeds, config_.initial_hyper, grid_.state_dim());
    rebuild();
}

void Learner::observe(const State& s, const Action& a, const StepOutcome& outcome, bool rebuild_now) {
    gp_ = viablearn::observe(gp_, s, a, outcome);
    if (rebuild_now) {
        rebuild();
    }
}

void Learner::rebuild() { khat_ = constraint_estimate(gp_, grid_, config_.threshold); }

HyperUpdate Learner::update_hyperparameters() {
    HyperUpdate u = viablearn::update_hyperparameters(gp_, config_.search_grid);
    gp_ = u.model;
    rebuild();
    return u;
}

std::size_t nominal_cell(const GridSpec& grid, const Action& a_nom) {
    Action clamped = a_nom;
    const auto& axes = grid.action_axes();
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        clamped[i] = std::clamp(clamped[i], axes[d].lower, axes[d].upper);
    }
    return *locate_action(grid, clamped);
}

ExploreChoice explore_action(const QSet& khat, const State& s, const NominalPolicy& pi, Rng& nominal_stream,
                             Rng& fallback_stream, const ExplorationSettings& settings) {
    const auto& g = khat.grid();
    const auto cell = locate(g, s);
    ExploreChoice out;
    out.nominal = pi.draw(s, cell, nominal_stream);
    const auto slice = action_slice_at(khat, s, settings.membership);
    if (slice.empty()) {
        out.feasible = false;
        if (settings.fallback == Fallback::Nominal) {
            out.action = out.nominal;
        } else {
            const Box& box = pi.action_box();
            out.action = Action(box.dim());
            for (Eigen::Index d = 0; d < box.dim(); ++d) {
                out.action[d] = fallback_stream.uniform(box.lower[d], box.upper[d]);
            }
        }
        return out;
    }
    std::size_t best = slice.front();
    double best_cost = squared_distance(g.action_point(best), out.nominal);
    for (auto j : slice) {
        const double c = squared_distance(g.action_point(j), out.nominal);
        if (c < best_cost) {
            best = j;
            best_cost = c;
        }
    }
    out.feasible = true;
    // Inside the nominal action's own cell the nominal itself is executed.
    out.action = (best == nominal_cell(g, out.nominal)) ? out.nominal : g.action_point(best);
    return out;
}

EpisodeResult run_episode(const State& state0, Learner learner, const EpisodeContext& ctx, Rng& nominal_stream,
                          Rng& fallback_stream) {
    EpisodeLog log;
    log.index = ctx.episode_index;
    log.batch = ctx.batch_index;
    log.initial_state = state0;
    State s = state0;
    for (int k = 0; k < ctx.max_steps; ++k) {
        const auto choice = explore_action(learner.khat(), s, ctx.pi, nominal_stream, fallback_stream, ctx.settings);
        const auto outcome = step(ctx.model, s, choice.action);
        learner.observe(s, choice.action, outcome, ctx.refit == Refit::PerSample);

        StepLog entry;
        entry.episode = ctx.episode_index;
        entry.step = k;
        entry.state = s;
        entry.nominal = choice.nominal;
        entry.executed = choice.action;
        entry.feasible = choice.feasible;
        entry.failed = is_failed(outcome);
        entry.next_state =
            entry.failed ? std::get<Failed>(outcome).first_failure_state : std::get<Alive>(outcome).next_state;
        log.steps.push_back(entry);
        if (entry.failed) {
            break;
        }
        s = entry.next_state;
    }
    if (ctx.refit == Refit::PerEpisode) {
        learner.rebuild();
    }
    return {std::move(log), std::move(learner)};
}

void validate(const ExperimentConfig& c) {
    if (c.episodes_per_batch < 1 || c.batch_count < 1 || c.max_steps < 1) {
        throw PreconditionError("episodes_per_batch, batch_count and max_steps must all be >= 1");
    }
    if (!(c.grid.state_dim() == static_cast<std::size_t>(c.model.state_box.dim()) &&
          c.grid.action_dim() == static_cast<std::size_t>(c.model.action_box.dim()))) {
        throw GridMismatch("experiment grid does not match the model dimensions");
    }
}

std::size_t RunRecord::sample_count() const {
    std::size_t n = 0;
    for (const auto& e : episodes) {
        n += e.steps.size();
    }
    return n;
}

std::size_t RunRecord::failure_count() const {
    return static_cast<std::size_t>(
        std::count_if(episodes.begin(), episodes.end(), [](const EpisodeLog& e) { return e.failed(); }));
}

std::vector<Sample> RunRecord::observed_samples() const {
    std::vector<Sample> out;
    for (const auto& e : episodes) {
        for (const auto& st : e.steps) {
            out.push_back({st.state, st.executed, st.failed ? 0.0 : 1.0});
        }
    }
    return out;
}

RunRecord run_experiment(const ExperimentConfig& config) {
    validate(config);
    Rng rng(config.seed);
    Rng fallback_stream(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uint64_t nominal_seed = 0;
    if (const auto* u = std::get_if<UniformRandomPolicy>(&config.policy.kind())) {
        nominal_seed = u->seed;
    }
    Rng nominal_stream(nominal_seed);

    Learner learner(config.learner, config.grid);
    RunRecord record;
    record.khat_initial = learner.khat();
    record.hyper_history.push_back(learner.gp().hyper());

    EpisodeContext ctx{config.model, config.policy, {config.fallback, config.membership}, config.refit,
                       config.max_steps};
    int episode = 0;
    for (int b = 0; b < config.batch_count; ++b) {
        for (int e = 0; e < config.episodes_per_batch; ++e, ++episode) {
            const auto cover = project(learner.khat()).cells();
            if (cover.empty()) {
                throw UnrecoverableConstraint("K-hat has an empty state projection at batch " + std::to_string(b) +
                                              ", episode " + std::to_string(episode));
            }
            const State s0 = config.grid.state_point(cover[rng.index(cover.size())]);
            ctx.episode_index = episode;
            ctx.batch_index = b;
            auto result = run_episode(s0, std::move(learner), ctx, nominal_stream, fallback_stream);
            learner = std::move(result.learner);
            record.episodes.push_back(std::move(result.log));
        }
        const auto update = learner.update_hyperparameters();
        record.hyper_history.push_back(learner.gp().hyper());
        log::info("batch " + std::to_string(b) + ": hyperparameter candidate " + std::to_string(update.chosen) +
                  ", |K-hat| = " + std::to_string(learner.khat().count()));
    }
    record.khat_final = learner.khat();
    return record;
}

Metrics compute_metrics(const RunRecord& record, const ViabilityResult& oracle, const NominalPolicy& pi) {
    const QSet& khat = record.khat_final;
    if (!(khat.grid() == oracle.viable.grid())) {
        throw GridMismatch("compute_metrics: K-hat and oracle grids differ");
    }
    const auto& g = khat.grid();
    Metrics m;
    m.failure_count = record.failure_count();
    m.sample_count = record.sample_count();
    m.khat_count = khat.count();
    m.viable_count = oracle.viable.count();

    const QSet crit = pi.deterministic() ? critical_set(oracle, pi) : critical_set_stochastic(oracle);
    m.critical_count = crit.count();
    m.underestimate = m.viable_count == 0
                          ? 0.0
                          : 100.0 * static_cast<double>(set_difference(oracle.viable, khat).count()) /
                                static_cast<double>(m.viable_count);
    m.overreach = 100.0 * static_cast<double>(set_intersection(khat, crit).count()) /
                  static_cast<double>(std::max<std::size_t>(1, m.critical_count));

    if (!pi.deterministic()) {
        return m;
    }
    const auto& axes = g.action_axes();
    double dev_max = 0.0;
    double dev_sum = 0.0;
    const auto kernel_cells = oracle.kernel.cells();
    for (auto i : kernel_cells) {
        const Action a_nom = pi.at_cell(g, i);
        const auto learned = opt(khat, i, a_nom);
        const std::size_t taken = learned ? *learned : nominal_cell(g, a_nom);
        const Action a_k = g.action_point(taken);
        const Action a_v = g.action_point(*opt(oracle.viable, i, a_nom));
        double dev = 0.0;
        for (std::size_t d = 0; d < axes.size(); ++d) {
            const auto e = static_cast<Eigen::Index>(d);
            dev = std::max(dev, 100.0 * std::abs(a_k[e] - a_v[e]) / (axes[d].upper - axes[d].lower));
        }
        dev_max = std::max(dev_max, dev);
        dev_sum += dev;
    }
    m.deviation_max = dev_max;
    m.deviation_mean = kernel_cells.empty() ? 0.0 : dev_sum / static_cast<double>(kernel_cells.size());
    m.admissible = is_admissible(khat, oracle, pi).admissible;
    return m;
}

}  // namespace viablearn
