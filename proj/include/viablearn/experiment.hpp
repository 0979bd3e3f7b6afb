#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "viablearn/dynamics.hpp"
#include "viablearn/gp.hpp"
#include "viablearn/lattice.hpp"
#include "viablearn/policy.hpp"
#include "viablearn/rng.hpp"
#include "viablearn/viability.hpp"

namespace viablearn {

struct LearnerConfig {
    double threshold = 0.5;
    GpHyper initial_hyper;
    /// Label-1 samples forming the cautious initial estimate.
    std::vector<Sample> seeds;
    std::vector<GpHyper> search_grid;
};

/// Evenly spaced label-1 seeds on the graph of `policy` within
/// `half_width` of `operating_point` along the first state axis.
std::vector<Sample> seeds_on_graph(const NominalPolicy& policy, const State& operating_point, double half_width,
                                   std::size_t count);

/// K-hat estimator: GP on observed transitions plus its superlevel set.
class Learner {
public:
    Learner(LearnerConfig config, GridSpec grid);

    const GpModel& gp() const { return gp_; }
    const QSet& khat() const { return khat_; }
    const LearnerConfig& config() const { return config_; }

    /// Adds the labelled transition. K-hat is rebuilt only when `rebuild`.
    void observe(const State& s, const Action& a, const StepOutcome& outcome, bool rebuild = true);
    void rebuild();
    /// Likelihood search over the configured grid; rebuilds K-hat.
    HyperUpdate update_hyperparameters();

private:
    LearnerConfig config_;
    GridSpec grid_;
    GpModel gp_;
    QSet khat_;
};

enum class Fallback { Nominal, UniformRandom };
enum class Refit { PerSample, PerEpisode };

struct ExplorationSettings {
    Fallback fallback = Fallback::Nominal;
    Membership membership = Membership::Nearest;
};

struct ExploreChoice {
    Action action;
    Action nominal;
    bool feasible = false;
};

/// Greedy on-policy action: OPT(K-hat) at `s` when the slice is nonempty,
/// otherwise the fallback. `nominal_stream` feeds stochastic nominal
/// policies; `fallback_stream` feeds the random fallback.
ExploreChoice explore_action(const QSet& khat, const State& s, const NominalPolicy& pi, Rng& nominal_stream,
                             Rng& fallback_stream, const ExplorationSettings& settings = {});

struct StepLog {
    int episode = 0;
    int step = 0;
    State state;
    Action nominal;
    Action executed;
    bool feasible = false;
    bool failed = false;
    State next_state;  ///< first failing substep state when `failed`

    bool operator==(const StepLog& o) const {
        return episode == o.episode && step == o.step && same(state, o.state) && same(nominal, o.nominal) &&
               same(executed, o.executed) && feasible == o.feasible && failed == o.failed &&
               same(next_state, o.next_state);
    }
};

struct EpisodeLog {
    int index = 0;
    int batch = 0;
    State initial_state;
    std::vector<StepLog> steps;

    bool failed() const { return !steps.empty() && steps.back().failed; }
    bool operator==(const EpisodeLog& o) const {
        return index == o.index && batch == o.batch && same(initial_state, o.initial_state) && steps == o.steps;
    }
};

struct EpisodeContext {
    const SystemModel& model;
    const NominalPolicy& pi;
    ExplorationSettings settings;
    Refit refit = Refit::PerSample;
    int max_steps = 10;
    int episode_index = 0;
    int batch_index = 0;
};

struct EpisodeResult {
    EpisodeLog log;
    Learner learner;
};

/// One episode of explore -> step -> observe, terminating on failure or
/// after `max_steps`. K-hat is read from the learner as it evolves.
EpisodeResult run_episode(const State& state0, Learner learner, const EpisodeContext& ctx, Rng& nominal_stream,
                          Rng& fallback_stream);

struct ExperimentConfig {
    SystemModel model;
    GridSpec grid;
    NominalPolicy policy;
    LearnerConfig learner;
    int episodes_per_batch = 10;
    int batch_count = 2;
    int max_steps = 10;
    std::uint64_t seed = 0;
    Fallback fallback = Fallback::Nominal;
    Refit refit = Refit::PerSample;
    Membership membership = Membership::Nearest;
};

/// Throws PreconditionError unless every count is >= 1.
void validate(const ExperimentConfig& config);

struct RunRecord {
    std::vector<EpisodeLog> episodes;
    /// Hyperparameters in force at the start, then after each batch.
    std::vector<GpHyper> hyper_history;
    QSet khat_initial;
    QSet khat_final;

    std::size_t sample_count() const;
    std::size_t failure_count() const;
    std::vector<Sample> observed_samples() const;

    bool operator==(const RunRecord&) const = default;
};

RunRecord run_experiment(const ExperimentConfig& config);

struct Metrics {
    std::size_t failure_count = 0;
    std::size_t sample_count = 0;
    /// Percent of the action range; absent for stochastic nominal policies.
    std::optional<double> deviation_max;
    std::optional<double> deviation_mean;
    double underestimate = 0.0;  ///< |Q_V \ K-hat| / |Q_V| in percent
    double overreach = 0.0;      ///< |K-hat n Q_crit| / max(1, |Q_crit|) in percent
    std::size_t khat_count = 0;
    std::size_t viable_count = 0;
    std::size_t critical_count = 0;
    std::optional<bool> admissible;  ///< deterministic nominal policies only
};

Metrics compute_metrics(const RunRecord& record, const ViabilityResult& oracle, const NominalPolicy& pi);

/// Action the constrained policy takes at a grid cell when K-hat is infeasible
/// there: the grid cell nearest the nominal action.
std::size_t nominal_cell(const GridSpec& grid, const Action& a_nom);

}  // namespace viablearn
