#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "viablearn/dynamics.hpp"
#include "viablearn/lattice.hpp"

namespace viablearn {

/// One labelled transition: 1 = survived, 0 = failed.
struct Sample {
    State state;
    Action action;
    double label = 1.0;

    bool operator==(const Sample& o) const {
        return same(state, o.state) && same(action, o.action) && label == o.label;
    }
};

/// Squared-exponential kernel over the joint (state, action) input.
struct GpHyper {
    Eigen::VectorXd lengthscales;  // state dims then action dims
    double signal_variance = 1.0;
    double noise_variance = 1e-4;
    double prior_mean = 0.0;

    bool operator==(const GpHyper& o) const {
        return same(lengthscales, o.lengthscales) && signal_variance == o.signal_variance &&
               noise_variance == o.noise_variance && prior_mean == o.prior_mean;
    }
};

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact GP regression on the safety labels. Immutable value: `fit`,
/// `observe` and `update_hyperparameters` return new models.
class GpModel {
public:
    /// Jitter ladder tried, in order, when K + noise*I fails to factorize.
    static constexpr double kJitterLadder[] = {1e-8, 1e-7, 1e-6, 1e-5, 1e-4};

    /// Throws IllConditioned when even the largest jitter fails.
    static GpModel fit(std::vector<Sample> samples, GpHyper hyper, std::size_t state_dim);

    Posterior posterior(const State& s, const Action& a) const;

    const std::vector<Sample>& samples() const { return samples_; }
    const GpHyper& hyper() const { return hyper_; }
    std::size_t state_dim() const { return state_dim_; }
    /// Jitter that was added to the diagonal (0 when none was needed).
    double jitter() const { return jitter_; }
    /// Weights (K + noise*I)^-1 (y - prior_mean).
    const Eigen::VectorXd& weights() const { return alpha_; }

    double kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

private:
    std::vector<Sample> samples_;
    GpHyper hyper_;
    std::size_t state_dim_ = 0;
    Eigen::MatrixXd inputs_;  // n x (state_dim + action_dim)
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

Eigen::VectorXd joint_input(const State& s, const Action& a);

/// Exact log marginal likelihood; nullopt when the kernel matrix cannot be factorized.
std::optional<double> log_marginal_likelihood(const std::vector<Sample>& samples, const GpHyper& hyper,
                                              std::size_t state_dim);

/// K-hat = {(i, j) : posterior mean at the grid point >= threshold}.
QSet constraint_estimate(const GpModel& model, const GridSpec& grid, double threshold);

struct HyperUpdate {
    GpModel model;
    std::size_t chosen = 0;  ///< index into the search grid; unchanged model when `warning`
    bool warning = false;    ///< every candidate was ill-conditioned
    double log_likelihood = 0.0;
};

/// Maximises the exact log marginal likelihood over a finite candidate list;
/// ties keep the first-listed candidate. Needs >= 2 samples.
HyperUpdate update_hyperparameters(const GpModel& model, const std::vector<GpHyper>& search_grid);

/// Appends the outcome as a label (0 on failure, 1 otherwise) and refits.
GpModel observe(const GpModel& model, const State& s, const Action& a, const StepOutcome& outcome);

}  // namespace viablearn
