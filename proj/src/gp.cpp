#include "viablearn/gp.hpp"

#include <cmath>
#include <numbers>

#include "viablearn/errors.hpp"
#include "viablearn/log.hpp"

namespace viablearn {

namespace {

struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

Eigen::MatrixXd stack_inputs(const std::vector<Sample>& samples, Eigen::Index dim) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), dim);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        x.row(static_cast<Eigen::Index>(n)) = joint_input(samples[n].state, samples[n].action).transpose();
    }
    return x;
}

double se_kernel(const GpHyper& h, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double r2 = ((x - y).array() / h.lengthscales.array()).square().sum();
    return h.signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd gram(const GpHyper& h, const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = h.signal_variance + h.noise_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = k(j, i) = se_kernel(h, x.row(i).transpose(), x.row(j).transpose());
        }
    }
    return k;
}

std::optional<Factorization> factorize(const Eigen::MatrixXd& k) {
    Factorization f;
    f.llt.compute(k);
    if (f.llt.info() == Eigen::Success) {
        return f;
    }
    const Eigen::Index n = k.rows();
    for (double jitter : GpModel::kJitterLadder) {
        f.llt.compute(k + jitter * Eigen::MatrixXd::Identity(n, n));
        if (f.llt.info() == Eigen::Success) {
            f.jitter = jitter;
            return f;
        }
    }
    return std::nullopt;
}

Eigen::VectorXd centred_labels(const std::vector<Sample>& samples, double prior_mean) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t n = 0; n < samples.size(); ++n) {
        y[static_cast<Eigen::Index>(n)] = samples[n].label - prior_mean;
    }
    return y;
}

void check_hyper(const GpHyper& h) {
    if (h.lengthscales.size() == 0 || (h.lengthscales.array() <= 0.0).any() || !(h.signal_variance > 0.0) ||
        !(h.noise_variance > 0.0)) {
        throw PreconditionError("GP hyperparameters must be positive");
    }
}

}  // namespace

Eigen::VectorXd joint_input(const State& s, const Action& a) {
    Eigen::VectorXd x(s.size() + a.size());
    x << s, a;
    return x;
}

GpModel GpModel::fit(std::vector<Sample> samples, GpHyper hyper, std::size_t state_dim) {
    check_hyper(hyper);
    GpModel m;
    m.samples_ = std::move(samples);
    m.hyper_ = std::move(hyper);
    m.state_dim_ = state_dim;
    const Eigen::Index dim = m.hyper_.lengthscales.size();
    for (const auto& s : m.samples_) {
        if (s.state.size() + s.action.size() != dim || static_cast<std::size_t>(s.state.size()) != state_dim) {
            throw PreconditionError("GP sample dimension does not match the lengthscales");
        }
    }
    m.inputs_ = stack_inputs(m.samples_, dim);
    if (m.samples_.empty()) {
        m.alpha_ = Eigen::VectorXd(0);
        return m;
    }
    auto f = factorize(gram(m.hyper_, m.inputs_));
    if (!f) {
        throw IllConditioned("GP kernel matrix not positive definite even with maximal jitter");
    }
    m.llt_ = std::move(f->llt);
    m.jitter_ = f->jitter;
    m.alpha_ = m.llt_.solve(centred_labels(m.samples_, m.hyper_.prior_mean));
    return m;
}

double GpModel::kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return se_kernel(hyper_, x, y); }

Posterior GpModel::posterior(const State& s, const Action& a) const {
    const Eigen::VectorXd x = joint_input(s, a);
    if (samples_.empty()) {
        return {hyper_.prior_mean, hyper_.signal_variance};
    }
    const Eigen::Index n = inputs_.rows();
    Eigen::VectorXd kx(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kx[i] = se_kernel(hyper_, inputs_.row(i).transpose(), x);
    }
    const double mean = hyper_.prior_mean + kx.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(kx);
    const double var = std::max(0.0, hyper_.signal_variance - v.squaredNorm());
    return {mean, var};
}

std::optional<double> log_marginal_likelihood(const std::vector<Sample>& samples, const GpHyper& hyper,
                                              std::size_t state_dim) {
    check_hyper(hyper);
    (void)state_dim;
    const Eigen::MatrixXd x = stack_inputs(samples, hyper.lengthscales.size());
    auto f = factorize(gram(hyper, x));
    if (!f) {
        return std::nullopt;
    }
    const Eigen::VectorXd y = centred_labels(samples, hyper.prior_mean);
    const Eigen::VectorXd alpha = f->llt.solve(y);
    const Eigen::MatrixXd l = f->llt.matrixL();
    const double log_det_half = l.diagonal().array().log().sum();
    const auto n = static_cast<double>(samples.size());
    return -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

QSet constraint_estimate(const GpModel& model, const GridSpec& grid, double threshold) {
    QSet k(grid);
    const auto& h = model.hyper();
    const std::size_t n = model.samples().size();
    if (n == 0) {
        if (h.prior_mean >= threshold) {
            k = QSet(grid, true);
        }
        return k;
    }
    // The kernel factorizes over the state and action blocks, so the mean on
    // the grid is prior + Ks * diag(sigma^2 alpha) * Ka^T.
    const auto sdim = static_cast<Eigen::Index>(grid.state_dim());
    const auto ns = static_cast<Eigen::Index>(grid.state_count());
    const auto na = static_cast<Eigen::Index>(grid.action_count());
    const auto nn = static_cast<Eigen::Index>(n);
    const Eigen::ArrayXd ls_s = h.lengthscales.head(sdim).array();
    const Eigen::ArrayXd ls_a = h.lengthscales.tail(h.lengthscales.size() - sdim).array();
    Eigen::MatrixXd ks(ns, nn);
    Eigen::MatrixXd ka(na, nn);
    for (Eigen::Index i = 0; i < ns; ++i) {
        const Eigen::ArrayXd p = grid.state_point(static_cast<std::size_t>(i)).array();
        for (Eigen::Index m = 0; m < nn; ++m) {
            const auto& smp = model.samples()[static_cast<std::size_t>(m)];
            ks(i, m) = std::exp(-0.5 * ((p - smp.state.array()) / ls_s).square().sum());
        }
    }
    for (Eigen::Index j = 0; j < na; ++j) {
        const Eigen::ArrayXd p = grid.action_point(static_cast<std::size_t>(j)).array();
        for (Eigen::Index m = 0; m < nn; ++m) {
            const auto& smp = model.samples()[static_cast<std::size_t>(m)];
            ka(j, m) = std::exp(-0.5 * ((p - smp.action.array()) / ls_a).square().sum());
        }
    }
    const Eigen::VectorXd w = h.signal_variance * model.weights();
    const Eigen::MatrixXd mean = (ks * w.asDiagonal()) * ka.transpose();
    for (Eigen::Index i = 0; i < ns; ++i) {
        for (Eigen::Index j = 0; j < na; ++j) {
            if (h.prior_mean + mean(i, j) >= threshold) {
                k.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            }
        }
    }
    return k;
}

HyperUpdate update_hyperparameters(const GpModel& model, const std::vector<GpHyper>& search_grid) {
    if (model.samples().size() < 2) {
        throw PreconditionError("update_hyperparameters needs at least two samples");
    }
    std::optional<std::size_t> best;
    double best_ll = 0.0;
    for (std::size_t c = 0; c < search_grid.size(); ++c) {
        const auto ll = log_marginal_likelihood(model.samples(), search_grid[c], model.state_dim());
        if (ll && (!best || *ll > best_ll)) {
            best = c;
            best_ll = *ll;
        }
    }
    if (!best) {
        log::warn("hyperparameter search: every candidate was ill-conditioned, keeping previous values");
        return {model, 0, true, 0.0};
    }
    return {GpModel::fit(model.samples(), search_grid[*best], model.state_dim()), *best, false, best_ll};
}

GpModel observe(const GpModel& model, const State& s, const Action& a, const StepOutcome& outcome) {
    auto samples = model.samples();
    samples.push_back({s, a, is_failed(outcome) ? 0.0 : 1.0});
    return GpModel::fit(std::move(samples), model.hyper(), model.state_dim());
}

}  // namespace viablearn
