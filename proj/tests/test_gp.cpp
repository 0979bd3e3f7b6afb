#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>

#include "viablearn/errors.hpp"
#include "viablearn/gp.hpp"

using namespace viablearn;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

GpHyper hyper(double ls_s, double ls_a, double sf2 = 1.0, double sn2 = 1e-4, double m = 0.0) {
    GpHyper h;
    h.lengthscales = Eigen::Vector2d(ls_s, ls_a);
    h.signal_variance = sf2;
    h.noise_variance = sn2;
    h.prior_mean = m;
    return h;
}

double se(const GpHyper& h, double s1, double a1, double s2, double a2) {
    const double ds = (s1 - s2) / h.lengthscales[0];
    const double da = (a1 - a2) / h.lengthscales[1];
    return h.signal_variance * std::exp(-0.5 * (ds * ds + da * da));
}

/// Log marginal likelihood through a full-pivot LU instead of Cholesky.
double lml_lu(const std::vector<Sample>& xs, const GpHyper& h) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd k(n, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = xs[i].label - h.prior_mean;
        for (Eigen::Index j = 0; j < n; ++j) {
            k(i, j) = se(h, xs[i].state[0], xs[i].action[0], xs[j].state[0], xs[j].action[0]) +
                      (i == j ? h.noise_variance : 0.0);
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    return -0.5 * y.dot(lu.solve(y)) - 0.5 * std::log(lu.determinant()) -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

std::vector<Sample> random_samples(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> us(0.0, 2.0);
    std::uniform_real_distribution<double> ua(0.0, 0.8);
    std::vector<Sample> out;
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back({v1(us(rng)), v1(ua(rng)), static_cast<double>(rng() % 2)});
    }
    return out;
}

}  // namespace

TEST_CASE("prior with no samples") {
    const auto m = GpModel::fit({}, hyper(0.3, 0.1, 2.0), 1);
    const auto p = m.posterior(v1(1.0), v1(0.4));
    CHECK(p.mean == 0.0);
    CHECK(p.variance == 2.0);
    const GridSpec g({{0.0, 2.0, 5}}, {{0.0, 0.8, 3}});
    CHECK(constraint_estimate(m, g, 0.5).empty());
    const auto m1 = GpModel::fit({}, hyper(0.3, 0.1, 1.0, 1e-4, 1.0), 1);
    CHECK(constraint_estimate(m1, g, 0.5).count() == g.pair_count());
}

TEST_CASE("single sample interpolates as noise vanishes") {
    for (double sn2 : {1e-2, 1e-4, 1e-6}) {
        const auto h = hyper(0.3, 0.1, 1.0, sn2);
        const auto m = GpModel::fit({{v1(1.0), v1(0.4), 1.0}}, h, 1);
        const auto p = m.posterior(v1(1.0), v1(0.4));
        CHECK(p.mean == doctest::Approx(1.0 / (1.0 + sn2)).epsilon(1e-12));
        CHECK(p.variance == doctest::Approx(1.0 - 1.0 / (1.0 + sn2)).epsilon(1e-9));
        CHECK(std::abs(p.mean - 1.0) <= sn2);
    }
}

TEST_CASE("two samples against the closed form") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const auto h = hyper(0.05 + u(rng), 0.05 + u(rng), 0.5 + u(rng), 1e-3 + 0.1 * u(rng), u(rng) < 0.5 ? 0.0 : 1.0);
        const std::vector<Sample> xs{{v1(2 * u(rng)), v1(0.8 * u(rng)), 1.0}, {v1(2 * u(rng)), v1(0.8 * u(rng)), 0.0}};
        const auto m = GpModel::fit(xs, h, 1);
        const double s = 2 * u(rng);
        const double a = 0.8 * u(rng);
        const double d = h.signal_variance + h.noise_variance;
        const double c = se(h, xs[0].state[0], xs[0].action[0], xs[1].state[0], xs[1].action[0]);
        const double det = d * d - c * c;
        const double k0 = se(h, s, a, xs[0].state[0], xs[0].action[0]);
        const double k1 = se(h, s, a, xs[1].state[0], xs[1].action[0]);
        const double y0 = 1.0 - h.prior_mean;
        const double y1 = 0.0 - h.prior_mean;
        const double w0 = (d * y0 - c * y1) / det;
        const double w1 = (-c * y0 + d * y1) / det;
        const double mean = h.prior_mean + k0 * w0 + k1 * w1;
        const double var = h.signal_variance - (d * k0 * k0 - 2 * c * k0 * k1 + d * k1 * k1) / det;
        const auto p = m.posterior(v1(s), v1(a));
        CHECK(std::abs(p.mean - mean) <= 1e-9);
        CHECK(std::abs(p.variance - var) <= 1e-9);
    }
}

TEST_CASE("far from the data the posterior returns to the prior") {
    const auto h = hyper(0.1, 0.05, 1.0, 1e-4, 0.0);
    const auto m = GpModel::fit({{v1(0.0), v1(0.0), 1.0}, {v1(0.1), v1(0.1), 0.0}}, h, 1);
    const auto p = m.posterior(v1(2.0), v1(0.8));
    CHECK(std::abs(p.mean) < 1e-12);
    CHECK(p.variance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constraint estimate thresholds the posterior mean") {
    std::mt19937 rng(5);
    const GridSpec g({{0.0, 2.0, 21}}, {{0.0, 0.8, 17}});
    for (int t = 0; t < 20; ++t) {
        const auto xs = random_samples(rng, 1 + rng() % 30);
        const auto m = GpModel::fit(xs, hyper(0.3, 0.2, 1.0, 1e-2, static_cast<double>(t % 2)), 1);
        const auto k = constraint_estimate(m, g, 0.5);
        for (std::size_t i = 0; i < g.state_count(); ++i) {
            for (std::size_t j = 0; j < g.action_count(); ++j) {
                const double mu = m.posterior(g.state_point(i), g.action_point(j)).mean;
                if (std::abs(mu - 0.5) > 1e-9) {
                    CHECK(k.contains(i, j) == (mu >= 0.5));
                }
            }
        }
        // raising the threshold can only shrink the set
        CHECK(is_subset(constraint_estimate(m, g, 0.7), k));
        CHECK(is_subset(k, constraint_estimate(m, g, 0.3)));
    }
}

TEST_CASE("log marginal likelihood and hyperparameter search") {
    std::mt19937 rng(11);
    SUBCASE("matches an LU evaluation") {
        for (int t = 0; t < 20; ++t) {
            const auto xs = random_samples(rng, 2 + rng() % 20);
            const auto h = hyper(0.2 + 0.1 * t, 0.3, 1.0, 1e-2, 0.0);
            CHECK(*log_marginal_likelihood(xs, h, 1) == doctest::Approx(lml_lu(xs, h)).epsilon(1e-9));
        }
    }
    SUBCASE("single candidate is always chosen") {
        const auto m = GpModel::fit(random_samples(rng, 10), hyper(0.2, 0.1), 1);
        const auto u = update_hyperparameters(m, {hyper(0.8, 0.4, 1.0, 1e-2)});
        CHECK(u.chosen == 0);
        CHECK_FALSE(u.warning);
        CHECK(u.model.hyper() == hyper(0.8, 0.4, 1.0, 1e-2));
        CHECK(u.model.samples() == m.samples());
    }
    SUBCASE("picks the brute-force maximum on data drawn from a prior") {
        const auto truth = hyper(0.4, 0.2, 1.0, 1e-2);
        std::vector<Sample> xs = random_samples(rng, 50);
        const auto n = static_cast<Eigen::Index>(xs.size());
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                k(i, j) = se(truth, xs[i].state[0], xs[i].action[0], xs[j].state[0], xs[j].action[0]) +
                          (i == j ? truth.noise_variance : 0.0);
            }
        }
        const Eigen::MatrixXd l = k.llt().matrixL();
        std::normal_distribution<double> z;
        Eigen::VectorXd e(n);
        for (auto& x : e) {
            x = z(rng);
        }
        const Eigen::VectorXd y = l * e;
        for (Eigen::Index i = 0; i < n; ++i) {
            xs[i].label = y[i];
        }
        std::vector<GpHyper> grid;
        for (double ls : {0.1, 0.2, 0.4, 0.8}) {
            for (double la : {0.05, 0.1, 0.2, 0.4}) {
                for (double sn : {1e-4, 1e-2}) {
                    grid.push_back(hyper(ls, la, 1.0, sn));
                }
            }
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < grid.size(); ++c) {
            if (lml_lu(xs, grid[c]) > lml_lu(xs, grid[best])) {
                best = c;
            }
        }
        const auto m = GpModel::fit(xs, hyper(0.1, 0.1), 1);
        const auto u = update_hyperparameters(m, grid);
        CHECK(u.chosen == best);
        CHECK(u.log_likelihood == doctest::Approx(lml_lu(xs, grid[best])).epsilon(1e-9));
    }
    SUBCASE("ties keep the first candidate") {
        const auto m = GpModel::fit(random_samples(rng, 8), hyper(0.2, 0.1), 1);
        const auto u = update_hyperparameters(m, {hyper(0.5, 0.5), hyper(0.5, 0.5), hyper(0.5, 0.5)});
        CHECK(u.chosen == 0);
    }
    SUBCASE("all candidates ill-conditioned") {
        const std::vector<Sample> dup{{v1(1.0), v1(0.4), 1.0}, {v1(1.0), v1(0.4), 0.0}};
        const auto m = GpModel::fit(dup, hyper(0.2, 0.1), 1);
        const auto bad = hyper(0.2, 0.1, 1e20, 1e-300);
        CHECK_FALSE(log_marginal_likelihood(dup, bad, 1).has_value());
        const auto u = update_hyperparameters(m, {bad, bad});
        CHECK(u.warning);
        CHECK(u.model.hyper() == m.hyper());
        CHECK_THROWS_AS(GpModel::fit(dup, bad, 1), IllConditioned);
    }
    SUBCASE("needs two samples") {
        const auto m = GpModel::fit(random_samples(rng, 1), hyper(0.2, 0.1), 1);
        CHECK_THROWS_AS(update_hyperparameters(m, {hyper(0.2, 0.1)}), PreconditionError);
    }
}

TEST_CASE("observe") {
    const auto m0 = GpModel::fit({}, hyper(0.3, 0.1), 1);
    const auto before = m0.posterior(v1(1.0), v1(0.4));
    const auto m1 = observe(m0, v1(1.0), v1(0.4), Alive{v1(1.1)});
    const auto m2 = observe(m1, v1(0.2), v1(0.0), Failed{v1(-0.01)});
    CHECK(m1.samples().back().label == 1.0);
    CHECK(m2.samples().back().label == 0.0);
    CHECK(m2.samples().size() == 2);
    CHECK(m1.posterior(v1(1.0), v1(0.4)).mean > before.mean);
    const auto m3 = observe(GpModel::fit({}, hyper(0.3, 0.1, 1.0, 1e-4, 1.0), 1), v1(0.2), v1(0.0), Failed{v1(0.0)});
    CHECK(m3.posterior(v1(0.2), v1(0.0)).mean < 1.0);
    CHECK(m0.samples().empty());  // inputs are not modified
}

TEST_CASE("variance is bounded and shrinks with data") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> us(0.0, 2.0);
    std::uniform_real_distribution<double> ua(0.0, 0.8);
    for (int t = 0; t < 300; ++t) {
        const auto h = hyper(0.1 + 0.1 * (t % 8), 0.05 + 0.05 * (t % 5), 1.0, t % 2 ? 1e-4 : 1e-2);
        auto xs = random_samples(rng, rng() % 15);
        const auto m = GpModel::fit(xs, h, 1);
        xs.push_back({v1(us(rng)), v1(ua(rng)), 1.0});
        const auto m_more = GpModel::fit(xs, h, 1);
        for (int q = 0; q < 10; ++q) {
            const State s = v1(us(rng));
            const Action a = v1(ua(rng));
            const double v = m.posterior(s, a).variance;
            CHECK(v >= 0.0);
            CHECK(v <= h.signal_variance + 1e-12);
            CHECK(m_more.posterior(s, a).variance <= v + 1e-9);
        }
    }
}

TEST_CASE("fit is deterministic") {
    std::mt19937 rng(19);
    const auto xs = random_samples(rng, 25);
    const auto a = GpModel::fit(xs, hyper(0.3, 0.2), 1);
    const auto b = GpModel::fit(xs, hyper(0.3, 0.2), 1);
    CHECK(a.weights() == b.weights());
    CHECK(a.posterior(v1(0.7), v1(0.3)).mean == b.posterior(v1(0.7), v1(0.3)).mean);
    CHECK_THROWS_AS(GpModel::fit(xs, hyper(-0.3, 0.2), 1), PreconditionError);
}
