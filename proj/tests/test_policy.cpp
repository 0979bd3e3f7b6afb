#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "viablearn/errors.hpp"
#include "viablearn/policy.hpp"

using namespace viablearn;

namespace {

Action av(double a) { return Action::Constant(1, a); }

NominalPolicy affine(double offset, double gain, const Box& abox) {
    return NominalPolicy(AffinePolicy{Eigen::MatrixXd::Constant(1, 1, gain), Eigen::VectorXd::Constant(1, offset)},
                         abox);
}

const ViabilityResult& hovership_oracle() {
    static const ViabilityResult r = [] {
        const auto m = hovership_model();
        return compute_viability(m, GridSpec::over(m.state_box, m.action_box, {201}, {161}));
    }();
    return r;
}

/// Q_crit straight from its definition, with its own argmin loop.
QSet definitional_critical(const ViabilityResult& r, const NominalPolicy& pi) {
    const auto& g = r.viable.grid();
    QSet out(g);
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        if (!r.kernel.contains(i)) {
            continue;
        }
        const double a_nom = pi.at_cell(g, i)[0];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            if (r.viable.contains(i, j)) {
                const double d = g.action_point(j)[0] - a_nom;
                best = std::min(best, d * d);
            }
        }
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            const double d = g.action_point(j)[0] - a_nom;
            if (!r.viable.contains(i, j) && d * d <= best) {
                out.set(i, j);
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("nominal policies") {
    const Box abox{av(0.0), av(0.8)};
    const auto pi = affine(0.7, -0.3, abox);
    CHECK(pi.evaluate(State::Constant(1, 1.0))[0] == doctest::Approx(0.4));
    CHECK(pi.evaluate(State::Constant(1, -1.0))[0] == 0.8);  // clamped
    CHECK(affine(-1.0, 0.0, abox).evaluate(State::Constant(1, 0.0))[0] == 0.0);

    const NominalPolicy uni(UniformRandomPolicy{5}, abox);
    CHECK_FALSE(uni.deterministic());
    CHECK_THROWS_AS(uni.evaluate(State::Constant(1, 0.0)), PreconditionError);
    Rng r1(5), r2(5);
    for (int k = 0; k < 20; ++k) {
        const double a = uni.draw(State::Constant(1, 0.0), std::nullopt, r1)[0];
        CHECK(a == uni.draw(State::Constant(1, 0.0), std::nullopt, r2)[0]);
        CHECK(a >= 0.0);
        CHECK(a <= 0.8);
    }
}

TEST_CASE("opt") {
    const GridSpec g({{0.0, 1.0, 3}}, {{0.0, 0.8, 5}});  // actions 0, .2, .4, .6, .8
    QSet k(g);
    k.set(0, 1);
    k.set(0, 3);
    k.set(1, 2);
    CHECK(opt(k, 1, av(0.4)) == 2u);
    CHECK(squared_distance(g.action_point(*opt(k, 1, av(0.4))), av(0.4)) == doctest::Approx(0.0));
    CHECK_FALSE(opt(k, 2, av(0.4)).has_value());
    // slice {0.2, 0.6}, nominal 0.35: 0.15^2 < 0.25^2
    CHECK(opt(k, 0, av(0.35)) == 1u);

    // exact tie goes to the smaller action; the set form keeps both
    const GridSpec d({{0.0, 1.0, 2}}, {{0.0, 1.0, 5}});  // dyadic actions
    QSet kd(d);
    kd.set(0, 1);
    kd.set(0, 3);
    CHECK(opt(kd, 0, av(0.5)) == 1u);
    CHECK(opt_set(kd, 0, av(0.5)) == std::vector<std::size_t>{1, 3});
    CHECK(opt_set(kd, 0, av(0.6)) == std::vector<std::size_t>{3});
    CHECK(opt_set(kd, 1, av(0.6)).empty());
}

TEST_CASE("optimal policy") {
    const auto& r = hovership_oracle();
    const auto& g = r.viable.grid();
    const Box abox{av(0.0), av(0.8)};

    SUBCASE("nominal viable everywhere") {
        const auto pi = affine(0.7, -0.3, abox);
        const auto table = optimal_policy(r.viable, pi);
        for (auto i : r.kernel.cells()) {
            REQUIRE(table[i].has_value());
            CHECK(*table[i] == *locate_action(g, pi.at_cell(g, i)));
        }
    }
    SUBCASE("full Q gives the nominal snapped to the grid") {
        const auto pi = affine(0.9, -0.3, abox);
        const auto table = optimal_policy(QSet(g, true), pi);
        for (std::size_t i = 0; i < g.state_count(); ++i) {
            CHECK(*table[i] == *locate_action(g, pi.at_cell(g, i)));
        }
    }
    SUBCASE("low-thrust policy against per-cell enumeration") {
        const auto pi = affine(0.02, 0.0, abox);
        const auto table = optimal_policy(r.viable, pi);
        for (auto i : r.kernel.cells()) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < g.action_count(); ++j) {
                const double d = std::abs(g.action_point(j)[0] - 0.02);
                if (r.viable.contains(i, j) && d < best_d) {
                    best = j;
                    best_d = d;
                }
            }
            CHECK(*table[i] == best);
        }
    }
    SUBCASE("stochastic nominal is rejected") {
        CHECK_THROWS_AS(optimal_policy(r.viable, NominalPolicy(UniformRandomPolicy{1}, abox)), PreconditionError);
    }
}

TEST_CASE("critical set") {
    const auto& r = hovership_oracle();
    const auto& g = r.viable.grid();
    const Box abox{av(0.0), av(0.8)};

    SUBCASE("empty when the nominal is viable everywhere") {
        const auto pi = affine(0.7, -0.3, abox);
        CHECK(critical_set(r, pi).empty());
        CHECK(critical_set(r, pi) == definitional_critical(r, pi));
    }
    SUBCASE("empty when everything is viable") {
        ViabilityResult all{SSet(g, true), QSet(g, true), 1, {}, std::nullopt};
        CHECK(critical_set(all, affine(0.0, 0.0, abox)).empty());
    }
    SUBCASE("low thrust near the ground is critical") {
        const auto pi = affine(0.02, 0.0, abox);
        const QSet crit = critical_set(r, pi);
        CHECK_FALSE(crit.empty());
        CHECK(crit == definitional_critical(r, pi));
        CHECK(set_intersection(crit, r.viable).empty());
        CHECK(is_subset(project(crit), r.kernel));
    }
    SUBCASE("stochastic nominal: every unviable pair at a kernel state") {
        const QSet crit = critical_set_stochastic(r);
        QSet unviable(g);
        for (auto i : r.kernel.cells()) {
            for (std::size_t j = 0; j < g.action_count(); ++j) {
                unviable.set(i, j, !r.viable.contains(i, j));
            }
        }
        CHECK(crit == unviable);
        CHECK(crit.count() == 165);
    }
}

TEST_CASE("admissibility") {
    const auto& r = hovership_oracle();
    const auto& g = r.viable.grid();
    const Box abox{av(0.0), av(0.8)};
    const auto pi = affine(0.02, 0.0, abox);
    const QSet crit = critical_set(r, pi);

    CHECK(is_admissible(r.viable, r, pi).admissible);

    std::size_t hit = 0;
    for (std::size_t f = 0; f < crit.size(); ++f) {
        if (crit.contains_flat(f)) {
            hit = f;
            break;
        }
    }
    QSet k = r.viable;
    k.set_flat(hit);
    const auto v = is_admissible(k, r, pi);
    CHECK_FALSE(v.admissible);
    CHECK(v.critical_hits == std::vector<std::size_t>{hit});
    CHECK(v.missing_optimum.empty());
    CHECK_FALSE(direct_policy_check(k, r, pi).equal);

    std::mt19937 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        QSet kk = opt_graph(r, pi);
        for (std::size_t f = 0; f < kk.size(); ++f) {
            if (!r.viable.contains_flat(f) && !crit.contains_flat(f) && rng() % 2) {
                kk.set_flat(f);
            }
        }
        CHECK(is_admissible(kk, r, pi).admissible);
        CHECK(direct_policy_check(kk, r, pi).equal);
    }
    CHECK_THROWS_AS(is_admissible(QSet(GridSpec({{0.0, 2.0, 5}}, {{0.0, 0.8, 5}})), r, pi), GridMismatch);
}

TEST_CASE("direct policy equality iff K avoids the critical set") {
    std::mt19937 rng(1234);
    int agree = 0;
    int admissible = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const auto inst = gen::random_admissibility_instance(rng);
        const bool disjoint = set_intersection(inst.k, critical_set(inst.result, inst.pi)).empty();
        const bool equal = direct_policy_check(inst.k, inst.result, inst.pi).equal;
        agree += (disjoint == equal) ? 1 : 0;
        admissible += disjoint ? 1 : 0;
        CHECK(is_admissible(inst.k, inst.result, inst.pi).admissible == disjoint);
    }
    CHECK(agree == trials);
    CHECK(admissible > trials / 10);
    CHECK(admissible < trials - trials / 10);
}

TEST_CASE("cost dominance and scale invariance") {
    std::mt19937 rng(8);
    for (int t = 0; t < 200; ++t) {
        const auto inst = gen::random_admissibility_instance(rng);
        const auto& r = inst.result;
        const auto& g = r.viable.grid();
        QSet sub(g);
        for (std::size_t f = 0; f < sub.size(); ++f) {
            sub.set_flat(f, r.viable.contains_flat(f) && rng() % 3 != 0);
        }
        const CostFn scaled = [](const Action& a, const Action& b) { return 7.5 * squared_distance(a, b); };
        for (auto i : r.kernel.cells()) {
            const Action a_nom = inst.pi.at_cell(g, i);
            const auto best_v = opt(r.viable, i, a_nom);
            const auto best_k = opt(sub, i, a_nom);
            if (best_k) {
                CHECK(squared_distance(g.action_point(*best_k), a_nom) >=
                      squared_distance(g.action_point(*best_v), a_nom));
            }
            CHECK(opt(r.viable, i, a_nom, scaled) == best_v);
            CHECK(opt(inst.k, i, a_nom, scaled) == opt(inst.k, i, a_nom));
        }
    }
}
