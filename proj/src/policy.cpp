#include "viablearn/policy.hpp"

#include <algorithm>
#include <stdexcept>

#include "viablearn/errors.hpp"

namespace viablearn {

namespace {

Action clamp_to(const Box& box, Action a) {
    for (Eigen::Index d = 0; d < a.size(); ++d) {
        a[d] = std::clamp(a[d], box.lower[d], box.upper[d]);
    }
    return a;
}

}  // namespace

Action NominalPolicy::evaluate(const State& s, std::optional<std::size_t> cell) const {
    if (const auto* affine = std::get_if<AffinePolicy>(&kind_)) {
        return clamp_to(action_box_, affine->offset + affine->gain * s);
    }
    if (const auto* table = std::get_if<TablePolicy>(&kind_)) {
        if (!cell || *cell >= table->actions.size()) {
            throw PreconditionError("table policy evaluated off its grid");
        }
        return table->actions[*cell];
    }
    throw PreconditionError("stochastic nominal policy has no deterministic value");
}

Action NominalPolicy::at_cell(const GridSpec& grid, std::size_t cell) const {
    return evaluate(grid.state_point(cell), cell);
}

Action NominalPolicy::draw(const State& s, std::optional<std::size_t> cell, Rng& stream) const {
    if (std::holds_alternative<UniformRandomPolicy>(kind_)) {
        Action a(action_box_.dim());
        for (Eigen::Index d = 0; d < a.size(); ++d) {
            a[d] = stream.uniform(action_box_.lower[d], action_box_.upper[d]);
        }
        return a;
    }
    return evaluate(s, cell);
}

double squared_distance(const Action& a, const Action& a_nom) { return (a - a_nom).squaredNorm(); }

std::optional<std::size_t> opt(const QSet& k, std::size_t state_cell, const Action& a_nom, const CostFn& cost) {
    const auto& g = k.grid();
    std::optional<std::size_t> best;
    double best_cost = 0.0;
    for (std::size_t j = 0; j < g.action_count(); ++j) {
        if (!k.contains(state_cell, j)) {
            continue;
        }
        const double c = cost(g.action_point(j), a_nom);
        if (!best || c < best_cost) {
            best = j;
            best_cost = c;
        }
    }
    return best;
}

std::vector<std::size_t> opt_set(const QSet& k, std::size_t state_cell, const Action& a_nom, const CostFn& cost) {
    const auto& g = k.grid();
    std::vector<std::size_t> best;
    double best_cost = 0.0;
    for (std::size_t j = 0; j < g.action_count(); ++j) {
        if (!k.contains(state_cell, j)) {
            continue;
        }
        const double c = cost(g.action_point(j), a_nom);
        if (best.empty() || c < best_cost) {
            best.assign(1, j);
            best_cost = c;
        } else if (c == best_cost) {
            best.push_back(j);
        }
    }
    return best;
}

std::vector<std::optional<std::size_t>> optimal_policy(const QSet& viable, const NominalPolicy& pi,
                                                       const CostFn& cost) {
    if (!pi.deterministic()) {
        throw PreconditionError("optimal_policy needs a deterministic nominal policy");
    }
    const auto& g = viable.grid();
    const SSet kernel = project(viable);
    if (kernel.empty()) {
        throw PreconditionError("optimal_policy: viable set has an empty projection");
    }
    std::vector<std::optional<std::size_t>> out(g.state_count());
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        if (kernel.contains(i)) {
            out[i] = opt(viable, i, pi.at_cell(g, i), cost);
        }
    }
    return out;
}

QSet opt_graph(const ViabilityResult& result, const NominalPolicy& pi, const CostFn& cost) {
    const auto& g = result.viable.grid();
    QSet graph(g);
    for (auto i : result.kernel.cells()) {
        for (auto j : opt_set(result.viable, i, pi.at_cell(g, i), cost)) {
            graph.set(i, j);
        }
    }
    return graph;
}

namespace {

void add_critical_row(QSet& out, const ViabilityResult& result, std::size_t i, const Action& a_nom,
                      const CostFn& cost) {
    const auto& g = result.viable.grid();
    const auto best = opt(result.viable, i, a_nom, cost);
    if (!best) {
        return;
    }
    const double bound = cost(g.action_point(*best), a_nom);
    for (std::size_t j = 0; j < g.action_count(); ++j) {
        if (!result.viable.contains(i, j) && cost(g.action_point(j), a_nom) <= bound) {
            out.set(i, j);
        }
    }
}

void assert_critical_shape(const QSet& crit, const ViabilityResult& result) {
    if (!set_intersection(crit, result.viable).empty() || !is_subset(project(crit), result.kernel)) {
        throw std::logic_error("critical set escaped its defining region");
    }
}

}  // namespace

QSet critical_set(const ViabilityResult& result, const NominalPolicy& pi, const CostFn& cost) {
    if (!pi.deterministic()) {
        throw PreconditionError("critical_set needs a deterministic nominal policy");
    }
    const auto& g = result.viable.grid();
    QSet crit(g);
    for (auto i : result.kernel.cells()) {
        add_critical_row(crit, result, i, pi.at_cell(g, i), cost);
    }
    assert_critical_shape(crit, result);
    return crit;
}

QSet critical_set_stochastic(const ViabilityResult& result, const CostFn& cost) {
    const auto& g = result.viable.grid();
    QSet crit(g);
    for (auto i : result.kernel.cells()) {
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            add_critical_row(crit, result, i, g.action_point(j), cost);
        }
    }
    assert_critical_shape(crit, result);
    return crit;
}

AdmissibilityVerdict is_admissible(const QSet& k, const ViabilityResult& result, const NominalPolicy& pi,
                                   const CostFn& cost) {
    if (!(k.grid() == result.viable.grid())) {
        throw GridMismatch("is_admissible: constraint and oracle grids differ");
    }
    const QSet graph = opt_graph(result, pi, cost);
    const QSet crit = critical_set(result, pi, cost);
    AdmissibilityVerdict v;
    for (std::size_t f = 0; f < k.size(); ++f) {
        if (graph.contains_flat(f) && !k.contains_flat(f)) {
            v.missing_optimum.push_back(f);
        }
        if (crit.contains_flat(f) && k.contains_flat(f)) {
            v.critical_hits.push_back(f);
        }
    }
    v.admissible = v.missing_optimum.empty() && v.critical_hits.empty();
    return v;
}

DirectCheck direct_policy_check(const QSet& k, const ViabilityResult& result, const NominalPolicy& pi,
                                const CostFn& cost) {
    if (!(k.grid() == result.viable.grid())) {
        throw GridMismatch("direct_policy_check: constraint and oracle grids differ");
    }
    const auto& g = k.grid();
    DirectCheck out;
    for (auto i : result.kernel.cells()) {
        const Action a_nom = pi.at_cell(g, i);
        if (opt_set(k, i, a_nom, cost) != opt_set(result.viable, i, a_nom, cost)) {
            out.equal = false;
            out.mismatched_states.push_back(i);
        }
    }
    return out;
}

}  // namespace viablearn
