#include "viablearn/viability.hpp"

#include "viablearn/errors.hpp"

namespace viablearn {

namespace {

const TransitionTable& require_table(const ViabilityResult& r) {
    if (!r.table) {
        throw PreconditionError("viability result carries no transition table");
    }
    return *r.table;
}

}  // namespace

TransitionTable tabulate(const SystemModel& model, const GridSpec& grid) {
    TransitionTable t;
    t.grid = grid;
    t.state_alive.assign(grid.state_count(), false);
    t.next.assign(grid.pair_count(), TransitionTable::kFailed);
    for (std::size_t i = 0; i < grid.state_count(); ++i) {
        const State s = grid.state_point(i);
        if (model.failure(s)) {
            continue;
        }
        t.state_alive[i] = true;
        for (std::size_t j = 0; j < grid.action_count(); ++j) {
            const auto outcome = step(model, s, grid.action_point(j));
            if (const auto* alive = std::get_if<Alive>(&outcome)) {
                if (auto cell = locate(grid, alive->next_state)) {
                    t.next[i * grid.action_count() + j] = static_cast<std::int64_t>(*cell);
                }
            }
        }
    }
    return t;
}

ViabilityResult solve_viability(const TransitionTable& table) {
    const auto& g = table.grid;
    SSet current(g);
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        current.set(i, table.state_alive[i]);
    }
    ViabilityResult r;
    r.trace.push_back(current.count());
    QSet q(g);
    for (;;) {
        q = QSet(g);
        for (std::size_t i = 0; i < g.state_count(); ++i) {
            if (!current.contains(i)) {
                continue;
            }
            for (std::size_t j = 0; j < g.action_count(); ++j) {
                const auto n = table.at(i, j);
                if (n != TransitionTable::kFailed && current.contains(static_cast<std::size_t>(n))) {
                    q.set(i, j);
                }
            }
        }
        ++r.iterations;
        SSet next = set_intersection(project(q), current);
        r.trace.push_back(next.count());
        if (next == current) {
            break;
        }
        current = std::move(next);
        if (current.empty()) {
            // q already has no rows left, so the empty set is the fixed point.
            break;
        }
    }
    r.kernel = std::move(current);
    r.viable = std::move(q);
    r.table = table;
    return r;
}

ViabilityResult compute_viability(const SystemModel& model, const GridSpec& grid) {
    return solve_viability(tabulate(model, grid));
}

ConstraintCheck is_control_constraint(const QSet& q, const TransitionTable& table) {
    if (!(q.grid() == table.grid)) {
        throw GridMismatch("is_control_constraint: set and table grids differ");
    }
    const SSet cover = project(q);
    const auto& g = q.grid();
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            if (!q.contains(i, j)) {
                continue;
            }
            const auto n = table.at(i, j);
            if (n == TransitionTable::kFailed || !cover.contains(static_cast<std::size_t>(n))) {
                return {false, std::make_pair(i, j)};
            }
        }
    }
    return {};
}

ConstraintCheck is_control_constraint(const QSet& q, const ViabilityResult& result) {
    return is_control_constraint(q, require_table(result));
}

std::variant<QSet, PruneRejection> prune(const QSet& a, const QSet& c, const ViabilityResult& result) {
    if (!is_control_constraint(a, result).ok) {
        throw PreconditionError("prune: first argument is not a control constraint");
    }
    QSet pruned = set_difference(a, c);
    const SSet before = project(a);
    const SSet after = project(pruned);
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before.contains(i) && !after.contains(i)) {
            return PruneRejection{i};
        }
    }
    return pruned;
}

QSet largest_control_constraint_within(const QSet& q, const TransitionTable& table) {
    if (!(q.grid() == table.grid)) {
        throw GridMismatch("largest_control_constraint_within: set and table grids differ");
    }
    QSet cur = q;
    const auto& g = q.grid();
    for (bool changed = true; changed;) {
        changed = false;
        const SSet cover = project(cur);
        for (std::size_t i = 0; i < g.state_count(); ++i) {
            for (std::size_t j = 0; j < g.action_count(); ++j) {
                if (!cur.contains(i, j)) {
                    continue;
                }
                const auto n = table.at(i, j);
                if (n == TransitionTable::kFailed || !cover.contains(static_cast<std::size_t>(n))) {
                    cur.set(i, j, false);
                    changed = true;
                }
            }
        }
    }
    return cur;
}

}  // namespace viablearn
