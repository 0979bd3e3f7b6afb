#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "viablearn/dynamics.hpp"
#include "viablearn/lattice.hpp"

namespace viablearn {

/// Dynamics cached on the grid: successor cell of every (state, action)
/// pair, or `kFailed` when the transition fails or leaves the grid.
struct TransitionTable {
    static constexpr std::int64_t kFailed = -1;

    GridSpec grid;
    /// Per state cell: false when the grid point itself lies in the failure set.
    std::vector<bool> state_alive;
    /// Row-major (state, action) -> successor cell or kFailed.
    std::vector<std::int64_t> next;

    std::int64_t at(std::size_t state_cell, std::size_t action_cell) const {
        return next[state_cell * grid.action_count() + action_cell];
    }
};

TransitionTable tabulate(const SystemModel& model, const GridSpec& grid);

struct ViabilityResult {
    SSet kernel;
    QSet viable;
    int iterations = 0;
    /// Kernel cell count after each sweep, starting with the initial set.
    std::vector<std::size_t> trace;
    /// Empty when the result was reloaded from disk without its table.
    std::optional<TransitionTable> table;
};

/// Greatest fixed point of S -> project({(i, j) : next(i, j) in S}) over the table.
ViabilityResult solve_viability(const TransitionTable& table);
ViabilityResult compute_viability(const SystemModel& model, const GridSpec& grid);

struct ConstraintCheck {
    bool ok = true;
    /// A member (state cell, action cell) whose successor leaves project(q).
    std::optional<std::pair<std::size_t, std::size_t>> witness;
};

/// Every member of `q` must map into project(q). Needs the transition table.
ConstraintCheck is_control_constraint(const QSet& q, const TransitionTable& table);
ConstraintCheck is_control_constraint(const QSet& q, const ViabilityResult& result);

struct PruneRejection {
    std::size_t state_cell;  ///< cell whose action slice would be emptied
};

/// `a \ c` when removing `c` keeps every state of project(a); rejection otherwise.
/// `a` must be a control constraint (PreconditionError otherwise).
std::variant<QSet, PruneRejection> prune(const QSet& a, const QSet& c, const ViabilityResult& result);

/// Largest control constraint contained in `q`: repeatedly drops members
/// whose successor leaves the projection.
QSet largest_control_constraint_within(const QSet& q, const TransitionTable& table);

}  // namespace viablearn
