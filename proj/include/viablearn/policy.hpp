#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "viablearn/lattice.hpp"
#include "viablearn/rng.hpp"
#include "viablearn/viability.hpp"

namespace viablearn {

/// a = clamp(offset + gain * s) to the action box.
struct AffinePolicy {
    Eigen::MatrixXd gain;  // action_dim x state_dim
    Eigen::VectorXd offset;
};

/// Uniform draws over the action box from a stream seeded by `seed`.
struct UniformRandomPolicy {
    std::uint64_t seed = 0;
};

/// Explicit nominal action per state cell.
struct TablePolicy {
    std::vector<Action> actions;
};

class NominalPolicy {
public:
    using Kind = std::variant<AffinePolicy, UniformRandomPolicy, TablePolicy>;

    NominalPolicy(Kind kind, Box action_box) : kind_(std::move(kind)), action_box_(std::move(action_box)) {}

    const Kind& kind() const { return kind_; }
    const Box& action_box() const { return action_box_; }
    bool deterministic() const { return !std::holds_alternative<UniformRandomPolicy>(kind_); }

    /// Deterministic nominal action at a state; Table policies need the cell.
    /// Throws PreconditionError for the stochastic policy.
    Action evaluate(const State& s, std::optional<std::size_t> cell = std::nullopt) const;
    /// Nominal action at a grid cell.
    Action at_cell(const GridSpec& grid, std::size_t cell) const;
    /// Per-step nominal action. Deterministic kinds ignore `stream`.
    Action draw(const State& s, std::optional<std::size_t> cell, Rng& stream) const;

private:
    Kind kind_;
    Box action_box_;
};

/// J(a; a_nom). Must be >= 0 and zero exactly at a = a_nom.
using CostFn = std::function<double(const Action& a, const Action& a_nom)>;

double squared_distance(const Action& a, const Action& a_nom);

/// Argmin of the cost over the action slice of `k` at `state_cell`.
/// Ties go to the lexicographically smallest action. nullopt = infeasible.
std::optional<std::size_t> opt(const QSet& k, std::size_t state_cell, const Action& a_nom,
                               const CostFn& cost = squared_distance);

/// Every minimiser (exact cost equality), in increasing cell order.
std::vector<std::size_t> opt_set(const QSet& k, std::size_t state_cell, const Action& a_nom,
                                 const CostFn& cost = squared_distance);

/// Per state cell: OPT(viable) on project(viable), nullopt elsewhere.
std::vector<std::optional<std::size_t>> optimal_policy(const QSet& viable, const NominalPolicy& pi,
                                                       const CostFn& cost = squared_distance);

/// Graph of the set-valued OPT(viable) over the kernel.
QSet opt_graph(const ViabilityResult& result, const NominalPolicy& pi, const CostFn& cost = squared_distance);

/// Unviable pairs at kernel states whose cost is <= the constrained optimum.
QSet critical_set(const ViabilityResult& result, const NominalPolicy& pi, const CostFn& cost = squared_distance);

/// Critical set for a stochastic nominal policy: the union of per-draw
/// critical sets over every action grid point as nominal.
QSet critical_set_stochastic(const ViabilityResult& result, const CostFn& cost = squared_distance);

struct AdmissibilityVerdict {
    bool admissible = false;
    /// OPT(Q_V) members missing from k, as flat pair indices.
    std::vector<std::size_t> missing_optimum;
    /// Members of k inside the critical set, as flat pair indices.
    std::vector<std::size_t> critical_hits;
};

AdmissibilityVerdict is_admissible(const QSet& k, const ViabilityResult& result, const NominalPolicy& pi,
                                   const CostFn& cost = squared_distance);

struct DirectCheck {
    bool equal = true;
    /// Kernel cells where the set-valued OPT(k) and OPT(Q_V) differ.
    std::vector<std::size_t> mismatched_states;
};

/// Compares the set-valued argmins of k and Q_V on every kernel cell.
DirectCheck direct_policy_check(const QSet& k, const ViabilityResult& result, const NominalPolicy& pi,
                                const CostFn& cost = squared_distance);

}  // namespace viablearn
