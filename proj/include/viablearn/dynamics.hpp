#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace viablearn {

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

/// Size-aware exact equality (Eigen's operator== asserts on size mismatch).
inline bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.size() == b.size() && a == b; }

/// Closed axis-aligned interval box.
struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::Index dim() const { return lower.size(); }
    bool contains(const Eigen::VectorXd& x) const;
};

using VectorField = std::function<State(const State&, const Action&)>;
using FailurePredicate = std::function<bool(const State&)>;

/// A continuous-time system sampled under a zero-order hold.
///
/// Instances are immutable once built; use `make_model` so the box and
/// timing invariants are checked.
struct SystemModel {
    std::string name;
    Box state_box;
    Box action_box;
    VectorField vector_field;
    double hold_duration = 1.0;
    double substep = 0.01;
    FailurePredicate failure;

    int substeps_per_hold() const;
};

/// Validates invariants and returns the model. Throws PreconditionError.
SystemModel make_model(std::string name, Box state_box, Box action_box, VectorField field,
                       double hold_duration, double substep, FailurePredicate failure);

struct Alive {
    State next_state;
};

struct Failed {
    State first_failure_state;
};

using StepOutcome = std::variant<Alive, Failed>;

inline bool is_failed(const StepOutcome& o) { return std::holds_alternative<Failed>(o); }

/// Fixed-step classical RK4 with the action held constant. A trailing
/// partial step is taken when `duration` is not a multiple of the substep.
State flow(const SystemModel& model, const State& s, const Action& a, double duration);

/// One discrete transition: integrates for `hold_duration` and stops at the
/// first substep whose state satisfies the failure predicate.
StepOutcome step(const SystemModel& model, const State& s, const Action& a);

/// The hovership benchmark: s' = a - 0.1 - tanh(0.75 s) on [0, 2] x [0, 0.8],
/// one-second hold, failure = leaving the state box.
SystemModel hovership_model();

/// Failure predicate that fires outside the given box.
FailurePredicate outside_box(Box box);

/// Vector-field registry used by configuration files.
VectorField builtin_vector_field(const std::string& name);
std::vector<std::string> builtin_vector_field_names();

}  // namespace viablearn
