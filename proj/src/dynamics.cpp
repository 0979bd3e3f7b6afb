#include "viablearn/dynamics.hpp"

#include <cmath>
#include <map>

#include "viablearn/errors.hpp"

namespace viablearn {

namespace {

void require_finite(const State& s, const char* where) {
    if (!s.allFinite()) {
        throw IntegrationDivergence(std::string(where) + ": non-finite state produced");
    }
}

State rk4_step(const VectorField& f, const State& s, const Action& a, double h) {
    const State k1 = f(s, a);
    const State k2 = f(s + 0.5 * h * k1, a);
    const State k3 = f(s + 0.5 * h * k2, a);
    const State k4 = f(s + h * k3, a);
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_box(const Box& b, const char* what) {
    if (b.lower.size() == 0 || b.lower.size() != b.upper.size()) {
        throw PreconditionError(std::string(what) + ": empty or inconsistent box");
    }
    for (Eigen::Index d = 0; d < b.dim(); ++d) {
        if (!std::isfinite(b.lower[d]) || !std::isfinite(b.upper[d]) || b.lower[d] > b.upper[d]) {
            throw PreconditionError(std::string(what) + ": bounds must be finite with lower <= upper");
        }
    }
}

}  // namespace

bool Box::contains(const Eigen::VectorXd& x) const {
    for (Eigen::Index d = 0; d < dim(); ++d) {
        if (!(x[d] >= lower[d] && x[d] <= upper[d])) {
            return false;
        }
    }
    return true;
}

int SystemModel::substeps_per_hold() const {
    return static_cast<int>(std::llround(hold_duration / substep));
}

SystemModel make_model(std::string name, Box state_box, Box action_box, VectorField field,
                       double hold_duration, double substep, FailurePredicate failure) {
    check_box(state_box, "state_box");
    check_box(action_box, "action_box");
    if (!field || !failure) {
        throw PreconditionError("vector field and failure predicate are required");
    }
    if (!(hold_duration > 0.0) || !std::isfinite(hold_duration)) {
        throw PreconditionError("hold_duration must be positive");
    }
    if (!(substep > 0.0) || substep > hold_duration) {
        throw PreconditionError("substep must be in (0, hold_duration]");
    }
    const double n = std::round(hold_duration / substep);
    if (std::abs(n * substep - hold_duration) > 1e-9 * hold_duration) {
        throw PreconditionError("substep must divide hold_duration into an integer number of steps");
    }
    return SystemModel{std::move(name), std::move(state_box), std::move(action_box), std::move(field),
                       hold_duration, substep, std::move(failure)};
}

State flow(const SystemModel& model, const State& s, const Action& a, double duration) {
    if (!(duration >= 0.0)) {
        throw PreconditionError("flow: duration must be non-negative");
    }
    const double h = model.substep;
    // Snap to whole substeps when within rounding of a multiple.
    double whole = std::floor(duration / h + 1e-9);
    double rest = duration - whole * h;
    if (std::abs(rest) <= 1e-12 * std::max(1.0, duration)) {
        rest = 0.0;
    }
    State x = s;
    const auto steps = static_cast<long long>(whole);
    for (long long k = 0; k < steps; ++k) {
        x = rk4_step(model.vector_field, x, a, h);
        require_finite(x, "flow");
    }
    if (rest > 0.0) {
        x = rk4_step(model.vector_field, x, a, rest);
        require_finite(x, "flow");
    }
    return x;
}

StepOutcome step(const SystemModel& model, const State& s, const Action& a) {
    if (model.failure(s)) {
        throw PreconditionError("step: start state is already in the failure set");
    }
    const int n = model.substeps_per_hold();
    State x = s;
    for (int k = 0; k < n; ++k) {
        x = rk4_step(model.vector_field, x, a, model.substep);
        require_finite(x, "step");
        if (model.failure(x)) {
            return Failed{x};
        }
    }
    return Alive{x};
}

FailurePredicate outside_box(Box box) {
    return [box = std::move(box)](const State& s) { return !box.contains(s); };
}

namespace {

const std::map<std::string, VectorField>& registry() {
    static const std::map<std::string, VectorField> fields = {
        {"hovership",
         [](const State& s, const Action& a) {
             State ds(1);
             ds[0] = a[0] - 0.1 - std::tanh(0.75 * s[0]);
             return ds;
         }},
        // Nothing moves.
        {"zero", [](const State& s, const Action&) { return State(State::Zero(s.size())); }},
        // Every state falls at unit rate plus the action magnitude.
        {"sink",
         [](const State& s, const Action& a) { return State(State::Constant(s.size(), -1.0 - a.cwiseAbs().sum())); }},
        // Damped double integrator with a force input: (x, v).
        {"double_integrator",
         [](const State& s, const Action& a) {
             State ds(2);
             ds[0] = s[1];
             ds[1] = a[0] - 0.5 * s[1];
             return ds;
         }},
    };
    return fields;
}

}  // namespace

VectorField builtin_vector_field(const std::string& name) {
    const auto& r = registry();
    auto it = r.find(name);
    if (it == r.end()) {
        throw PreconditionError("unknown vector field '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> builtin_vector_field_names() {
    std::vector<std::string> names;
    for (const auto& [k, _] : registry()) {
        names.push_back(k);
    }
    return names;
}

SystemModel hovership_model() {
    Box sbox{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0)};
    Box abox{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 0.8)};
    auto failure = outside_box(sbox);
    return make_model("hovership", sbox, abox, builtin_vector_field("hovership"), 1.0, 0.01, std::move(failure));
}

}  // namespace viablearn
