#include "viablearn/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "viablearn/errors.hpp"

namespace viablearn {

namespace {

void check_axes(const std::vector<Axis>& axes, const char* what) {
    if (axes.empty()) {
        throw PreconditionError(std::string(what) + ": at least one axis required");
    }
    for (const auto& ax : axes) {
        if (ax.points < 2 || !(ax.lower < ax.upper) || !std::isfinite(ax.lower) || !std::isfinite(ax.upper)) {
            throw PreconditionError(std::string(what) + ": axis needs >= 2 points and finite lower < upper");
        }
    }
}

std::size_t product(const std::vector<Axis>& axes) {
    std::size_t n = 1;
    for (const auto& ax : axes) {
        n *= ax.points;
    }
    return n;
}

std::optional<std::size_t> nearest_on_axis(const Axis& ax, double x) {
    if (!std::isfinite(x)) {
        throw PreconditionError("locate: non-finite coordinate");
    }
    if (x < ax.lower || x > ax.upper) {
        return std::nullopt;
    }
    const double t = (x - ax.lower) / ax.spacing();
    // ceil(t - 1/2) rounds to nearest with exact halves going down.
    auto k = static_cast<long long>(std::ceil(t - 0.5));
    k = std::clamp<long long>(k, 0, static_cast<long long>(ax.points) - 1);
    return static_cast<std::size_t>(k);
}

std::optional<std::size_t> locate_on(const std::vector<Axis>& axes, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != axes.size()) {
        throw PreconditionError("locate: dimension mismatch");
    }
    std::size_t flat = 0;
    bool outside = false;
    for (std::size_t d = 0; d < axes.size(); ++d) {
        auto k = nearest_on_axis(axes[d], x[static_cast<Eigen::Index>(d)]);
        if (!k) {
            outside = true;
            continue;  // still validate remaining coordinates for finiteness
        }
        flat = flat * axes[d].points + *k;
    }
    if (outside) {
        return std::nullopt;
    }
    return flat;
}

Eigen::VectorXd point_on(const std::vector<Axis>& axes, std::size_t cell) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t d = axes.size(); d-- > 0;) {
        x[static_cast<Eigen::Index>(d)] = axes[d].point(cell % axes[d].points);
        cell /= axes[d].points;
    }
    return x;
}

template <typename Set>
void require_same_grid(const Set& a, const Set& b) {
    if (!(a.grid() == b.grid())) {
        throw GridMismatch("set operation on sets with different grids");
    }
}

}  // namespace

double Axis::point(std::size_t k) const {
    if (k + 1 == points) {
        return upper;
    }
    return lower + static_cast<double>(k) * spacing();
}

GridSpec::GridSpec(std::vector<Axis> state_axes, std::vector<Axis> action_axes)
    : state_axes_(std::move(state_axes)), action_axes_(std::move(action_axes)) {
    check_axes(state_axes_, "state grid");
    check_axes(action_axes_, "action grid");
    state_count_ = product(state_axes_);
    action_count_ = product(action_axes_);
}

GridSpec GridSpec::over(const Box& state_box, const Box& action_box, const std::vector<std::size_t>& state_points,
                        const std::vector<std::size_t>& action_points) {
    if (state_points.size() != static_cast<std::size_t>(state_box.dim()) ||
        action_points.size() != static_cast<std::size_t>(action_box.dim())) {
        throw PreconditionError("grid point counts do not match box dimensions");
    }
    std::vector<Axis> sa;
    std::vector<Axis> aa;
    for (std::size_t d = 0; d < state_points.size(); ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        sa.push_back({state_box.lower[i], state_box.upper[i], state_points[d]});
    }
    for (std::size_t d = 0; d < action_points.size(); ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        aa.push_back({action_box.lower[i], action_box.upper[i], action_points[d]});
    }
    return GridSpec(std::move(sa), std::move(aa));
}

State GridSpec::state_point(std::size_t cell) const { return point_on(state_axes_, cell); }
Action GridSpec::action_point(std::size_t cell) const { return point_on(action_axes_, cell); }

std::vector<std::size_t> GridSpec::state_multi(std::size_t cell) const {
    std::vector<std::size_t> m(state_axes_.size());
    for (std::size_t d = state_axes_.size(); d-- > 0;) {
        m[d] = cell % state_axes_[d].points;
        cell /= state_axes_[d].points;
    }
    return m;
}

std::size_t GridSpec::state_flat(const std::vector<std::size_t>& multi) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < state_axes_.size(); ++d) {
        flat = flat * state_axes_[d].points + multi[d];
    }
    return flat;
}

std::optional<std::size_t> locate(const GridSpec& grid, const State& s) { return locate_on(grid.state_axes(), s); }

std::optional<std::size_t> locate_action(const GridSpec& grid, const Action& a) {
    return locate_on(grid.action_axes(), a);
}

std::vector<std::size_t> enclosing_state_cells(const GridSpec& grid, const State& s) {
    const auto& axes = grid.state_axes();
    if (!locate(grid, s)) {
        return {};
    }
    // Per-axis candidate indices: one when on a grid line, else floor and ceil.
    std::vector<std::vector<std::size_t>> options(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const double x = s[static_cast<Eigen::Index>(d)];
        const double t = (x - axes[d].lower) / axes[d].spacing();
        auto lo = static_cast<std::size_t>(std::clamp<double>(std::floor(t), 0.0, double(axes[d].points - 1)));
        if (axes[d].point(lo) == x || lo + 1 >= axes[d].points) {
            options[d] = {lo};
        } else if (axes[d].point(lo + 1) == x) {
            options[d] = {lo + 1};
        } else {
            options[d] = {lo, lo + 1};
        }
    }
    std::vector<std::size_t> cells{0};
    for (std::size_t d = 0; d < axes.size(); ++d) {
        std::vector<std::size_t> next;
        for (auto c : cells) {
            for (auto k : options[d]) {
                next.push_back(c * axes[d].points + k);
            }
        }
        cells = std::move(next);
    }
    return cells;
}

SSet::SSet(GridSpec grid, bool fill) : grid_(std::move(grid)), bits_(grid_.state_count(), fill) {}

std::size_t SSet::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

std::vector<std::size_t> SSet::cells() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) {
            out.push_back(i);
        }
    }
    return out;
}

QSet::QSet(GridSpec grid, bool fill) : grid_(std::move(grid)), bits_(grid_.pair_count(), fill) {}

std::size_t QSet::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

SSet project(const QSet& q) {
    const auto& g = q.grid();
    SSet out(g);
    for (std::size_t i = 0; i < g.state_count(); ++i) {
        for (std::size_t j = 0; j < g.action_count(); ++j) {
            if (q.contains(i, j)) {
                out.set(i);
                break;
            }
        }
    }
    return out;
}

std::vector<std::size_t> action_slice(const QSet& q, std::size_t state_cell) {
    if (state_cell >= q.grid().state_count()) {
        throw PreconditionError("action_slice: state cell out of range");
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < q.grid().action_count(); ++j) {
        if (q.contains(state_cell, j)) {
            out.push_back(j);
        }
    }
    return out;
}

std::vector<std::size_t> action_slice_at(const QSet& q, const State& s, Membership mode) {
    if (mode == Membership::Nearest) {
        auto cell = locate(q.grid(), s);
        return cell ? action_slice(q, *cell) : std::vector<std::size_t>{};
    }
    auto corners = enclosing_state_cells(q.grid(), s);
    if (corners.empty()) {
        return {};
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < q.grid().action_count(); ++j) {
        bool all = true;
        for (auto c : corners) {
            all = all && q.contains(c, j);
        }
        if (all) {
            out.push_back(j);
        }
    }
    return out;
}

namespace {

template <typename Set, typename Op>
Set pointwise(const Set& a, const Set& b, Op op) {
    require_same_grid(a, b);
    Set out(a.grid());
    if constexpr (std::is_same_v<Set, QSet>) {
        for (std::size_t k = 0; k < a.size(); ++k) {
            out.set_flat(k, op(a.contains_flat(k), b.contains_flat(k)));
        }
    } else {
        for (std::size_t k = 0; k < a.size(); ++k) {
            out.set(k, op(a.contains(k), b.contains(k)));
        }
    }
    return out;
}

}  // namespace

QSet set_union(const QSet& a, const QSet& b) {
    return pointwise(a, b, [](bool x, bool y) { return x || y; });
}
QSet set_difference(const QSet& a, const QSet& b) {
    return pointwise(a, b, [](bool x, bool y) { return x && !y; });
}
QSet set_intersection(const QSet& a, const QSet& b) {
    return pointwise(a, b, [](bool x, bool y) { return x && y; });
}
SSet set_union(const SSet& a, const SSet& b) {
    return pointwise(a, b, [](bool x, bool y) { return x || y; });
}
SSet set_intersection(const SSet& a, const SSet& b) {
    return pointwise(a, b, [](bool x, bool y) { return x && y; });
}
std::size_t count(const QSet& q) { return q.count(); }
std::size_t count(const SSet& s) { return s.count(); }

bool is_subset(const QSet& a, const QSet& b) {
    require_same_grid(a, b);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a.contains_flat(k) && !b.contains_flat(k)) {
            return false;
        }
    }
    return true;
}

bool is_subset(const SSet& a, const SSet& b) {
    require_same_grid(a, b);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a.contains(k) && !b.contains(k)) {
            return false;
        }
    }
    return true;
}

}  // namespace viablearn
