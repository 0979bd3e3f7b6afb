#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "viablearn/dynamics.hpp"

namespace viablearn {

/// Uniformly spaced axis including both endpoints.
struct Axis {
    double lower = 0.0;
    double upper = 1.0;
    std::size_t points = 2;

    double spacing() const { return (upper - lower) / static_cast<double>(points - 1); }
    double point(std::size_t k) const;

    bool operator==(const Axis&) const = default;
};

/// Regular grid over a state box and an action box. Flat indices are
/// row-major with the last axis varying fastest, so increasing flat index
/// is lexicographic order of the coordinates.
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(std::vector<Axis> state_axes, std::vector<Axis> action_axes);

    /// Grid with `state_points[d]` / `action_points[d]` points over the model boxes.
    static GridSpec over(const Box& state_box, const Box& action_box, const std::vector<std::size_t>& state_points,
                         const std::vector<std::size_t>& action_points);

    const std::vector<Axis>& state_axes() const { return state_axes_; }
    const std::vector<Axis>& action_axes() const { return action_axes_; }
    std::size_t state_dim() const { return state_axes_.size(); }
    std::size_t action_dim() const { return action_axes_.size(); }
    std::size_t state_count() const { return state_count_; }
    std::size_t action_count() const { return action_count_; }
    std::size_t pair_count() const { return state_count_ * action_count_; }

    State state_point(std::size_t cell) const;
    Action action_point(std::size_t cell) const;

    /// Per-axis multi-index of a flat state / action cell.
    std::vector<std::size_t> state_multi(std::size_t cell) const;
    std::size_t state_flat(const std::vector<std::size_t>& multi) const;

    bool operator==(const GridSpec& o) const {
        return state_axes_ == o.state_axes_ && action_axes_ == o.action_axes_;
    }

private:
    std::vector<Axis> state_axes_;
    std::vector<Axis> action_axes_;
    std::size_t state_count_ = 0;
    std::size_t action_count_ = 0;
};

/// Nearest grid point on each axis, ties to the lower index. Returns
/// nullopt ("outside") when any coordinate lies outside the axis range.
/// Throws PreconditionError on non-finite input.
std::optional<std::size_t> locate(const GridSpec& grid, const State& s);
std::optional<std::size_t> locate_action(const GridSpec& grid, const Action& a);

/// Grid points enclosing `s` (2^n corners, collapsed where `s` sits on a
/// grid line). Empty when outside.
std::vector<std::size_t> enclosing_state_cells(const GridSpec& grid, const State& s);

enum class Membership { Nearest, Conservative };

/// Subset of the state grid.
class SSet {
public:
    SSet() = default;
    explicit SSet(GridSpec grid, bool fill = false);

    const GridSpec& grid() const { return grid_; }
    std::size_t size() const { return bits_.size(); }
    bool contains(std::size_t cell) const { return bits_[cell]; }
    void set(std::size_t cell, bool v = true) { bits_[cell] = v; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    std::vector<std::size_t> cells() const;

    bool operator==(const SSet&) const = default;

private:
    GridSpec grid_;
    std::vector<bool> bits_;
};

/// Subset of the state-action grid.
class QSet {
public:
    QSet() = default;
    explicit QSet(GridSpec grid, bool fill = false);

    const GridSpec& grid() const { return grid_; }
    std::size_t size() const { return bits_.size(); }
    std::size_t index(std::size_t state_cell, std::size_t action_cell) const {
        return state_cell * grid_.action_count() + action_cell;
    }
    bool contains(std::size_t state_cell, std::size_t action_cell) const {
        return bits_[index(state_cell, action_cell)];
    }
    bool contains_flat(std::size_t flat) const { return bits_[flat]; }
    void set(std::size_t state_cell, std::size_t action_cell, bool v = true) {
        bits_[index(state_cell, action_cell)] = v;
    }
    void set_flat(std::size_t flat, bool v = true) { bits_[flat] = v; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }

    bool operator==(const QSet&) const = default;

private:
    GridSpec grid_;
    std::vector<bool> bits_;
};

SSet project(const QSet& q);
std::vector<std::size_t> action_slice(const QSet& q, std::size_t state_cell);

/// Action slice seen from a continuous state. Nearest mode uses the slice of
/// the nearest cell; conservative mode intersects the slices of every
/// enclosing grid point. Empty when `s` is outside the grid.
std::vector<std::size_t> action_slice_at(const QSet& q, const State& s, Membership mode);

QSet set_union(const QSet& a, const QSet& b);
QSet set_difference(const QSet& a, const QSet& b);
QSet set_intersection(const QSet& a, const QSet& b);
SSet set_union(const SSet& a, const SSet& b);
SSet set_intersection(const SSet& a, const SSet& b);
std::size_t count(const QSet& q);
std::size_t count(const SSet& s);

/// True when every member of `a` is a member of `b`.
bool is_subset(const QSet& a, const QSet& b);
bool is_subset(const SSet& a, const SSet& b);

}  // namespace viablearn
