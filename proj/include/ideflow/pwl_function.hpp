#pragma once

// Continuous piecewise-linear functions with exact rational breakpoints and
// values. Queue lengths and edge exit-time maps are PwlFunctions.
//
//   value(t) = values[0]                                  for t <= b_0
//   linear between (b_k, values[k]) and (b_{k+1}, values[k+1])
//   value(t) = values[n-1] + final_slope * (t - b_{n-1})  for t >= b_{n-1}
//
// The final segment extends to +infinity with `final_slope`; before the first
// breakpoint the function is constant (nothing in the library evaluates
// there, but the convention keeps eval total).

#include <algorithm>
#include <optional>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/rational.hpp"
#include "ideflow/step_function.hpp"

namespace ideflow {

class PwlFunction {
  public:
    PwlFunction() : bps_{Rat(0)}, vals_{Rat(0)}, final_slope_(0) {}

    PwlFunction(std::vector<Rat> breakpoints, std::vector<Rat> values, Rat final_slope)
        : bps_(std::move(breakpoints)), vals_(std::move(values)),
          final_slope_(std::move(final_slope)) {
        if (bps_.empty() || bps_.size() != vals_.size())
            throw ParamError("PwlFunction: breakpoints/values size mismatch");
        for (std::size_t k = 0; k + 1 < bps_.size(); ++k)
            if (!(bps_[k] < bps_[k + 1]))
                throw ParamError("PwlFunction: breakpoints must be strictly ascending");
    }

    static PwlFunction constant(const Rat& t0, const Rat& v) {
        return PwlFunction({t0}, {v}, Rat(0));
    }

    const std::vector<Rat>& breakpoints() const { return bps_; }
    const std::vector<Rat>& values() const { return vals_; }
    const Rat& final_slope() const { return final_slope_; }
    const Rat& start_time() const { return bps_.front(); }
    const Rat& end_time() const { return bps_.back(); }
    const Rat& end_value() const { return vals_.back(); }

    Rat eval(const Rat& t) const {
        if (!(bps_.front() < t)) return vals_.front();
        if (!(t < bps_.back())) return vals_.back() + final_slope_ * (t - bps_.back());
        const auto it = std::upper_bound(bps_.begin(), bps_.end(), t);
        const auto k = static_cast<std::size_t>(it - bps_.begin()) - 1;
        const Rat w = (t - bps_[k]) / (bps_[k + 1] - bps_[k]);
        return vals_[k] + (vals_[k + 1] - vals_[k]) * w;
    }

    /// Slope of the segment to the right of t (final_slope beyond the end).
    Rat right_slope(const Rat& t) const {
        if (!(t < bps_.back())) return final_slope_;
        if (t < bps_.front()) return Rat(0);
        const auto it = std::upper_bound(bps_.begin(), bps_.end(), t);
        const auto k = static_cast<std::size_t>(it - bps_.begin()) - 1;
        return (vals_[k + 1] - vals_[k]) / (bps_[k + 1] - bps_[k]);
    }

    /// Extends the function by a linear piece ending at (to, value); `to`
    /// must lie strictly beyond the current last breakpoint. Collinear
    /// extensions merge into the previous segment.
    void append_point(const Rat& to, const Rat& value) {
        if (!(bps_.back() < to)) throw InternalError("PwlFunction::append_point: non-monotone");
        if (bps_.size() >= 2) {
            const std::size_t n = bps_.size();
            const Rat prev_slope =
                (vals_[n - 1] - vals_[n - 2]) / (bps_[n - 1] - bps_[n - 2]);
            const Rat new_slope = (value - vals_.back()) / (to - bps_.back());
            if (prev_slope == new_slope) {
                bps_.back() = to;
                vals_.back() = value;
                return;
            }
        }
        bps_.push_back(to);
        vals_.push_back(value);
    }

    /// Smallest breakpoint strictly greater than t, if any.
    std::optional<Rat> next_breakpoint_after(const Rat& t) const {
        const auto it = std::upper_bound(bps_.begin(), bps_.end(), t);
        if (it == bps_.end()) return std::nullopt;
        return *it;
    }

    /// Earliest theta >= from with g(theta) == h(theta), requiring
    /// g(from) <= h(from). Returns nullopt when the two never meet.
    static std::optional<Rat> first_meet(const PwlFunction& g, const PwlFunction& h,
                                         const Rat& from) {
        if (h.eval(from) < g.eval(from))
            throw ParamError("PwlFunction::first_meet: g(from) must not exceed h(from)");
        std::vector<Rat> grid{from};
        for (const auto& b : g.bps_)
            if (from < b) grid.push_back(b);
        for (const auto& b : h.bps_)
            if (from < b) grid.push_back(b);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        // d = h - g is continuous piecewise linear on the grid, >= 0 at from.
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Rat a = grid[k];
            const Rat da = h.eval(a) - g.eval(a);
            if (da.is_zero()) return a;
            const Rat slope = h.right_slope(a) - g.right_slope(a);
            if (slope.sign() < 0) {
                const Rat hit = a + da / (-slope);
                // A hit exactly on the next grid point is found there as
                // d == 0; a hit beyond it needs the next segment's slopes.
                if (k + 1 == grid.size() || hit < grid[k + 1]) return hit;
            }
        }
        return std::nullopt;
    }

    /// True iff f(t) == g(t + shift) for all t in [lo, hi].
    static bool window_equal(const PwlFunction& f, const PwlFunction& g, const Rat& lo,
                             const Rat& hi, const Rat& shift) {
        if (hi < lo) return true;
        std::vector<Rat> grid{lo, hi};
        for (const auto& b : f.bps_)
            if (lo < b && b < hi) grid.push_back(b);
        for (const auto& b : g.bps_) {
            const Rat t = b - shift;
            if (lo < t && t < hi) grid.push_back(t);
        }
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        for (const auto& t : grid)
            if (!(f.eval(t) == g.eval(t + shift))) return false;
        return true;
    }

    friend bool operator==(const PwlFunction& a, const PwlFunction& b) {
        return a.bps_ == b.bps_ && a.vals_ == b.vals_ && a.final_slope_ == b.final_slope_;
    }

  private:
    std::vector<Rat> bps_;
    std::vector<Rat> vals_;
    Rat final_slope_;
};

inline PwlFunction StepFunction::integrate() const {
    const auto& bps = breakpoints();
    if (!bps.empty() && bps.front().sign() < 0)
        throw ParamError("StepFunction::integrate: negative breakpoint");
    PwlFunction F({Rat(0)}, {Rat(0)}, default_value());
    if (bps.size() < 2) return F;  // constant default everywhere
    Rat acc = default_value() * bps.front();  // [0, b_0) at default rate
    if (bps.front().sign() > 0) F.append_point(bps.front(), acc);
    for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
        acc += segment_values()[k] * (bps[k + 1] - bps[k]);
        F.append_point(bps[k + 1], acc);
    }
    // Beyond the core the slope is the default value again, captured by
    // final_slope; append_point merges collinear pieces so the invariant
    // final segment slope == default holds by construction here.
    return PwlFunction(F.breakpoints(), F.values(), default_value());
}

}  // namespace ideflow
