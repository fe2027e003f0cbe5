#pragma once

// Right-continuous piecewise-constant functions of time with exact rational
// breakpoints and values. The canonical form is:
//
//   value(t) = default_value                 for t < b_0 or t >= b_{n-1}
//   value(t) = values[k]                     for b_k <= t < b_{k+1}
//
// i.e. `breakpoints` carries n entries and `values` n-1 segment values; the
// function equals `default_value` outside the covered core. Network inflows,
// edge in/outflow rates and node inflow rates are all StepFunctions with
// default 0.

#include <algorithm>
#include <optional>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/rational.hpp"

namespace ideflow {

class PwlFunction;  // forward declaration (integrate returns one)

class StepFunction {
  public:
    StepFunction() = default;
    explicit StepFunction(Rat default_value) : default_(std::move(default_value)) {}

    /// Indicator-style box: `rate` on [from, to), default elsewhere.
    static StepFunction box(const Rat& from, const Rat& to, const Rat& rate) {
        if (!(from < to)) throw ParamError("StepFunction::box: from must precede to");
        StepFunction f;
        f.bps_ = {from, to};
        f.vals_ = {rate};
        f.normalize();
        return f;
    }

    const Rat& default_value() const { return default_; }
    const std::vector<Rat>& breakpoints() const { return bps_; }
    const std::vector<Rat>& segment_values() const { return vals_; }
    bool is_constant() const { return bps_.size() < 2; }

    /// Right-limit evaluation: the value on the segment starting at or
    /// covering t (spec: eval at a breakpoint yields the value on its right).
    Rat eval(const Rat& t) const {
        if (bps_.size() < 2 || t < bps_.front() || !(t < bps_.back())) return default_;
        // Last breakpoint b_k with b_k <= t.
        const auto it = std::upper_bound(bps_.begin(), bps_.end(), t);
        const auto k = static_cast<std::size_t>(it - bps_.begin()) - 1;
        return vals_[k];
    }

    /// Appends value v on [from, to); `from` must not precede the covered
    /// core's end. A gap between the core and `from` implicitly keeps the
    /// default value. Engine phase commits use this append-only interface.
    void append_segment(const Rat& from, const Rat& to, const Rat& v) {
        if (!(from < to)) throw ParamError("StepFunction::append_segment: empty interval");
        if (!bps_.empty() && from < bps_.back())
            throw InternalError("StepFunction::append_segment: non-monotone append");
        if (bps_.empty()) {
            if (v == default_) return;  // indistinguishable from default tail
            bps_ = {from, to};
            vals_ = {v};
            return;
        }
        if (from == bps_.back()) {
            if (!vals_.empty() && vals_.back() == v) {
                bps_.back() = to;  // extend the current segment
                return;
            }
            if (v == default_) return;  // outside-core default already applies
            bps_.push_back(to);
            vals_.push_back(v);
            return;
        }
        // Gap [core_end, from) keeps the default; materialize it only when the
        // appended value differs from the default.
        if (v == default_) return;
        bps_.push_back(from);
        vals_.push_back(default_);
        bps_.push_back(to);
        vals_.push_back(v);
    }

    /// Collapses redundant breakpoints; trims default-valued edges.
    void normalize() {
        if (bps_.size() < 2) {
            bps_.clear();
            vals_.clear();
            return;
        }
        std::vector<Rat> nb{bps_.front()};
        std::vector<Rat> nv;
        for (std::size_t k = 0; k + 1 < bps_.size(); ++k) {
            if (!nv.empty() && nv.back() == vals_[k]) {
                nb.back() = bps_[k + 1];  // merge equal-valued neighbours
            } else {
                nb.push_back(bps_[k + 1]);
                nv.push_back(vals_[k]);
            }
        }
        while (!nv.empty() && nv.front() == default_) {
            nb.erase(nb.begin());
            nv.erase(nv.begin());
        }
        while (!nv.empty() && nv.back() == default_) {
            nb.pop_back();
            nv.pop_back();
        }
        if (nv.empty()) {
            bps_.clear();
            vals_.clear();
        } else {
            bps_ = std::move(nb);
            vals_ = std::move(nv);
        }
    }

    StepFunction normalized() const {
        StepFunction f = *this;
        f.normalize();
        return f;
    }

    /// Smallest breakpoint strictly greater than t, if any.
    std::optional<Rat> next_breakpoint_after(const Rat& t) const {
        const auto it = std::upper_bound(bps_.begin(), bps_.end(), t);
        if (it == bps_.end()) return std::nullopt;
        return *it;
    }

    /// Pointwise sum; defaults add as well.
    static StepFunction sum(const std::vector<const StepFunction*>& fs) {
        StepFunction out;
        Rat def = 0;
        std::vector<Rat> grid;
        for (const auto* f : fs) {
            def += f->default_value();
            grid.insert(grid.end(), f->breakpoints().begin(), f->breakpoints().end());
        }
        out.default_ = def;
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        if (grid.size() < 2) return out;
        out.bps_ = grid;
        out.vals_.reserve(grid.size() - 1);
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            Rat v = 0;
            for (const auto* f : fs) v += f->eval(grid[k]);
            out.vals_.push_back(std::move(v));
        }
        out.normalize();
        return out;
    }

    /// True iff f(t) == g(t + shift) for all t in [lo, hi).
    static bool window_equal(const StepFunction& f, const StepFunction& g, const Rat& lo,
                             const Rat& hi, const Rat& shift) {
        if (!(lo < hi)) return true;
        std::vector<Rat> grid{lo};
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

    friend bool operator==(const StepFunction& a, const StepFunction& b) {
        const StepFunction na = a.normalized(), nb = b.normalized();
        return na.default_ == nb.default_ && na.bps_ == nb.bps_ && na.vals_ == nb.vals_;
    }

    /// Exact cumulative integral F(t) = \int_0^t f, as a PwlFunction anchored
    /// at F(0) = 0. Requires all breakpoints >= 0 (times are nonnegative).
    PwlFunction integrate() const;

    /// \int_0^t f evaluated at a single point (no PWL construction).
    Rat integral_to(const Rat& t) const {
        if (t.sign() < 0) throw ParamError("StepFunction::integral_to: negative time");
        if (bps_.size() < 2) return default_ * t;
        Rat acc = 0;
        Rat cursor = 0;
        if (bps_.front() > 0) {
            const Rat stop = min(t, bps_.front());
            acc += default_ * stop;
            cursor = stop;
        }
        if (!(cursor < t)) return acc;
        for (std::size_t k = 0; k + 1 < bps_.size(); ++k) {
            if (!(bps_[k] < t)) break;
            const Rat lo = max(bps_[k], cursor);
            const Rat hi = min(bps_[k + 1], t);
            if (lo < hi) acc += vals_[k] * (hi - lo);
        }
        if (bps_.back() < t) acc += default_ * (t - bps_.back());
        return acc;
    }

  private:
    Rat default_{};
    std::vector<Rat> bps_;
    std::vector<Rat> vals_;
};

}  // namespace ideflow
