#pragma once

// Water-filling flow distribution at a single node: given the marginal-cost
// functions h_i of the active outgoing edges (two-piece linear: flat at
// beta up to gamma, then rising with slope 1/alpha), split the node balance b
// so that every positive share has equal marginal cost ("water level") and
// every zero share has h_i(0) at or above it.

#include <algorithm>
#include <string>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/instance.hpp"
#include "ideflow/rational.hpp"

namespace ideflow {

/// Marginal cost of pushing rate z into one edge:
///   h(z) = beta            for z <= gamma,
///   h(z) = beta + (z-gamma)/alpha  for z >= gamma.
struct HFunc {
    std::string id;  // owning edge id (used for deterministic tie-breaks)
    Rat beta;
    Rat gamma;  // >= 0
    Rat alpha;  // > 0

    Rat eval(const Rat& z) const {
        return z <= gamma ? beta : beta + (z - gamma) / alpha;
    }
    /// Largest share consistent with water level L (inverse of eval).
    Rat fill_at(const Rat& L) const {
        return L < beta ? Rat(0) : gamma + alpha * (L - beta);
    }
    /// Exact integral of h over [0, z].
    Rat integral_to(const Rat& z) const {
        if (z <= gamma) return beta * z;
        const Rat over = z - gamma;
        return beta * z + over * over / (2 * alpha);
    }
};

/// Marginal-cost function of an edge whose head already carries label slope
/// a_w. A standing queue makes the cost fall at rate 1 when starved, hence
/// the level starts at a_w - 1; an empty edge is free up to capacity.
inline HFunc build_h(const Edge& e, const Rat& a_w, const Rat& q) {
    if (q.sign() < 0) throw ParamError("build_h: negative queue on edge '" + e.id + "'");
    if (q.sign() > 0) return {e.id, a_w - 1, Rat(0), e.nu};
    return {e.id, a_w, e.nu, e.nu};
}

struct Split {
    std::vector<Rat> z;  // aligned with the input HFunc order
    Rat level;           // common marginal cost = label slope a_v
};

inline void sort_by_beta(std::vector<HFunc>& hs) {
    std::sort(hs.begin(), hs.end(), [](const HFunc& a, const HFunc& b) {
        if (a.beta != b.beta) return a.beta < b.beta;
        return a.id < b.id;
    });
}

/// Water filling. `hs` must be sorted by (beta, id) ascending; `b >= 0`.
inline Split waterfill(const Rat& b, const std::vector<HFunc>& hs) {
    if (b.sign() < 0) throw ParamError("waterfill: negative balance");
    for (std::size_t i = 0; i + 1 < hs.size(); ++i) {
        if (hs[i].beta > hs[i + 1].beta ||
            (hs[i].beta == hs[i + 1].beta && hs[i].id > hs[i + 1].id))
            throw ParamError("waterfill: input not sorted by (beta, id)");
    }
    for (const auto& h : hs) {
        if (!(h.alpha > 0)) throw ParamError("waterfill: alpha must be positive");
        if (h.gamma.sign() < 0) throw ParamError("waterfill: gamma must be nonnegative");
    }
    const std::size_t p = hs.size();
    Split out;
    out.z.assign(p, Rat(0));
    if (b.is_zero()) {
        out.level = p ? hs.front().beta : Rat(0);
        return out;
    }
    if (p == 0) throw ParamError("waterfill: positive balance but no edges");

    // Largest r such that raising the level to beta_r keeps the total fill
    // of edges 1..r within b (r = 0 when even edge 1 cannot reach beta_1).
    std::size_t r = 0;
    for (std::size_t cand = 1; cand <= p; ++cand) {
        Rat total;
        for (std::size_t i = 0; i < cand; ++i) total += hs[i].fill_at(hs[cand - 1].beta);
        if (total <= b)
            r = cand;
        else
            break;
    }

    if (r < p) {
        Rat at_next;  // total fill of 1..r at the next threshold beta_{r+1}
        for (std::size_t i = 0; i < r; ++i) at_next += hs[i].fill_at(hs[r].beta);
        if (at_next <= b) {
            // Level sits exactly at beta_{r+1}: edges 1..r fill to it, edge
            // r+1 absorbs the slack inside its flat segment.
            for (std::size_t i = 0; i < r; ++i) out.z[i] = hs[i].fill_at(hs[r].beta);
            out.z[r] = b - at_next;
            out.level = hs[r].beta;
            return out;
        }
    }

    // Level lies strictly between beta_r and beta_{r+1}: edges 1..r share the
    // residual in proportion to their alpha.
    Rat at_r, alpha_sum;
    for (std::size_t i = 0; i < r; ++i) {
        out.z[i] = hs[i].fill_at(hs[r - 1].beta);
        at_r += out.z[i];
        alpha_sum += hs[i].alpha;
    }
    const Rat residual = b - at_r;
    for (std::size_t i = 0; i < r; ++i) out.z[i] += hs[i].alpha / alpha_sum * residual;
    out.level = hs[r - 1].beta + residual / alpha_sum;
    return out;
}

/// Objective of the flow-distribution program: sum of integrals of the
/// marginal costs. Used by brute-force optimality oracles in tests.
inline Rat opt_objective(const std::vector<HFunc>& hs, const std::vector<Rat>& z) {
    if (hs.size() != z.size()) throw ParamError("opt_objective: size mismatch");
    Rat total;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        if (z[i].sign() < 0) throw ParamError("opt_objective: negative share");
        total += hs[i].integral_to(z[i]);
    }
    return total;
}

}  // namespace ideflow
