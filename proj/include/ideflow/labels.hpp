#pragma once

// Snapshot shortest-path labels: given the queue lengths at one instant, the
// distance of every node to a sink under instantaneous edge costs
// c_e = tau_e + q_e / nu_e, plus the set of tight ("active") edges.

#include <optional>
#include <set>
#include <vector>

#include "ideflow/instance.hpp"
#include "ideflow/rational.hpp"

namespace ideflow {

/// Instantaneous travel time of an edge carrying queue q: tau + q / nu.
inline Rat instantaneous_cost(const Edge& e, const Rat& q) { return e.tau + q / e.nu; }

/// Labels toward one sink. Labels depend on the sink only, so commodities
/// sharing a sink share a LabelView.
struct LabelView {
    std::vector<std::optional<Rat>> dist;  // per node; nullopt = cannot reach sink
    std::vector<char> tight;               // per edge; 1 iff dist[tail] = c_e + dist[head]

    bool reachable(int node) const { return dist[node].has_value(); }
};

/// Exact single-sink shortest paths over the reversed graph. Priority ties
/// are broken by node id so the settling order is deterministic.
inline LabelView compute_labels(const Instance& inst, const std::vector<Rat>& queues,
                                int sink) {
    if (queues.size() != inst.edges.size())
        throw ParamError("compute_labels: one queue value per edge required");
    LabelView out;
    out.dist.assign(inst.nodes.size(), std::nullopt);
    out.tight.assign(inst.edges.size(), 0);

    std::vector<Rat> cost(inst.edges.size());
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        if (queues[e].sign() < 0)
            throw ParamError("compute_labels: negative queue on edge '" +
                             inst.edges[e].id + "'");
        cost[e] = instantaneous_cost(inst.edges[e], queues[e]);
    }

    const auto by_dist_then_id = [&](const std::pair<Rat, int>& a,
                                     const std::pair<Rat, int>& b) {
        if (a.first != b.first) return a.first < b.first;
        return inst.nodes[a.second] < inst.nodes[b.second];
    };
    std::set<std::pair<Rat, int>, decltype(by_dist_then_id)> frontier(by_dist_then_id);
    out.dist[sink] = Rat(0);
    frontier.emplace(Rat(0), sink);
    while (!frontier.empty()) {
        const auto [d, v] = *frontier.begin();
        frontier.erase(frontier.begin());
        if (*out.dist[v] != d) continue;  // stale entry
        for (const int e : inst.in_edges[v]) {
            const int u = inst.edges[e].tail;
            const Rat nd = d + cost[e];
            if (!out.dist[u] || nd < *out.dist[u]) {
                if (out.dist[u]) frontier.erase({*out.dist[u], u});
                out.dist[u] = nd;
                frontier.emplace(nd, u);
            }
        }
    }

    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        const auto& tl = out.dist[inst.edges[e].tail];
        const auto& hd = out.dist[inst.edges[e].head];
        if (tl && hd && *tl == cost[e] + *hd) out.tight[e] = 1;
    }
    return out;
}

}  // namespace ideflow
