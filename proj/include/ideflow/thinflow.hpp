#pragma once

// Instantaneous flow-rate equilibria ("thin flows") at a phase start. Given,
// per solver commodity, the acyclic set of currently shortest ("active")
// edges, the node inflow rates b, and per edge the queue sign, find rates x
// and label slopes a with:
//   TF1  sum of x over active out-edges of v equals b at every non-sink v
//   TF2  x = 0 off the active set
//   TF3  a = 0 at the sink
//   TF4  a_v = min over active out-edges of g_e(X_e)/nu_e + a_w
//   TF5  x_{g,e} > 0 implies the minimum in TF4 is attained at e
// where X_e sums x over all commodities and g_e is the queue-growth rate.
//
// Strategy: constant-fold everything that is forced (zero demands, single
// out-edges, nodes whose out-star is used by one commodity with known head
// slopes -> water filling); the rare leftovers couple through shared edges
// and are solved per connected component by enumerating the binary structure
// (which edges are tight, which empty edges grow queues) lexicographically
// and testing each guess with an exact phase-one simplex.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/instance.hpp"
#include "ideflow/rational.hpp"
#include "ideflow/simplex.hpp"
#include "ideflow/verdict.hpp"
#include "ideflow/waterfill.hpp"

namespace ideflow {

struct CapExceeded : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoSolution : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Queue growth rate of an edge carrying total rate `total`: a standing queue
/// drains when underfed; an empty queue only ever grows.
inline Rat g_eval(const Edge& e, const Rat& total, bool queue_positive) {
    if (total.sign() < 0) throw ParamError("g_eval: negative edge rate");
    if (queue_positive) return total - e.nu;
    return max(total - e.nu, Rat(0));
}

struct TfCommodity {
    std::string id;             // free-form label used in witnesses
    int sink = -1;
    std::vector<char> active;   // per edge of the instance
    std::map<int, Rat> demand;  // node -> rate; entries must be >= 0
};

struct ThinFlowProblem {
    const Instance* inst = nullptr;
    std::vector<char> queue_positive;  // per edge
    std::vector<TfCommodity> commodities;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["queue_positive"] = nlohmann::ordered_json::array();
        for (std::size_t e = 0; e < queue_positive.size(); ++e)
            if (queue_positive[e]) j["queue_positive"].push_back(inst->edges[e].id);
        j["commodities"] = nlohmann::ordered_json::array();
        for (const auto& c : commodities) {
            nlohmann::ordered_json jc;
            jc["id"] = c.id;
            jc["sink"] = inst->nodes[c.sink];
            jc["active"] = nlohmann::ordered_json::array();
            for (std::size_t e = 0; e < c.active.size(); ++e)
                if (c.active[e]) jc["active"].push_back(inst->edges[e].id);
            jc["demand"] = nlohmann::ordered_json::object();
            for (const auto& [v, b] : c.demand) jc["demand"][inst->nodes[v]] = b.str();
            j["commodities"].push_back(std::move(jc));
        }
        return j;
    }
};

struct ThinFlow {
    std::vector<std::map<int, Rat>> x;  // [commodity] edge -> rate, scope edges
    std::vector<std::map<int, Rat>> a;  // [commodity] node -> slope, scope nodes
};

struct ThinFlowOptions {
    int binary_cap = 24;   // max binary decisions per coupled component
    bool parallel = true;  // allow concurrent guess feasibility checks
};

namespace tf_detail {

/// Per-commodity view of the usable part of the active set: the nodes that
/// reach the sink inside it, the edges between them, the sorted out-stars,
/// and a processing order with heads before tails.
struct Scope {
    std::vector<char> node;
    std::vector<char> edge;
    std::vector<std::vector<int>> out;  // active out-edges per node, by edge id
    std::vector<int> order;             // sink first, then upstream
};

inline Scope build_scope(const ThinFlowProblem& p, std::size_t g) {
    const Instance& inst = *p.inst;
    const TfCommodity& c = p.commodities[g];
    if (c.sink < 0 || c.sink >= static_cast<int>(inst.nodes.size()))
        throw ValidationError("commodity '" + c.id + "': bad sink");
    if (c.active.size() != inst.edges.size())
        throw ValidationError("commodity '" + c.id + "': active set size mismatch");

    Scope s;
    s.node.assign(inst.nodes.size(), 0);
    s.edge.assign(inst.edges.size(), 0);
    s.out.assign(inst.nodes.size(), {});
    s.node[c.sink] = 1;
    std::vector<int> queue{c.sink};
    while (!queue.empty()) {
        const int v = queue.back();
        queue.pop_back();
        for (const int e : inst.in_edges[v]) {
            if (!c.active[e]) continue;
            s.edge[e] = 1;
            const int u = inst.edges[e].tail;
            if (!s.node[u]) {
                s.node[u] = 1;
                queue.push_back(u);
            }
        }
    }
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        if (!c.active[e]) continue;
        if (!s.edge[e])
            throw ValidationError("commodity '" + c.id + "': active edge '" +
                                  inst.edges[e].id + "' cannot reach the sink inside "
                                  "the active set");
        if (inst.edges[e].tail == c.sink)
            throw ValidationError("commodity '" + c.id + "': active edge '" +
                                  inst.edges[e].id + "' leaves the sink");
        s.out[inst.edges[e].tail].push_back(static_cast<int>(e));
    }
    for (auto& star : s.out)
        std::sort(star.begin(), star.end(), [&](int a, int b) {
            return inst.edges[a].id < inst.edges[b].id;
        });
    for (const auto& [v, b] : c.demand) {
        if (b.sign() < 0)
            throw ValidationError("commodity '" + c.id + "': negative demand at '" +
                                  inst.nodes[v] + "'");
        if (b.sign() > 0 && !s.node[v])
            throw ValidationError("commodity '" + c.id + "': demand node '" +
                                  inst.nodes[v] +
                                  "' cannot reach the sink inside the active set");
    }

    // Order with every head before its tails (Kahn over reversed edges);
    // ready nodes are popped in node-id order for determinism.
    std::vector<int> blockers(inst.nodes.size(), 0);
    for (std::size_t v = 0; v < inst.nodes.size(); ++v)
        if (s.node[v]) blockers[v] = static_cast<int>(s.out[v].size());
    const auto by_id = [&](int a, int b) { return inst.nodes[a] < inst.nodes[b]; };
    std::set<int, decltype(by_id)> ready(by_id);
    ready.insert(c.sink);
    while (!ready.empty()) {
        const int v = *ready.begin();
        ready.erase(ready.begin());
        s.order.push_back(v);
        for (const int e : inst.in_edges[v]) {
            if (!s.edge[e]) continue;
            const int u = inst.edges[e].tail;
            if (--blockers[u] == 0) ready.insert(u);
        }
    }
    std::size_t scope_count = 0;
    for (const char f : s.node) scope_count += (f != 0);
    if (s.order.size() != scope_count)
        throw ValidationError("commodity '" + c.id + "': active set contains a cycle");
    return s;
}

}  // namespace tf_detail

/// Verifies TF1-TF5 for a proposed solution; never throws on bad solutions,
/// only on malformed problems (reported as a failing "problem" check).
inline Verdict check_thinflow(const ThinFlowProblem& p, const ThinFlow& tf) {
    Verdict v;
    std::vector<tf_detail::Scope> scopes;
    try {
        if (!p.inst) throw ValidationError("problem has no instance");
        if (p.queue_positive.size() != p.inst->edges.size())
            throw ValidationError("queue sign vector size mismatch");
        for (std::size_t g = 0; g < p.commodities.size(); ++g)
            scopes.push_back(tf_detail::build_scope(p, g));
        if (tf.x.size() != p.commodities.size() || tf.a.size() != p.commodities.size())
            throw ValidationError("solution commodity count mismatch");
    } catch (const ValidationError& err) {
        Witness w;
        w.note = err.what();
        v.add_fail("problem", w);
        return v;
    }
    v.add_pass("problem");
    const Instance& inst = *p.inst;

    // Aggregated rates; missing entries count as zero.
    const auto x_of = [&](std::size_t g, int e) -> Rat {
        const auto it = tf.x[g].find(e);
        return it == tf.x[g].end() ? Rat(0) : it->second;
    };
    std::vector<Rat> total(inst.edges.size());
    for (std::size_t g = 0; g < p.commodities.size(); ++g)
        for (const auto& [e, val] : tf.x[g]) total[e] += val;

    for (std::size_t g = 0; g < p.commodities.size(); ++g) {
        const auto& c = p.commodities[g];
        const auto& scope = scopes[g];
        const auto a_of = [&](int node) -> std::optional<Rat> {
            const auto it = tf.a[g].find(node);
            if (it == tf.a[g].end()) return std::nullopt;
            return it->second;
        };

        // TF2 / shape: no negative rates, nothing off the usable active set.
        for (const auto& [e, val] : tf.x[g]) {
            const bool ok = e >= 0 && e < static_cast<int>(inst.edges.size()) &&
                            scope.edge[e] && val.sign() >= 0;
            Witness w;
            w.commodity = c.id;
            if (e >= 0 && e < static_cast<int>(inst.edges.size())) w.edge = inst.edges[e].id;
            w.lhs = val;
            w.note = "rate off the active set or negative";
            v.add_result("TF2", ok, w);
        }

        // TF3: sink slope zero.
        {
            const auto at = a_of(c.sink);
            const bool ok = at.has_value() && at->is_zero();
            Witness w;
            w.commodity = c.id;
            w.node = inst.nodes[c.sink];
            w.lhs = at ? *at : Rat(0);
            w.rhs = Rat(0);
            if (!at) w.note = "missing sink slope";
            v.add_result("TF3", ok, w);
        }

        for (std::size_t vi = 0; vi < inst.nodes.size(); ++vi) {
            if (!scope.node[vi] || static_cast<int>(vi) == c.sink) continue;
            const int node = static_cast<int>(vi);
            // TF1: conservation of the exogenous node inflow.
            Rat out_sum;
            for (const int e : scope.out[node]) out_sum += x_of(g, e);
            Rat b;
            if (const auto it = c.demand.find(node); it != c.demand.end()) b = it->second;
            {
                Witness w;
                w.commodity = c.id;
                w.node = inst.nodes[node];
                w.lhs = out_sum;
                w.rhs = b;
                v.add_result("TF1", out_sum == b, w);
            }

            // TF4: slope equals the best marginal continuation. Edges with a
            // missing head slope or a negative aggregate rate cannot be
            // evaluated; they fail the check instead of throwing.
            const auto av = a_of(node);
            std::optional<Rat> best;
            bool evaluable = true;
            for (const int e : scope.out[node]) {
                const auto aw = a_of(inst.edges[e].head);
                if (!aw || total[e].sign() < 0) {
                    evaluable = false;
                    continue;
                }
                const Rat cand =
                    g_eval(inst.edges[e], total[e], p.queue_positive[e] != 0) /
                        inst.edges[e].nu +
                    *aw;
                if (!best || cand < *best) best = cand;
            }
            const bool tf4_ok = evaluable && av.has_value() && best && *av == *best;
            {
                Witness w;
                w.commodity = c.id;
                w.node = inst.nodes[node];
                w.lhs = av ? *av : Rat(0);
                w.rhs = best ? *best : Rat(0);
                if (!av || !evaluable) w.note = "missing slope or bad rate";
                v.add_result("TF4", tf4_ok, w);
            }

            // TF5: positive rates only on edges attaining the minimum.
            for (const int e : scope.out[node]) {
                if (x_of(g, e).sign() <= 0) continue;
                const auto aw = a_of(inst.edges[e].head);
                if (!aw || !av || total[e].sign() < 0) continue;  // reported under TF4
                const Rat cand =
                    g_eval(inst.edges[e], total[e], p.queue_positive[e] != 0) /
                        inst.edges[e].nu +
                    *aw;
                Witness w;
                w.commodity = c.id;
                w.edge = inst.edges[e].id;
                w.lhs = *av;
                w.rhs = cand;
                v.add_result("TF5", *av == cand, w);
            }
        }
    }
    for (const char* id : {"TF1", "TF2", "TF3", "TF4", "TF5"})
        if (!v.find(id)) v.add_pass(id);
    return v;
}

inline ThinFlow solve_thinflow(const ThinFlowProblem& p,
                               const ThinFlowOptions& opts = {}) {
    if (!p.inst) throw ValidationError("problem has no instance");
    const Instance& inst = *p.inst;
    if (p.queue_positive.size() != inst.edges.size())
        throw ValidationError("queue sign vector size mismatch");
    const std::size_t G = p.commodities.size();
    std::vector<tf_detail::Scope> scopes;
    scopes.reserve(G);
    for (std::size_t g = 0; g < G; ++g) scopes.push_back(tf_detail::build_scope(p, g));

    std::vector<std::vector<int>> users(inst.edges.size());
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t e = 0; e < inst.edges.size(); ++e)
            if (scopes[g].edge[e]) users[e].push_back(static_cast<int>(g));

    ThinFlow tf;
    tf.x.assign(G, {});
    tf.a.assign(G, {});
    std::vector<std::vector<char>> alloc_done(G, std::vector<char>(inst.nodes.size(), 0));
    std::vector<std::vector<char>> label_done(G, std::vector<char>(inst.nodes.size(), 0));
    for (std::size_t g = 0; g < G; ++g) {
        tf.a[g][p.commodities[g].sink] = Rat(0);
        label_done[g][p.commodities[g].sink] = 1;
        alloc_done[g][p.commodities[g].sink] = 1;  // nothing to allocate at the sink
    }
    const auto demand_at = [&](std::size_t g, int node) -> Rat {
        const auto it = p.commodities[g].demand.find(node);
        return it == p.commodities[g].demand.end() ? Rat(0) : it->second;
    };
    const auto edge_decided = [&](int e) {
        for (const int g : users[e])
            if (!alloc_done[g][inst.edges[e].tail]) return false;
        return true;
    };
    const auto edge_total = [&](int e) {  // requires edge_decided(e)
        Rat t;
        for (const int g : users[e]) {
            const auto it = tf.x[g].find(e);
            if (it != tf.x[g].end()) t += it->second;
        }
        return t;
    };

    // ---- constant folding ---------------------------------------------------
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t g = 0; g < G; ++g) {
            const auto& scope = scopes[g];
            for (const int node : scope.order) {
                if (node == p.commodities[g].sink) continue;
                const auto& outs = scope.out[node];
                if (!alloc_done[g][node]) {
                    const Rat b = demand_at(g, node);
                    if (b.is_zero()) {
                        for (const int e : outs) tf.x[g][e] = Rat(0);
                        alloc_done[g][node] = 1;
                        changed = true;
                    } else if (outs.size() == 1) {
                        tf.x[g][outs[0]] = b;
                        alloc_done[g][node] = 1;
                        changed = true;
                    } else {
                        bool foldable = true;
                        for (const int e : outs)
                            if (users[e].size() != 1 ||
                                !label_done[g][inst.edges[e].head])
                                foldable = false;
                        if (foldable) {
                            std::vector<HFunc> hs;
                            for (const int e : outs)
                                hs.push_back(build_h(inst.edges[e],
                                                     tf.a[g][inst.edges[e].head],
                                                     Rat(p.queue_positive[e] ? 1 : 0)));
                            sort_by_beta(hs);
                            const Split split = waterfill(b, hs);
                            for (std::size_t i = 0; i < hs.size(); ++i)
                                tf.x[g][inst.edge_id(hs[i].id)] = split.z[i];
                            tf.a[g][node] = split.level;
                            alloc_done[g][node] = 1;
                            label_done[g][node] = 1;
                            changed = true;
                        }
                    }
                }
                if (!label_done[g][node]) {
                    bool known = true;
                    for (const int e : outs)
                        if (!edge_decided(e) || !label_done[g][inst.edges[e].head])
                            known = false;
                    if (known) {
                        std::optional<Rat> best;
                        for (const int e : outs) {
                            const Rat cand =
                                g_eval(inst.edges[e], edge_total(e),
                                       p.queue_positive[e] != 0) /
                                    inst.edges[e].nu +
                                tf.a[g][inst.edges[e].head];
                            if (!best || cand < *best) best = cand;
                        }
                        tf.a[g][node] = *best;  // outs nonempty for scope non-sinks
                        label_done[g][node] = 1;
                        changed = true;
                    }
                }
            }
        }
    }

    // ---- collect the coupled leftovers --------------------------------------
    // Variables: pending x (per commodity and edge), pending a (per commodity
    // and node), pending queue-growth gamma (per edge).
    std::map<std::pair<int, int>, int> x_var;   // (g,e) -> var key
    std::map<std::pair<int, int>, int> a_var;   // (g,v) -> var key
    std::map<int, int> gamma_var;               // e -> var key
    int nkeys = 0;
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t vi = 0; vi < inst.nodes.size(); ++vi) {
            if (!scopes[g].node[vi]) continue;
            if (!alloc_done[g][vi])
                for (const int e : scopes[g].out[vi])
                    x_var[{static_cast<int>(g), e}] = nkeys++;
            if (!label_done[g][vi]) a_var[{static_cast<int>(g), static_cast<int>(vi)}] = nkeys++;
        }
    for (std::size_t e = 0; e < inst.edges.size(); ++e)
        if (!users[e].empty() && !edge_decided(static_cast<int>(e)))
            gamma_var[static_cast<int>(e)] = nkeys++;
    if (nkeys == 0) {
        const Verdict verdict = check_thinflow(p, tf);
        if (!verdict.pass())
            throw InternalError("thin-flow folding produced an invalid solution");
        return tf;
    }

    // Union-find over variable keys.
    std::vector<int> parent(nkeys);
    for (int i = 0; i < nkeys; ++i) parent[i] = i;
    const auto find_root = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    const auto unite = [&](int a, int b) { parent[find_root(a)] = find_root(b); };

    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t vi = 0; vi < inst.nodes.size(); ++vi) {
            if (!scopes[g].node[vi]) continue;
            const int gi = static_cast<int>(g), node = static_cast<int>(vi);
            if (!alloc_done[g][vi]) {
                const auto& outs = scopes[g].out[vi];
                for (std::size_t k = 1; k < outs.size(); ++k)
                    unite(x_var.at({gi, outs[0]}), x_var.at({gi, outs[k]}));
                unite(x_var.at({gi, outs[0]}), a_var.at({gi, node}));
            }
            if (!label_done[g][vi]) {
                const int av = a_var.at({gi, node});
                for (const int e : scopes[g].out[vi]) {
                    if (const auto it = gamma_var.find(e); it != gamma_var.end())
                        unite(av, it->second);
                    const int head = inst.edges[e].head;
                    if (const auto it = a_var.find({gi, head}); it != a_var.end())
                        unite(av, it->second);
                }
            }
        }
    for (const auto& [e, gv] : gamma_var)
        for (const int g : users[e])
            if (const auto it = x_var.find({g, e}); it != x_var.end()) unite(gv, it->second);

    // ---- per-component guess enumeration ------------------------------------
    struct Slot {
        int kind;  // 0 = tight-subset (pending alloc), 1 = selector, 2 = queue branch
        int g = -1;
        int node = -1;
        int edge = -1;
        std::uint64_t radix = 1;
    };
    std::map<int, std::vector<Slot>> comp_slots;
    std::map<int, int> slot_bits;
    const auto bits_of = [](std::uint64_t radix) {
        int b = 0;
        while ((std::uint64_t{1} << b) < radix) ++b;
        return b;
    };

    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t vi = 0; vi < inst.nodes.size(); ++vi) {
            if (!scopes[g].node[vi] || static_cast<int>(vi) == p.commodities[g].sink)
                continue;
            const int gi = static_cast<int>(g), node = static_cast<int>(vi);
            const auto& outs = scopes[g].out[vi];
            if (!alloc_done[g][vi]) {
                if (outs.size() >= 64)
                    throw CapExceeded("thin-flow node '" + inst.nodes[vi] +
                                      "' has too many undecided out-edges");
                Slot s{0, gi, node, -1,
                       (std::uint64_t{1} << outs.size()) - 1};  // nonempty subsets
                const int comp = find_root(a_var.at({gi, node}));
                comp_slots[comp].push_back(s);
                slot_bits[comp] += bits_of(s.radix);
            } else if (!label_done[g][vi]) {
                Slot s{1, gi, node, -1, outs.size()};
                const int comp = find_root(a_var.at({gi, node}));
                comp_slots[comp].push_back(s);
                slot_bits[comp] += bits_of(s.radix);
            }
        }
    for (const auto& [e, gv] : gamma_var) {
        if (p.queue_positive[e]) continue;  // linear, no branch
        // Forced no-overflow branch when even the maximal possible rate fits.
        Rat upper;
        for (const int g : users[e]) {
            if (alloc_done[g][inst.edges[e].tail]) {
                const auto it = tf.x[g].find(e);
                if (it != tf.x[g].end()) upper += it->second;
            } else {
                upper += demand_at(g, inst.edges[e].tail);
            }
        }
        Slot s{2, -1, -1, e, upper <= inst.edges[e].nu ? std::uint64_t{1} : 2};
        const int comp = find_root(gv);
        comp_slots[comp].push_back(s);
        slot_bits[comp] += bits_of(s.radix);
    }

    // Deterministic slot order inside each component.
    for (auto& [comp, slots] : comp_slots) {
        (void)comp;
        std::sort(slots.begin(), slots.end(), [&](const Slot& a, const Slot& b) {
            if (a.kind != b.kind) return a.kind < b.kind;
            if (a.g != b.g) return a.g < b.g;
            if (a.node != b.node)
                return (a.node >= 0 ? inst.nodes[a.node] : std::string()) <
                       (b.node >= 0 ? inst.nodes[b.node] : std::string());
            return (a.edge >= 0 ? inst.edges[a.edge].id : std::string()) <
                   (b.edge >= 0 ? inst.edges[b.edge].id : std::string());
        });
    }

    // Component key list: include var-only components (no slots) so their
    // linear systems still run once.
    std::set<int> comp_keys;
    for (int i = 0; i < nkeys; ++i) comp_keys.insert(find_root(i));

    for (const int comp : comp_keys) {
        const auto& slots = comp_slots[comp];
        if (const auto it = slot_bits.find(comp);
            it != slot_bits.end() && it->second > opts.binary_cap)
            throw CapExceeded("thin-flow component needs " +
                              std::to_string(it->second) + " binary decisions (cap " +
                              std::to_string(opts.binary_cap) + ")");
        std::uint64_t total_guesses = 1;
        for (const auto& s : slots) total_guesses *= s.radix;

        // Variables of this component, in deterministic order.
        std::vector<std::pair<int, int>> comp_x, comp_a;
        std::vector<int> comp_gamma;
        for (const auto& [key, var] : x_var)
            if (find_root(var) == comp) comp_x.push_back(key);
        for (const auto& [key, var] : a_var)
            if (find_root(var) == comp) comp_a.push_back(key);
        for (const auto& [key, var] : gamma_var)
            if (find_root(var) == comp) comp_gamma.push_back(key);

        // One LP per guess; returns the assignment on success.
        const auto try_guess = [&](std::uint64_t guess)
            -> std::optional<std::pair<std::vector<Rat>, std::size_t>> {
            // Decode mixed-radix digits, first slot most significant.
            std::vector<std::uint64_t> digit(slots.size(), 0);
            {
                std::uint64_t rest = guess;
                for (std::size_t i = slots.size(); i-- > 0;) {
                    digit[i] = rest % slots[i].radix;
                    rest /= slots[i].radix;
                }
            }
            LinearFeasibility lp;
            std::map<std::pair<int, int>, int> xcol, acol;
            std::map<int, int> gcol;
            for (const auto& key : comp_x) xcol[key] = lp.add_var(VarSign::NonNeg);
            for (const auto& key : comp_a) acol[key] = lp.add_var(VarSign::Free);
            for (const int e : comp_gamma) gcol[e] = lp.add_var(VarSign::Free);

            // TF1 rows for pending allocations.
            std::set<std::pair<int, int>> alloc_nodes;
            for (const auto& [g, e] : comp_x) alloc_nodes.insert({g, inst.edges[e].tail});
            for (const auto& [g, node] : alloc_nodes) {
                std::vector<std::pair<int, Rat>> terms;
                for (const int e : scopes[g].out[node]) terms.emplace_back(xcol.at({g, e}), Rat(1));
                lp.add_row(terms, RowRel::Eq, demand_at(g, node));
            }

            // Gamma definitions. Pending edges get their branch rows; the
            // branch of a queue-free edge comes from its slot digit.
            std::map<int, int> zdigit;  // edge -> 1 (no growth) / 0 (growth)
            for (std::size_t i = 0; i < slots.size(); ++i)
                if (slots[i].kind == 2)
                    zdigit[slots[i].edge] = (digit[i] == 0) ? 1 : 0;  // order: z=1 first
            for (const int e : comp_gamma) {
                std::vector<std::pair<int, Rat>> sum_terms;  // pending x parts
                Rat decided_sum;
                for (const int g : users[e]) {
                    if (const auto it = xcol.find({g, e}); it != xcol.end())
                        sum_terms.emplace_back(it->second, Rat(1));
                    else if (const auto dx = tf.x[g].find(e); dx != tf.x[g].end())
                        decided_sum += dx->second;
                }
                const Rat& nu = inst.edges[e].nu;
                if (p.queue_positive[e]) {
                    auto terms = sum_terms;
                    for (auto& t : terms) t.second = -t.second;
                    terms.emplace_back(gcol.at(e), Rat(1));
                    lp.add_row(terms, RowRel::Eq, decided_sum - nu);
                } else if (zdigit.at(e) == 1) {
                    lp.add_row({{gcol.at(e), Rat(1)}}, RowRel::Eq, Rat(0));
                    lp.add_row(sum_terms, RowRel::Le, nu - decided_sum);
                } else {
                    auto terms = sum_terms;
                    for (auto& t : terms) t.second = -t.second;
                    terms.emplace_back(gcol.at(e), Rat(1));
                    lp.add_row(terms, RowRel::Eq, decided_sum - nu);
                    lp.add_row({{gcol.at(e), Rat(1)}}, RowRel::Ge, Rat(0));
                }
            }

            // TF4 rows (and per-slot tightness / emptiness rows).
            const auto add_tf4 = [&](int g, int node, int e, RowRel rel) {
                // a_v - gamma/nu - a_head  rel  const
                std::vector<std::pair<int, Rat>> terms;
                Rat rhs;
                terms.emplace_back(acol.at({g, node}), Rat(1));
                const Rat& nu = inst.edges[e].nu;
                if (const auto it = gcol.find(e); it != gcol.end())
                    terms.emplace_back(it->second, Rat(-1) / nu);
                else
                    rhs += g_eval(inst.edges[e], edge_total(e), p.queue_positive[e] != 0) / nu;
                const int head = inst.edges[e].head;
                if (const auto it = acol.find({g, head}); it != acol.end())
                    terms.emplace_back(it->second, Rat(-1));
                else
                    rhs += tf.a[g].at(head);
                lp.add_row(terms, rel, rhs);
            };
            for (const auto& [g, node] : comp_a)
                for (const int e : scopes[g].out[node]) add_tf4(g, node, e, RowRel::Le);
            for (std::size_t i = 0; i < slots.size(); ++i) {
                const Slot& s = slots[i];
                if (s.kind == 0) {
                    const std::uint64_t mask = digit[i] + 1;  // skip the empty subset
                    const auto& outs = scopes[s.g].out[s.node];
                    for (std::size_t j = 0; j < outs.size(); ++j) {
                        if (mask & (std::uint64_t{1} << j))
                            add_tf4(s.g, s.node, outs[j], RowRel::Eq);
                        else
                            lp.add_row({{xcol.at({s.g, outs[j]}), Rat(1)}}, RowRel::Eq,
                                       Rat(0));
                    }
                } else if (s.kind == 1) {
                    const auto& outs = scopes[s.g].out[s.node];
                    add_tf4(s.g, s.node, outs[digit[i]], RowRel::Eq);
                }
            }

            const auto sol = lp.solve();
            if (!sol) return std::nullopt;
            return std::make_pair(*sol, comp_x.size() + comp_a.size());
        };

        // Lexicographically first feasible guess; optionally in parallel with
        // a first-success short-circuit that still reports the smallest index.
        std::optional<std::vector<Rat>> winner;
        std::uint64_t winner_idx = 0;
        if (opts.parallel && total_guesses >= 32 && worker_limit() > 1) {
            std::atomic<std::uint64_t> best{UINT64_MAX};
            std::mutex mu;
            std::map<std::uint64_t, std::vector<Rat>> found;
            parallel_for_index(static_cast<std::size_t>(total_guesses),
                               [&](std::size_t i) {
                                   if (i >= best.load(std::memory_order_relaxed)) return;
                                   auto res = try_guess(i);
                                   if (!res) return;
                                   std::uint64_t cur =
                                       best.load(std::memory_order_relaxed);
                                   while (i < cur &&
                                          !best.compare_exchange_weak(cur, i)) {
                                   }
                                   std::lock_guard<std::mutex> lock(mu);
                                   found.emplace(i, std::move(res->first));
                               });
            const std::uint64_t b = best.load();
            if (b != UINT64_MAX) {
                winner = std::move(found.at(b));
                winner_idx = b;
            }
        } else {
            for (std::uint64_t i = 0; i < total_guesses; ++i) {
                auto res = try_guess(i);
                if (res) {
                    winner = std::move(res->first);
                    winner_idx = i;
                    break;
                }
            }
        }
        (void)winner_idx;
        if (!winner)
            throw NoSolution("no thin flow found for a coupled component; problem: " +
                             p.to_json().dump());

        // Write back the component assignment.
        std::size_t col = 0;
        for (const auto& key : comp_x) tf.x[key.first][key.second] = (*winner)[col++];
        for (const auto& key : comp_a) tf.a[key.first][key.second] = (*winner)[col++];
        for (const auto& [g, node] : comp_a) label_done[g][node] = 1;
        std::set<std::pair<int, int>> alloc_nodes;
        for (const auto& [g, e] : comp_x) alloc_nodes.insert({g, inst.edges[e].tail});
        for (const auto& [g, node] : alloc_nodes) alloc_done[g][node] = 1;
    }

    const Verdict verdict = check_thinflow(p, tf);
    if (!verdict.pass()) {
        std::string bad;
        for (const auto& c : verdict.checks())
            if (!c.pass) bad += (bad.empty() ? "" : ", ") + c.id;
        throw InternalError("thin-flow solver produced an invalid solution (" + bad +
                            "); problem: " + p.to_json().dump());
    }
    return tf;
}

}  // namespace ideflow
