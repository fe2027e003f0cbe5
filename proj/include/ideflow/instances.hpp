#pragma once

// Bundled instance generators: small worked examples whose exact behaviour is
// frozen in the test suite, the large cyclic-routing constructions that
// sustain flow forever, and a seeded random generator.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/instance.hpp"

namespace ideflow {

// ---------------------------------------------------------------------------
// merge: two commodities with staggered bursts sharing the sink; the second
// burst queues on s2->t and splits evenly once the detour via s1 ties.
// ---------------------------------------------------------------------------
inline Instance make_merge() {
    Instance inst;
    inst.nodes = {"s1", "v", "t", "s2"};
    const auto node = [&](const std::string& id) {
        return static_cast<int>(std::find(inst.nodes.begin(), inst.nodes.end(), id) -
                                inst.nodes.begin());
    };
    const auto edge = [&](const std::string& id, const std::string& a, const std::string& b,
                          long long tau, long long nu) {
        inst.edges.push_back({id, node(a), node(b), Rat(tau), Rat(nu)});
    };
    edge("s1v", "s1", "v", 1, 2);
    edge("s1t", "s1", "t", 3, 1);
    edge("vs2", "v", "s2", 1, 2);
    edge("s2t", "s2", "t", 1, 1);
    edge("s2s1", "s2", "s1", 1, 1);
    inst.commodities.push_back(
        {"c1", node("s1"), node("t"), StepFunction::box(Rat(0), Rat(1), Rat(3))});
    inst.commodities.push_back(
        {"c2", node("s2"), node("t"), StepFunction::box(Rat(1), Rat(2), Rat(4))});
    inst.finalize();
    return inst;
}

// ---------------------------------------------------------------------------
// detour: single commodity, single burst of 16; flow initially splits between
// the direct edge and a detour that loops back to the source.
// ---------------------------------------------------------------------------
inline Instance make_detour() {
    Instance inst;
    inst.nodes = {"s", "v", "w", "t"};
    const auto node = [&](const std::string& id) {
        return static_cast<int>(std::find(inst.nodes.begin(), inst.nodes.end(), id) -
                                inst.nodes.begin());
    };
    const auto edge = [&](const std::string& id, const std::string& a, const std::string& b,
                          long long tau, long long nu) {
        inst.edges.push_back({id, node(a), node(b), Rat(tau), Rat(nu)});
    };
    edge("st", "s", "t", 3, 1);
    edge("sv", "s", "v", 1, 7);
    edge("vw", "v", "w", 1, 7);
    edge("wt", "w", "t", 1, 1);
    edge("ws", "w", "s", 1, 6);
    inst.commodities.push_back(
        {"c", node("s"), node("t"), StepFunction::box(Rat(0), Rat(1), Rat(16))});
    inst.finalize();
    return inst;
}

// ---------------------------------------------------------------------------
// diamond: two equal-cost routes; the equilibrium split is not unique, the
// solver's deterministic tie-break picks one.
// ---------------------------------------------------------------------------
inline Instance make_diamond() {
    Instance inst;
    inst.nodes = {"s", "v", "w", "t"};
    const auto node = [&](const std::string& id) {
        return static_cast<int>(std::find(inst.nodes.begin(), inst.nodes.end(), id) -
                                inst.nodes.begin());
    };
    const auto edge = [&](const std::string& id, const std::string& a, const std::string& b,
                          long long tau, long long nu) {
        inst.edges.push_back({id, node(a), node(b), Rat(tau), Rat(nu)});
    };
    edge("sv", "s", "v", 1, 2);
    edge("sw", "s", "w", 1, 2);
    edge("vt", "v", "t", 1, 2);
    edge("wt", "w", "t", 1, 1);
    inst.commodities.push_back(
        {"c", node("s"), node("t"), StepFunction::box(Rat(0), Rat(1), Rat(2))});
    inst.finalize();
    return inst;
}

// ---------------------------------------------------------------------------
// Cyclic-routing construction. Identical 7-node ring gadgets keep a cohort of
// 2 flow units circulating with period 5; three hook nodes (v2, v5, v7) offer
// exit paths of identical length L whose time-varying congestion (provided by
// mirrored gadget stacks of the other copy) always makes staying in the ring
// the unique shortest choice.
// ---------------------------------------------------------------------------
namespace detail {

struct GadgetLayout {
    // Per stack type j in {2,5,7}: base phase of each ring, bottom to top,
    // plus the number of plain padding edges appended above the top ring so
    // every stack has vertical length 45.
    std::vector<int> bases;
    int padding = 0;
};

inline const std::vector<std::pair<int, GadgetLayout>>& stack_layouts() {
    static const std::vector<std::pair<int, GadgetLayout>> layouts = {
        {2, {{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2}, 0}},
        {5, {{3, 3, 3, 4, 4, 4}, 24}},
        {7, {{3, 3, 3, 4, 4, 4, 5, 5, 6}, 12}},
    };
    return layouts;
}

struct TwoSinkBuild {
    Instance inst;
    // Ring prefixes with their total phase shift and owning copy, in creation
    // order; used by the single-source variant to attach warm-up plumbing.
    struct RingRef {
        std::string prefix;  // e.g. "C0.B2+1.A3"
        int shift = 0;       // inflow support is [shift, shift+1)
        int copy = 0;
    };
    std::vector<RingRef> rings;
};

inline TwoSinkBuild build_two_sink() {
    TwoSinkBuild out;
    Instance& inst = out.inst;
    std::map<std::string, int> index;
    const auto node = [&](const std::string& id) {
        const auto it = index.find(id);
        if (it != index.end()) return it->second;
        const int n = static_cast<int>(inst.nodes.size());
        inst.nodes.push_back(id);
        index.emplace(id, n);
        return n;
    };
    const auto edge = [&](const std::string& a, const std::string& b) {
        inst.edges.push_back({a + ">" + b, node(a), node(b), Rat(1), Rat(1)});
    };

    const std::vector<std::string> sinks = {"t0", "t1"};
    node("t0");
    node("t1");
    for (int copy = 0; copy < 2; ++copy) {
        const std::string C = "C" + std::to_string(copy);
        const std::string other = "C" + std::to_string(1 - copy);
        for (const auto& [j, layout] : stack_layouts()) {
            for (int k = 0; k < 5; ++k) {
                const std::string B =
                    C + ".B" + std::to_string(j) + "+" + std::to_string(k);
                std::string below;  // node the next ring's v1 attaches to
                for (std::size_t m = 0; m < layout.bases.size(); ++m) {
                    const std::string A = B + ".A" + std::to_string(m);
                    for (int v = 1; v <= 7; ++v) node(A + ".v" + std::to_string(v));
                    edge(A + ".v1", A + ".v2");
                    edge(A + ".v2", A + ".v3");
                    edge(A + ".v3", A + ".v4");
                    edge(A + ".v4", A + ".v5");
                    edge(A + ".v5", A + ".v1");
                    edge(A + ".v2", A + ".v6");
                    edge(A + ".v6", A + ".v7");
                    edge(A + ".v7", A + ".v1");
                    const int shift = (layout.bases[m] + k) % 5;
                    for (const int hook : {2, 5, 7})
                        edge(A + ".v" + std::to_string(hook),
                             C + ".hook" + std::to_string(hook) + "+" +
                                 std::to_string(shift));
                    if (!below.empty()) {
                        const std::string gap = B + ".gap" + std::to_string(m - 1);
                        edge(below, gap + ".1");
                        edge(gap + ".1", gap + ".2");
                        edge(gap + ".2", A + ".v1");
                    }
                    below = A + ".v2";
                    out.rings.push_back({A, shift, copy});
                    inst.commodities.push_back(
                        {A, node(A + ".v1"), node(sinks[copy]),
                         StepFunction::box(Rat(shift), Rat(shift + 1), Rat(2))});
                }
                for (int p = 1; p <= layout.padding; ++p) {
                    const std::string pad = B + ".pad" + std::to_string(p);
                    edge(below, pad);
                    below = pad;
                }
                // The stack's top feeds the sink of the *other* copy's
                // commodities; exit congestion is shaped for them.
                edge(below, sinks[1 - copy]);
            }
        }
        for (const auto& [j, layout] : stack_layouts()) {
            (void)layout;
            for (int k = 0; k < 5; ++k) {
                const std::string hook =
                    C + ".hook" + std::to_string(j) + "+" + std::to_string(k);
                const std::string target = other + ".B" + std::to_string(j) + "+" +
                                           std::to_string(k) + ".A0.v1";
                edge(hook, target);
            }
        }
    }
    inst.finalize();
    return out;
}

}  // namespace detail

/// Two-sink cyclic instance: flow never reaches either sink; the network
/// state is periodic with period 5 once the bursts have entered.
inline Instance make_two_sink_cycle() { return detail::build_two_sink().inst; }

/// Single-source variant: one commodity per sink, released from a super
/// source through warm-up plumbing that reproduces the two-sink state.
inline Instance make_single_source_cycle() {
    detail::TwoSinkBuild build = detail::build_two_sink();
    Instance& inst = build.inst;
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < inst.nodes.size(); ++i)
        index.emplace(inst.nodes[i], static_cast<int>(i));
    const auto node = [&](const std::string& id) {
        const auto it = index.find(id);
        if (it != index.end()) return it->second;
        const int n = static_cast<int>(inst.nodes.size());
        inst.nodes.push_back(id);
        index.emplace(id, n);
        return n;
    };
    const auto edge = [&](const std::string& a, const std::string& b, const Rat& tau,
                          const Rat& nu) {
        inst.edges.push_back({a + ">" + b, node(a), node(b), tau, nu});
    };

    inst.commodities.clear();
    const int shat = node("shat");
    Rat warm_total[2] = {Rat(0), Rat(0)};
    for (const auto& ring : build.rings) {
        // Ring entry proxy: delays arriving flow by the ring's phase shift.
        std::string entry = ring.prefix + ".v1";
        const Rat tau_path = Rat(ring.shift + 49);  // shift + v1>v2 + hook route (48)
        if (ring.shift > 0) {
            const std::string stilde = ring.prefix + ".stilde";
            edge(stilde, entry, Rat(ring.shift), Rat(2));
            entry = stilde;
        }
        const std::string v = ring.prefix + ".src.v";
        const std::string w = ring.prefix + ".src.w";
        const std::string sink = "t" + std::to_string(ring.copy);
        edge("shat", v, Rat(1), Rat(6));
        edge(v, w, Rat(1), Rat(3));
        edge("shat", w, Rat(2), tau_path - 1);
        edge(w, entry, Rat(2), Rat(2));
        edge(w, sink, Rat(1), Rat(1));
        warm_total[ring.copy] += tau_path + 5;
    }
    for (int copy = 0; copy < 2; ++copy) {
        inst.commodities.push_back({"warm.t" + std::to_string(copy), shat,
                                    node("t" + std::to_string(copy)),
                                    StepFunction::box(Rat(0), Rat(1), warm_total[copy])});
    }
    inst.finalize();
    return inst;
}

/// Smoke-sized relative of the cyclic construction: one ring whose three hook
/// nodes get plain constant-cost paths (capacity 2, never congested) of the
/// same length L = 48 to a single sink.
inline Instance make_cycle_smoke() {
    Instance inst;
    std::map<std::string, int> index;
    const auto node = [&](const std::string& id) {
        const auto it = index.find(id);
        if (it != index.end()) return it->second;
        const int n = static_cast<int>(inst.nodes.size());
        inst.nodes.push_back(id);
        index.emplace(id, n);
        return n;
    };
    const auto edge = [&](const std::string& a, const std::string& b, long long nu) {
        inst.edges.push_back({a + ">" + b, node(a), node(b), Rat(1), Rat(nu)});
    };
    node("t");
    for (int v = 1; v <= 7; ++v) node("A.v" + std::to_string(v));
    edge("A.v1", "A.v2", 1);
    edge("A.v2", "A.v3", 1);
    edge("A.v3", "A.v4", 1);
    edge("A.v4", "A.v5", 1);
    edge("A.v5", "A.v1", 1);
    edge("A.v2", "A.v6", 1);
    edge("A.v6", "A.v7", 1);
    edge("A.v7", "A.v1", 1);
    for (const int hook : {2, 5, 7}) {
        const std::string P = "P" + std::to_string(hook);
        std::string prev = "A.v" + std::to_string(hook);
        for (int i = 1; i <= 47; ++i) {
            const std::string n = P + ".n" + std::to_string(i);
            edge(prev, n, 2);
            prev = n;
        }
        edge(prev, "t", 2);
    }
    inst.commodities.push_back(
        {"A", node("A.v1"), node("t"), StepFunction::box(Rat(0), Rat(1), Rat(2))});
    inst.finalize();
    return inst;
}

// ---------------------------------------------------------------------------
// Seeded random instances.
// ---------------------------------------------------------------------------
struct RandomParams {
    int nodes = 6;
    int edges = 10;
    int sinks = 1;
    bool acyclic = false;
};

inline Instance make_random(std::uint64_t seed, const RandomParams& params = {}) {
    if (params.nodes < 2) throw ParamError("make_random: need at least 2 nodes");
    if (params.sinks < 1 || params.sinks >= params.nodes)
        throw ParamError("make_random: sinks must be in [1, nodes)");
    if (params.edges < 1) throw ParamError("make_random: need at least 1 edge");
    DetRng rng(seed);
    const std::vector<Rat> grid = {Rat(1, 4), Rat(1, 2), Rat(3, 4), Rat(1),
                                   Rat(3, 2), Rat(2),    Rat(3),    Rat(4)};

    Instance inst;
    for (int i = 0; i < params.nodes; ++i) inst.nodes.push_back("n" + std::to_string(i));
    // Sinks occupy the top indexes so acyclic instances can only flow upward
    // into them.
    std::vector<int> sinks;
    for (int s = 0; s < params.sinks; ++s) sinks.push_back(params.nodes - 1 - s);

    const auto add_edge = [&](int a, int b) {
        const std::string id = "e" + std::to_string(inst.edges.size());
        inst.edges.push_back({id, a, b, rng.pick(grid), rng.pick(grid)});
    };
    for (int e = 0; e < params.edges; ++e) {
        int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(params.nodes)));
        int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(params.nodes)));
        if (a == b) b = (b + 1) % params.nodes;
        if (params.acyclic && a > b) std::swap(a, b);
        if (a == b) continue;  // can happen after the acyclic swap fix-up
        add_edge(a, b);
    }

    // One commodity per sink plus one extra on the first sink; patch in a
    // connecting chain whenever the random edges left the sink unreachable.
    const int commodity_count = params.sinks + 1;
    inst.out_edges.assign(inst.nodes.size(), {});
    for (std::size_t e = 0; e < inst.edges.size(); ++e)
        inst.out_edges[inst.edges[e].tail].push_back(static_cast<int>(e));
    for (int c = 0; c < commodity_count; ++c) {
        const int sink = sinks[static_cast<std::size_t>(c) % sinks.size()];
        const int source = static_cast<int>(
            rng.below(static_cast<std::uint64_t>(params.nodes - params.sinks)));
        if (!inst.reaches(source, sink)) {
            // Walk through random intermediate hops toward the sink, adding
            // the missing edges; bounded so the walk cannot wander forever.
            int at = source;
            int steps = 0;
            while (at != sink) {
                int next;
                if (params.acyclic) {
                    next = at + 1 +
                           static_cast<int>(
                               rng.below(static_cast<std::uint64_t>(sink - at)));
                    if (next > sink) next = sink;
                } else {
                    next = static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(params.nodes)));
                    if (next == at || ++steps >= params.nodes) next = sink;
                }
                add_edge(at, next);
                inst.out_edges[at].push_back(static_cast<int>(inst.edges.size()) - 1);
                at = next;
            }
        }
        StepFunction inflow;
        const Rat start(static_cast<long long>(rng.below(3)), 2);
        const Rat len(static_cast<long long>(1 + rng.below(4)), 2);
        inflow.append_segment(start, start + len, rng.pick(grid));
        if (rng.below(2) == 0) {
            const Rat gap(static_cast<long long>(rng.below(2)), 2);
            const Rat len2(static_cast<long long>(1 + rng.below(3)), 2);
            inflow.append_segment(start + len + gap, start + len + gap + len2,
                                  rng.pick(grid));
        }
        inst.commodities.push_back({"c" + std::to_string(c), source, sink, inflow});
    }
    inst.finalize();
    return inst;
}

// ---------------------------------------------------------------------------
// Name registry for the command-line tool.
// ---------------------------------------------------------------------------
inline std::vector<std::string> builtin_names() {
    return {"merge",         "detour",           "diamond", "nonterm-two-sink",
            "nonterm-single-source", "nonterm-smoke"};
}

inline Instance make_builtin(const std::string& name) {
    if (name == "merge") return make_merge();
    if (name == "detour") return make_detour();
    if (name == "diamond") return make_diamond();
    if (name == "nonterm-two-sink") return make_two_sink_cycle();
    if (name == "nonterm-single-source") return make_single_source_cycle();
    if (name == "nonterm-smoke") return make_cycle_smoke();
    throw ParamError("unknown builtin instance '" + name + "'");
}

}  // namespace ideflow
