#pragma once

// The phase-extension loop. At each phase start the network state is frozen:
// labels and active edges are computed from the queues, node demands from the
// already-derived arrival rates, and a routing (water-fill per node for a
// shared sink, joint thin flow otherwise) fixes constant edge inflow rates.
// The phase extends until the first event that could change any of those
// inputs: a queue hits zero, an inactive edge becomes tight, a network or
// node inflow rate changes, or the horizon arrives.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/flow_trace.hpp"
#include "ideflow/instance.hpp"
#include "ideflow/labels.hpp"
#include "ideflow/rational.hpp"
#include "ideflow/thinflow.hpp"
#include "ideflow/waterfill.hpp"

namespace ideflow {

enum class EngineMode { Auto, SingleSinkWaterfill, MultiCommodityThinFlow };

enum class OutcomeKind { Terminated, HorizonReached, PhaseCapReached };

inline const char* outcome_kind_name(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Terminated: return "terminated";
        case OutcomeKind::HorizonReached: return "horizon_reached";
        case OutcomeKind::PhaseCapReached: return "phase_cap_reached";
    }
    throw InternalError("outcome_kind_name: unknown kind");
}

struct EngineConfig {
    Rat horizon{100};
    long long max_phases = 100000;
    EngineMode mode = EngineMode::Auto;
    int thinflow_binary_cap = 24;
    bool thinflow_parallel = true;
};

/// Evidence that the flow drains: at `theta` (past the inflow support) the
/// remaining volume is `gamma`, and either gamma is zero or it lies under the
/// drain bound (minimum positive path-length gap times minimum capacity).
struct TerminationCertificate {
    Rat theta;
    Rat gamma;
    std::optional<Rat> bound;  // absent when the gap analysis is unusable
};

struct Periodicity {
    Rat period;
    Rat start;  // base point of the verified window
};

struct SimulationReport {
    FlowTrace trace;
    OutcomeKind outcome;
    Rat at;  // time the loop stopped
    std::optional<TerminationCertificate> certificate;
    std::optional<Periodicity> periodicity;  // callers fill via detect_periodicity
};

/// Latest time any commodity still injects flow (0 when all inflows are empty).
inline Rat inflow_support_end(const Instance& inst) {
    Rat end(0);
    for (const auto& c : inst.commodities)
        if (!c.inflow.breakpoints().empty())
            end = max(end, c.inflow.breakpoints().back());
    return end;
}

/// Commodities sharing a sink see identical costs, labels and active edges,
/// so the engine computes routing for such a group once and splits the group
/// flow by demand shares afterwards.
struct GroupState {
    int sink = -1;
    std::vector<int> commodities;    // instance commodity indices, in order
    std::string representative;      // first member's id (used in events)
    LabelView labels;
    std::vector<std::optional<Rat>> slope;    // label drift a_v per node
    std::map<int, Rat> demand;                // aggregated b_v per node
    std::map<std::pair<int, int>, Rat> member_demand;  // (commodity, node)
};

struct AlphaResult {
    Rat alpha;
    std::vector<PhaseEvent> events;
};

namespace engine_detail {

inline int event_rank(PhaseEventKind k) { return static_cast<int>(k); }

inline void sort_events(std::vector<PhaseEvent>& evs) {
    std::sort(evs.begin(), evs.end(), [](const PhaseEvent& a, const PhaseEvent& b) {
        return std::make_tuple(event_rank(a.kind), a.edge.value_or(""),
                               a.commodity.value_or(""), a.node.value_or("")) <
               std::make_tuple(event_rank(b.kind), b.edge.value_or(""),
                               b.commodity.value_or(""), b.node.value_or(""));
    });
    evs.erase(std::unique(evs.begin(), evs.end(),
                          [](const PhaseEvent& a, const PhaseEvent& b) {
                              return a.kind == b.kind && a.edge == b.edge &&
                                     a.commodity == b.commodity && a.node == b.node;
                          }),
              evs.end());
}

}  // namespace engine_detail

/// The longest phase starting at the trace end over which the just-committed
/// routing stays a valid IDE snapshot: ends at the earliest of (a) a queue
/// draining to zero, (b) an inactive edge turning tight for some group,
/// (c) any node or network inflow rate changing — conservatively capped at
/// the smallest free-flow time, since this phase's own inflows start arriving
/// downstream after it — or the horizon. All tied events are reported.
inline AlphaResult max_feasible_alpha(const Instance& inst, const FlowTrace& trace,
                                      const std::vector<GroupState>& groups,
                                      const std::vector<Rat>& edge_total,
                                      const Rat& horizon) {
    const Rat theta = trace.horizon();
    if (edge_total.size() != inst.edges.size())
        throw ParamError("max_feasible_alpha: one total inflow rate per edge required");

    struct Cand {
        Rat t;
        PhaseEvent ev;
    };
    std::vector<Cand> cands;

    // (a) queue depletions under the committed rates.
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        const Rat q = trace.queue_length(static_cast<int>(e), theta);
        if (q.sign() <= 0) continue;
        const Rat slope = edge_total[e] - inst.edges[e].nu;
        if (slope.sign() >= 0) continue;
        Cand c{theta + q / -slope,
               {PhaseEventKind::QueueDepleted, inst.edges[e].id, std::nullopt,
                std::nullopt}};
        cands.push_back(std::move(c));
    }

    // (b) inactive edges turning tight: the gap cost + label(head) -
    // label(tail) shrinks linearly at rate q'/nu + a_head - a_tail.
    for (const auto& g : groups) {
        for (std::size_t e = 0; e < inst.edges.size(); ++e) {
            if (g.labels.tight[e]) continue;
            const Edge& ed = inst.edges[e];
            const auto& tl = g.labels.dist[static_cast<std::size_t>(ed.tail)];
            const auto& hd = g.labels.dist[static_cast<std::size_t>(ed.head)];
            if (!tl || !hd) continue;
            const auto& a_tail = g.slope[static_cast<std::size_t>(ed.tail)];
            const auto& a_head = g.slope[static_cast<std::size_t>(ed.head)];
            if (!a_tail || !a_head)
                throw InternalError("missing label drift at edge '" + ed.id + "'");
            const Rat q = trace.queue_length(static_cast<int>(e), theta);
            const Rat gap = instantaneous_cost(ed, q) + *hd - *tl;
            if (gap.sign() <= 0)
                throw InternalError("non-tight edge '" + ed.id +
                                    "' without positive label gap");
            const Rat drift =
                g_eval(ed, edge_total[e], q.sign() > 0) / ed.nu + *a_head - *a_tail;
            if (drift.sign() >= 0) continue;
            Cand c{theta + gap / -drift,
                   {PhaseEventKind::EdgeActivated, ed.id, g.representative,
                    std::nullopt}};
            cands.push_back(std::move(c));
        }
    }

    // (c) inflow-rate changes: network inflow breakpoints, and breakpoints of
    // the already-derived arrival rates at edge heads.
    for (const auto& c : inst.commodities) {
        const auto bp = c.inflow.next_breakpoint_after(theta);
        if (!bp) continue;
        Cand cd{*bp,
                {PhaseEventKind::NetworkInflowBreakpoint, std::nullopt, c.id,
                 std::nullopt}};
        cands.push_back(std::move(cd));
    }
    for (const auto& [key, fn] : trace.inflows()) {
        (void)fn;
        const auto bp = trace.outflow(key.first, key.second).next_breakpoint_after(theta);
        if (!bp) continue;
        const int head = inst.edges[static_cast<std::size_t>(key.second)].head;
        Cand cd{*bp,
                {PhaseEventKind::NodeInflowBreakpoint, std::nullopt, std::nullopt,
                 inst.nodes[static_cast<std::size_t>(head)]}};
        cands.push_back(std::move(cd));
    }

    // Unconditional cap at theta + min tau: beyond it this phase's own
    // inflows reach their heads and the demand snapshot goes stale.
    std::optional<Rat> cap;
    const Edge* cap_edge = nullptr;
    for (const auto& ed : inst.edges) {
        if (!cap || ed.tau < *cap || (ed.tau == *cap && ed.id < cap_edge->id)) {
            cap = ed.tau;
            cap_edge = &ed;
        }
    }

    Rat winner = horizon;
    for (const auto& c : cands) winner = min(winner, c.t);
    if (cap) winner = min(winner, theta + *cap);
    if (!(theta < winner))
        throw InternalError("phase length collapsed to zero at time " + theta.str());

    std::vector<PhaseEvent> events;
    for (auto& c : cands)
        if (c.t == winner) events.push_back(std::move(c.ev));
    if (events.empty() && cap && theta + *cap == winner) {
        PhaseEvent ev;
        ev.kind = PhaseEventKind::NodeInflowBreakpoint;
        ev.node = inst.nodes[static_cast<std::size_t>(cap_edge->head)];
        events.push_back(std::move(ev));
    }
    if (winner == horizon) {
        PhaseEvent ev;
        ev.kind = PhaseEventKind::HorizonReached;
        events.push_back(std::move(ev));
    }
    engine_detail::sort_events(events);
    return {winner - theta, std::move(events)};
}

struct PhasePlan {
    std::map<std::pair<int, int>, Rat> rates;  // per (commodity, edge)
    Rat alpha;
    std::vector<PhaseEvent> events;
    std::vector<GroupState> groups;  // labels and drifts used for this phase
};

namespace engine_detail {

/// Water-fill sweep for one shared-sink group: nodes in ascending label
/// order (ties by node id) split their demand across tight out-edges so all
/// used edges share the lowest possible marginal label drift; heads are
/// always settled before tails because tight edges strictly descend.
inline void solve_waterfill_sweep(const Instance& inst, const std::vector<Rat>& queues,
                                  GroupState& g, std::map<int, Rat>& edge_flow) {
    std::vector<int> order;
    for (std::size_t v = 0; v < inst.nodes.size(); ++v)
        if (g.labels.dist[v]) order.push_back(static_cast<int>(v));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Rat& da = *g.labels.dist[static_cast<std::size_t>(a)];
        const Rat& db = *g.labels.dist[static_cast<std::size_t>(b)];
        if (da != db) return da < db;
        return inst.nodes[static_cast<std::size_t>(a)] <
               inst.nodes[static_cast<std::size_t>(b)];
    });

    g.slope.assign(inst.nodes.size(), std::nullopt);
    g.slope[static_cast<std::size_t>(g.sink)] = Rat(0);
    for (const int v : order) {
        if (v == g.sink) continue;
        std::vector<HFunc> hs;
        for (const int e : inst.out_edges[static_cast<std::size_t>(v)]) {
            if (!g.labels.tight[static_cast<std::size_t>(e)]) continue;
            const Edge& ed = inst.edges[static_cast<std::size_t>(e)];
            const auto& a_head = g.slope[static_cast<std::size_t>(ed.head)];
            if (!a_head)
                throw InternalError("sweep reached edge '" + ed.id +
                                    "' before its head was settled");
            hs.push_back(build_h(ed, *a_head, queues[static_cast<std::size_t>(e)]));
        }
        const auto dit = g.demand.find(v);
        const Rat b = dit == g.demand.end() ? Rat(0) : dit->second;
        if (hs.empty()) {
            if (b.sign() > 0)
                throw InternalError("demand stuck at node '" +
                                    inst.nodes[static_cast<std::size_t>(v)] +
                                    "' with no tight out-edge");
            continue;  // label drift of an inactive corner is never consulted
        }
        sort_by_beta(hs);
        const Split sp = waterfill(b, hs);
        for (std::size_t k = 0; k < hs.size(); ++k)
            if (sp.z[k].sign() > 0) edge_flow[inst.edge_id(hs[k].id)] = sp.z[k];
        g.slope[static_cast<std::size_t>(v)] = sp.level;
    }
}

}  // namespace engine_detail

/// Plans (but does not commit) the next phase: demands from the current
/// arrival rates, routing per group, phase length and ending events.
inline PhasePlan plan_phase(const Instance& inst, const FlowTrace& trace,
                            const EngineConfig& cfg) {
    const Rat theta = trace.horizon();

    // Demands: flow arriving at edge heads plus network inflow at sources;
    // arrivals at a commodity's own sink leave the network instead.
    std::map<std::pair<int, int>, Rat> demand;
    for (const auto& [key, fn] : trace.inflows()) {
        (void)fn;
        const auto& [i, e] = key;
        const int head = inst.edges[static_cast<std::size_t>(e)].head;
        if (head == inst.commodities[static_cast<std::size_t>(i)].sink) continue;
        const Rat v = trace.outflow(i, e).eval(theta);
        if (v.sign() > 0) demand[{i, head}] += v;
    }
    for (std::size_t i = 0; i < inst.commodities.size(); ++i) {
        const Commodity& c = inst.commodities[i];
        const Rat u = c.inflow.eval(theta);
        if (u.sign() > 0) demand[{static_cast<int>(i), c.source}] += u;
    }

    // Group commodities by sink, first-seen order.
    PhasePlan plan;
    std::map<int, std::size_t> group_of_sink;
    std::vector<std::size_t> group_of_commodity(inst.commodities.size());
    for (std::size_t i = 0; i < inst.commodities.size(); ++i) {
        const Commodity& c = inst.commodities[i];
        auto it = group_of_sink.find(c.sink);
        if (it == group_of_sink.end()) {
            it = group_of_sink.emplace(c.sink, plan.groups.size()).first;
            GroupState g;
            g.sink = c.sink;
            g.representative = c.id;
            plan.groups.push_back(std::move(g));
        }
        plan.groups[it->second].commodities.push_back(static_cast<int>(i));
        group_of_commodity[i] = it->second;
    }

    std::vector<Rat> queues(inst.edges.size());
    std::vector<char> queue_positive(inst.edges.size(), 0);
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        queues[e] = trace.queue_length(static_cast<int>(e), theta);
        queue_positive[e] = queues[e].sign() > 0 ? 1 : 0;
    }

    for (auto& g : plan.groups) g.labels = compute_labels(inst, queues, g.sink);
    for (const auto& [key, v] : demand) {
        const auto& [i, node] = key;
        GroupState& g = plan.groups[group_of_commodity[static_cast<std::size_t>(i)]];
        if (!g.labels.reachable(node))
            throw InternalError("flow of commodity '" +
                                inst.commodities[static_cast<std::size_t>(i)].id +
                                "' stranded at node '" +
                                inst.nodes[static_cast<std::size_t>(node)] + "'");
        g.demand[node] += v;
        g.member_demand[{i, node}] = v;
    }

    // Resolve mode.
    const bool single_sink = group_of_sink.size() <= 1;
    bool use_waterfill;
    switch (cfg.mode) {
        case EngineMode::Auto: use_waterfill = single_sink; break;
        case EngineMode::SingleSinkWaterfill:
            if (!single_sink)
                throw ParamError("water-fill mode requires all commodities to share "
                                 "one sink");
            use_waterfill = true;
            break;
        case EngineMode::MultiCommodityThinFlow: use_waterfill = false; break;
        default: throw ParamError("unknown engine mode");
    }

    // Routing per group.
    std::vector<std::map<int, Rat>> group_flow(plan.groups.size());
    if (use_waterfill) {
        for (std::size_t gi = 0; gi < plan.groups.size(); ++gi)
            engine_detail::solve_waterfill_sweep(inst, queues, plan.groups[gi],
                                                 group_flow[gi]);
#ifndef NDEBUG
        if (!plan.groups.empty()) {
            ThinFlowProblem p;
            p.inst = &inst;
            p.queue_positive = queue_positive;
            for (const auto& g : plan.groups) {
                TfCommodity tc;
                tc.id = g.representative;
                tc.sink = g.sink;
                tc.active = g.labels.tight;
                tc.demand = g.demand;
                p.commodities.push_back(std::move(tc));
            }
            ThinFlow tf;
            for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
                tf.x.push_back(group_flow[gi]);
                std::map<int, Rat> a;
                for (std::size_t v = 0; v < inst.nodes.size(); ++v)
                    if (plan.groups[gi].slope[v]) a[static_cast<int>(v)] =
                        *plan.groups[gi].slope[v];
                tf.a.push_back(std::move(a));
            }
            const Verdict verdict = check_thinflow(p, tf);
            if (!verdict.pass())
                throw InternalError("water-fill sweep failed thin-flow validation");
        }
#endif
    } else if (!plan.groups.empty()) {
        ThinFlowProblem p;
        p.inst = &inst;
        p.queue_positive = queue_positive;
        for (const auto& g : plan.groups) {
            TfCommodity tc;
            tc.id = g.representative;
            tc.sink = g.sink;
            tc.active = g.labels.tight;
            tc.demand = g.demand;
            p.commodities.push_back(std::move(tc));
        }
        ThinFlowOptions opts;
        opts.binary_cap = cfg.thinflow_binary_cap;
        opts.parallel = cfg.thinflow_parallel;
        const ThinFlow tf = solve_thinflow(p, opts);
        for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
            group_flow[gi] = tf.x[gi];
            plan.groups[gi].slope.assign(inst.nodes.size(), std::nullopt);
            for (const auto& [v, val] : tf.a[gi])
                plan.groups[gi].slope[static_cast<std::size_t>(v)] = val;
        }
    }

    // Split group flow back onto commodities by demand shares, and total the
    // per-edge inflow for the event scan.
    std::vector<Rat> edge_total(inst.edges.size());
    for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
        const GroupState& g = plan.groups[gi];
        for (const auto& [e, flow] : group_flow[gi]) {
            if (flow.sign() == 0) continue;
            edge_total[static_cast<std::size_t>(e)] += flow;
            const int v = inst.edges[static_cast<std::size_t>(e)].tail;
            const auto bit = g.demand.find(v);
            if (bit == g.demand.end() || bit->second.sign() <= 0)
                throw InternalError("flow without demand at node '" +
                                    inst.nodes[static_cast<std::size_t>(v)] + "'");
            for (const int i : g.commodities) {
                const auto mit = g.member_demand.find({i, v});
                if (mit == g.member_demand.end()) continue;
                plan.rates[{i, e}] += flow * mit->second / bit->second;
            }
        }
    }

    const AlphaResult ar =
        max_feasible_alpha(inst, trace, plan.groups, edge_total, cfg.horizon);
    plan.alpha = ar.alpha;
    plan.events = ar.events;
    return plan;
}

/// Drain evidence at theta_hat (which must lie past the inflow support):
/// present when the network is already empty, or when the remaining volume
/// lies strictly under the minimum-path-gap times minimum-capacity bound.
inline std::optional<TerminationCertificate> termination_certificate(
    const Instance& inst, const FlowTrace& trace, const Rat& theta_hat) {
    if (theta_hat < inflow_support_end(inst))
        throw ParamError("termination_certificate: inflows still active at time " +
                         theta_hat.str());
    const Rat gamma = trace.volumes(theta_hat).total;

    std::optional<Rat> bound;
    const auto sinks = inst.distinct_sinks();
    if (!sinks.empty() && !inst.edges.empty()) {
        std::optional<Rat> min_gap;
        bool usable = true;
        for (const int s : sinks) {
            const TauDelta td = inst.tau_delta(s);
            if (!td.finite || td.capped) {
                usable = false;
                break;
            }
            if (!min_gap || td.value < *min_gap) min_gap = td.value;
        }
        if (usable && min_gap) bound = *min_gap * inst.nu_min();
    }

    if (gamma.is_zero()) return TerminationCertificate{theta_hat, gamma, bound};
    if (bound && gamma < *bound) return TerminationCertificate{theta_hat, gamma, bound};
    return std::nullopt;
}

inline SimulationReport simulate(const Instance& inst, const EngineConfig& cfg) {
    if (!(cfg.horizon > 0)) throw ParamError("simulate: horizon must be positive");
    if (cfg.max_phases < 1) throw ParamError("simulate: max_phases must be at least 1");
    if (cfg.mode == EngineMode::SingleSinkWaterfill &&
        inst.distinct_sinks().size() > 1)
        throw ParamError("water-fill mode requires all commodities to share one sink");

    FlowTrace trace(inst);
    const Rat u_end = inflow_support_end(inst);
    OutcomeKind outcome;
    Rat stop_at;
    for (;;) {
        const Rat theta = trace.horizon();
        if (u_end <= theta && trace.volumes(theta).total.is_zero()) {
            outcome = OutcomeKind::Terminated;
            stop_at = theta;
            if (!trace.phases().empty()) {
                PhaseEvent ev;
                ev.kind = PhaseEventKind::NetworkEmpty;
                trace.append_final_event(std::move(ev));
            }
            break;
        }
        if (cfg.horizon <= theta) {
            outcome = OutcomeKind::HorizonReached;
            stop_at = theta;
            break;
        }
        if (static_cast<long long>(trace.phases().size()) >= cfg.max_phases) {
            outcome = OutcomeKind::PhaseCapReached;
            stop_at = theta;
            break;
        }
        PhasePlan plan = plan_phase(inst, trace, cfg);
        trace.append_phase(plan.rates, theta + plan.alpha, std::move(plan.events));
    }

    SimulationReport report{std::move(trace), outcome, stop_at, std::nullopt,
                            std::nullopt};
    if (u_end <= stop_at)
        report.certificate = termination_certificate(inst, report.trace, stop_at);
    return report;
}

/// Smallest period p <= max_period with state(t) == state(t + p) for t in
/// [theta_from, theta_from + p], where state = all queues plus all recorded
/// per-commodity edge inflow rates. A constant window reports none.
inline std::optional<Periodicity> detect_periodicity(const FlowTrace& trace,
                                                     const Rat& theta_from,
                                                     const Rat& max_period) {
    if (!(max_period > 0))
        throw ParamError("detect_periodicity: max_period must be positive");
    const Rat lo = theta_from;
    const Rat hi = theta_from + 2 * max_period;
    if (trace.horizon() < hi)
        throw ParamError("detect_periodicity: trace must cover [" + lo.str() + ", " +
                         hi.str() + "]");

    // Candidate periods come from one anchor function: any true period must
    // map some window breakpoint of it onto another.
    std::set<Rat> candidates;
    bool found_anchor = false;
    bool nonconstant_without_bps = false;
    const auto consider = [&](const std::vector<Rat>& bps, const Rat& at_lo,
                              const Rat& at_hi) {
        if (found_anchor) return;
        std::vector<Rat> win;
        for (const auto& b : bps)
            if (lo <= b && b <= hi) win.push_back(b);
        if (win.empty()) {
            if (at_lo != at_hi) nonconstant_without_bps = true;
            return;
        }
        found_anchor = true;
        for (std::size_t i = 0; i < win.size(); ++i)
            for (std::size_t j = i + 1; j < win.size(); ++j) {
                const Rat d = win[j] - win[i];
                if (d.sign() > 0 && d <= max_period) candidates.insert(d);
            }
    };
    const Instance& inst = trace.instance();
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        const PwlFunction& q = trace.queue(static_cast<int>(e));
        consider(q.breakpoints(), q.eval(lo), q.eval(hi));
    }
    for (const auto& [key, fn] : trace.inflows()) {
        (void)key;
        consider(fn.breakpoints(), fn.eval(lo), fn.eval(hi));
    }
    if (nonconstant_without_bps) return std::nullopt;  // linear drift; aperiodic
    if (!found_anchor) return std::nullopt;            // constant state

    for (const Rat& p : candidates) {
        bool ok = true;
        for (std::size_t e = 0; ok && e < inst.edges.size(); ++e)
            ok = PwlFunction::window_equal(trace.queue(static_cast<int>(e)),
                                           trace.queue(static_cast<int>(e)), lo,
                                           lo + p, p);
        for (auto it = trace.inflows().begin(); ok && it != trace.inflows().end(); ++it)
            ok = StepFunction::window_equal(it->second, it->second, lo, lo + p, p);
        if (ok) return Periodicity{p, lo};
    }
    return std::nullopt;
}

}  // namespace ideflow
