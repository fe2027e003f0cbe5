#pragma once

// The evolving flow over time: per-(commodity, edge) inflow step functions
// committed phase by phase, the exactly maintained queue length of every
// edge, and the outflows those two determine. Outflows are never independent
// facts: within a committed phase the inflow rate is constant and the queue
// is piecewise linear, so the edge's exit-time map T(v) = v + tau + q(v)/nu
// is piecewise linear as well, and each entry segment [a, b) drains through
// the queue onto the exit window [T(a), T(b)) at 1/slope(T) times its entry
// rate, split across commodities in entry proportions (strict FIFO).

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/instance.hpp"
#include "ideflow/pwl_function.hpp"
#include "ideflow/rational.hpp"
#include "ideflow/step_function.hpp"

namespace ideflow {

enum class PhaseEventKind {
    QueueDepleted,
    EdgeActivated,
    NodeInflowBreakpoint,
    NetworkInflowBreakpoint,
    HorizonReached,
    NetworkEmpty,
};

inline const char* phase_event_kind_name(PhaseEventKind k) {
    switch (k) {
        case PhaseEventKind::QueueDepleted: return "queue_depleted";
        case PhaseEventKind::EdgeActivated: return "edge_activated";
        case PhaseEventKind::NodeInflowBreakpoint: return "node_inflow_breakpoint";
        case PhaseEventKind::NetworkInflowBreakpoint: return "network_inflow_breakpoint";
        case PhaseEventKind::HorizonReached: return "horizon_reached";
        case PhaseEventKind::NetworkEmpty: return "network_empty";
    }
    throw InternalError("phase_event_kind_name: unknown kind");
}

inline PhaseEventKind phase_event_kind_from(const std::string& name) {
    for (const PhaseEventKind k :
         {PhaseEventKind::QueueDepleted, PhaseEventKind::EdgeActivated,
          PhaseEventKind::NodeInflowBreakpoint, PhaseEventKind::NetworkInflowBreakpoint,
          PhaseEventKind::HorizonReached, PhaseEventKind::NetworkEmpty})
        if (name == phase_event_kind_name(k)) return k;
    throw ParseError("unknown phase event kind '" + name + "'");
}

struct PhaseEvent {
    PhaseEventKind kind;
    std::optional<std::string> edge;       // QueueDepleted, EdgeActivated
    std::optional<std::string> commodity;  // EdgeActivated, NetworkInflowBreakpoint
    std::optional<std::string> node;       // NodeInflowBreakpoint
};

struct PhaseRecord {
    Rat start;
    Rat end;
    std::vector<PhaseEvent> events;
};

class FlowTrace {
  public:
    explicit FlowTrace(const Instance& inst)
        : inst_(&inst),
          agg_in_(inst.edges.size()),
          agg_out_(inst.edges.size()),
          queues_(inst.edges.size()) {}

    const Instance& instance() const { return *inst_; }
    const Rat& horizon() const { return horizon_; }
    const std::vector<PhaseRecord>& phases() const { return phases_; }
    const std::map<std::pair<int, int>, StepFunction>& inflows() const {
        return inflows_;
    }
    const std::vector<PwlFunction>& queues() const { return queues_; }

    const StepFunction& inflow(int commodity, int edge) const {
        const auto it = inflows_.find({commodity, edge});
        return it == inflows_.end() ? zero_step() : it->second;
    }
    const StepFunction& outflow(int commodity, int edge) const {
        require_outflows();
        const auto it = outflows_.find({commodity, edge});
        return it == outflows_.end() ? zero_step() : it->second;
    }
    const StepFunction& edge_inflow(int edge) const {
        return agg_in_[static_cast<std::size_t>(edge)];
    }
    const StepFunction& edge_outflow(int edge) const {
        require_outflows();
        return agg_out_[static_cast<std::size_t>(edge)];
    }
    const PwlFunction& queue(int edge) const {
        return queues_[static_cast<std::size_t>(edge)];
    }

    /// q_e(theta), from the exactly maintained piecewise-linear queue.
    Rat queue_length(int edge, const Rat& theta) const {
        return queues_[static_cast<std::size_t>(edge)].eval(theta);
    }

    /// T_e(v) = v + tau_e + q_e(v)/nu_e: when a particle entering at v leaves.
    Rat exit_time(int edge, const Rat& entry) const {
        const Edge& e = inst_->edges[static_cast<std::size_t>(edge)];
        return entry + e.tau + queue_length(edge, entry) / e.nu;
    }

    /// b_{i,v}(theta): commodity i's arrival rate at v, network inflow included.
    Rat node_inflow(int commodity, int node, const Rat& theta) const {
        require_outflows();
        Rat sum;
        for (const int e : inst_->in_edges[static_cast<std::size_t>(node)]) {
            const auto it = outflows_.find({commodity, e});
            if (it != outflows_.end()) sum += it->second.eval(theta);
        }
        const Commodity& c = inst_->commodities[static_cast<std::size_t>(commodity)];
        if (c.source == node) sum += c.inflow.eval(theta);
        return sum;
    }

    struct Volumes {
        std::vector<Rat> edge_load;  // F+_e(theta) - F-_e(theta), per edge
        Rat total;                   // flow currently in the network
        Rat arrived;                 // flow already absorbed at its own sink
    };

    /// Edge loads, total network volume and arrived volume at `theta`; the
    /// exact identity total == sum of injected - arrived is self-checked.
    Volumes volumes(const Rat& theta) const {
        require_outflows();
        Volumes v;
        v.edge_load.reserve(inst_->edges.size());
        for (std::size_t e = 0; e < inst_->edges.size(); ++e) {
            Rat load = agg_in_[e].integral_to(theta) - agg_out_[e].integral_to(theta);
            v.total += load;
            v.edge_load.push_back(std::move(load));
        }
        Rat injected;
        for (std::size_t i = 0; i < inst_->commodities.size(); ++i) {
            const Commodity& c = inst_->commodities[i];
            injected += c.inflow.integral_to(theta);
            for (const int e : inst_->in_edges[static_cast<std::size_t>(c.sink)]) {
                const auto it = outflows_.find({static_cast<int>(i), e});
                if (it != outflows_.end()) v.arrived += it->second.integral_to(theta);
            }
        }
        if (v.total != injected - v.arrived)
            throw InternalError("volume identity violated at time " + theta.str() +
                                ": on-edge " + v.total.str() + " != injected " +
                                injected.str() + " - arrived " + v.arrived.str());
        return v;
    }

    /// Commits one phase [horizon, end) of constant inflow rates, extends the
    /// queues by their exact linear evolution (splitting at an interior
    /// depletion) and derives the outflows induced on [T(start), T(end)).
    void append_phase(const std::map<std::pair<int, int>, Rat>& rates, const Rat& end,
                      std::vector<PhaseEvent> events) {
        const Rat start = horizon_;
        if (!(start < end)) throw ParamError("append_phase: end must exceed start");
        // Group rates per edge and validate.
        std::map<int, std::vector<std::pair<int, Rat>>> by_edge;
        for (const auto& [key, rate] : rates) {
            const auto& [i, e] = key;
            if (i < 0 || i >= static_cast<int>(inst_->commodities.size()) || e < 0 ||
                e >= static_cast<int>(inst_->edges.size()))
                throw ParamError("append_phase: rate key out of range");
            if (rate.sign() < 0) throw ParamError("append_phase: negative inflow rate");
            if (rate.sign() > 0) by_edge[e].emplace_back(i, rate);
        }

        // Inflow commits (zero rates are implicit: the step default is 0).
        std::set<int> touched;
        for (const auto& [e, parts] : by_edge) {
            Rat total;
            for (const auto& [i, rate] : parts) {
                inflows_[{i, e}].append_segment(start, end, rate);
                total += rate;
            }
            agg_in_[static_cast<std::size_t>(e)].append_segment(start, end, total);
            touched.insert(e);
        }
        for (std::size_t e = 0; e < inst_->edges.size(); ++e)
            if (queues_[e].eval(start).sign() > 0) touched.insert(static_cast<int>(e));

        for (const int e : touched) {
            const auto it = by_edge.find(e);
            derive_edge_phase(e, start, end,
                              it == by_edge.end() ? std::vector<std::pair<int, Rat>>{}
                                                  : it->second);
        }

        horizon_ = end;
        phases_.push_back({start, end, std::move(events)});

        run_self_check(touched, end);
    }

    /// Adds one more event to the most recently committed phase (used when a
    /// condition — like the network draining empty — is only observable after
    /// the phase ended).
    void append_final_event(PhaseEvent ev) {
        if (phases_.empty())
            throw ParamError("append_final_event: trace has no phases");
        phases_.back().events.push_back(std::move(ev));
    }

    // ---- serialization ------------------------------------------------------

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["horizon"] = horizon_.str();
        j["phases"] = nlohmann::ordered_json::array();
        for (const auto& ph : phases_) {
            nlohmann::ordered_json jp;
            jp["start"] = ph.start.str();
            jp["end"] = ph.end.str();
            jp["events"] = nlohmann::ordered_json::array();
            for (const auto& ev : ph.events) {
                nlohmann::ordered_json je;
                je["kind"] = phase_event_kind_name(ev.kind);
                if (ev.edge) je["edge"] = *ev.edge;
                if (ev.commodity) je["commodity"] = *ev.commodity;
                if (ev.node) je["node"] = *ev.node;
                jp["events"].push_back(std::move(je));
            }
            j["phases"].push_back(std::move(jp));
        }

        // Inflows sorted by (commodity id, edge id); identical zeros omitted.
        std::vector<std::pair<std::pair<std::string, std::string>, const StepFunction*>>
            rows;
        for (const auto& [key, fn] : inflows_) {
            const StepFunction norm = fn.normalized();
            if (norm.breakpoints().empty() && norm.default_value().is_zero()) continue;
            rows.push_back({{inst_->commodities[static_cast<std::size_t>(key.first)].id,
                             inst_->edges[static_cast<std::size_t>(key.second)].id},
                            &fn});
        }
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        j["inflows"] = nlohmann::ordered_json::array();
        for (const auto& [names, fn] : rows) {
            nlohmann::ordered_json ji;
            ji["commodity"] = names.first;
            ji["edge"] = names.second;
            ji["fn"] = step_to_json(*fn);
            j["inflows"].push_back(std::move(ji));
        }

        // Queues sorted by edge id; identically-zero queues omitted.
        std::vector<std::pair<std::string, const PwlFunction*>> qrows;
        for (std::size_t e = 0; e < queues_.size(); ++e) {
            bool zero = queues_[e].final_slope().is_zero();
            for (const auto& v : queues_[e].values())
                if (!v.is_zero()) zero = false;
            if (zero) continue;
            qrows.push_back({inst_->edges[e].id, &queues_[e]});
        }
        std::sort(qrows.begin(), qrows.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        j["queues"] = nlohmann::ordered_json::array();
        for (const auto& [id, fn] : qrows) {
            nlohmann::ordered_json jq;
            jq["edge"] = id;
            jq["fn"] = pwl_to_json(*fn);
            j["queues"].push_back(std::move(jq));
        }
        return j;
    }

    std::string to_json_text() const { return to_json().dump(2) + "\n"; }

    /// Loads a trace leniently: structure, ids and shapes are validated, the
    /// recorded values are not (semantic checking is the verifier's job).
    /// Outflow derivation is attempted; consumers that need outflows get a
    /// ValidationError if the recorded functions cannot support them.
    static FlowTrace from_json(const Instance& inst, const nlohmann::json& j) {
        FlowTrace t(inst);
        try {
            t.horizon_ = Rat::parse(j.at("horizon").get<std::string>());
            Rat cursor(0);
            for (const auto& jp : j.at("phases")) {
                PhaseRecord ph;
                ph.start = Rat::parse(jp.at("start").get<std::string>());
                ph.end = Rat::parse(jp.at("end").get<std::string>());
                if (ph.start != cursor)
                    throw ParseError("phases must tile [0, horizon]: got start " +
                                     ph.start.str() + ", expected " + cursor.str());
                if (!(ph.start < ph.end))
                    throw ParseError("phase end must exceed start at " + ph.start.str());
                cursor = ph.end;
                for (const auto& je : jp.at("events")) {
                    PhaseEvent ev;
                    ev.kind = phase_event_kind_from(je.at("kind").get<std::string>());
                    if (je.contains("edge")) {
                        ev.edge = je.at("edge").get<std::string>();
                        inst.edge_id(*ev.edge);  // must exist
                    }
                    if (je.contains("commodity")) {
                        ev.commodity = je.at("commodity").get<std::string>();
                        inst.commodity_id(*ev.commodity);  // must exist
                    }
                    if (je.contains("node")) {
                        ev.node = je.at("node").get<std::string>();
                        inst.node_id(*ev.node);  // must exist
                    }
                    ph.events.push_back(std::move(ev));
                }
                t.phases_.push_back(std::move(ph));
            }
            if (cursor != t.horizon_)
                throw ParseError("phases end at " + cursor.str() + " but horizon is " +
                                 t.horizon_.str());

            for (const auto& ji : j.at("inflows")) {
                const int i = inst.commodity_id(ji.at("commodity").get<std::string>());
                const int e = inst.edge_id(ji.at("edge").get<std::string>());
                if (t.inflows_.count({i, e}))
                    throw ParseError("duplicate inflow entry for commodity '" +
                                     ji.at("commodity").get<std::string>() +
                                     "', edge '" + ji.at("edge").get<std::string>() +
                                     "'");
                t.inflows_[{i, e}] = step_from_json(ji.at("fn"));
            }
            std::set<int> qseen;
            for (const auto& jq : j.at("queues")) {
                const int e = inst.edge_id(jq.at("edge").get<std::string>());
                if (!qseen.insert(e).second)
                    throw ParseError("duplicate queue entry for edge '" +
                                     jq.at("edge").get<std::string>() + "'");
                t.queues_[static_cast<std::size_t>(e)] = pwl_from_json(jq.at("fn"));
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(std::string("malformed trace JSON: ") + ex.what());
        }

        // Aggregate inflows, then derive outflows if the recorded functions
        // allow it. Failure is remembered, not fatal: the verifier reads only
        // the recorded functions and never calls outflow accessors.
        for (const auto& [key, fn] : t.inflows_) {
            std::vector<const StepFunction*> parts{
                &t.agg_in_[static_cast<std::size_t>(key.second)], &fn};
            t.agg_in_[static_cast<std::size_t>(key.second)] = StepFunction::sum(parts);
        }
        try {
            t.derive_all();
        } catch (const ValidationError& ex) {
            t.outflow_error_ = ex.what();
        }
        return t;
    }

    static FlowTrace from_json_text(const Instance& inst, const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(std::string("malformed trace JSON: ") + ex.what());
        }
        return from_json(inst, j);
    }

    /// Long-format breakpoint dump: time,kind,commodity,edge,value with kind
    /// in {inflow, outflow, queue}, sorted by all columns; lossless for the
    /// stored step/PWL data.
    std::string to_csv() const {
        require_outflows();
        using Row = std::tuple<Rat, std::string, std::string, std::string, Rat>;
        std::vector<Row> rows;
        const auto dump_steps = [&](const std::map<std::pair<int, int>, StepFunction>& m,
                                    const char* kind) {
            for (const auto& [key, fn] : m) {
                const StepFunction norm = fn.normalized();
                const std::string& cid =
                    inst_->commodities[static_cast<std::size_t>(key.first)].id;
                const std::string& eid =
                    inst_->edges[static_cast<std::size_t>(key.second)].id;
                for (const auto& b : norm.breakpoints())
                    rows.emplace_back(b, kind, cid, eid, norm.eval(b));
            }
        };
        dump_steps(inflows_, "inflow");
        dump_steps(outflows_, "outflow");
        for (std::size_t e = 0; e < queues_.size(); ++e) {
            const PwlFunction& q = queues_[e];
            bool zero = q.final_slope().is_zero();
            for (const auto& v : q.values())
                if (!v.is_zero()) zero = false;
            if (zero) continue;
            for (std::size_t k = 0; k < q.breakpoints().size(); ++k)
                rows.emplace_back(q.breakpoints()[k], "queue", "",
                                  inst_->edges[e].id, q.values()[k]);
        }
        std::sort(rows.begin(), rows.end());
        std::string out = "time,kind,commodity,edge,value\n";
        for (const auto& [time, kind, cid, eid, value] : rows) {
            out += time.str();
            out += ',';
            out += kind;
            out += ',';
            out += cid;
            out += ',';
            out += eid;
            out += ',';
            out += value.str();
            out += '\n';
        }
        return out;
    }

  private:
    static const StepFunction& zero_step() {
        static const StepFunction zero;
        return zero;
    }

    /// Self-check (bug trap, not input validation): cumulative inflow minus
    /// cumulative outflow shifted by tau must equal the queue.
    void run_self_check(const std::set<int>& touched, const Rat& end) const {
        for (const int e : touched) {
            const Edge& ed = inst_->edges[static_cast<std::size_t>(e)];
            const Rat fin = agg_in_[static_cast<std::size_t>(e)].integral_to(end);
            const Rat fout =
                agg_out_[static_cast<std::size_t>(e)].integral_to(end + ed.tau);
            const Rat q = queues_[static_cast<std::size_t>(e)].eval(end);
            if (fin - fout != q)
                throw InternalError("queue bookkeeping broken on edge '" + ed.id +
                                    "' at time " + end.str() + ": cumulative in " +
                                    fin.str() + ", out " + fout.str() + ", queue " +
                                    q.str());
        }
    }

    void require_outflows() const {
        if (!outflow_error_.empty())
            throw ValidationError("trace outflows unavailable: " + outflow_error_);
    }

    static nlohmann::ordered_json step_to_json(const StepFunction& fn) {
        const StepFunction norm = fn.normalized();
        nlohmann::ordered_json j;
        j["default"] = norm.default_value().str();
        j["breakpoints"] = nlohmann::ordered_json::array();
        for (const auto& b : norm.breakpoints()) j["breakpoints"].push_back(b.str());
        j["values"] = nlohmann::ordered_json::array();
        for (const auto& v : norm.segment_values()) j["values"].push_back(v.str());
        return j;
    }

    static StepFunction step_from_json(const nlohmann::json& j) {
        StepFunction f(Rat::parse(j.at("default").get<std::string>()));
        std::vector<Rat> bps;
        for (const auto& b : j.at("breakpoints"))
            bps.push_back(Rat::parse(b.get<std::string>()));
        std::vector<Rat> vals;
        for (const auto& v : j.at("values"))
            vals.push_back(Rat::parse(v.get<std::string>()));
        if (bps.empty() && vals.empty()) return f;
        if (bps.size() != vals.size() + 1)
            throw ParseError("step function needs one more breakpoint than values");
        for (std::size_t k = 0; k + 1 < bps.size(); ++k)
            if (!(bps[k] < bps[k + 1]))
                throw ParseError("step function breakpoints must be ascending");
        StepFunction out(f.default_value());
        for (std::size_t k = 0; k < vals.size(); ++k)
            out.append_segment(bps[k], bps[k + 1], vals[k]);
        return out;
    }

    static nlohmann::ordered_json pwl_to_json(const PwlFunction& fn) {
        nlohmann::ordered_json j;
        j["breakpoints"] = nlohmann::ordered_json::array();
        for (const auto& b : fn.breakpoints()) j["breakpoints"].push_back(b.str());
        j["values"] = nlohmann::ordered_json::array();
        for (const auto& v : fn.values()) j["values"].push_back(v.str());
        j["final_slope"] = fn.final_slope().str();
        return j;
    }

    static PwlFunction pwl_from_json(const nlohmann::json& j) {
        std::vector<Rat> bps;
        for (const auto& b : j.at("breakpoints"))
            bps.push_back(Rat::parse(b.get<std::string>()));
        std::vector<Rat> vals;
        for (const auto& v : j.at("values"))
            vals.push_back(Rat::parse(v.get<std::string>()));
        const Rat slope = Rat::parse(j.at("final_slope").get<std::string>());
        if (bps.empty() || bps.size() != vals.size())
            throw ParseError("queue function breakpoints/values size mismatch");
        for (std::size_t k = 0; k + 1 < bps.size(); ++k)
            if (!(bps[k] < bps[k + 1]))
                throw ParseError("queue function breakpoints must be ascending");
        return PwlFunction(bps, vals, slope);
    }

    /// Extends edge e's queue over [start, end) under constant aggregate
    /// inflow and derives the outflow windows of the entry segment.
    void derive_edge_phase(int e, const Rat& start, const Rat& end,
                           const std::vector<std::pair<int, Rat>>& parts) {
        const Edge& ed = inst_->edges[static_cast<std::size_t>(e)];
        Rat total;
        for (const auto& [i, rate] : parts) total += rate;

        // Queue evolution: while positive it changes at total - nu; an empty
        // queue grows only when overfed. One interior depletion splits the
        // phase into a draining piece and a flat-zero piece.
        struct Piece {
            Rat a, b, slope;
        };
        std::vector<Piece> pieces;
        PwlFunction& qfn = queues_[static_cast<std::size_t>(e)];
        const Rat q0 = qfn.eval(start);
        // Pin the core at phase start so idle phases stay an explicit flat
        // piece instead of being absorbed into the new linear segment.
        if (qfn.end_time() < start) qfn.append_point(start, q0);
        const Rat raw = total - ed.nu;
        if (q0.sign() > 0) {
            if (raw.sign() < 0) {
                const Rat depletion = start + q0 / -raw;
                if (depletion < end) {
                    pieces.push_back({start, depletion, raw});
                    pieces.push_back({depletion, end, Rat(0)});
                } else {
                    pieces.push_back({start, end, raw});
                }
            } else {
                pieces.push_back({start, end, raw});
            }
        } else {
            pieces.push_back({start, end, max(raw, Rat(0))});
        }

        Rat q = q0;
        for (const auto& piece : pieces) {
            const Rat q_next = q + piece.slope * (piece.b - piece.a);
            if (q_next.sign() < 0)
                throw InternalError("negative queue on edge '" + ed.id + "' at time " +
                                    piece.b.str());
            qfn.append_point(piece.b, q_next);

            // Exit window of this entry piece: T is linear with slope
            // 1 + q'/nu; a zero slope means no particle entering here ever
            // fronts the queue (pure drain), so there is nothing to emit.
            const Rat sigma = Rat(1) + piece.slope / ed.nu;
            if (sigma.sign() < 0)
                throw InternalError("exit order reversed on edge '" + ed.id + "'");
            if (sigma.sign() > 0) {
                const Rat from = piece.a + ed.tau + q / ed.nu;
                const Rat to = piece.b + ed.tau + q_next / ed.nu;
                for (const auto& [i, rate] : parts)
                    outflows_[{i, e}].append_segment(from, to, rate / sigma);
                if (total.sign() > 0)
                    agg_out_[static_cast<std::size_t>(e)].append_segment(from, to,
                                                                         total / sigma);
            }
            q = q_next;
        }
    }

    /// Rebuilds all outflows from the recorded inflows and queues (loaded
    /// traces). Throws ValidationError when the recorded functions are not
    /// derivable (negative rates, queues draining faster than capacity, ...).
    void derive_all() {
        outflows_.clear();
        for (auto& f : agg_out_) f = StepFunction();
        if (horizon_.sign() <= 0) return;
        for (std::size_t e = 0; e < inst_->edges.size(); ++e) {
            const Edge& ed = inst_->edges[e];
            const StepFunction& fin = agg_in_[e];
            const PwlFunction& q = queues_[e];
            std::vector<Rat> grid{Rat(0), horizon_};
            for (const auto& b : fin.breakpoints())
                if (Rat(0) < b && b < horizon_) grid.push_back(b);
            for (const auto& b : q.breakpoints())
                if (Rat(0) < b && b < horizon_) grid.push_back(b);
            std::sort(grid.begin(), grid.end());
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

            // Which commodities feed this edge at all?
            std::vector<int> feeders;
            for (const auto& [key, fn] : inflows_)
                if (key.second == static_cast<int>(e)) feeders.push_back(key.first);

            for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
                const Rat& a = grid[k];
                const Rat& b = grid[k + 1];
                const Rat qa = q.eval(a);
                const Rat qb = q.eval(b);
                if (qa.sign() < 0 || qb.sign() < 0)
                    throw ValidationError("negative queue recorded on edge '" + ed.id +
                                          "'");
                const Rat sigma = Rat(1) + (qb - qa) / (b - a) / ed.nu;
                if (sigma.sign() < 0)
                    throw ValidationError("queue on edge '" + ed.id +
                                          "' drains faster than capacity near time " +
                                          a.str());
                if (sigma.is_zero()) continue;
                const Rat from = a + ed.tau + qa / ed.nu;
                const Rat to = b + ed.tau + qb / ed.nu;
                Rat total;
                for (const int i : feeders) {
                    const Rat rate = inflows_.at({i, static_cast<int>(e)}).eval(a);
                    if (rate.sign() < 0)
                        throw ValidationError("negative inflow recorded on edge '" +
                                              ed.id + "'");
                    if (rate.sign() == 0) continue;
                    outflows_[{i, static_cast<int>(e)}].append_segment(from, to,
                                                                       rate / sigma);
                    total += rate;
                }
                if (total.sign() > 0)
                    agg_out_[e].append_segment(from, to, total / sigma);
            }
        }
        outflow_error_.clear();
    }

    const Instance* inst_;
    Rat horizon_{0};
    std::vector<PhaseRecord> phases_;
    std::map<std::pair<int, int>, StepFunction> inflows_;
    std::map<std::pair<int, int>, StepFunction> outflows_;
    std::vector<StepFunction> agg_in_;
    std::vector<StepFunction> agg_out_;
    std::vector<PwlFunction> queues_;
    std::string outflow_error_;
};

}  // namespace ideflow
