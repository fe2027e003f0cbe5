#pragma once

// Network instances: directed multigraphs with free-flow times and service
// capacities per edge, plus commodities (source, sink, finitely supported
// network inflow). Includes the JSON file format, validation, and two static
// analyses used by the termination certificate: nu_min and tau_delta.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ideflow/common.hpp"
#include "ideflow/rational.hpp"
#include "ideflow/step_function.hpp"

namespace ideflow {

using Json = nlohmann::ordered_json;

struct Edge {
    std::string id;
    int tail = -1;
    int head = -1;
    Rat tau;  // free-flow transit time, > 0
    Rat nu;   // service capacity, > 0
};

struct Commodity {
    std::string id;
    int source = -1;
    int sink = -1;
    StepFunction inflow;  // nonnegative, finite support
};

/// Result of the minimum positive path-length-gap analysis. The gap is taken
/// over the pooled multiset of simple-path transit-time totals into the sink,
/// collected from every start node. `capped` reports that path enumeration
/// hit its budget, in which case the value is unusable (reported infinite).
struct TauDelta {
    bool finite = false;
    bool capped = false;
    Rat value;                          // meaningful only when finite
    std::array<Rat, 2> witness_lengths; // two path lengths realizing the gap
};

class Instance {
  public:
    std::vector<std::string> nodes;
    std::vector<Edge> edges;
    std::vector<Commodity> commodities;

    // Derived lookups (rebuilt by finalize()).
    std::map<std::string, int> node_index;
    std::map<std::string, int> edge_index;
    std::map<std::string, int> commodity_index;
    std::vector<std::vector<int>> out_edges;  // per node
    std::vector<std::vector<int>> in_edges;   // per node

    int node_id(const std::string& id) const {
        const auto it = node_index.find(id);
        if (it == node_index.end()) throw ValidationError("unknown node id '" + id + "'");
        return it->second;
    }
    int edge_id(const std::string& id) const {
        const auto it = edge_index.find(id);
        if (it == edge_index.end()) throw ValidationError("unknown edge id '" + id + "'");
        return it->second;
    }
    int commodity_id(const std::string& id) const {
        const auto it = commodity_index.find(id);
        if (it == commodity_index.end())
            throw ValidationError("unknown commodity id '" + id + "'");
        return it->second;
    }

    /// Rebuilds indexes and enforces every structural invariant; throws
    /// ValidationError naming the offending element.
    void finalize() {
        node_index.clear();
        edge_index.clear();
        commodity_index.clear();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].empty()) throw ValidationError("node with empty id");
            if (!node_index.emplace(nodes[i], static_cast<int>(i)).second)
                throw ValidationError("duplicate node id '" + nodes[i] + "'");
        }
        out_edges.assign(nodes.size(), {});
        in_edges.assign(nodes.size(), {});
        for (std::size_t e = 0; e < edges.size(); ++e) {
            Edge& ed = edges[e];
            if (ed.id.empty()) throw ValidationError("edge with empty id");
            if (!edge_index.emplace(ed.id, static_cast<int>(e)).second)
                throw ValidationError("duplicate edge id '" + ed.id + "'");
            if (ed.tail < 0 || ed.tail >= static_cast<int>(nodes.size()) || ed.head < 0 ||
                ed.head >= static_cast<int>(nodes.size()))
                throw ValidationError("edge '" + ed.id + "' references unknown node");
            if (!(ed.tau > 0))
                throw ValidationError("edge '" + ed.id + "' needs positive transit time");
            if (!(ed.nu > 0))
                throw ValidationError("edge '" + ed.id + "' needs positive capacity");
            out_edges[ed.tail].push_back(static_cast<int>(e));
            in_edges[ed.head].push_back(static_cast<int>(e));
        }
        for (std::size_t c = 0; c < commodities.size(); ++c) {
            Commodity& cm = commodities[c];
            if (cm.id.empty()) throw ValidationError("commodity with empty id");
            if (!commodity_index.emplace(cm.id, static_cast<int>(c)).second)
                throw ValidationError("duplicate commodity id '" + cm.id + "'");
            if (cm.source < 0 || cm.source >= static_cast<int>(nodes.size()) ||
                cm.sink < 0 || cm.sink >= static_cast<int>(nodes.size()))
                throw ValidationError("commodity '" + cm.id + "' references unknown node");
            if (cm.source == cm.sink)
                throw ValidationError("commodity '" + cm.id + "' has source equal to sink");
            for (const auto& v : cm.inflow.segment_values())
                if (v.sign() < 0)
                    throw ValidationError("commodity '" + cm.id + "' has negative inflow");
            if (!cm.inflow.breakpoints().empty() && cm.inflow.breakpoints().front().sign() < 0)
                throw ValidationError("commodity '" + cm.id + "' has inflow before time 0");
            if (!(cm.inflow.default_value() == 0))
                throw ValidationError("commodity '" + cm.id + "' needs finite inflow support");
            if (!reaches(cm.source, cm.sink))
                throw ValidationError("commodity '" + cm.id + "': sink '" + nodes[cm.sink] +
                                      "' unreachable from source '" + nodes[cm.source] + "'");
        }
    }

    bool reaches(int from, int to) const {
        if (from == to) return true;
        std::vector<char> seen(nodes.size(), 0);
        std::vector<int> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (const int e : out_edges[v]) {
                const int w = edges[e].head;
                if (w == to) return true;
                if (!seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
        return false;
    }

    /// Distinct sink nodes over all commodities, in first-seen order.
    std::vector<int> distinct_sinks() const {
        std::vector<int> sinks;
        for (const auto& c : commodities)
            if (std::find(sinks.begin(), sinks.end(), c.sink) == sinks.end())
                sinks.push_back(c.sink);
        return sinks;
    }

    Rat nu_min() const {
        if (edges.empty()) throw ParamError("nu_min: instance has no edges");
        Rat m = edges.front().nu;
        for (const auto& e : edges) m = min(m, e.nu);
        return m;
    }

    /// Minimum positive gap between transit-time totals of simple paths into
    /// `sink`, pooled over all start nodes. Enumeration visits at most
    /// `path_cap` paths; beyond that the result is reported as capped.
    TauDelta tau_delta(int sink, long long path_cap = 1'000'000) const {
        TauDelta result;
        std::set<Rat> lengths;
        long long budget = path_cap;
        // Depth-first over the reversed graph: every partial path discovered
        // is a simple path from its current start node into the sink.
        std::vector<char> on_path(nodes.size(), 0);
        on_path[sink] = 1;
        struct Frame {
            int node;
            std::size_t next = 0;
        };
        std::vector<Frame> stack{{sink}};
        Rat length = 0;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < in_edges[f.node].size()) {
                const int e = in_edges[f.node][f.next++];
                const int u = edges[e].tail;
                if (on_path[u]) continue;  // keep paths simple
                if (budget-- <= 0) {
                    result.capped = true;
                    return result;
                }
                length += edges[e].tau;
                lengths.insert(length);
                on_path[u] = 1;
                stack.push_back({u});
            } else {
                const int node = f.node;
                stack.pop_back();
                on_path[node] = 0;
                if (!stack.empty()) {
                    // Undo the tau of the edge that led here; that edge is the
                    // parent's most recent (non-skipped) pick.
                    const Frame& parent = stack.back();
                    const int e = in_edges[parent.node][parent.next - 1];
                    length -= edges[e].tau;
                }
            }
        }
        if (lengths.size() < 2) return result;  // no positive gap exists
        auto it = lengths.begin();
        Rat prev = *it++;
        std::optional<Rat> best;
        Rat lo, hi;
        for (; it != lengths.end(); ++it) {
            const Rat gap = *it - prev;
            if (!best || gap < *best) {
                best = gap;
                lo = prev;
                hi = *it;
            }
            prev = *it;
        }
        result.finite = true;
        result.value = *best;
        result.witness_lengths = {lo, hi};
        return result;
    }

    // -- JSON -----------------------------------------------------------------

    static Instance from_json_text(const std::string& text) {
        Json j;
        try {
            j = Json::parse(text);
        } catch (const std::exception& e) {
            throw ParseError(std::string("instance JSON: ") + e.what());
        }
        return from_json(j);
    }

    static Instance from_json(const Json& j) {
        Instance inst;
        try {
            if (!j.is_object() || !j.contains("nodes") || !j.contains("edges") ||
                !j.contains("commodities"))
                throw ParseError("instance JSON: expected nodes / edges / commodities");
            for (const auto& n : j.at("nodes")) inst.nodes.push_back(n.get<std::string>());
            // Temporary name-based lookup so edges can be resolved during the
            // parse even though finalize() rebuilds the index afterwards.
            std::map<std::string, int> names;
            for (std::size_t i = 0; i < inst.nodes.size(); ++i)
                names.emplace(inst.nodes[i], static_cast<int>(i));
            const auto lookup = [&](const std::string& id, const std::string& what) {
                const auto it = names.find(id);
                if (it == names.end())
                    throw ValidationError(what + " references unknown node '" + id + "'");
                return it->second;
            };
            for (const auto& je : j.at("edges")) {
                Edge e;
                e.id = je.at("id").get<std::string>();
                e.tail = lookup(je.at("tail").get<std::string>(), "edge '" + e.id + "'");
                e.head = lookup(je.at("head").get<std::string>(), "edge '" + e.id + "'");
                e.tau = Rat::parse(je.at("tau").get<std::string>());
                e.nu = Rat::parse(je.at("nu").get<std::string>());
                inst.edges.push_back(std::move(e));
            }
            for (const auto& jc : j.at("commodities")) {
                Commodity c;
                c.id = jc.at("id").get<std::string>();
                c.source =
                    lookup(jc.at("source").get<std::string>(), "commodity '" + c.id + "'");
                c.sink = lookup(jc.at("sink").get<std::string>(), "commodity '" + c.id + "'");
                Rat cursor(-1);
                for (const auto& jseg : jc.at("inflow")) {
                    const Rat from = Rat::parse(jseg.at("from").get<std::string>());
                    const Rat to = Rat::parse(jseg.at("to").get<std::string>());
                    const Rat rate = Rat::parse(jseg.at("rate").get<std::string>());
                    if (!(from < to))
                        throw ValidationError("commodity '" + c.id +
                                              "': inflow segment with empty interval");
                    if (from < cursor)
                        throw ValidationError("commodity '" + c.id +
                                              "': inflow segments must be ordered and disjoint");
                    if (rate.sign() < 0)
                        throw ValidationError("commodity '" + c.id + "' has negative inflow");
                    c.inflow.append_segment(from, to, rate);
                    cursor = to;
                }
                inst.commodities.push_back(std::move(c));
            }
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("instance JSON: ") + e.what());
        }
        inst.finalize();
        return inst;
    }

    Json to_json() const {
        Json j;
        j["nodes"] = Json::array();
        for (const auto& n : nodes) j["nodes"].push_back(n);
        j["edges"] = Json::array();
        for (const auto& e : edges) {
            Json je;
            je["id"] = e.id;
            je["tail"] = nodes[e.tail];
            je["head"] = nodes[e.head];
            je["tau"] = e.tau.str();
            je["nu"] = e.nu.str();
            j["edges"].push_back(std::move(je));
        }
        j["commodities"] = Json::array();
        for (const auto& c : commodities) {
            Json jc;
            jc["id"] = c.id;
            jc["source"] = nodes[c.source];
            jc["sink"] = nodes[c.sink];
            jc["inflow"] = Json::array();
            const auto f = c.inflow.normalized();
            const auto& bps = f.breakpoints();
            for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
                const Rat& v = f.segment_values()[k];
                if (v.is_zero()) continue;
                Json seg;
                seg["from"] = bps[k].str();
                seg["to"] = bps[k + 1].str();
                seg["rate"] = v.str();
                jc["inflow"].push_back(std::move(seg));
            }
            j["commodities"].push_back(std::move(jc));
        }
        return j;
    }

    std::string to_json_text() const { return to_json().dump(2) + "\n"; }
};

}  // namespace ideflow
