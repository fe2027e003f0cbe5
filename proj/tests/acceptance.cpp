// Acceptance gate. Runs every release criterion end to end and prints one
// [PASS]/[FAIL] line per criterion with its runtime; the exit code is the
// number of failed criteria. Every comparison is exact rational equality —
// there are no numeric tolerances anywhere in this suite. The CLI binary
// path is injected by the build as IDEFLOW_CLI_PATH (used by the
// determinism criterion).

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <ideflow/engine.hpp>
#include <ideflow/instances.hpp>
#include <ideflow/labels.hpp>
#include <ideflow/thinflow.hpp>
#include <ideflow/verify.hpp>
#include <ideflow/waterfill.hpp>

#include "trace_mutation.hpp"

#ifndef IDEFLOW_CLI_PATH
#error "IDEFLOW_CLI_PATH must be defined by the build"
#endif

namespace {

using namespace ideflow;
using Clock = std::chrono::steady_clock;

Rat R(const std::string& s) { return Rat::parse(s); }

// ---------------------------------------------------------------------------
// Tiny harness: collect failures per criterion, print one line each.
// ---------------------------------------------------------------------------

class Criterion {
  public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) fails_.push_back(what);
    }
    void expect_eq(const Rat& got, const Rat& want, const std::string& what) {
        expect(got == want, what + ": got " + got.str() + ", want " + want.str());
    }
    int checks() const { return checks_; }
    const std::vector<std::string>& failures() const { return fails_; }

  private:
    int checks_ = 0;
    std::vector<std::string> fails_;
};

int run_criterion(int id, const std::string& title,
                  const std::function<void(Criterion&)>& body) {
    Criterion c;
    const auto t0 = Clock::now();
    try {
        body(c);
    } catch (const std::exception& ex) {
        c.expect(false, std::string("unexpected exception: ") + ex.what());
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    const bool pass = c.failures().empty();
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << title
              << " (" << c.checks() << " checks, " << ms << " ms)\n";
    for (std::size_t i = 0; i < c.failures().size() && i < 5; ++i)
        std::cout << "        - " << c.failures()[i] << "\n";
    if (c.failures().size() > 5)
        std::cout << "        - ... and " << c.failures().size() - 5 << " more\n";
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

Rat rate(const Instance& inst, const FlowTrace& t, const std::string& commodity,
         const std::string& edge, const Rat& theta) {
    return t.inflow(inst.commodity_id(commodity), inst.edge_id(edge)).eval(theta);
}

Rat queue_at(const Instance& inst, const FlowTrace& t, const std::string& edge,
             const Rat& theta) {
    return t.queue_length(inst.edge_id(edge), theta);
}

bool has_boundary(const FlowTrace& t, const Rat& b) {
    for (const auto& ph : t.phases())
        if (ph.start == b || ph.end == b) return true;
    return false;
}

SimulationReport run(const Instance& inst, const Rat& horizon) {
    EngineConfig cfg;
    cfg.horizon = horizon;
    return simulate(inst, cfg);
}

// Minimum objective over the simplex grid {z : sum z = b, z_i multiple of b/32}.
Rat grid_min_objective(const std::vector<HFunc>& hs, const Rat& b) {
    const int steps = 32;
    const Rat quantum = b / steps;
    Rat best;
    bool have = false;
    std::vector<Rat> z(hs.size());
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == hs.size()) {
            z[i] = quantum * left;
            const Rat obj = opt_objective(hs, z);
            if (!have || obj < best) {
                best = obj;
                have = true;
            }
            return;
        }
        for (int k = 0; k <= left; ++k) {
            z[i] = quantum * k;
            rec(i + 1, left - k);
        }
    };
    rec(0, steps);
    return best;
}

/// Random queue values and demands on top of a generated network; the active
/// sets are the tight edges of a fresh label pass, as the rate solver expects.
ThinFlowProblem random_problem(const Instance& inst, DetRng& rng,
                               std::vector<LabelView>& labels_out,
                               const std::vector<int>& sinks) {
    ThinFlowProblem p;
    p.inst = &inst;
    p.queue_positive.assign(inst.edges.size(), 0);
    std::vector<Rat> queues(inst.edges.size());
    for (std::size_t e = 0; e < inst.edges.size(); ++e) {
        if (rng.below(2) == 0) continue;
        queues[e] = Rat(static_cast<long long>(1 + rng.below(4))) / Rat(2);
        p.queue_positive[e] = 1;
    }
    labels_out.clear();
    for (const int sink : sinks) {
        const LabelView lv = compute_labels(inst, queues, sink);
        TfCommodity c;
        c.id = "g@" + inst.nodes[sink];
        c.sink = sink;
        c.active = lv.tight;
        for (std::size_t v = 0; v < inst.nodes.size(); ++v) {
            if (!lv.dist[v] || static_cast<int>(v) == sink) continue;
            if (rng.below(2) == 0) continue;
            c.demand[static_cast<int>(v)] =
                Rat(static_cast<long long>(1 + rng.below(8))) / Rat(2);
        }
        labels_out.push_back(lv);
        p.commodities.push_back(std::move(c));
    }
    return p;
}

/// Independent single-commodity witness: process nodes by ascending label and
/// water-fill each out-star directly.
ThinFlow sweep_reference(const ThinFlowProblem& p, const LabelView& labels) {
    const Instance& inst = *p.inst;
    const TfCommodity& c = p.commodities[0];
    ThinFlow ref;
    ref.x.resize(1);
    ref.a.resize(1);
    std::vector<int> order;
    for (std::size_t v = 0; v < inst.nodes.size(); ++v)
        if (labels.dist[v]) order.push_back(static_cast<int>(v));
    std::sort(order.begin(), order.end(), [&](int u, int v) {
        if (*labels.dist[u] != *labels.dist[v]) return *labels.dist[u] < *labels.dist[v];
        return inst.nodes[u] < inst.nodes[v];
    });
    for (const int v : order) {
        if (v == c.sink) {
            ref.a[0][v] = Rat(0);
            continue;
        }
        std::vector<int> outs;
        for (const int e : inst.out_edges[v])
            if (c.active[e]) outs.push_back(e);
        std::sort(outs.begin(), outs.end(), [&](int a, int b) {
            return inst.edges[a].id < inst.edges[b].id;
        });
        Rat b;
        if (const auto it = c.demand.find(v); it != c.demand.end()) b = it->second;
        std::vector<HFunc> hs;
        for (const int e : outs)
            hs.push_back(build_h(inst.edges[e], ref.a[0].at(inst.edges[e].head),
                                 Rat(p.queue_positive[e] ? 1 : 0)));
        sort_by_beta(hs);
        const Split split = waterfill(b, hs);
        for (std::size_t i = 0; i < hs.size(); ++i)
            ref.x[0][inst.edge_id(hs[i].id)] = split.z[i];
        ref.a[0][v] = split.level;
    }
    return ref;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Criteria.
// ---------------------------------------------------------------------------

void criterion_1_merge(Criterion& c) {
    const auto t0 = Clock::now();
    const Instance inst = make_merge();
    const SimulationReport rep = run(inst, Rat(3));
    const FlowTrace& t = rep.trace;
    c.expect(rep.outcome == OutcomeKind::HorizonReached, "outcome must be horizon_reached");
    c.expect_eq(rate(inst, t, "c1", "s1t", Rat(0)), Rat(1), "first-commodity direct rate on [0,1)");
    c.expect_eq(rate(inst, t, "c1", "s1v", Rat(0)), Rat(2), "first-commodity detour rate on [0,1)");
    c.expect_eq(queue_at(inst, t, "s2t", Rat(2)), Rat(3), "merge-edge queue at time 2");
    c.expect_eq(rate(inst, t, "c1", "s2t", Rat(2)), Rat(1), "even split, merge edge, on [2,3)");
    c.expect_eq(rate(inst, t, "c1", "s2s1", Rat(2)), Rat(1), "even split, return edge, on [2,3)");
    for (const char* th : {"2", "9/4", "5/2", "11/4", "3"})
        c.expect_eq(queue_at(inst, t, "s2t", R(th)), Rat(3),
                    std::string("merge-edge queue constant at time ") + th);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    c.expect(ms < 1000, "runtime must stay under 1 s, took " + std::to_string(ms) + " ms");
}

void criterion_2_detour(Criterion& c) {
    const auto t0 = Clock::now();
    const Instance inst = make_detour();
    const SimulationReport rep = run(inst, Rat(20));
    const FlowTrace& t = rep.trace;
    c.expect(rep.outcome == OutcomeKind::Terminated, "outcome must be terminated");
    for (const char* b : {"0", "1", "2", "5/2", "7/2", "4", "9/2", "5"})
        c.expect(has_boundary(t, R(b)), std::string("missing phase boundary ") + b);
    c.expect_eq(rate(inst, t, "c", "st", Rat(0)), Rat(2), "direct rate at 0");
    c.expect_eq(rate(inst, t, "c", "sv", Rat(0)), Rat(14), "detour rate at 0");
    c.expect_eq(rate(inst, t, "c", "wt", R("5/2")), Rat(1), "exit rate at 5/2");
    c.expect_eq(rate(inst, t, "c", "ws", R("5/2")), Rat(6), "loop-back rate at 5/2");
    c.expect_eq(rate(inst, t, "c", "wt", R("7/2")), Rat(6), "exit rate at 7/2");
    c.expect_eq(rate(inst, t, "c", "ws", R("7/2")), Rat(1), "loop-back rate at 7/2");
    c.expect_eq(rate(inst, t, "c", "st", R("9/2")), Rat(0), "direct rate at 9/2");
    c.expect_eq(rate(inst, t, "c", "sv", R("9/2")), Rat(1), "detour rate at 9/2");
    c.expect_eq(queue_at(inst, t, "st", Rat(1)), Rat(1), "direct queue at 1");
    c.expect_eq(queue_at(inst, t, "sv", Rat(1)), Rat(7), "detour queue at 1");
    c.expect_eq(queue_at(inst, t, "wt", Rat(3)), Rat(3), "exit queue at 3");
    const auto vol = t.volumes(rep.at);
    c.expect_eq(vol.total, Rat(0), "remaining volume at the stop time");
    c.expect_eq(vol.arrived, Rat(16), "volume arrived at the stop time");
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
    c.expect(ms < 1000, "runtime must stay under 1 s, took " + std::to_string(ms) + " ms");
}

void criterion_3_two_sink(Criterion& c) {
    {
        const auto t0 = Clock::now();
        const Instance inst = make_two_sink_cycle();
        const SimulationReport rep = run(inst, Rat(20));
        c.expect(rep.outcome == OutcomeKind::HorizonReached,
                 "full construction must still be running at the horizon");
        const Rat support_end = inflow_support_end(inst);
        c.expect_eq(support_end, Rat(5), "demand release window end");
        const Rat frozen = rep.trace.volumes(support_end).total;
        for (int th = 6; th <= 20; ++th)
            c.expect(rep.trace.volumes(Rat(th)).total == frozen,
                     "network volume must stay constant after release ends (time " +
                         std::to_string(th) + ")");
        const auto per = detect_periodicity(rep.trace, Rat(10), Rat(5));
        c.expect(per.has_value(), "a repeating state must be found");
        if (per) c.expect_eq(per->period, Rat(5), "state period");
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0)
                .count();
        c.expect(ms < 60000,
                 "full construction must finish under 60 s, took " + std::to_string(ms) +
                     " ms");
    }
    {
        const auto t0 = Clock::now();
        const Instance smoke = make_cycle_smoke();
        const SimulationReport rep = run(smoke, Rat(60));
        c.expect(rep.outcome == OutcomeKind::Terminated,
                 "smoke-size variant drains through its frozen-cost exits");
        c.expect_eq(rep.at, Rat(51), "smoke-size stop time");
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0)
                .count();
        c.expect(ms < 1000, "smoke-size variant must finish under 1 s, took " +
                                std::to_string(ms) + " ms");
    }
}

void criterion_4_single_source(Criterion& c) {
    const Instance inst = make_single_source_cycle();
    const SimulationReport rep = run(inst, Rat(70));
    c.expect(rep.outcome == OutcomeKind::HorizonReached,
             "single-source variant must still be running at the horizon");

    const auto build = detail::build_two_sink();
    int bad_queue = 0;
    int bad_reach = 0;
    for (const auto& ring : build.rings) {
        const std::string wt = ring.prefix + ".src.w>t" + std::to_string(ring.copy);
        if (rep.trace.queue_length(inst.edge_id(wt), Rat(3)) != Rat(ring.shift + 50))
            ++bad_queue;
        const std::string entry =
            ring.shift > 0 ? ring.prefix + ".stilde" : ring.prefix + ".v1";
        const StepFunction& out =
            rep.trace.edge_outflow(inst.edge_id(ring.prefix + ".src.w>" + entry));
        if (out.eval(Rat(5)) != Rat(2) || out.eval(Rat(11, 2)) != Rat(2) ||
            out.eval(Rat(6)) != Rat(0))
            ++bad_reach;
    }
    c.expect(bad_queue == 0, "warm-up queue must hold one unit above the ring path time "
                             "on every exit edge at time 3 (" +
                                 std::to_string(bad_queue) + " of 270 wrong)");
    c.expect(bad_reach == 0,
             "rate 2 must reach every ring entry proxy exactly during [5,6) (" +
                 std::to_string(bad_reach) + " of 270 wrong)");

    const auto per = detect_periodicity(rep.trace, Rat(60), Rat(5));
    c.expect(per.has_value(), "a repeating state must be found after warm-up");
    if (per) c.expect_eq(per->period, Rat(5), "state period");
}

void criterion_5_verifier(Criterion& c) {
    const Instance merge = make_merge();
    const SimulationReport mrep = run(merge, Rat(3));
    c.expect(verify_feasible(merge, mrep.trace).pass(), "merge trace must be feasible");
    c.expect(verify_ide(merge, mrep.trace).pass(), "merge trace must route on shortest paths");

    const Instance diamond = make_diamond();
    const SimulationReport drep = run(diamond, Rat(10));
    c.expect(verify_feasible(diamond, drep.trace).pass(), "diamond trace must be feasible");
    c.expect(verify_ide(diamond, drep.trace).pass(),
             "diamond trace must route on shortest paths");

    const Instance detour = make_detour();
    const SimulationReport rep = run(detour, Rat(20));
    c.expect(verify_feasible(detour, rep.trace).pass(), "detour trace must be feasible");
    c.expect(verify_ide(detour, rep.trace).pass(),
             "detour trace must route on shortest paths");

    const auto base = nlohmann::ordered_json::parse(rep.trace.to_json_text());
    c.expect(tracemut::mutation_slots(base).size() >= 50,
             "the mutation operator must find at least 50 distinct targets");
    for (unsigned seed = 1; seed <= 100; ++seed) {
        const tracemut::Mutation m = tracemut::mutate_trace(base, seed);
        const FlowTrace t = FlowTrace::from_json_text(detour, m.trace.dump());
        const bool caught =
            !verify_feasible(detour, t).pass() || !verify_ide(detour, t).pass();
        c.expect(caught, "mutation must be caught (seed " + std::to_string(seed) +
                             ": " + m.description + ")");
    }
}

void criterion_6_waterfill(Criterion& c) {
    DetRng rng(60001);
    const std::vector<Rat> betas = {Rat(-2), Rat(-1), Rat(-1, 2), Rat(0),
                                    Rat(1, 2), Rat(1), Rat(2)};
    const std::vector<Rat> gammas = {Rat(0), Rat(1, 2), Rat(1), Rat(2), Rat(4)};
    const std::vector<Rat> alphas = {Rat(1, 2), Rat(1), Rat(2), Rat(3)};
    int kkt_bad = 0;
    int grid_bad = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t p = 1 + rng.below(4);
        std::vector<HFunc> hs;
        for (std::size_t i = 0; i < p; ++i)
            hs.push_back(HFunc{"e" + std::to_string(i), rng.pick(betas), rng.pick(gammas),
                               rng.pick(alphas)});
        sort_by_beta(hs);
        const Rat b(static_cast<long long>(1 + rng.below(16)), 2);  // 1/2 .. 8
        const Split s = waterfill(b, hs);
        Rat total;
        bool kkt = true;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            if (s.z[i].sign() < 0) kkt = false;
            total += s.z[i];
            if (s.z[i].sign() > 0 && hs[i].eval(s.z[i]) != s.level) kkt = false;
            if (s.z[i].sign() == 0 && hs[i].eval(Rat(0)) < s.level) kkt = false;
        }
        if (total != b) kkt = false;
        if (!kkt) ++kkt_bad;
        if (opt_objective(hs, s.z) > grid_min_objective(hs, b)) ++grid_bad;
    }
    c.expect(kkt_bad == 0, "marginal-cost optimality conditions violated on " +
                               std::to_string(kkt_bad) + " of 500 trials");
    c.expect(grid_bad == 0, "a 1/32-grid point beat the split on " +
                                std::to_string(grid_bad) + " of 500 trials");
}

void criterion_7_thinflow(Criterion& c) {
    int failed = 0;
    int single = 0;
    int sweep_bad = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        RandomParams params;
        params.nodes = 6;
        params.edges = 8;
        params.sinks = 1 + static_cast<int>(seed % 3);
        params.acyclic = (seed % 2 == 0);
        const Instance inst = make_random(seed, params);
        std::vector<int> sinks;
        for (const auto& cm : inst.commodities)
            if (std::find(sinks.begin(), sinks.end(), cm.sink) == sinks.end())
                sinks.push_back(cm.sink);
        DetRng rng(seed * 7919);
        std::vector<LabelView> labels;
        const ThinFlowProblem p = random_problem(inst, rng, labels, sinks);
        const ThinFlow tf = solve_thinflow(p);
        if (!check_thinflow(p, tf).pass()) ++failed;
        if (sinks.size() == 1) {
            ++single;
            const ThinFlow ref = sweep_reference(p, labels[0]);
            if (!check_thinflow(p, ref).pass()) ++sweep_bad;
        }
    }
    c.expect(failed == 0,
             std::to_string(failed) + " of 200 solved problems failed validation");
    c.expect(single >= 50, "want at least 50 single-commodity cases, got " +
                               std::to_string(single));
    c.expect(sweep_bad == 0, std::to_string(sweep_bad) +
                                 " independent water-fill sweeps failed validation");
}

void criterion_8_termination(Criterion& c) {
    for (int pass = 0; pass < 2; ++pass) {
        RandomParams params;
        params.sinks = pass == 0 ? 1 : 2;
        params.acyclic = pass == 1;
        int ok = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const Instance inst = make_random(seed + (pass ? 900 : 0), params);
            EngineConfig cfg;
            cfg.horizon = Rat(100000);
            cfg.max_phases = 10000;
            const SimulationReport rep = simulate(inst, cfg);
            const bool good = rep.outcome == OutcomeKind::Terminated &&
                              rep.certificate.has_value() &&
                              rep.certificate->gamma == Rat(0) &&
                              rep.trace.volumes(rep.at).total == Rat(0);
            if (good)
                ++ok;
            else
                c.expect(false, std::string(pass == 0 ? "single-sink" : "acyclic two-sink") +
                                    " seed " + std::to_string(seed + (pass ? 900 : 0)) +
                                    " did not terminate cleanly");
        }
        c.expect(ok == 100, std::string(pass == 0 ? "single-sink" : "acyclic two-sink") +
                                ": " + std::to_string(ok) + " of 100 terminated with a "
                                "certificate and an empty network");
    }
}

void criterion_9_determinism(Criterion& c) {
    const auto dir = std::filesystem::temp_directory_path() / "ideflow_acceptance";
    std::filesystem::create_directories(dir);
    const auto sh = [&](const std::string& args) {
        const std::string cmd =
            std::string(IDEFLOW_CLI_PATH) + " " + args + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    for (const std::string name : {"merge", "detour"}) {
        const auto inst = (dir / (name + ".json")).string();
        const auto run_a = (dir / (name + "_a.json")).string();
        const auto run_b = (dir / (name + "_b.json")).string();
        c.expect(sh("gen " + name + " --out " + inst) == 0, name + ": gen must succeed");
        const std::string flags = " --horizon 20 --out ";
        c.expect(sh("simulate " + inst + flags + run_a) == 0,
                 name + ": first run must succeed");
        c.expect(sh("simulate " + inst + flags + run_b) == 0,
                 name + ": second run must succeed");
        const std::string a = slurp(run_a);
        c.expect(!a.empty(), name + ": trace file must not be empty");
        c.expect(a == slurp(run_b), name + ": reruns must write byte-identical traces");
    }
}

}  // namespace

int main() {
    std::cout << "acceptance gate: exact rational comparisons only, zero tolerance\n";
    int failures = 0;
    failures += run_criterion(1, "worked merge example, frozen split and queue values",
                              criterion_1_merge);
    failures += run_criterion(2, "worked detour example, frozen evolution and clean stop",
                              criterion_2_detour);
    failures += run_criterion(3, "cyclic two-sink construction never drains, period 5",
                              criterion_3_two_sink);
    failures += run_criterion(4, "single-source variant warm-up checkpoints and period 5",
                              criterion_4_single_source);
    failures += run_criterion(5, "verifier accepts engine traces, catches 100 corruptions",
                              criterion_5_verifier);
    failures += run_criterion(6, "water-fill optimality on 500 random marginal-cost sets",
                              criterion_6_waterfill);
    failures += run_criterion(7, "rate solver validated on 200 random snapshots",
                              criterion_7_thinflow);
    failures += run_criterion(8, "random instances terminate with certificates (200 seeds)",
                              criterion_8_termination);
    failures += run_criterion(9, "CLI reruns produce byte-identical trace files",
                              criterion_9_determinism);
    std::cout << (failures == 0 ? "all criteria passed"
                                : std::to_string(failures) + " criteria failed")
              << "\n";
    return failures;
}
