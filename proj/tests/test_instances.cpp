#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "ideflow/instances.hpp"

using namespace ideflow;

TEST_CASE("merge builder") {
    const Instance inst = make_merge();
    CHECK(inst.nodes.size() == 4);
    CHECK(inst.edges.size() == 5);
    CHECK(inst.commodities.size() == 2);
    CHECK(inst.edges[inst.edge_id("s1v")].nu == 2);
    CHECK(inst.edges[inst.edge_id("s1t")].tau == 3);
    CHECK(inst.commodities[0].inflow.eval(Rat(1, 2)) == 3);
    CHECK(inst.commodities[0].inflow.eval(Rat(1)) == 0);
    CHECK(inst.commodities[1].inflow.eval(Rat(1)) == 4);
    CHECK(inst.distinct_sinks() == std::vector<int>{inst.node_id("t")});
}

TEST_CASE("detour builder") {
    const Instance inst = make_detour();
    CHECK(inst.nodes.size() == 4);
    CHECK(inst.edges.size() == 5);
    CHECK(inst.edges[inst.edge_id("sv")].nu == 7);
    CHECK(inst.edges[inst.edge_id("ws")].nu == 6);
    CHECK(inst.edges[inst.edge_id("st")].tau == 3);
    CHECK(inst.commodities.size() == 1);
    CHECK(inst.commodities[0].inflow.eval(Rat(0)) == 16);
}

TEST_CASE("diamond builder") {
    const Instance inst = make_diamond();
    CHECK(inst.edges.size() == 4);
    CHECK(inst.edges[inst.edge_id("vt")].nu == 2);
    CHECK(inst.edges[inst.edge_id("wt")].nu == 1);
}

TEST_CASE("two-sink cycle construction: global shape") {
    const Instance inst = make_two_sink_cycle();
    CHECK(inst.nodes.size() == 2762);
    CHECK(inst.edges.size() == 4110);
    CHECK(inst.commodities.size() == 270);
    for (const auto& e : inst.edges) {
        CHECK(e.tau == 1);
        CHECK(e.nu == 1);
    }

    // Inflow pattern: burst of 2 over [shift, shift+1); 54 rings per shift.
    std::map<Rat, int> per_shift;
    for (const auto& c : inst.commodities) {
        const auto& bps = c.inflow.breakpoints();
        REQUIRE(bps.size() == 2);
        CHECK(bps[1] - bps[0] == 1);
        CHECK(c.inflow.eval(bps[0]) == 2);
        CHECK(bps[0] >= 0);
        CHECK(bps[0] <= 4);
        per_shift[bps[0]] += 1;
    }
    REQUIRE(per_shift.size() == 5);
    for (const auto& [shift, count] : per_shift) {
        (void)shift;
        CHECK(count == 54);
    }

    // Each commodity is sourced at its own ring entry.
    const auto& c = inst.commodities[inst.commodity_id("C0.B2+0.A0")];
    CHECK(inst.nodes[c.source] == "C0.B2+0.A0.v1");
    CHECK(inst.nodes[c.sink] == "t0");

    // Hook plumbing: ring hook nodes feed the shifted collector, collectors
    // cross over to the other copy's stack bottom, stacks exit to the other
    // copy's sink.
    CHECK_NOTHROW(inst.edge_id("C0.B2+0.A0.v2>C0.hook2+0"));
    CHECK_NOTHROW(inst.edge_id("C0.B2+1.A4.v5>C0.hook5+2"));  // base 1 + k 1 = shift 2
    CHECK_NOTHROW(inst.edge_id("C0.hook2+0>C1.B2+0.A0.v1"));
    CHECK_NOTHROW(inst.edge_id("C1.hook7+3>C0.B7+3.A0.v1"));
    CHECK_NOTHROW(inst.edge_id("C0.B2+0.A11.v2>t1"));
    CHECK_NOTHROW(inst.edge_id("C0.B5+0.pad24>t1"));
    CHECK_NOTHROW(inst.edge_id("C1.B7+0.pad12>t0"));
    CHECK_THROWS(inst.edge_id("C0.B2+0.A12.v1>C0.B2+0.A12.v2"));  // only 12 rings

    // Sinks absorb only: no outgoing edges.
    CHECK(inst.out_edges[inst.node_id("t0")].empty());
    CHECK(inst.out_edges[inst.node_id("t1")].empty());
}

TEST_CASE("single-source cycle construction: warm-up plumbing") {
    const Instance inst = make_single_source_cycle();
    CHECK(inst.nodes.size() == 2762 + 270 * 2 + 216 + 1);
    CHECK(inst.edges.size() == 4110 + 270 * 5 + 216);
    REQUIRE(inst.commodities.size() == 2);

    const auto& warm0 = inst.commodities[inst.commodity_id("warm.t0")];
    const auto& warm1 = inst.commodities[inst.commodity_id("warm.t1")];
    CHECK(inst.nodes[warm0.source] == "shat");
    CHECK(inst.nodes[warm1.source] == "shat");
    CHECK(inst.nodes[warm0.sink] == "t0");
    CHECK(inst.nodes[warm1.sink] == "t1");
    // Release 54 + shift per ring, totalled: 135*54 + 270 = 7560.
    CHECK(warm0.inflow.eval(Rat(0)) == 7560);
    CHECK(warm1.inflow.eval(Rat(0)) == 7560);
    CHECK(warm0.inflow.eval(Rat(1)) == 0);

    // Ring C0.B2+0.A0 has shift 0: no delay proxy, w connects straight to v1.
    CHECK_THROWS(inst.node_id("C0.B2+0.A0.stilde"));
    CHECK_NOTHROW(inst.edge_id("C0.B2+0.A0.src.w>C0.B2+0.A0.v1"));
    // Ring C0.B2+4.A4 has shift (1+4)%5 = 0 as well.
    CHECK_THROWS(inst.node_id("C0.B2+4.A4.stilde"));
    // Ring C0.B2+0.A4 has shift 1: delay proxy of transit time 1.
    {
        const auto& e = inst.edges[inst.edge_id("C0.B2+0.A4.stilde>C0.B2+0.A4.v1")];
        CHECK(e.tau == 1);
        CHECK(e.nu == 2);
    }
    // Warm-up gadget for a shift-3 ring: direct shortcut capacity tau_path-1.
    {
        const auto& fast = inst.edges[inst.edge_id("shat>C0.B5+0.A0.src.v")];
        CHECK(fast.tau == 1);
        CHECK(fast.nu == 6);
        const auto& slow = inst.edges[inst.edge_id("shat>C0.B5+0.A0.src.w")];
        CHECK(slow.tau == 2);
        CHECK(slow.nu == 51);  // shift 3: tau_path = 52
        const auto& vw = inst.edges[inst.edge_id("C0.B5+0.A0.src.v>C0.B5+0.A0.src.w")];
        CHECK(vw.tau == 1);
        CHECK(vw.nu == 3);
        const auto& wt = inst.edges[inst.edge_id("C0.B5+0.A0.src.w>t0")];
        CHECK(wt.tau == 1);
        CHECK(wt.nu == 1);
        const auto& ws = inst.edges[inst.edge_id("C0.B5+0.A0.src.w>C0.B5+0.A0.stilde")];
        CHECK(ws.tau == 2);
        CHECK(ws.nu == 2);
    }
}

TEST_CASE("smoke cycle construction") {
    const Instance inst = make_cycle_smoke();
    CHECK(inst.nodes.size() == 1 + 7 + 3 * 47);
    CHECK(inst.edges.size() == 8 + 3 * 48);
    CHECK(inst.commodities.size() == 1);
    CHECK(inst.edges[inst.edge_id("A.v1>A.v2")].nu == 1);
    CHECK(inst.edges[inst.edge_id("A.v2>P2.n1")].nu == 2);
    CHECK(inst.edges[inst.edge_id("P7.n47>t")].nu == 2);
}

TEST_CASE("random builder") {
    SECTION("deterministic per seed") {
        const std::string a = make_random(42).to_json_text();
        const std::string b = make_random(42).to_json_text();
        const std::string c = make_random(43).to_json_text();
        CHECK(a == b);
        CHECK(a != c);
    }
    SECTION("valid across seeds and modes") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            RandomParams p;
            p.acyclic = (seed % 2 == 0);
            p.sinks = (seed % 3 == 0) ? 2 : 1;
            const Instance inst = make_random(seed, p);  // finalize() ran inside
            CHECK(inst.commodities.size() == static_cast<std::size_t>(p.sinks) + 1);
            if (p.acyclic)
                for (const auto& e : inst.edges) CHECK(e.tail < e.head);
        }
    }
    SECTION("invalid parameters rejected") {
        RandomParams p;
        p.nodes = 1;
        CHECK_THROWS_AS(make_random(0, p), ParamError);
        p.nodes = 4;
        p.sinks = 4;
        CHECK_THROWS_AS(make_random(0, p), ParamError);
        p.sinks = 1;
        p.edges = 0;
        CHECK_THROWS_AS(make_random(0, p), ParamError);
    }
}

TEST_CASE("builtin registry") {
    const auto names = builtin_names();
    CHECK(names.size() == 6);
    for (const auto& n : names) CHECK_NOTHROW(make_builtin(n));
    CHECK_THROWS_AS(make_builtin("zork"), ParamError);
}
