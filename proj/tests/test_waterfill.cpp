#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "ideflow/instances.hpp"
#include "ideflow/waterfill.hpp"

using namespace ideflow;

namespace {

HFunc hf(const char* id, const Rat& beta, const Rat& gamma, const Rat& alpha) {
    return HFunc{id, beta, gamma, alpha};
}

void check_kkt(const std::vector<HFunc>& hs, const Rat& b, const Split& s) {
    Rat total;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        REQUIRE(s.z[i].sign() >= 0);
        total += s.z[i];
        if (s.z[i].sign() > 0)
            CHECK(hs[i].eval(s.z[i]) == s.level);
        else
            CHECK(hs[i].eval(Rat(0)) >= s.level);
    }
    CHECK(total == b);
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

}  // namespace

TEST_CASE("marginal-cost builder") {
    const Instance detour = make_detour();
    const HFunc st = build_h(detour.edges[detour.edge_id("st")], Rat(0), Rat(0));
    CHECK(st.beta == 0);
    CHECK(st.gamma == 1);
    CHECK(st.alpha == 1);
    const HFunc sv = build_h(detour.edges[detour.edge_id("sv")], Rat(0), Rat(0));
    CHECK(sv.beta == 0);
    CHECK(sv.gamma == 7);
    CHECK(sv.alpha == 7);

    const Edge queued{"e", 0, 1, Rat(1), Rat(1)};
    const HFunc h = build_h(queued, Rat(0), Rat(5));
    CHECK(h.beta == -1);
    CHECK(h.gamma == 0);
    CHECK(h.alpha == 1);

    CHECK_THROWS_AS(build_h(queued, Rat(0), Rat(-1)), ParamError);
}

TEST_CASE("two-piece marginal cost evaluates and integrates exactly") {
    const HFunc h = hf("e", Rat(1, 2), Rat(3), Rat(2));
    CHECK(h.eval(Rat(0)) == Rat(1, 2));
    CHECK(h.eval(Rat(3)) == Rat(1, 2));
    CHECK(h.eval(Rat(5)) == Rat(1, 2) + Rat(1));  // (5-3)/2 = 1 above the flat part
    CHECK(h.fill_at(Rat(0)) == 0);                // below beta
    CHECK(h.fill_at(Rat(1, 2)) == 3);
    CHECK(h.fill_at(Rat(3, 2)) == 5);
    CHECK(h.integral_to(Rat(3)) == Rat(3, 2));
    CHECK(h.integral_to(Rat(5)) == Rat(5, 2) + Rat(1));  // 1/2*5 + 2^2/4
}

TEST_CASE("burst split at the detour source") {
    // b = 16 over st:(0,1,1), sv:(0,7,7) -> (2,14) at level 1.
    std::vector<HFunc> hs = {hf("st", Rat(0), Rat(1), Rat(1)),
                             hf("sv", Rat(0), Rat(7), Rat(7))};
    sort_by_beta(hs);
    const Split s = waterfill(Rat(16), hs);
    CHECK(s.z == std::vector<Rat>{Rat(2), Rat(14)});
    CHECK(s.level == 1);
    check_kkt(hs, Rat(16), s);
}

TEST_CASE("split against a draining queue") {
    // b = 7 over wt:(-1,0,1), ws:(0,6,6) -> (1,6) at level 0.
    std::vector<HFunc> hs = {hf("wt", Rat(-1), Rat(0), Rat(1)),
                             hf("ws", Rat(0), Rat(6), Rat(6))};
    sort_by_beta(hs);
    const Split s = waterfill(Rat(7), hs);
    CHECK(s.z == std::vector<Rat>{Rat(1), Rat(6)});
    CHECK(s.level == 0);
    check_kkt(hs, Rat(7), s);
}

TEST_CASE("split when the alternative is expensive") {
    // b = 7 over wt:(-1,0,1), ws:(5,6,6) -> (6,1) at level 5: wt fills all the
    // way to the next threshold, ws takes the slack inside its flat segment.
    std::vector<HFunc> hs = {hf("wt", Rat(-1), Rat(0), Rat(1)),
                             hf("ws", Rat(5), Rat(6), Rat(6))};
    sort_by_beta(hs);
    const Split s = waterfill(Rat(7), hs);
    CHECK(s.z == std::vector<Rat>{Rat(6), Rat(1)});
    CHECK(s.level == 5);
    check_kkt(hs, Rat(7), s);
}

TEST_CASE("zero balance gives zero shares") {
    std::vector<HFunc> hs = {hf("a", Rat(2), Rat(1), Rat(1))};
    const Split s = waterfill(Rat(0), hs);
    CHECK(s.z == std::vector<Rat>{Rat(0)});
    CHECK(s.level == 2);
    const Split empty = waterfill(Rat(0), {});
    CHECK(empty.z.empty());
}

TEST_CASE("balance below the first flat segment") {
    // Even edge 1 cannot reach beta_1's fill: share sits inside the jump.
    std::vector<HFunc> hs = {hf("a", Rat(1), Rat(4), Rat(2)),
                             hf("b", Rat(3), Rat(1), Rat(1))};
    const Split s = waterfill(Rat(2), hs);
    CHECK(s.z == std::vector<Rat>{Rat(2), Rat(0)});
    CHECK(s.level == 1);
    check_kkt(hs, Rat(2), s);
}

TEST_CASE("waterfill input validation") {
    std::vector<HFunc> unsorted = {hf("b", Rat(3), Rat(1), Rat(1)),
                                   hf("a", Rat(1), Rat(4), Rat(2))};
    CHECK_THROWS_AS(waterfill(Rat(1), unsorted), ParamError);
    std::vector<HFunc> tie_wrong = {hf("b", Rat(1), Rat(1), Rat(1)),
                                    hf("a", Rat(1), Rat(4), Rat(2))};
    CHECK_THROWS_AS(waterfill(Rat(1), tie_wrong), ParamError);
    CHECK_THROWS_AS(waterfill(Rat(-1), {}), ParamError);
    CHECK_THROWS_AS(waterfill(Rat(1), {}), ParamError);
    std::vector<HFunc> bad_alpha = {hf("a", Rat(1), Rat(1), Rat(0))};
    CHECK_THROWS_AS(waterfill(Rat(1), bad_alpha), ParamError);
}

TEST_CASE("objective value") {
    const std::vector<HFunc> hs = {hf("st", Rat(0), Rat(1), Rat(1)),
                                   hf("sv", Rat(0), Rat(7), Rat(7))};
    CHECK(opt_objective(hs, {Rat(0), Rat(0)}) == 0);
    // Optimal split (2,14): 1/2 from st (unit slope above 1) plus 7/2 from sv.
    CHECK(opt_objective(hs, {Rat(2), Rat(14)}) == 4);
    CHECK_THROWS_AS(opt_objective(hs, {Rat(1)}), ParamError);
    CHECK_THROWS_AS(opt_objective(hs, std::vector<Rat>{Rat(-1), Rat(0)}), ParamError);
}

TEST_CASE("random splits satisfy the marginal-cost conditions and beat the grid") {
    DetRng rng(20240815);
    const std::vector<Rat> betas = {Rat(-2), Rat(-1), Rat(-1, 2), Rat(0),
                                    Rat(1, 2), Rat(1), Rat(2)};
    const std::vector<Rat> gammas = {Rat(0), Rat(1, 2), Rat(1), Rat(2), Rat(4)};
    const std::vector<Rat> alphas = {Rat(1, 2), Rat(1), Rat(2), Rat(3)};
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t p = 1 + rng.below(4);
        std::vector<HFunc> hs;
        for (std::size_t i = 0; i < p; ++i)
            hs.push_back(hf(("e" + std::to_string(i)).c_str(), rng.pick(betas),
                            rng.pick(gammas), rng.pick(alphas)));
        sort_by_beta(hs);
        const Rat b(static_cast<long long>(rng.below(17)), 2);  // 0 .. 8 step 1/2
        const Split s = waterfill(b, hs);
        check_kkt(hs, b, s);
        if (b.sign() > 0 && trial % 4 == 0) {
            const Rat mine = opt_objective(hs, s.z);
            CHECK(mine <= grid_min_objective(hs, b));
        }
    }
}
