#include <gtest/gtest.h>

#include <random>

#include <decpomdp/decpomdp.hpp>
#include <decpomdp/io.hpp>
#include <decpomdp/verify.hpp>

using namespace decpomdp;

namespace {

std::vector<Outcome> initial(const DecPomdp& m) {
    std::vector<Outcome> b;
    for (int s = 0; s < m.n_states(); ++s)
        if (m.initial_belief()[s] > 0.0) b.push_back({s, m.initial_belief()[s]});
    return b;
}

std::vector<Outcome> random_belief(const DecPomdp& m, std::mt19937& rng, int support) {
    std::uniform_int_distribution<int> pick(0, m.n_states() - 1);
    std::uniform_real_distribution<double> w(0.05, 1.0);
    std::map<int, double> d;
    for (int x = 0; x < support; ++x) d[pick(rng)] += w(rng);
    double z = 0.0;
    for (auto& [s, p] : d) z += p;
    std::vector<Outcome> b;
    for (auto& [s, p] : d) b.push_back({s, p / z});
    return b;
}

HeuristicSpec tr_spec(int r, Reveal v = Reveal::at_r_plus_1) {
    HeuristicSpec s;
    s.kind = HeuristicKind::tr;
    s.r = r;
    s.variant = v;
    return s;
}

} // namespace

TEST(MaxrTerminal, Examples) {
    DecPomdp tiger = load_model("dectiger");
    auto three = maxr_terminal(tiger, 3);
    auto zero = maxr_terminal(tiger, 0);
    for (double v : three->values()) EXPECT_DOUBLE_EQ(v, 60.0);
    for (double v : zero->values()) EXPECT_DOUBLE_EQ(v, 0.0);
    DecPomdp box = load_model("boxpushing");
    double rmax = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < box.n_states(); ++s)
        for (int a = 0; a < box.n_joint_actions(); ++a) rmax = std::max(rmax, box.R(s, a));
    auto one = maxr_terminal(box, 1);
    for (double v : one->values()) EXPECT_DOUBLE_EQ(v, rmax);
}

TEST(MdpTerminal, Examples) {
    DecPomdp m = load_model("dectiger");
    auto zero = mdp_terminal(m, 0);
    auto five = mdp_terminal(m, 5);
    for (double v : zero->values()) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : five->values()) EXPECT_NEAR(v, 100.0, 1e-9);
    EXPECT_NEAR(mdp_terminal(m, 6)->value(initial(m)), 120.0, 1e-9);
}

TEST(SolveHeuristic, SingleStageClosedForm) {
    DecPomdp m = load_model("recycling");
    HeuristicContext ctx(m, 4, {});
    auto term = mdp_terminal(m, 3);
    auto b = initial(m);
    std::vector<int> free(m.n_agents(), -1);
    double expect = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < m.n_joint_actions(); ++a) {
        double v = 0.0;
        for (const auto& [s, p] : b) {
            v += p * m.R(s, a);
            for (const auto& [s2, pt] : m.successors(s, a)) v += p * pt * term->values()[s2];
        }
        expect = std::max(expect, v);
    }
    EXPECT_NEAR(ctx.solve_heuristic(b, free.data(), 1, *term), expect, 1e-9);
}

TEST(SolveHeuristic, DecTigerTwoStages) {
    DecPomdp m = load_model("dectiger");
    HeuristicContext ctx(m, 2, {});
    std::vector<int> free(m.n_agents(), -1);
    EXPECT_NEAR(ctx.solve_heuristic(initial(m), free.data(), 2, *mdp_terminal(m, 0), 1'000'000), -4.0, 1e-9);
}

TEST(SolveHeuristic, FullHorizonSearchIsExact) {
    for (const auto& name : {"dectiger", "recycling", "broadcast", "firefighting"}) {
        DecPomdp m = load_model(name);
        HeuristicContext ctx(m, 3, {});
        std::vector<int> free(m.n_agents(), -1);
        EXPECT_NEAR(ctx.solve_heuristic(initial(m), free.data(), 3, *mdp_terminal(m, 0), 10'000'000),
                    brute_force_optimum(m, 3), 1e-9)
            << name;
    }
}

TEST(SolveHeuristic, AbortStillBounds) {
    for (const auto& name : {"dectiger", "grid", "recycling"}) {
        DecPomdp m = load_model(name);
        HeuristicContext ctx(m, 3, {});
        std::vector<int> free(m.n_agents(), -1);
        double aborted = ctx.solve_heuristic(initial(m), free.data(), 3, *mdp_terminal(m, 0), 1);
        EXPECT_GE(aborted + 1e-9, brute_force_optimum(m, 3)) << name;
    }
}

TEST(HeuristicValue, BoundsTheOptimum) {
    DecPomdp m = load_model("dectiger");
    HeuristicSpec spec;
    spec.kind = HeuristicKind::mdp;
    spec.r = 2;
    EXPECT_GE(heuristic_value(m, 3, spec) + 1e-9, brute_force_optimum(m, 3));
    spec.kind = HeuristicKind::qmdp;
    double qmdp = heuristic_value(m, 3, spec);
    EXPECT_GE(qmdp + 1e-9, brute_force_optimum(m, 3));
    EXPECT_LE(qmdp, mdp_bound(m, 3) + 1e-9);
}

TEST(HeuristicValue, NeverAboveTheMdpBound) {
    for (const auto& name : benchmark_names()) {
        DecPomdp m = load_model(name);
        for (auto kind : {HeuristicKind::mdp, HeuristicKind::tr}) {
            HeuristicSpec spec;
            spec.kind = kind;
            spec.r = 2;
            EXPECT_LE(heuristic_value(m, 4, spec), mdp_bound(m, 4) + 1e-9) << name;
        }
    }
}

TEST(TrTerminal, BelowOneStepMdpValue) {
    for (const auto& name : {"dectiger", "grid", "recycling", "firefighting"}) {
        DecPomdp m = load_model(name);
        HeuristicContext ctx(m, 6, tr_spec(2));
        auto tab = ctx.tr_terminal(4, Reveal::at_r_plus_1);
        auto* q = dynamic_cast<RevealAtRPlus1*>(tab.get());
        ASSERT_NE(q, nullptr);
        for (int s = 0; s < m.n_states(); ++s)
            for (int a = 0; a < m.n_joint_actions(); ++a) EXPECT_LE(q->entry(s, a), q->mdp_entry(s, a) + 1e-9);
    }
}

TEST(TrTerminal, ShortTailIsThePointSolve) {
    DecPomdp m = load_model("dectiger");
    HeuristicContext ctx(m, 6, tr_spec(3));
    auto tab = ctx.tr_terminal(2, Reveal::at_r);
    auto* v = dynamic_cast<RevealAtR*>(tab.get());
    ASSERT_NE(v, nullptr);
    std::vector<int> free(m.n_agents(), -1);
    for (int s = 0; s < m.n_states(); ++s) {
        std::vector<Outcome> point{{s, 1.0}};
        EXPECT_NEAR(v->entry(s), ctx.solve_heuristic(point, free.data(), 2, *mdp_terminal(m, 0)), 1e-9);
    }
}

TEST(TrTerminal, RevealLaterIsTighter) {
    std::mt19937 rng(23);
    for (const auto& name : {"dectiger", "grid", "recycling", "broadcast", "firefighting"}) {
        DecPomdp m = load_model(name);
        HeuristicContext ctx(m, 8, tr_spec(2));
        for (int tail : {1, 2, 3, 5}) {
            auto late = ctx.tr_terminal(tail, Reveal::at_r_plus_1);
            auto early = ctx.tr_terminal(tail, Reveal::at_r);
            for (int trial = 0; trial < 20; ++trial) {
                auto b = random_belief(m, rng, 3);
                EXPECT_LE(late->value(b), early->value(b) + 1e-9) << name << " tail " << tail;
            }
        }
    }
}

class Admissibility : public ::testing::TestWithParam<std::tuple<std::string, int, int>> {};

TEST_P(Admissibility, EveryNodeBoundsItsCompletions) {
    auto [name, h, r] = GetParam();
    CheckReport rep = check_admissible(load_model(name), h, tr_spec(r));
    EXPECT_TRUE(rep.ok) << rep.detail;
}

INSTANTIATE_TEST_SUITE_P(SmallInstances, Admissibility,
                         ::testing::Combine(::testing::Values("dectiger", "recycling", "broadcast"),
                                            ::testing::Values(1, 2, 3), ::testing::Values(1, 2)),
                         [](const auto& info) {
                             return std::get<0>(info.param) + "_h" + std::to_string(std::get<1>(info.param)) + "_r" +
                                    std::to_string(std::get<2>(info.param));
                         });

TEST(Admissibility, MdpReductionOnDecTiger) {
    HeuristicSpec spec;
    spec.kind = HeuristicKind::mdp;
    spec.r = 2;
    CheckReport rep = check_admissible(load_model("dectiger"), 3, spec);
    EXPECT_TRUE(rep.ok) << rep.detail;
}
