#include <gtest/gtest.h>

#include <decpomdp/decpomdp.hpp>
#include <decpomdp/io.hpp>

using namespace decpomdp;

namespace {

const char* identity_model = R"(
agents: 2
discount: 1
values: reward
states: s0 s1
start:
0.5 0.5
actions:
a b
a b
observations:
x y
x y
T: * : s0 : s0 : 1
T: * : s1 : s1 : 1
O: * : * : x x : 1
R: a a : s0 : * : * : 1
)";

ClusterPolicy always_listen(const DecPomdp& m, int h) {
    ClusterPolicy pol;
    pol.k = 1;
    pol.rules.resize(m.n_agents());
    for (int i = 0; i < m.n_agents(); ++i)
        for (int t = 0; t < h; ++t) {
            std::vector<ClusterRule> rules;
            if (t == 0)
                rules.push_back({{}, 0});
            else
                for (int o = 0; o < m.n_observations(i); ++o) rules.push_back({{static_cast<std::uint8_t>(o)}, 0});
            pol.rules[i].push_back(rules);
        }
    return pol;
}

} // namespace

TEST(Parser, IdentityModelHasStochasticRows) {
    DecPomdp m = parse_dpomdp(std::string(identity_model), "identity");
    EXPECT_EQ(m.n_agents(), 2);
    EXPECT_EQ(m.n_states(), 2);
    for (int s = 0; s < m.n_states(); ++s)
        for (int a = 0; a < m.n_joint_actions(); ++a) {
            double t = 0.0;
            for (int s2 = 0; s2 < m.n_states(); ++s2) t += m.T(s, a, s2);
            EXPECT_NEAR(t, 1.0, 1e-9);
            double o = 0.0;
            for (int jo = 0; jo < m.n_joint_observations(); ++jo) o += m.O(a, s, jo);
            EXPECT_NEAR(o, 1.0, 1e-9);
        }
    EXPECT_DOUBLE_EQ(m.r_max(), 1.0);
}

TEST(Parser, DecTigerShape) {
    DecPomdp m = load_model("dectiger");
    EXPECT_EQ(m.n_agents(), 2);
    EXPECT_EQ(m.n_states(), 2);
    EXPECT_EQ(m.n_actions(0), 3);
    EXPECT_EQ(m.n_actions(1), 3);
    EXPECT_EQ(m.n_observations(0), 2);
    EXPECT_EQ(m.n_observations(1), 2);
    EXPECT_DOUBLE_EQ(m.r_max(), 20.0);
}

TEST(Parser, RowSumErrorNamesTheRow) {
    std::string text = identity_model;
    text.replace(text.find("T: * : s1 : s1 : 1"), 18, "T: * : s1 : s1 : 0.9");
    try {
        parse_dpomdp(text, "bad");
        FAIL() << "expected a row-sum error";
    } catch (const std::exception& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("s1"), std::string::npos) << msg;
    }
}

TEST(Parser, AllFixturesLoad) {
    for (const auto& name : benchmark_names()) EXPECT_NO_THROW(load_model(name)) << name;
}

TEST(MdpValue, DecTigerColumn) {
    DecPomdp m = load_model("dectiger");
    EXPECT_NEAR(mdp_bound(m, 6), 120.0, 0.01);
    EXPECT_NEAR(mdp_bound(m, 100), 2000.0, 0.01);
}

TEST(MdpValue, ZeroHorizonIsZero) {
    DecPomdp m = load_model("grid");
    auto V = mdp_value(m, 3);
    for (double v : V[0]) EXPECT_EQ(v, 0.0);
}

TEST(MdpValue, GridAndRecycling) {
    EXPECT_NEAR(mdp_bound(load_model("grid"), 50), 48.808, 0.01);
    EXPECT_NEAR(mdp_bound(load_model("recycling"), 100), 328.37, 0.01);
}

TEST(RandomPolicy, DecTiger) {
    DecPomdp m = load_model("dectiger");
    EXPECT_NEAR(random_policy_value(m, 6), -277.3, 0.05);
    EXPECT_NEAR(random_policy_value(m, 50), -2311.1, 0.1);
    EXPECT_NEAR(random_policy_value(m, 100), -4622.2, 0.1);
}

TEST(RandomPolicy, Grid) { EXPECT_NEAR(random_policy_value(load_model("grid"), 20), 4.674, 0.005); }

TEST(EvaluatePolicy, ListenTwice) {
    DecPomdp m = load_model("dectiger");
    EXPECT_NEAR(evaluate_policy(m, always_listen(m, 2), 2).value, -4.0, 1e-12);
}

TEST(EvaluatePolicy, MissingClusterIsAnError) {
    DecPomdp m = load_model("dectiger");
    ClusterPolicy pol = always_listen(m, 2);
    pol.rules[0][1].pop_back();
    EXPECT_THROW(evaluate_policy(m, pol, 2), policy_error);
}

TEST(EvaluatePolicy, MonteCarloAgreesWithinFourStandardErrors) {
    DecPomdp m = load_model("dectiger");
    SolverConfig cfg;
    cfg.k = 2;
    cfg.L = 1000;
    SolveResult r = pf_maa_star(m, 5, cfg);
    ASSERT_TRUE(r.best_policy);
    MonteCarloEstimate mc = simulate_policy(m, *r.best_policy, 5, 100000, 7);
    EXPECT_LE(std::abs(mc.mean - r.value), 4.0 * mc.std_error) << mc.mean << " vs " << r.value;
}

TEST(PolicyJson, RoundTrip) {
    DecPomdp m = load_model("dectiger");
    SolverConfig cfg;
    SolveResult r = pf_maa_star(m, 4, cfg);
    ASSERT_TRUE(r.best_policy);
    json j = policy_to_json(m, *r.best_policy);
    ClusterPolicy back = policy_from_json(m, j);
    EXPECT_DOUBLE_EQ(evaluate_policy(m, back, 4).value, r.value);
    EXPECT_EQ(policy_to_json(m, back), j);
}
