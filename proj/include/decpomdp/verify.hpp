#ifndef DECPOMDP_VERIFY_HPP
#define DECPOMDP_VERIFY_HPP

#include <random>

#include "search.hpp"

namespace decpomdp {

struct CheckReport {
    bool ok = true;
    long checked = 0;
    std::string detail;
};

// Lossless clustering keeps the optimum of sliding k-window policies.
inline CheckReport check_lossless(const DecPomdp& m, int h, int k, double tol = 1e-9) {
    double sliding = brute_force(m, h, {k, Memory::sliding_window, std::nullopt}).value;
    double clustered = brute_force(m, h, {k, Memory::clustered, std::nullopt}).value;
    CheckReport r;
    r.checked = 1;
    r.ok = std::abs(sliding - clustered) <= tol;
    r.detail = "sliding " + std::to_string(sliding) + " clustered " + std::to_string(clustered);
    return r;
}

// Every node's bound dominates the best complete policy below it, and complete nodes are exact.
// Walks the whole small-step tree, so only tiny instances are feasible.
inline CheckReport check_admissible(const DecPomdp& m, int h, const HeuristicSpec& spec, double tol = 1e-7) {
    HeuristicContext hctx(m, h, spec);
    RevealProvider prov(hctx, h);
    EngineConfig ec;
    ec.horizon = h;
    ec.cluster = {h, Memory::clustered, std::nullopt};
    SmallStepSearch<RevealProvider> search(m, prov, ec);
    CheckReport rep;
    double worst = 0.0;
    auto dfs = [&](auto&& self, const SearchNode& node) -> double {
        ++rep.checked;
        if (node.complete) {
            double exact = evaluate_policy(m, search.policy_of(node), h).value;
            if (std::abs(exact - node.value) > tol) {
                rep.ok = false;
                worst = std::max(worst, std::abs(exact - node.value));
            }
            return exact;
        }
        std::vector<SearchNode> kids;
        search.expand(node, [&](SearchNode&& c) { kids.push_back(std::move(c)); });
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& c : kids) best = std::max(best, self(self, c));
        if (node.value + tol < best) {
            rep.ok = false;
            worst = std::max(worst, best - node.value);
        }
        return best;
    };
    SearchNode root;
    root.ctx = search.make_root();
    root.value = root.priority = root.ctx->base_value;
    double opt = dfs(dfs, root);
    rep.detail = "nodes " + std::to_string(rep.checked) + " optimum " + std::to_string(opt) + " root " +
                 std::to_string(root.value) + " worst excess " + std::to_string(worst);
    return rep;
}

namespace detail {

inline void all_windows(int n_obs, int len, Suffix& cur, std::vector<Suffix>& out) {
    if (static_cast<int>(cur.size()) == len) {
        out.push_back(cur);
        return;
    }
    for (int o = 0; o < n_obs; ++o) {
        cur.push_back(static_cast<std::uint8_t>(o));
        all_windows(n_obs, len, cur, out);
        cur.pop_back();
    }
}

inline int owner(const std::vector<Suffix>& clusters, const Suffix& w, bool& unique) {
    int found = -1;
    unique = true;
    for (std::size_t x = 0; x < clusters.size(); ++x)
        if (is_suffix_of(clusters[x], w)) {
            if (found >= 0) unique = false;
            found = static_cast<int>(x);
        }
    return found;
}

} // namespace detail

// Under random policies, each stage's clusters partition the windows and extending any
// window of a cluster by an observation lands in one cluster of the next stage.
inline CheckReport check_incremental(const DecPomdp& m, int h, int k, std::uint64_t seed, int trials = 5,
                                     std::optional<double> p_max = std::nullopt) {
    CheckReport rep;
    std::mt19937_64 rng(seed);
    ClusterOptions opt{k, Memory::clustered, p_max};
    int n = m.n_agents();
    auto fail = [&](const std::string& why) {
        if (rep.ok) rep.detail = why;
        rep.ok = false;
    };
    for (int t = 0; t < trials; ++t) {
        StageState st = initial_stage(m, k);
        for (int stage = 0; stage + 1 < h; ++stage) {
            const auto& cl = st.clustering;
            std::vector<std::vector<int>> acts(n);
            for (int i = 0; i < n; ++i) {
                std::uniform_int_distribution<int> pick(0, m.n_actions(i) - 1);
                for (int x = 0; x < cl.n_clusters(i); ++x) acts[i].push_back(pick(rng));
            }
            StageStep step = advance_stage(m, st, acts, opt);
            const auto& nx = step.next.clustering;
            for (int i = 0; i < n; ++i) {
                std::vector<Suffix> windows;
                Suffix cur;
                detail::all_windows(m.n_observations(i), std::min(stage, k), cur, windows);
                for (const auto& w : windows) {
                    bool unique = true;
                    int c = detail::owner(cl.clusters[i], w, unique);
                    ++rep.checked;
                    if (c < 0 || !unique) {
                        fail("stage " + std::to_string(stage) + " clusters do not partition the windows");
                        continue;
                    }
                    for (int o = 0; o < m.n_observations(i); ++o) {
                        bool u2 = true;
                        int c2 = detail::owner(nx.clusters[i], extend_window(w, o, k), u2);
                        int succ = successor_cluster(cl.clusters[i][c], o, k, nx.clusters[i]);
                        if (c2 < 0 || !u2 || c2 != succ)
                            fail("stage " + std::to_string(stage + 1) + " breaks incrementality");
                    }
                }
            }
            st = std::move(step.next);
        }
    }
    if (rep.ok) rep.detail = "windows " + std::to_string(rep.checked);
    return rep;
}

struct Sandwich {
    double random = 0, lower = 0, upper = 0, mdp = 0;
};

// random <= policy value <= upper bound <= MDP bound.
inline CheckReport check_sandwich(const DecPomdp& m, int h, double seconds = 10.0, Sandwich* out = nullptr) {
    Sandwich s;
    s.random = random_policy_value(m, h);
    s.mdp = mdp_bound(m, h);
    SolverConfig pf;
    pf.k = std::max(1, std::min(h - 1, 2));
    pf.L = 1000;
    pf.time_limit = seconds;
    s.lower = pf_maa_star(m, h, pf).value;
    SolverConfig tr;
    tr.mode = Mode::upper_bound;
    tr.heuristic.kind = HeuristicKind::tr;
    tr.heuristic.r = 3;
    tr.time_limit = seconds;
    tr.provided_lower_bound = s.lower;
    auto tres = tr_maa_star(m, h, tr);
    s.upper = tres.upper_bound.value_or(s.mdp);
    const double tol = 1e-7;
    CheckReport rep;
    rep.checked = 1;
    rep.ok = s.random <= s.lower + tol && s.lower <= s.upper + tol && s.upper <= s.mdp + tol;
    rep.detail = "random " + std::to_string(s.random) + " lower " + std::to_string(s.lower) + " upper " +
                 std::to_string(s.upper) + " mdp " + std::to_string(s.mdp);
    if (out) *out = s;
    return rep;
}

} // namespace decpomdp

#endif
