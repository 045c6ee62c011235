#ifndef DECPOMDP_SEARCH_HPP
#define DECPOMDP_SEARCH_HPP

#include <chrono>

#include "heuristics.hpp"

namespace decpomdp {

enum class Mode { policy_finding, upper_bound };

struct SolverConfig {
    Mode mode = Mode::policy_finding;
    int k = 2;
    double L = 1000.0;
    HeuristicSpec heuristic;
    std::optional<double> p_max;
    double time_limit = 0.0;        // seconds, 0 for none
    std::size_t memory_limit = 0;   // bytes, 0 for none
    std::optional<double> provided_lower_bound;
    Memory memory = Memory::clustered;
    bool record_trace = false;
};

struct SolveResult {
    std::optional<ClusterPolicy> best_policy;
    double value = -std::numeric_limits<double>::infinity();  // exact value of best_policy
    std::optional<double> upper_bound;
    long expansions = 0;
    long pruned = 0;
    double wall_time = 0.0;
    std::size_t peak_memory = 0;
    bool degraded = false;
    bool timed_out = false;
    bool memory_out = false;
    bool completed = false;  // search reached its natural end
    SubSolveStats sub;
    std::vector<double> trace;
};

class solve_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Next cluster in the expansion order after `assigned` active clusters of the current stage.
struct ExpansionPoint {
    int stage;
    int agent;
    int cluster;
};

inline ExpansionPoint expansion_next(const StageClustering& cl, int assigned) {
    int n = static_cast<int>(cl.n_active.size());
    int rest = assigned;
    for (int i = 0; i < n; ++i) {
        if (rest < cl.n_active[i]) return {cl.stage, i, rest};
        rest -= cl.n_active[i];
    }
    return {cl.stage + 1, 0, 0};
}

namespace detail {

inline void check_horizon(int h) {
    if (h < 1) throw std::invalid_argument("horizon must be at least 1");
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// Policy-finding mode: pruned best-first search with the progress measure.
inline SolveResult pf_maa_star(const DecPomdp& m, int h, const SolverConfig& cfg) {
    detail::check_horizon(h);
    auto t0 = std::chrono::steady_clock::now();
    Deadline deadline = Deadline::after(cfg.time_limit);
    HeuristicContext hctx(m, h, cfg.heuristic, deadline, cfg.memory_limit / 2);
    RevealProvider prov(hctx, h);
    EngineConfig ec;
    ec.horizon = h;
    ec.cluster = {cfg.k, cfg.memory, cfg.p_max};
    ec.prog_pruning = true;
    ec.L = cfg.L;
    ec.deadline = deadline;
    ec.memory_limit = cfg.memory_limit;
    ec.record_trace = cfg.record_trace;
    SmallStepSearch<RevealProvider> search(m, prov, ec);
    EngineResult er = search.run();
    SolveResult out;
    out.expansions = er.expansions;
    out.pruned = er.pruned;
    out.peak_memory = er.peak_memory;
    out.timed_out = er.timed_out;
    out.memory_out = er.memory_out;
    out.completed = !er.timed_out && !er.memory_out && !er.aborted;
    out.trace = std::move(er.trace);
    std::optional<SearchNode> best = er.best;
    if (!best) {
        if (!er.timed_out && !er.memory_out) throw solve_error("search ended without a complete policy");
        // limit hit before any complete policy: finish greedily from the root, without a deadline
        EngineConfig gc = ec;
        gc.deadline = {};
        HeuristicContext gctx(m, h, cfg.heuristic);
        RevealProvider gprov(gctx, h);
        SmallStepSearch<RevealProvider> greedy(m, gprov, gc);
        SearchNode root;
        root.ctx = greedy.make_root();
        root.value = root.priority = root.ctx->base_value;
        SearchNode leaf = greedy.greedy_complete(root);
        out.best_policy = greedy.policy_of(leaf);
    } else {
        out.best_policy = search.policy_of(*best);
    }
    out.value = evaluate_policy(m, *out.best_policy, h).value;
    out.sub = hctx.stats();
    out.degraded = hctx.degraded();
    out.wall_time = detail::seconds_since(t0);
    return out;
}

// Upper-bound mode: unpruned best-first search with lossless clustering; the queue top is
// an anytime bound on the optimum.
inline SolveResult tr_maa_star(const DecPomdp& m, int h, const SolverConfig& cfg) {
    detail::check_horizon(h);
    auto t0 = std::chrono::steady_clock::now();
    Deadline deadline = Deadline::after(cfg.time_limit);
    HeuristicContext hctx(m, h, cfg.heuristic, deadline, cfg.memory_limit / 2);
    RevealProvider prov(hctx, h);
    EngineConfig ec;
    ec.horizon = h;
    ec.cluster = {std::max(cfg.k, h), Memory::clustered, std::nullopt};
    ec.prog_pruning = false;
    ec.lower_bound = cfg.provided_lower_bound;
    ec.deadline = deadline;
    ec.memory_limit = cfg.memory_limit;
    ec.record_trace = cfg.record_trace;
    SmallStepSearch<RevealProvider> search(m, prov, ec);
    EngineResult er = search.run();
    SolveResult out;
    out.expansions = er.expansions;
    out.peak_memory = er.peak_memory;
    out.timed_out = er.timed_out;
    out.memory_out = er.memory_out;
    out.completed = !er.timed_out && !er.memory_out && !er.aborted;
    out.trace = std::move(er.trace);
    out.upper_bound = er.bound;
    if (er.best) {
        out.best_policy = search.policy_of(*er.best);
        out.value = evaluate_policy(m, *out.best_policy, h).value;
        if (out.completed) out.upper_bound = std::max(out.value, er.bound);
    }
    out.sub = hctx.stats();
    // a timed-out sub-search still returns an admissible queue-top bound; only a skipped memo is flagged
    out.degraded = hctx.degraded() || er.memory_out;
    out.wall_time = detail::seconds_since(t0);
    return out;
}

inline SolveResult solve(const DecPomdp& m, int h, const SolverConfig& cfg) {
    return cfg.mode == Mode::policy_finding ? pf_maa_star(m, h, cfg) : tr_maa_star(m, h, cfg);
}

struct BruteForceResult {
    double value = -std::numeric_limits<double>::infinity();
    long leaves = 0;
};

// Exhaustive maximum over deterministic cluster policies; the last agent best-responds
// per cluster at the last stage. Branches whose MDP bound cannot beat the incumbent are
// skipped, which leaves the maximum unchanged. Throws once more than `guard` leaves are visited.
inline BruteForceResult brute_force(const DecPomdp& m, int h, ClusterOptions opt, long guard = 10'000'000) {
    detail::check_horizon(h);
    int n = m.n_agents();
    BruteForceResult out;
    auto V = mdp_value(m, h);
    auto rec = [&](auto&& self, const StageState& st, double realized) -> void {
        const auto& cl = st.clustering;
        const auto& occ = st.occupancy;
        double ub = realized;
        for (int j = 0; j < occ.size(); ++j)
            for (const auto& [s, p] : occ.belief[j]) ub += occ.prob[j] * p * V[h - cl.stage][s];
        if (ub <= out.value) return;
        bool last = cl.stage == h - 1;
        int free_agents = last ? n - 1 : n;
        // flat list of active clusters whose actions are enumerated
        std::vector<std::pair<int, int>> slots;
        for (int i = 0; i < free_agents; ++i)
            for (int x = 0; x < cl.n_active[i]; ++x) slots.push_back({i, x});
        std::vector<std::vector<int>> acts(n);
        for (int i = 0; i < n; ++i) acts[i].assign(cl.n_clusters(i), 0);
        std::vector<std::vector<int>> jc(cl.n_clusters(n - 1));
        if (last)
            for (int j = 0; j < occ.size(); ++j) jc[occ.key(j)[n - 1]].push_back(j);
        // q[j][ja]: expected MDP action value of joint cluster j, bounding any partial assignment
        int nA = m.n_joint_actions();
        int tail = h - cl.stage;
        std::vector<std::vector<double>> q(occ.size(), std::vector<double>(nA, 0.0));
        for (int j = 0; j < occ.size(); ++j)
            for (int ja = 0; ja < nA; ++ja)
                for (const auto& [s, p] : occ.belief[j]) {
                    double v = m.R(s, ja);
                    for (const auto& [s2, p2] : m.successors(s, ja)) v += p2 * V[tail - 1][s2];
                    q[j][ja] += occ.prob[j] * p * v;
                }
        std::vector<std::vector<char>> fixed(n);
        for (int i = 0; i < n; ++i) fixed[i].assign(cl.n_clusters(i), 0);
        auto partial_bound = [&]() {
            double b = realized;
            for (int j = 0; j < occ.size(); ++j) {
                const int* key = occ.key(j);
                double best = -std::numeric_limits<double>::infinity();
                for (int ja = 0; ja < nA; ++ja) {
                    bool ok = true;
                    for (int i = 0; i < n && ok; ++i)
                        ok = !fixed[i][key[i]] || m.local_action(ja, i) == acts[i][key[i]];
                    if (ok) best = std::max(best, q[j][ja]);
                }
                b += best;
            }
            return b;
        };
        auto leaf = [&]() {
            if (++out.leaves > guard) throw solve_error("brute force guard exceeded");
            if (!last) {
                StageStep step = advance_stage(m, st, acts, opt);
                self(self, step.next, realized + step.reward);
                return;
            }
            double total = realized;
            std::vector<int> local(n);
            for (int x = 0; x < cl.n_active[n - 1]; ++x) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < m.n_actions(n - 1); ++a) {
                    double v = 0.0;
                    for (int j : jc[x]) {
                        const int* key = occ.key(j);
                        for (int i = 0; i + 1 < n; ++i) local[i] = acts[i][key[i]];
                        local[n - 1] = a;
                        int ja = m.joint_action(local);
                        for (const auto& [s, p] : occ.belief[j]) v += occ.prob[j] * p * m.R(s, ja);
                    }
                    best = std::max(best, v);
                }
                total += best;
            }
            out.value = std::max(out.value, total);
        };
        auto assign = [&](auto&& go, std::size_t idx) -> void {
            if (idx == slots.size()) {
                leaf();
                return;
            }
            auto [i, x] = slots[idx];
            fixed[i][x] = 1;
            for (int a = 0; a < m.n_actions(i); ++a) {
                acts[i][x] = a;
                if (partial_bound() > out.value) go(go, idx + 1);
            }
            fixed[i][x] = 0;
        };
        assign(assign, 0);
    };
    rec(rec, initial_stage(m, opt.k), 0.0);
    return out;
}

// Optimum over sliding k-window policies (k defaults to h, i.e. unrestricted).
inline double brute_force_optimum(const DecPomdp& m, int h, std::optional<int> k = std::nullopt,
                                  long guard = 10'000'000) {
    return brute_force(m, h, {k.value_or(std::max(h, 1)), Memory::sliding_window, std::nullopt}, guard).value;
}

} // namespace decpomdp

#endif
