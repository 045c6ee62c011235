#ifndef DECPOMDP_HEURISTICS_HPP
#define DECPOMDP_HEURISTICS_HPP

#include <functional>
#include <map>
#include <memory>
#include <tuple>
#include <unordered_map>

#include "engine.hpp"

namespace decpomdp {

enum class HeuristicKind { qmdp, maxr, mdp, tr };
enum class Reveal { at_r, at_r_plus_1 };

struct HeuristicSpec {
    HeuristicKind kind = HeuristicKind::mdp;
    int r = 2;
    Reveal variant = Reveal::at_r_plus_1;
    long abort_cap = 200;  // M
};

// Value credited after the reduced horizon, as a function of the revealed belief.
class TerminalRewardTable {
public:
    explicit TerminalRewardTable(int tail) : tail_(tail) {}
    virtual ~TerminalRewardTable() = default;

    int tail() const { return tail_; }
    virtual bool linear() const = 0;
    // upper bound on the terminal value of a point belief, cheap to evaluate
    virtual double state_upper(int s) const = 0;
    // terminal value of an unnormalized distribution over states
    virtual double value(const std::vector<Outcome>& x) const = 0;

protected:
    int tail_;
};

class StateValueTable : public TerminalRewardTable {
public:
    StateValueTable(int tail, std::vector<double> v) : TerminalRewardTable(tail), v_(std::move(v)) {}
    bool linear() const override { return true; }
    double state_upper(int s) const override { return v_[s]; }
    double value(const std::vector<Outcome>& x) const override {
        double t = 0.0;
        for (const auto& [s, p] : x) t += p * v_[s];
        return t;
    }
    const std::vector<double>& values() const { return v_; }

private:
    std::vector<double> v_;
};

inline std::shared_ptr<StateValueTable> maxr_terminal(const DecPomdp& m, int tail_h) {
    if (tail_h < 0) throw std::invalid_argument("tail horizon must be non-negative");
    return std::make_shared<StateValueTable>(tail_h, std::vector<double>(m.n_states(), tail_h * m.r_max()));
}

inline std::shared_ptr<StateValueTable> mdp_terminal(const DecPomdp& m, int tail_h) {
    if (tail_h < 0) throw std::invalid_argument("tail horizon must be non-negative");
    return std::make_shared<StateValueTable>(tail_h, mdp_value(m, tail_h).back());
}

// R(s,a) + Σ_s' T(s'|s,a)·V(s')
inline std::vector<double> one_step_q(const DecPomdp& m, const std::vector<double>& V) {
    int nS = m.n_states(), nA = m.n_joint_actions();
    std::vector<double> q(static_cast<std::size_t>(nS) * nA);
    for (int s = 0; s < nS; ++s)
        for (int a = 0; a < nA; ++a) {
            double x = m.R(s, a);
            for (const auto& [s2, p] : m.successors(s, a)) x += p * V[s2];
            q[static_cast<std::size_t>(s) * nA + a] = x;
        }
    return q;
}

// Dec-POMDP bound from each point state, revealed every r stages. Entries are filled on demand.
class RevealAtR : public TerminalRewardTable {
public:
    using Solver = std::function<double(int s)>;
    RevealAtR(int tail, std::vector<double> mdp, Solver solve)
        : TerminalRewardTable(tail), mdp_(std::move(mdp)), solve_(std::move(solve)), v_(mdp_.size()),
          known_(mdp_.size(), false) {}
    bool linear() const override { return true; }
    double state_upper(int s) const override { return known_[s] ? v_[s] : mdp_[s]; }
    double value(const std::vector<Outcome>& x) const override {
        double t = 0.0;
        for (const auto& [s, p] : x) t += p * entry(s);
        return t;
    }
    double entry(int s) const {
        if (!known_[s]) {
            v_[s] = std::min(solve_(s), mdp_[s]);
            known_[s] = true;
        }
        return v_[s];
    }

private:
    std::vector<double> mdp_;
    Solver solve_;
    mutable std::vector<double> v_;
    mutable std::vector<bool> known_;
};

// Q(s, a, tail): the joint action of the revealed stage is chosen before the state is seen.
class RevealAtRPlus1 : public TerminalRewardTable {
public:
    using Solver = std::function<double(int s, int a)>;
    RevealAtRPlus1(int tail, int n_actions, std::vector<double> mdp_q, std::vector<double> mdp_v, Solver solve)
        : TerminalRewardTable(tail), nA_(n_actions), mdp_q_(std::move(mdp_q)), mdp_v_(std::move(mdp_v)),
          solve_(std::move(solve)), q_(mdp_q_.size()), known_(mdp_q_.size(), false) {}
    bool linear() const override { return false; }
    double state_upper(int s) const override { return mdp_v_[s]; }

    // max_a Σ_s x(s)·Q(s,a); actions are tried in order of MDP bound until none can beat the best
    double value(const std::vector<Outcome>& x) const override {
        ub_.assign(nA_, 0.0);
        for (const auto& [s, p] : x) {
            const double* q = mdp_q_.data() + static_cast<std::size_t>(s) * nA_;
            for (int a = 0; a < nA_; ++a) ub_[a] += p * q[a];
        }
        double best = -std::numeric_limits<double>::infinity();
        for (;;) {
            int pick = -1;
            for (int a = 0; a < nA_; ++a)
                if (ub_[a] > best && (pick < 0 || ub_[a] > ub_[pick])) pick = a;
            if (pick < 0) break;
            double v = 0.0;
            for (const auto& [s, p] : x) v += p * entry(s, pick);
            best = std::max(best, v);
            ub_[pick] = -std::numeric_limits<double>::infinity();
        }
        return best;
    }
    double entry(int s, int a) const {
        std::size_t k = static_cast<std::size_t>(s) * nA_ + a;
        if (!known_[k]) {
            q_[k] = std::min(solve_(s, a), mdp_q_[k]);
            known_[k] = true;
        }
        return q_[k];
    }
    double mdp_entry(int s, int a) const { return mdp_q_[static_cast<std::size_t>(s) * nA_ + a]; }

private:
    int nA_;
    std::vector<double> mdp_q_, mdp_v_;
    Solver solve_;
    mutable std::vector<double> q_;
    mutable std::vector<double> ub_;
    mutable std::vector<bool> known_;
};

// Immediate reward plus terminal value after the last stage of a reduced problem.
inline double closure_value(const DecPomdp& m, const std::vector<Outcome>& b, int a, const TerminalRewardTable& term) {
    double v = 0.0;
    for (const auto& [s, p] : b) v += p * m.R(s, a);
    if (term.tail() == 0) return v;
    // (observation, next state, mass) triples, merged after sorting; observations are ignored for linear tables
    std::vector<std::tuple<int, int, double>> buf;
    std::vector<Outcome> xs;
    bool lin = term.linear();
    for (const auto& [s, p] : b)
        for (const auto& [s2, pt] : m.successors(s, a)) {
            if (lin) {
                buf.emplace_back(0, s2, p * pt);
                continue;
            }
            for (const auto& [o, po] : m.obs_outcomes(a, s2)) buf.emplace_back(o, s2, p * pt * po);
        }
    std::sort(buf.begin(), buf.end());
    std::size_t i = 0;
    while (i < buf.size()) {
        int o = std::get<0>(buf[i]);
        xs.clear();
        for (; i < buf.size() && std::get<0>(buf[i]) == o; ++i) {
            auto [oo, s2, w] = buf[i];
            if (!xs.empty() && xs.back().index == s2)
                xs.back().p += w;
            else
                xs.push_back({s2, w});
        }
        v += term.value(xs);
    }
    return v;
}

namespace detail {

// Enumerate joint actions consistent with a partial assignment (-1 = free).
template <class F>
void for_each_completion(const DecPomdp& m, const int* partial, F&& f) {
    int n = m.n_agents();
    std::vector<int> cur(n);
    auto rec = [&](auto&& self, int i) -> void {
        if (i == n) {
            f(m.joint_action(cur));
            return;
        }
        if (partial[i] >= 0) {
            cur[i] = partial[i];
            self(self, i + 1);
            return;
        }
        for (int a = 0; a < m.n_actions(i); ++a) {
            cur[i] = a;
            self(self, i + 1);
        }
    };
    rec(rec, 0);
}

} // namespace detail

// Node bound inside a reduced problem: the per-cluster best one-step lookahead with an
// MDP continuation over the remaining stages and the terminal table's state bound.
class LookaheadProvider {
public:
    LookaheadProvider(const DecPomdp& m, int horizon, const TerminalRewardTable& term) : m_(m), H_(horizon), term_(term) {
        std::vector<double> w(m.n_states());
        for (int s = 0; s < m.n_states(); ++s) w[s] = term.state_upper(s);
        int nA = m.n_joint_actions();
        for (int rem = 0; rem + 1 < H_; ++rem) {
            auto q = one_step_q(m, w);
            for (int s = 0; s < m.n_states(); ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < nA; ++a) best = std::max(best, q[static_cast<std::size_t>(s) * nA + a]);
                w[s] = best;
            }
            ql_.push_back(one_step_q(m, w));
        }
    }

    double bound(int stage, const std::vector<Outcome>& b, const int* partial) const {
        double best = -std::numeric_limits<double>::infinity();
        if (stage >= H_ - 1) {
            detail::for_each_completion(m_, partial, [&](int a) { best = std::max(best, closure_value(m_, b, a, term_)); });
            return best;
        }
        const auto& q = ql_[H_ - 2 - stage];
        int nA = m_.n_joint_actions();
        detail::for_each_completion(m_, partial, [&](int a) {
            double v = 0.0;
            for (const auto& [s, p] : b) v += p * q[static_cast<std::size_t>(s) * nA + a];
            best = std::max(best, v);
        });
        return best;
    }

private:
    const DecPomdp& m_;
    int H_;
    const TerminalRewardTable& term_;
    std::vector<std::vector<double>> ql_;  // ql_[m]: lookahead with m + 1 further stages before the terminal
};

struct SubSolveStats {
    long solves = 0;
    long cache_hits = 0;
    long aborted = 0;
    long expansions = 0;
};

// Shared machinery for reduced-horizon subproblems and the terminal table chain.
class HeuristicContext {
public:
    HeuristicContext(const DecPomdp& m, int horizon, HeuristicSpec spec, Deadline deadline = {},
                     std::size_t memory_limit = 0)
        : m_(m), spec_(spec), deadline_(deadline), memory_limit_(memory_limit) {
        if (spec_.r < 1) throw std::invalid_argument("reduction horizon r must be at least 1");
        if (spec_.abort_cap < 1) throw std::invalid_argument("abort cap must be at least 1");
        qmdp_ = mdp_value(m, std::max(horizon, 1));
        zero_ = std::make_shared<StateValueTable>(0, std::vector<double>(m.n_states(), 0.0));
    }

    const DecPomdp& model() const { return m_; }
    const HeuristicSpec& spec() const { return spec_; }
    const SubSolveStats& stats() const { return stats_; }
    bool degraded() const { return degraded_; }
    const std::vector<std::vector<double>>& qmdp() const { return qmdp_; }

    // Terminal table for a tail of the given length under the configured heuristic kind.
    std::shared_ptr<const TerminalRewardTable> terminal(int tail) {
        if (tail <= 0) return zero_;
        if (auto it = tables_.find(tail); it != tables_.end()) return it->second;
        std::shared_ptr<TerminalRewardTable> tab;
        switch (spec_.kind) {
        case HeuristicKind::maxr: tab = maxr_terminal(m_, tail); break;
        case HeuristicKind::qmdp:
        case HeuristicKind::mdp: tab = std::make_shared<StateValueTable>(tail, qmdp_at(tail)); break;
        case HeuristicKind::tr: tab = tr_terminal(tail, spec_.variant); break;
        }
        tables_[tail] = tab;
        return tab;
    }

    // Revealed-state table; entries solve the next block of r stages recursively.
    std::shared_ptr<TerminalRewardTable> tr_terminal(int tail, Reveal variant) {
        if (tail < 1) throw std::invalid_argument("tail horizon must be at least 1");
        int block = std::min(tail, spec_.r);
        int rest = tail - block;
        if (variant == Reveal::at_r) {
            return std::make_shared<RevealAtR>(tail, qmdp_at(tail), [this, block, rest](int s) {
                return solve_point(s, -1, block, rest);
            });
        }
        auto qv = one_step_q(m_, qmdp_at(tail - 1));
        return std::make_shared<RevealAtRPlus1>(tail, m_.n_joint_actions(), std::move(qv), qmdp_at(tail),
                                                [this, block, rest](int s, int a) { return solve_point(s, a, block, rest); });
    }

    // Upper bound for a reduced problem of `horizon` stages from belief b followed by `term`.
    double solve_heuristic(const std::vector<Outcome>& b, const int* partial, int horizon,
                           const TerminalRewardTable& term, long cap = -1) {
        int n = m_.n_agents();
        const LookaheadProvider& lp = lookahead(horizon, term);
        if (horizon == 1) return lp.bound(0, b, partial);
        std::vector<std::int64_t> key;
        key.reserve(4 + n + 2 * b.size());
        key.push_back(horizon);
        key.push_back(term.tail());
        key.push_back(reinterpret_cast<std::intptr_t>(&term));
        key.push_back(cap);
        for (int i = 0; i < n; ++i) key.push_back(partial[i]);
        for (const auto& [s, p] : b) {
            key.push_back(s);
            key.push_back(std::llround(p * 1e12));
        }
        if (auto it = memo_.find(key); it != memo_.end()) {
            ++stats_.cache_hits;
            return it->second;
        }
        ++stats_.solves;
        EngineConfig cfg;
        cfg.horizon = horizon;
        cfg.cluster.k = horizon;
        cfg.cluster.memory = Memory::clustered;
        cfg.forced.assign(partial, partial + n);
        cfg.start = b;
        cfg.max_expansions = cap >= 0 ? cap : spec_.abort_cap;
        cfg.deadline = deadline_;
        SmallStepSearch<const LookaheadProvider> search(m_, lp, cfg);
        EngineResult res = search.run();
        stats_.expansions += res.expansions;
        if (res.aborted || res.timed_out) ++stats_.aborted;
        double v = res.bound;
        if (memory_limit_ && memo_bytes_ > memory_limit_) {
            degraded_ = true;
        } else {
            memo_bytes_ += key.size() * sizeof(std::int64_t) + 64;
            memo_.emplace(std::move(key), v);
        }
        return v;
    }

    // Heuristic for one joint cluster at `stage` of an h-stage problem. The stage's free
    // actions are chosen per joint cluster, the joint cluster of the next stage is revealed,
    // and a reduced problem of up to r stages with a terminal table is solved from there.
    double reveal_bound(int h, int stage, const std::vector<Outcome>& b, const int* partial) {
        if (stage >= h - 1) {
            double best = -std::numeric_limits<double>::infinity();
            detail::for_each_completion(m_, partial, [&](int a) {
                double v = 0.0;
                for (const auto& [s, p] : b) v += p * m_.R(s, a);
                best = std::max(best, v);
            });
            return best;
        }
        int left = h - stage - 1;
        int block = std::min(left, spec_.r);
        auto term = terminal(left - block);
        // MDP action values order the candidates; they bound the exact value unless the tail is maxr
        const auto& vq = qmdp_at_ref(left);
        std::vector<std::pair<double, int>> order;
        detail::for_each_completion(m_, partial, [&](int a) {
            double ub = 0.0;
            for (const auto& [s, p] : b) {
                double q = m_.R(s, a);
                for (const auto& [s2, pt] : m_.successors(s, a)) q += pt * vq[s2];
                ub += p * q;
            }
            order.push_back({ub, a});
        });
        std::sort(order.begin(), order.end(), [](const auto& l, const auto& r) {
            return l.first != r.first ? l.first > r.first : l.second < r.second;
        });
        // plain Q_MDP: the best consistent MDP action value, with no revealed block
        if (spec_.kind == HeuristicKind::qmdp) return order.front().first;
        bool screen = spec_.kind != HeuristicKind::maxr;
        double best = -std::numeric_limits<double>::infinity();
        std::vector<int> free_partial(m_.n_agents(), -1);
        for (const auto& [ub, a] : order) {
            if (screen && ub <= best) break;
            double v = 0.0;
            std::map<int, std::map<int, double>> by_obs;
            for (const auto& [s, p] : b) {
                v += p * m_.R(s, a);
                for (const auto& [s2, pt] : m_.successors(s, a))
                    for (const auto& [o, po] : m_.obs_outcomes(a, s2)) by_obs[o][s2] += p * pt * po;
            }
            for (const auto& [o, dist] : by_obs) {
                double mass = 0.0;
                for (const auto& [s2, q] : dist) mass += q;
                if (mass <= 0.0) continue;
                std::vector<Outcome> next;
                next.reserve(dist.size());
                for (const auto& [s2, q] : dist) next.push_back({s2, q / mass});
                v += mass * solve_heuristic(next, free_partial.data(), block, *term);
            }
            best = std::max(best, v);
        }
        return best;
    }

private:
    const DecPomdp& m_;
    HeuristicSpec spec_;
    Deadline deadline_;
    std::size_t memory_limit_;
    std::vector<std::vector<double>> qmdp_;
    std::shared_ptr<StateValueTable> zero_;
    std::map<int, std::shared_ptr<const TerminalRewardTable>> tables_;
    struct VecHash {
        std::size_t operator()(const std::vector<std::int64_t>& v) const {
            std::uint64_t h = 1469598103934665603ULL;
            for (auto x : v) h = (h ^ static_cast<std::uint64_t>(x)) * 1099511628211ULL;
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_map<std::vector<std::int64_t>, double, VecHash> memo_;
    std::size_t memo_bytes_ = 0;
    SubSolveStats stats_;
    bool degraded_ = false;

    std::map<std::pair<const TerminalRewardTable*, int>, std::unique_ptr<LookaheadProvider>> lookahead_;

    const LookaheadProvider& lookahead(int horizon, const TerminalRewardTable& term) {
        auto& slot = lookahead_[{&term, horizon}];
        if (!slot) slot = std::make_unique<LookaheadProvider>(m_, horizon, term);
        return *slot;
    }

    const std::vector<double>& qmdp_at_ref(int tail) {
        if (tail >= static_cast<int>(qmdp_.size())) qmdp_ = mdp_value(m_, tail);
        return qmdp_[tail];
    }
    std::vector<double> qmdp_at(int tail) { return qmdp_at_ref(tail); }

    double solve_point(int s, int a, int block, int rest) {
        auto term = terminal(rest);
        std::vector<Outcome> b{{s, 1.0}};
        std::vector<int> partial(m_.n_agents(), -1);
        if (a >= 0)
            for (int i = 0; i < m_.n_agents(); ++i) partial[i] = m_.local_action(a, i);
        return solve_heuristic(b, partial.data(), block, *term);
    }
};

// Top-level node bound: each joint cluster is solved as a reduced problem of up to r stages.
class RevealProvider {
public:
    RevealProvider(HeuristicContext& ctx, int horizon) : ctx_(ctx), h_(horizon) {}
    double bound(int stage, const std::vector<Outcome>& b, const int* partial) const {
        return ctx_.reveal_bound(h_, stage, b, partial);
    }

private:
    HeuristicContext& ctx_;
    int h_;
};

// Heuristic value of the initial belief for an h-stage problem.
inline double heuristic_value(const DecPomdp& m, int h, const HeuristicSpec& spec) {
    HeuristicContext ctx(m, h, spec);
    std::vector<Outcome> b;
    for (int s = 0; s < m.n_states(); ++s)
        if (m.initial_belief()[s] > 0.0) b.push_back({s, m.initial_belief()[s]});
    std::vector<int> partial(m.n_agents(), -1);
    return ctx.reveal_bound(h, 0, b, partial.data());
}

} // namespace decpomdp

#endif
