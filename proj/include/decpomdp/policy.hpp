#ifndef DECPOMDP_POLICY_HPP
#define DECPOMDP_POLICY_HPP

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "clustering.hpp"

namespace decpomdp {

struct ClusterRule {
    Suffix suffix;
    int action;
};

// Per agent, per stage: suffix-identified clusters with their actions.
struct ClusterPolicy {
    int k = 1;
    std::vector<std::vector<std::vector<ClusterRule>>> rules;  // [agent][stage]

    int horizon() const { return rules.empty() ? 0 : static_cast<int>(rules[0].size()); }
};

struct Evaluation {
    double value = 0.0;
    std::vector<double> stage_reward;
    std::vector<JointOccupancy> occupancy;  // per stage, indices into the policy's rule lists
};

class policy_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int find_rule(const std::vector<ClusterRule>& rules, const Suffix& w) {
    for (std::size_t x = 0; x < rules.size(); ++x)
        if (is_suffix_of(rules[x].suffix, w)) return static_cast<int>(x);
    return -1;
}

} // namespace detail

// Exact value by forward propagation of the (joint cluster, state) occupancy.
inline Evaluation evaluate_policy(const DecPomdp& m, const ClusterPolicy& pol, int h) {
    int n = m.n_agents();
    if (static_cast<int>(pol.rules.size()) != n) throw policy_error("policy agent count does not match the model");
    for (int i = 0; i < n; ++i)
        if (static_cast<int>(pol.rules[i].size()) < h) throw policy_error("policy is shorter than the horizon");
    Evaluation ev;
    std::map<std::vector<int>, std::map<int, double>> cur;
    {
        std::vector<int> key(n);
        for (int i = 0; i < n; ++i) {
            key[i] = detail::find_rule(pol.rules[i][0], Suffix{});
            if (key[i] < 0) throw policy_error("missing action for a reachable cluster");
        }
        for (int s = 0; s < m.n_states(); ++s)
            if (m.initial_belief()[s] > 0.0) cur[key][s] = m.initial_belief()[s];
    }
    std::vector<int> local(n), nkey(n);
    for (int t = 0; t < h; ++t) {
        JointOccupancy occ;
        occ.n_agents = n;
        for (const auto& [key, dist] : cur) {
            double tot = 0.0;
            for (const auto& [s, p] : dist) tot += p;
            occ.keys.insert(occ.keys.end(), key.begin(), key.end());
            occ.prob.push_back(tot);
            std::vector<Outcome> b;
            for (const auto& [s, p] : dist) b.push_back({s, tot > 0 ? p / tot : 0.0});
            occ.belief.push_back(std::move(b));
        }
        ev.occupancy.push_back(std::move(occ));
        double r = 0.0;
        std::map<std::vector<int>, std::map<int, double>> nxt;
        // successor cache per agent: (rule, obs) -> next rule
        std::vector<std::map<std::pair<int, int>, int>> succ(n);
        for (const auto& [key, dist] : cur) {
            for (int i = 0; i < n; ++i) local[i] = pol.rules[i][t][key[i]].action;
            int a = m.joint_action(local);
            for (const auto& [s, p] : dist) {
                r += p * m.R(s, a);
                if (t + 1 == h) continue;
                for (const auto& [s2, pt] : m.successors(s, a))
                    for (const auto& [o, po] : m.obs_outcomes(a, s2)) {
                        for (int i = 0; i < n; ++i) {
                            int oi = m.local_observation(o, i);
                            auto it = succ[i].find({key[i], oi});
                            if (it == succ[i].end()) {
                                Suffix w = extend_window(pol.rules[i][t][key[i]].suffix, oi, pol.k);
                                int x = detail::find_rule(pol.rules[i][t + 1], w);
                                if (x < 0) throw policy_error("missing action for a reachable cluster");
                                it = succ[i].emplace(std::make_pair(key[i], oi), x).first;
                            }
                            nkey[i] = it->second;
                        }
                        nxt[nkey][s2] += p * pt * po;
                    }
            }
        }
        ev.stage_reward.push_back(r);
        ev.value += r;
        cur = std::move(nxt);
    }
    return ev;
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Sampled episodes of the same policy; used to cross-check the exact evaluation.
inline MonteCarloEstimate simulate_policy(const DecPomdp& m, const ClusterPolicy& pol, int h, long episodes,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](auto begin, auto end, auto weight) {
        double x = u(rng), acc = 0.0;
        auto last = begin;
        for (auto it = begin; it != end; ++it) {
            acc += weight(*it);
            last = it;
            if (x < acc) return it;
        }
        return last;
    };
    int n = m.n_agents();
    std::vector<int> states;
    for (int s = 0; s < m.n_states(); ++s)
        if (m.initial_belief()[s] > 0) states.push_back(s);
    double sum = 0.0, sq = 0.0;
    std::vector<int> local(n);
    std::vector<Suffix> win(n);
    for (long e = 0; e < episodes; ++e) {
        int s = *draw(states.begin(), states.end(), [&](int x) { return m.initial_belief()[x]; });
        for (auto& w : win) w.clear();
        double ret = 0.0;
        for (int t = 0; t < h; ++t) {
            for (int i = 0; i < n; ++i) {
                int x = detail::find_rule(pol.rules[i][t], win[i]);
                if (x < 0) throw policy_error("missing action for a reachable cluster");
                local[i] = pol.rules[i][t][x].action;
            }
            int a = m.joint_action(local);
            ret += m.R(s, a);
            const auto& succ = m.successors(s, a);
            s = draw(succ.begin(), succ.end(), [](const Outcome& o) { return o.p; })->index;
            const auto& obs = m.obs_outcomes(a, s);
            int o = draw(obs.begin(), obs.end(), [](const Outcome& x) { return x.p; })->index;
            for (int i = 0; i < n; ++i) win[i] = extend_window(win[i], m.local_observation(o, i), pol.k);
        }
        sum += ret;
        sq += ret * ret;
    }
    MonteCarloEstimate est;
    est.mean = sum / episodes;
    double var = std::max(0.0, sq / episodes - est.mean * est.mean);
    est.std_error = std::sqrt(var / episodes);
    return est;
}

} // namespace decpomdp

#endif
