#ifndef DECPOMDP_CLUSTERING_HPP
#define DECPOMDP_CLUSTERING_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "model.hpp"

namespace decpomdp {

// Observation window, oldest observation first. The empty suffix is the stage-0 cluster.
using Suffix = std::vector<std::uint8_t>;

inline constexpr double belief_tolerance = 1e-8;

inline Suffix sliding_window_cluster(const std::vector<int>& loh, int k) {
    if (k < 1) throw std::invalid_argument("window size must be at least 1");
    std::size_t len = std::min<std::size_t>(loh.size(), static_cast<std::size_t>(k));
    Suffix out;
    for (std::size_t j = loh.size() - len; j < loh.size(); ++j) out.push_back(static_cast<std::uint8_t>(loh[j]));
    return out;
}

inline Suffix extend_window(const Suffix& s, int obs, int k) {
    Suffix out;
    std::size_t drop = s.size() + 1 > static_cast<std::size_t>(k) ? s.size() + 1 - k : 0;
    out.assign(s.begin() + static_cast<std::ptrdiff_t>(drop), s.end());
    out.push_back(static_cast<std::uint8_t>(obs));
    return out;
}

inline bool is_suffix_of(const Suffix& s, const Suffix& w) {
    return s.size() <= w.size() && std::equal(s.begin(), s.end(), w.end() - static_cast<std::ptrdiff_t>(s.size()));
}

enum class Memory { sliding_window, clustered };

struct ClusterOptions {
    int k = 1;                       // window size
    Memory memory = Memory::clustered;
    std::optional<double> p_max;     // probability-based merging threshold
};

// Exact joint distribution over (joint cluster, state) at one stage.
struct JointOccupancy {
    int n_agents = 0;
    std::vector<int> keys;                       // n_agents cluster indices per joint cluster
    std::vector<double> prob;                    // Pr(joint cluster)
    std::vector<std::vector<Outcome>> belief;    // state distribution given the joint cluster

    int size() const { return static_cast<int>(prob.size()); }
    const int* key(int j) const { return keys.data() + static_cast<std::size_t>(j) * n_agents; }
};

// Partition of each agent's windows at one stage. Positive-probability clusters come
// first (descending probability, then lexicographic suffix); unreachable ones follow.
struct StageClustering {
    int stage = 0;
    int k = 1;
    std::vector<std::vector<Suffix>> clusters;
    std::vector<std::vector<double>> prob;
    std::vector<int> n_active;

    int n_clusters(int i) const { return static_cast<int>(clusters[i].size()); }
};

struct StageState {
    StageClustering clustering;
    JointOccupancy occupancy;
};

inline StageState initial_stage(const DecPomdp& m, int k, const std::vector<Outcome>* start = nullptr) {
    StageState st;
    int n = m.n_agents();
    st.clustering.stage = 0;
    st.clustering.k = k;
    st.clustering.clusters.assign(n, std::vector<Suffix>{Suffix{}});
    st.clustering.prob.assign(n, std::vector<double>{1.0});
    st.clustering.n_active.assign(n, 1);
    st.occupancy.n_agents = n;
    st.occupancy.keys.assign(n, 0);
    st.occupancy.prob = {1.0};
    std::vector<Outcome> b;
    if (start) {
        for (const auto& o : *start)
            if (o.p > 0.0) b.push_back(o);
    } else {
        for (int s = 0; s < m.n_states(); ++s)
            if (m.initial_belief()[s] > 0.0) b.push_back({s, m.initial_belief()[s]});
    }
    st.occupancy.belief = {b};
    return st;
}

// Candidate windows of the next stage: one per distinct append-and-truncate result.
struct Candidates {
    std::vector<Suffix> windows;
    std::vector<std::vector<int>> of;  // [cluster][obs] -> candidate index
};

inline Candidates f_extend(const std::vector<Suffix>& clusters, int n_obs, int k) {
    Candidates c;
    std::map<Suffix, int> index;
    c.of.assign(clusters.size(), std::vector<int>(n_obs));
    for (std::size_t x = 0; x < clusters.size(); ++x)
        for (int o = 0; o < n_obs; ++o) {
            Suffix w = extend_window(clusters[x], o, k);
            auto [it, fresh] = index.emplace(w, static_cast<int>(c.windows.size()));
            if (fresh) c.windows.push_back(w);
            c.of[x][o] = it->second;
        }
    return c;
}

namespace detail {

struct KeyCodec {
    std::vector<int> shift;
    std::vector<std::uint64_t> mask;

    explicit KeyCodec(const std::vector<int>& counts) {
        int off = 0;
        for (int c : counts) {
            int bits = std::max(1, static_cast<int>(std::bit_width(static_cast<unsigned>(std::max(1, c - 1)))));
            shift.push_back(off);
            mask.push_back(((std::uint64_t{1} << bits) - 1) << off);
            off += bits;
        }
        if (off > 64) throw std::length_error("too many clusters to index joint clusters");
    }
    int get(std::uint64_t key, int i) const { return static_cast<int>((key & mask[i]) >> shift[i]); }
};

struct CandEntry {
    std::uint64_t key;
    int s;
    double p;
};

// distribution over (other agents' candidates, state) for one candidate of agent i
struct CandBelief {
    double mass = 0.0;
    std::vector<std::pair<std::pair<std::uint64_t, int>, double>> dist;
};

inline bool beliefs_equal(const CandBelief& a, const CandBelief& b) {
    std::size_t x = 0, y = 0;
    while (x < a.dist.size() || y < b.dist.size()) {
        double pa = 0.0, pb = 0.0;
        if (y >= b.dist.size() || (x < a.dist.size() && a.dist[x].first < b.dist[y].first)) {
            pa = a.dist[x++].second;
        } else if (x >= a.dist.size() || b.dist[y].first < a.dist[x].first) {
            pb = b.dist[y++].second;
        } else {
            pa = a.dist[x++].second;
            pb = b.dist[y++].second;
        }
        if (std::abs(pa - pb) > belief_tolerance) return false;
    }
    return true;
}

} // namespace detail

// Conditional beliefs of every candidate of agent i over (state, other agents' candidates).
inline std::vector<detail::CandBelief> suffix_beliefs(const std::vector<detail::CandEntry>& entries,
                                                      const detail::KeyCodec& codec, int agent, int n_cand) {
    std::vector<detail::CandBelief> out(n_cand);
    for (const auto& e : entries) {
        int g = codec.get(e.key, agent);
        out[g].mass += e.p;
        out[g].dist.push_back({{e.key & ~codec.mask[agent], e.s}, e.p});
    }
    for (auto& b : out) {
        std::sort(b.dist.begin(), b.dist.end());
        if (b.mass > 0.0)
            for (auto& d : b.dist) d.second /= b.mass;
    }
    return out;
}

// Coarsest-first merge of candidate windows into suffix-identified clusters.
// Returns, per candidate, the index of its cluster in `suffixes`.
inline std::vector<int> cluster_candidates(const std::vector<Suffix>& windows, const std::vector<detail::CandBelief>& beliefs,
                                           int n_obs, const ClusterOptions& opt, std::vector<Suffix>& suffixes) {
    std::vector<int> assign(windows.size(), -1);
    suffixes.clear();
    if (opt.memory == Memory::sliding_window) {
        for (std::size_t g = 0; g < windows.size(); ++g) {
            assign[g] = static_cast<int>(suffixes.size());
            suffixes.push_back(windows[g]);
        }
        return assign;
    }
    auto uniform = [&](const std::vector<int>& members) {
        int first = -1;
        for (int g : members) {
            if (beliefs[g].mass <= 0.0) continue;
            if (first < 0)
                first = g;
            else if (!detail::beliefs_equal(beliefs[first], beliefs[g]))
                return false;
        }
        return true;
    };
    auto split = [&](auto&& self, const Suffix& s, const std::vector<int>& members) -> void {
        if (members.empty()) return;
        double mass = 0.0;
        for (int g : members) mass += beliefs[g].mass;
        bool merge = members.size() == 1 || uniform(members) || (opt.p_max && mass <= *opt.p_max);
        if (merge) {
            int id = static_cast<int>(suffixes.size());
            suffixes.push_back(members.size() == 1 ? windows[members[0]] : s);
            for (int g : members) assign[g] = id;
            return;
        }
        for (int o = 0; o < n_obs; ++o) {
            Suffix longer;
            longer.reserve(s.size() + 1);
            longer.push_back(static_cast<std::uint8_t>(o));
            longer.insert(longer.end(), s.begin(), s.end());
            std::vector<int> sub;
            for (int g : members)
                if (is_suffix_of(longer, windows[g])) sub.push_back(g);
            self(self, longer, sub);
        }
    };
    std::vector<int> all(windows.size());
    for (std::size_t g = 0; g < windows.size(); ++g) all[g] = static_cast<int>(g);
    split(split, Suffix{}, all);
    return assign;
}

struct StageStep {
    StageState next;
    double reward = 0.0;  // expected reward collected at the current stage
};

// Propagate one stage under per-agent per-cluster actions, then cluster the next stage.
inline StageStep advance_stage(const DecPomdp& m, const StageState& cur, const std::vector<std::vector<int>>& actions,
                               const ClusterOptions& opt) {
    int n = m.n_agents();
    const auto& cl = cur.clustering;
    std::vector<Candidates> cands;
    std::vector<int> counts;
    for (int i = 0; i < n; ++i) {
        cands.push_back(f_extend(cl.clusters[i], m.n_observations(i), opt.k));
        counts.push_back(static_cast<int>(cands[i].windows.size()));
    }
    detail::KeyCodec codec(counts);

    struct PairHash {
        std::size_t operator()(const std::pair<std::uint64_t, int>& x) const {
            return std::hash<std::uint64_t>()(x.first * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(x.second));
        }
    };
    std::unordered_map<std::pair<std::uint64_t, int>, double, PairHash> acc;
    StageStep out;
    std::vector<int> local(n);
    for (int j = 0; j < cur.occupancy.size(); ++j) {
        const int* c = cur.occupancy.key(j);
        for (int i = 0; i < n; ++i) {
            if (c[i] >= static_cast<int>(actions[i].size())) throw std::logic_error("missing action for a reachable cluster");
            local[i] = actions[i][c[i]];
        }
        int a = m.joint_action(local);
        double pc = cur.occupancy.prob[j];
        for (const auto& [s, pb] : cur.occupancy.belief[j]) {
            double p = pc * pb;
            out.reward += p * m.R(s, a);
            for (const auto& [s2, pt] : m.successors(s, a))
                for (const auto& [o, po] : m.obs_outcomes(a, s2)) {
                    std::uint64_t key = 0;
                    for (int i = 0; i < n; ++i)
                        key |= static_cast<std::uint64_t>(cands[i].of[c[i]][m.local_observation(o, i)]) << codec.shift[i];
                    acc[{key, s2}] += p * pt * po;
                }
        }
    }
    std::vector<detail::CandEntry> entries;
    entries.reserve(acc.size());
    for (const auto& [k, p] : acc) entries.push_back({k.first, k.second, p});
    std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
        return x.key != y.key ? x.key < y.key : x.s < y.s;
    });

    // merge candidates into clusters, agent by agent, against the others' candidates
    std::vector<std::vector<int>> cand_to_cluster(n);
    std::vector<std::vector<Suffix>> suffixes(n);
    for (int i = 0; i < n; ++i) {
        auto beliefs = suffix_beliefs(entries, codec, i, counts[i]);
        cand_to_cluster[i] = cluster_candidates(cands[i].windows, beliefs, m.n_observations(i), opt, suffixes[i]);
    }

    // cluster probabilities and expansion order
    StageClustering& nc = out.next.clustering;
    nc.stage = cl.stage + 1;
    nc.k = opt.k;
    nc.clusters.resize(n);
    nc.prob.resize(n);
    nc.n_active.resize(n);
    std::vector<std::vector<int>> remap(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> mass(suffixes[i].size(), 0.0);
        for (const auto& e : entries) mass[cand_to_cluster[i][codec.get(e.key, i)]] += e.p;
        std::vector<int> order(suffixes[i].size());
        for (std::size_t x = 0; x < order.size(); ++x) order[x] = static_cast<int>(x);
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            bool px = mass[x] > 0.0, py = mass[y] > 0.0;
            if (px != py) return px;
            if (px && mass[x] != mass[y]) return mass[x] > mass[y];
            return suffixes[i][x] < suffixes[i][y];
        });
        remap[i].assign(order.size(), 0);
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            remap[i][order[pos]] = static_cast<int>(pos);
            nc.clusters[i].push_back(suffixes[i][order[pos]]);
            nc.prob[i].push_back(mass[order[pos]]);
            if (mass[order[pos]] > 0.0) ++nc.n_active[i];
        }
    }

    // aggregate candidate occupancy onto joint clusters
    std::map<std::vector<int>, std::map<int, double>> joint;
    std::vector<int> key(n);
    for (const auto& e : entries) {
        for (int i = 0; i < n; ++i) key[i] = remap[i][cand_to_cluster[i][codec.get(e.key, i)]];
        joint[key][e.s] += e.p;
    }
    JointOccupancy& occ = out.next.occupancy;
    occ.n_agents = n;
    for (const auto& [k, dist] : joint) {
        double total = 0.0;
        for (const auto& [s, p] : dist) total += p;
        if (total <= 0.0) continue;
        occ.keys.insert(occ.keys.end(), k.begin(), k.end());
        occ.prob.push_back(total);
        std::vector<Outcome> b;
        for (const auto& [s, p] : dist) b.push_back({s, p / total});
        occ.belief.push_back(std::move(b));
    }
    return out;
}

// Cluster of the next stage containing the extension of `cluster` by `obs`.
inline int successor_cluster(const Suffix& cluster, int obs, int k, const std::vector<Suffix>& next) {
    Suffix w = extend_window(cluster, obs, k);
    for (std::size_t x = 0; x < next.size(); ++x)
        if (is_suffix_of(next[x], w)) return static_cast<int>(x);
    return -1;
}

} // namespace decpomdp

#endif
