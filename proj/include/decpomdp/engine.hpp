#ifndef DECPOMDP_ENGINE_HPP
#define DECPOMDP_ENGINE_HPP

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "clustering.hpp"
#include "policy.hpp"

namespace decpomdp {

class budget_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Deadline {
    std::optional<std::chrono::steady_clock::time_point> at;

    static Deadline after(double seconds) {
        Deadline d;
        if (seconds > 0 && std::isfinite(seconds))
            d.at = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                          std::chrono::duration<double>(seconds));
        return d;
    }
    bool expired() const { return at && std::chrono::steady_clock::now() >= *at; }
};

// prog(φ) = stage·L + i·L/n + c + p·(L/n − |C|)
inline double progress(int stage, int agent, int assigned, double mass, double L, int n, int n_clusters) {
    if (L / n < n_clusters) throw budget_error("expansion budget L is smaller than n times the cluster count");
    return stage * L + agent * L / n + assigned + mass * (L / n - n_clusters);
}

struct EngineConfig {
    int horizon = 1;
    ClusterOptions cluster;
    std::vector<int> forced;  // stage-0 action per agent, -1 when free
    std::optional<std::vector<Outcome>> start;  // overrides the model's initial belief
    bool prog_pruning = false;
    double L = 0.0;
    long max_expansions = -1;  // abort cap, -1 for none
    std::optional<double> lower_bound;
    Deadline deadline;
    std::size_t memory_limit = 0;  // bytes, 0 for none
    bool record_trace = false;
};

// One stage of a partial policy, shared by all nodes that agree on earlier stages.
struct StageContext {
    std::shared_ptr<const StageContext> parent;
    std::vector<std::vector<int>> parent_actions;  // actions at the previous stage
    StageState state;
    double realized = 0.0;                           // expected reward of earlier stages
    std::vector<std::vector<std::vector<int>>> jc_of;  // [agent][cluster] -> joint clusters
    std::vector<int> offset;                       // flat position of each agent's first cluster
    int total_active = 0;
    double base_value = 0.0;

    int stage() const { return state.clustering.stage; }
    std::size_t footprint() const {
        std::size_t b = sizeof(*this) + state.occupancy.keys.size() * sizeof(int);
        for (const auto& x : state.occupancy.belief) b += x.size() * sizeof(Outcome) + 32;
        for (const auto& a : state.clustering.clusters)
            for (const auto& s : a) b += s.size() + 48;
        return b;
    }
};

struct SearchNode {
    std::shared_ptr<const StageContext> ctx;
    std::vector<std::uint8_t> acts;  // assigned active clusters, agent-major in expansion order
    double value = 0.0;               // bound at the node's own frontier stage
    double priority = 0.0;
    double prog = 0.0;
    std::uint64_t counter = 0;
    bool complete = false;
};

struct NodeOrder {
    bool operator()(const SearchNode& a, const SearchNode& b) const {
        if (a.priority != b.priority) return a.priority < b.priority;
        return a.counter < b.counter;
    }
};

struct EngineResult {
    std::optional<SearchNode> best;   // first complete node popped, or best complete seen at a limit
    double bound = -std::numeric_limits<double>::infinity();
    long expansions = 0;
    long pruned = 0;
    bool aborted = false;
    bool timed_out = false;
    bool memory_out = false;
    std::size_t peak_memory = 0;
    std::vector<double> trace;  // popped priorities
};

// Best-first search over the small-step tree. Provider::bound(stage, belief, partial) must
// return an upper bound for one joint cluster given the actions fixed so far (-1 = free),
// exact once every agent is fixed at the last stage.
template <class Provider>
class SmallStepSearch {
public:
    SmallStepSearch(const DecPomdp& m, Provider& prov, EngineConfig cfg) : m_(m), prov_(prov), cfg_(std::move(cfg)) {
        n_ = m_.n_agents();
        if (cfg_.forced.empty()) cfg_.forced.assign(n_, -1);
    }

    std::shared_ptr<const StageContext> make_root() {
        auto ctx = std::make_shared<StageContext>();
        ctx->state = initial_stage(m_, cfg_.cluster.k, cfg_.start ? &*cfg_.start : nullptr);
        finish_context(*ctx);
        return ctx;
    }

    double root_value() { return make_root()->base_value; }

    EngineResult run() {
        EngineResult res;
        std::priority_queue<SearchNode, std::vector<SearchNode>, NodeOrder> open;
        SearchNode root;
        root.ctx = make_root();
        ctx_bytes_ += root.ctx->footprint();
        root.value = root.ctx->base_value;
        root.priority = root.value;
        root.prog = 0.0;
        root.counter = counter_++;
        open.push(root);
        std::optional<SearchNode> best_complete;
        auto note_complete = [&](const SearchNode& nd) {
            if (!best_complete || nd.value > best_complete->value) best_complete = nd;
        };
        auto stop_bound = [&]() {
            double b = open.empty() ? -std::numeric_limits<double>::infinity() : open.top().priority;
            if (cfg_.lower_bound && open.empty()) b = *cfg_.lower_bound;
            return b;
        };
        while (!open.empty()) {
            if (cfg_.max_expansions >= 0 && res.expansions >= cfg_.max_expansions) {
                res.aborted = true;
                res.bound = stop_bound();
                res.best = best_complete;
                return res;
            }
            if ((res.expansions & 63) == 0 && cfg_.deadline.expired()) {
                res.timed_out = true;
                res.bound = stop_bound();
                res.best = best_complete;
                return res;
            }
            if (cfg_.memory_limit && (res.expansions & 1023) == 0) {
                std::size_t used = open.size() * (sizeof(SearchNode) + 64) + ctx_bytes_;
                res.peak_memory = std::max(res.peak_memory, used);
                if (used > cfg_.memory_limit) {
                    res.memory_out = true;
                    res.bound = stop_bound();
                    res.best = best_complete;
                    return res;
                }
            }
            SearchNode top = open.top();
            open.pop();
            if (cfg_.record_trace) res.trace.push_back(top.priority);
            if (top.complete) {
                res.best = top;
                res.bound = top.priority;
                return res;
            }
            if (cfg_.prog_pruning && top.prog < static_cast<double>(res.expansions)) {
                ++res.pruned;
                continue;
            }
            ++res.expansions;
            expand(top, [&](SearchNode&& child) {
                if (cfg_.lower_bound && child.priority < *cfg_.lower_bound - 1e-9) return;
                if (child.complete) note_complete(child);
                open.push(std::move(child));
            });
        }
        res.best = best_complete;
        res.bound = stop_bound();
        return res;
    }

    // Children of `node` in action order, passed to `emit`.
    template <class Emit>
    void expand(SearchNode node, Emit&& emit) {
        const StageContext* ctx = node.ctx.get();
        if (static_cast<int>(node.acts.size()) == ctx->total_active) {
            if (ctx->stage() + 1 >= cfg_.horizon) throw std::logic_error("expanding a fully specified policy");
            node = next_stage(node);
            ctx = node.ctx.get();
        }
        int f = static_cast<int>(node.acts.size());
        int agent = 0;
        while (agent + 1 < n_ && f >= ctx->offset[agent + 1]) ++agent;
        int pos = f - ctx->offset[agent];
        int stage = ctx->stage();
        if (stage == cfg_.horizon - 1 && agent == n_ - 1) {
            emit(close_last_stage(node));
            return;
        }
        const auto& jcs = ctx->jc_of[agent][pos];
        std::vector<int> partial(n_);
        double old_part = 0.0;
        for (int j : jcs) {
            fill_partial(*ctx, node.acts, j, partial);
            old_part += ctx->state.occupancy.prob[j] * prov_.bound(stage, ctx->state.occupancy.belief[j], partial.data());
        }
        int n_clusters = ctx->state.clustering.n_active[agent];
        double mass = 0.0;
        for (int x = 0; x <= pos; ++x) mass += ctx->state.clustering.prob[agent][x];
        double child_prog;
        if (pos + 1 == n_clusters)
            child_prog = agent + 1 == n_ ? (stage + 1) * cfg_.L : stage * cfg_.L + (agent + 1) * cfg_.L / n_;
        else
            child_prog = cfg_.prog_pruning ? progress(stage, agent, pos + 1, mass, cfg_.L, n_, n_clusters) : 0.0;
        for (int a : allowed(stage, agent)) {
            SearchNode child;
            child.ctx = node.ctx;
            child.acts = node.acts;
            child.acts.push_back(static_cast<std::uint8_t>(a));
            double new_part = 0.0;
            for (int j : jcs) {
                fill_partial(*ctx, child.acts, j, partial);
                new_part += ctx->state.occupancy.prob[j] * prov_.bound(stage, ctx->state.occupancy.belief[j], partial.data());
            }
            child.value = node.value - old_part + new_part;
            child.priority = std::min(node.priority, child.value);
            child.prog = child_prog;
            child.counter = counter_++;
            emit(std::move(child));
        }
    }

    // Assemble the full cluster policy of a complete node.
    ClusterPolicy policy_of(const SearchNode& node) const {
        ClusterPolicy pol;
        pol.k = cfg_.cluster.k;
        pol.rules.assign(n_, std::vector<std::vector<ClusterRule>>(cfg_.horizon));
        std::vector<std::vector<int>> acts = stage_actions(*node.ctx, node.acts);
        const StageContext* ctx = node.ctx.get();
        while (ctx) {
            int t = ctx->stage();
            for (int i = 0; i < n_; ++i) {
                const auto& cl = ctx->state.clustering.clusters[i];
                for (std::size_t x = 0; x < cl.size(); ++x) pol.rules[i][t].push_back({cl[x], acts[i][x]});
            }
            acts = ctx->parent_actions;
            ctx = ctx->parent.get();
        }
        return pol;
    }

    // Greedy dive from a node along its best child.
    SearchNode greedy_complete(SearchNode node) {
        while (!node.complete) {
            std::optional<SearchNode> best;
            expand(node, [&](SearchNode&& c) {
                if (!best || c.priority > best->priority) best = std::move(c);
            });
            node = std::move(*best);
        }
        return node;
    }

    std::size_t context_bytes() const { return ctx_bytes_; }

private:
    const DecPomdp& m_;
    Provider& prov_;
    EngineConfig cfg_;
    int n_ = 0;
    std::uint64_t counter_ = 0;
    std::size_t ctx_bytes_ = 0;

    std::vector<int> allowed(int stage, int agent) const {
        if (stage == 0 && cfg_.forced[agent] >= 0) return {cfg_.forced[agent]};
        std::vector<int> out(m_.n_actions(agent));
        for (int a = 0; a < m_.n_actions(agent); ++a) out[a] = a;
        return out;
    }

    void fill_partial(const StageContext& ctx, const std::vector<std::uint8_t>& acts, int j, std::vector<int>& partial) const {
        const int* key = ctx.state.occupancy.key(j);
        for (int i = 0; i < n_; ++i) {
            int flat = ctx.offset[i] + key[i];
            if (flat < static_cast<int>(acts.size()))
                partial[i] = acts[flat];
            else if (ctx.stage() == 0 && cfg_.forced[i] >= 0)
                partial[i] = cfg_.forced[i];
            else
                partial[i] = -1;
        }
    }

    std::vector<std::vector<int>> stage_actions(const StageContext& ctx, const std::vector<std::uint8_t>& acts) const {
        std::vector<std::vector<int>> out(n_);
        for (int i = 0; i < n_; ++i) {
            int nc = ctx.state.clustering.n_clusters(i);
            int fallback = ctx.stage() == 0 && cfg_.forced[i] >= 0 ? cfg_.forced[i] : 0;
            out[i].assign(nc, fallback);
            for (int x = 0; x < ctx.state.clustering.n_active[i]; ++x) {
                int flat = ctx.offset[i] + x;
                if (flat < static_cast<int>(acts.size())) out[i][x] = acts[flat];
            }
        }
        return out;
    }

    void finish_context(StageContext& ctx) {
        const auto& cl = ctx.state.clustering;
        ctx.offset.assign(n_, 0);
        ctx.total_active = 0;
        for (int i = 0; i < n_; ++i) {
            ctx.offset[i] = ctx.total_active;
            ctx.total_active += cl.n_active[i];
            if (cfg_.prog_pruning && cfg_.L / n_ < cl.n_active[i])
                throw budget_error("expansion budget L=" + std::to_string(static_cast<long>(cfg_.L)) + " is below n*|C| = " +
                                   std::to_string(n_ * cl.n_active[i]) + " at stage " + std::to_string(cl.stage));
        }
        ctx.jc_of.assign(n_, {});
        for (int i = 0; i < n_; ++i) ctx.jc_of[i].assign(cl.n_clusters(i), {});
        const auto& occ = ctx.state.occupancy;
        double v = ctx.realized;
        std::vector<int> partial(n_);
        for (int j = 0; j < occ.size(); ++j) {
            const int* key = occ.key(j);
            for (int i = 0; i < n_; ++i) {
                ctx.jc_of[i][key[i]].push_back(j);
                partial[i] = ctx.stage() == 0 ? cfg_.forced[i] : -1;
            }
            v += occ.prob[j] * prov_.bound(ctx.stage(), occ.belief[j], partial.data());
        }
        ctx.base_value = v;
    }

    SearchNode next_stage(const SearchNode& node) {
        const StageContext& cur = *node.ctx;
        auto acts = stage_actions(cur, node.acts);
        StageStep step = advance_stage(m_, cur.state, acts, cfg_.cluster);
        auto ctx = std::make_shared<StageContext>();
        ctx->parent = node.ctx;
        ctx->parent_actions = std::move(acts);
        ctx->state = std::move(step.next);
        ctx->realized = cur.realized + step.reward;
        finish_context(*ctx);
        ctx_bytes_ += ctx->footprint();
        SearchNode out;
        out.ctx = ctx;
        out.value = ctx->base_value;
        out.priority = std::min(node.priority, out.value);
        out.prog = node.prog;
        out.counter = node.counter;
        return out;
    }

    // The last agent's last-stage clusters are independent given everything else: take
    // the per-cluster argmax directly.
    SearchNode close_last_stage(const SearchNode& node) {
        const StageContext& ctx = *node.ctx;
        int agent = n_ - 1, stage = ctx.stage();
        SearchNode out;
        out.ctx = node.ctx;
        out.acts = node.acts;
        std::vector<int> partial(n_);
        double total = ctx.realized;
        for (int x = 0; x < ctx.state.clustering.n_active[agent]; ++x) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a : allowed(stage, agent)) {
                double v = 0.0;
                for (int j : ctx.jc_of[agent][x]) {
                    fill_partial(ctx, node.acts, j, partial);
                    partial[agent] = a;
                    v += ctx.state.occupancy.prob[j] * prov_.bound(stage, ctx.state.occupancy.belief[j], partial.data());
                }
                if (v > best) {
                    best = v;
                    best_a = a;
                }
            }
            out.acts.push_back(static_cast<std::uint8_t>(best_a));
            total += best;
        }
        out.value = total;
        out.priority = std::min(node.priority, total);
        out.prog = cfg_.horizon * cfg_.L;
        out.counter = counter_++;
        out.complete = true;
        return out;
    }
};

} // namespace decpomdp

#endif
