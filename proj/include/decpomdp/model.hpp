#ifndef DECPOMDP_MODEL_HPP
#define DECPOMDP_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace decpomdp {

inline constexpr double row_tolerance = 1e-9;

class model_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Outcome {
    int index;
    double p;
};

// Immutable Dec-POMDP. Joint indices are row-major with agent 0 most significant.
class DecPomdp {
public:
    std::string name;
    std::vector<std::string> states;
    std::vector<std::vector<std::string>> actions;       // per agent
    std::vector<std::vector<std::string>> observations;  // per agent

    DecPomdp() = default;

    // T[(s*nA + a)*nS + s'], O[(a*nS + s')*nO + o], R[s*nA + a]
    DecPomdp(std::string name_, std::vector<std::string> states_,
             std::vector<std::vector<std::string>> actions_,
             std::vector<std::vector<std::string>> observations_,
             std::vector<double> T, std::vector<double> O, std::vector<double> R,
             std::vector<double> b0)
        : name(std::move(name_)), states(std::move(states_)), actions(std::move(actions_)),
          observations(std::move(observations_)), T_(std::move(T)), O_(std::move(O)),
          R_(std::move(R)), b0_(std::move(b0)) {
        init();
    }

    int n_agents() const { return static_cast<int>(actions.size()); }
    int n_states() const { return static_cast<int>(states.size()); }
    int n_joint_actions() const { return n_ja_; }
    int n_joint_observations() const { return n_jo_; }
    int n_actions(int i) const { return static_cast<int>(actions[i].size()); }
    int n_observations(int i) const { return static_cast<int>(observations[i].size()); }

    double T(int s, int a, int s2) const { return T_[(static_cast<std::size_t>(s) * n_ja_ + a) * n_s_ + s2]; }
    double O(int a, int s2, int o) const { return O_[(static_cast<std::size_t>(a) * n_s_ + s2) * n_jo_ + o]; }
    double R(int s, int a) const { return R_[static_cast<std::size_t>(s) * n_ja_ + a]; }
    const std::vector<double>& initial_belief() const { return b0_; }
    double r_max() const { return r_max_; }

    const std::vector<Outcome>& successors(int s, int a) const { return t_sparse_[static_cast<std::size_t>(s) * n_ja_ + a]; }
    const std::vector<Outcome>& obs_outcomes(int a, int s2) const { return o_sparse_[static_cast<std::size_t>(a) * n_s_ + s2]; }

    int local_action(int ja, int i) const { return ja_parts_[static_cast<std::size_t>(ja) * n_agents() + i]; }
    int local_observation(int jo, int i) const { return jo_parts_[static_cast<std::size_t>(jo) * n_agents() + i]; }

    template <class Seq>
    int joint_action(const Seq& local) const {
        int j = 0;
        for (int i = 0; i < n_agents(); ++i) j = j * n_actions(i) + static_cast<int>(local[i]);
        return j;
    }
    template <class Seq>
    int joint_observation(const Seq& local) const {
        int j = 0;
        for (int i = 0; i < n_agents(); ++i) j = j * n_observations(i) + static_cast<int>(local[i]);
        return j;
    }

    const std::vector<double>& reward_table() const { return R_; }

private:
    std::vector<double> T_, O_, R_, b0_;
    int n_s_ = 0, n_ja_ = 0, n_jo_ = 0;
    double r_max_ = 0.0;
    std::vector<std::vector<Outcome>> t_sparse_, o_sparse_;
    std::vector<int> ja_parts_, jo_parts_;

    static std::vector<int> split_table(const std::vector<int>& sizes, int total) {
        int n = static_cast<int>(sizes.size());
        std::vector<int> parts(static_cast<std::size_t>(total) * n);
        for (int j = 0; j < total; ++j) {
            int rest = j;
            for (int i = n - 1; i >= 0; --i) {
                parts[static_cast<std::size_t>(j) * n + i] = rest % sizes[i];
                rest /= sizes[i];
            }
        }
        return parts;
    }

    static void check_row(const double* row, int len, const std::string& what) {
        double sum = 0.0;
        for (int k = 0; k < len; ++k) {
            if (!(row[k] >= -row_tolerance && row[k] <= 1.0 + row_tolerance))
                throw model_error(what + ": probability out of range");
            sum += row[k];
        }
        if (std::abs(sum - 1.0) > row_tolerance)
            throw model_error(what + " sums to " + std::to_string(sum));
    }

    void init() {
        if (actions.empty() || actions.size() != observations.size())
            throw model_error("agent count mismatch between actions and observations");
        n_s_ = n_states();
        if (n_s_ == 0) throw model_error("model has no states");
        std::vector<int> asz, osz;
        for (int i = 0; i < n_agents(); ++i) {
            if (actions[i].empty() || observations[i].empty())
                throw model_error("agent " + std::to_string(i) + " has no actions or observations");
            asz.push_back(n_actions(i));
            osz.push_back(n_observations(i));
        }
        n_ja_ = std::accumulate(asz.begin(), asz.end(), 1, std::multiplies<>());
        n_jo_ = std::accumulate(osz.begin(), osz.end(), 1, std::multiplies<>());
        if (T_.size() != static_cast<std::size_t>(n_s_) * n_ja_ * n_s_ ||
            O_.size() != static_cast<std::size_t>(n_ja_) * n_s_ * n_jo_ ||
            R_.size() != static_cast<std::size_t>(n_s_) * n_ja_ || b0_.size() != static_cast<std::size_t>(n_s_))
            throw model_error("table dimensions do not match the declared sets");
        ja_parts_ = split_table(asz, n_ja_);
        jo_parts_ = split_table(osz, n_jo_);

        t_sparse_.assign(static_cast<std::size_t>(n_s_) * n_ja_, {});
        for (int s = 0; s < n_s_; ++s)
            for (int a = 0; a < n_ja_; ++a) {
                const double* row = &T_[(static_cast<std::size_t>(s) * n_ja_ + a) * n_s_];
                check_row(row, n_s_, "T row (state " + states[s] + ", joint action " + std::to_string(a) + ")");
                auto& out = t_sparse_[static_cast<std::size_t>(s) * n_ja_ + a];
                for (int s2 = 0; s2 < n_s_; ++s2)
                    if (row[s2] > 0.0) out.push_back({s2, row[s2]});
            }
        o_sparse_.assign(static_cast<std::size_t>(n_ja_) * n_s_, {});
        for (int a = 0; a < n_ja_; ++a)
            for (int s2 = 0; s2 < n_s_; ++s2) {
                const double* row = &O_[(static_cast<std::size_t>(a) * n_s_ + s2) * n_jo_];
                check_row(row, n_jo_, "O row (joint action " + std::to_string(a) + ", state " + states[s2] + ")");
                auto& out = o_sparse_[static_cast<std::size_t>(a) * n_s_ + s2];
                for (int o = 0; o < n_jo_; ++o)
                    if (row[o] > 0.0) out.push_back({o, row[o]});
            }
        check_row(b0_.data(), n_s_, "initial belief");
        r_max_ = *std::max_element(R_.begin(), R_.end());
    }
};

// Q_MDP(s, h') for 0 <= h' <= h, stored as table[h'][s]. Optional terminal values seed h' = 0.
inline std::vector<std::vector<double>> mdp_value(const DecPomdp& m, int h, const std::vector<double>* terminal = nullptr) {
    if (h < 0) throw std::invalid_argument("horizon must be non-negative");
    int nS = m.n_states(), nA = m.n_joint_actions();
    std::vector<std::vector<double>> V(h + 1, std::vector<double>(nS, 0.0));
    if (terminal) V[0] = *terminal;
    for (int t = 1; t <= h; ++t)
        for (int s = 0; s < nS; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < nA; ++a) {
                double q = m.R(s, a);
                for (const auto& [s2, p] : m.successors(s, a)) q += p * V[t - 1][s2];
                best = std::max(best, q);
            }
            V[t][s] = best;
        }
    return V;
}

inline double belief_dot(const std::vector<double>& b, const std::vector<double>& v) {
    double x = 0.0;
    for (std::size_t s = 0; s < b.size(); ++s) x += b[s] * v[s];
    return x;
}

inline double mdp_bound(const DecPomdp& m, int h) {
    return belief_dot(m.initial_belief(), mdp_value(m, h).back());
}

// Every agent picks uniformly at random each stage; observations marginalize out.
inline double random_policy_value(const DecPomdp& m, int h) {
    int nS = m.n_states(), nA = m.n_joint_actions();
    std::vector<double> b = m.initial_belief(), next(nS);
    double total = 0.0;
    for (int t = 0; t < h; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < nS; ++s) {
            if (b[s] == 0.0) continue;
            double w = b[s] / nA;
            for (int a = 0; a < nA; ++a) {
                total += w * m.R(s, a);
                for (const auto& [s2, p] : m.successors(s, a)) next[s2] += w * p;
            }
        }
        std::swap(b, next);
    }
    return total;
}

} // namespace decpomdp

#endif
