#ifndef DECPOMDP_PARSER_HPP
#define DECPOMDP_PARSER_HPP

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "model.hpp"

namespace decpomdp {

class parse_error : public std::runtime_error {
public:
    parse_error(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

namespace detail {

struct Token {
    std::string text;
    int line;
};

inline std::vector<Token> tokenize(std::istream& in) {
    std::vector<Token> out;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) out.push_back({cur, no});
            cur.clear();
        };
        for (char ch : line) {
            if (ch == ':') {
                flush();
                out.push_back({":", no});
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                flush();
            } else {
                cur += ch;
            }
        }
        flush();
    }
    return out;
}

inline std::optional<double> to_number(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<int> to_index(const std::string& s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0) return std::nullopt;
    return v;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    DecPomdp run(const std::string& name) {
        header();
        int nS = static_cast<int>(states_.size());
        nja_ = 1;
        njo_ = 1;
        for (auto& a : actions_) nja_ *= static_cast<int>(a.size());
        for (auto& o : obs_) njo_ *= static_cast<int>(o.size());
        T_.assign(static_cast<std::size_t>(nS) * nja_ * nS, 0.0);
        O_.assign(static_cast<std::size_t>(nja_) * nS * njo_, 0.0);
        while (!done()) body();
        std::vector<double> R(static_cast<std::size_t>(nS) * nja_, 0.0);
        resolve_rewards(R);
        if (cost_) for (auto& r : R) r = -r;
        try {
            return DecPomdp(name, states_, actions_, obs_, std::move(T_), std::move(O_), std::move(R), start_);
        } catch (const model_error& e) {
            throw parse_error(last_line_, e.what());
        }
    }

    bool discount_warning() const { return discount_warn_; }

private:
    std::vector<Token> t_;
    std::size_t i_ = 0;
    int last_line_ = 0;
    int n_agents_ = 0;
    bool cost_ = false, discount_warn_ = false;
    std::vector<std::string> states_;
    std::vector<std::vector<std::string>> actions_, obs_;
    std::vector<double> start_;
    std::vector<double> T_, O_;
    int nja_ = 1, njo_ = 1;

    struct RewardEntry {
        std::vector<int> a, s, s2, o;  // expanded index lists
        double r;
        bool all_next;
    };
    std::vector<RewardEntry> rewards_;

    bool done() const { return i_ >= t_.size(); }
    const Token& peek() const {
        if (done()) throw parse_error(last_line_, "unexpected end of input");
        return t_[i_];
    }
    const Token& next() {
        const Token& tk = peek();
        last_line_ = tk.line;
        ++i_;
        return tk;
    }
    void expect_colon() {
        const Token& tk = next();
        if (tk.text != ":") throw parse_error(tk.line, "expected ':' but found '" + tk.text + "'");
    }
    bool at_keyword(const char* kw) const {
        return !done() && t_[i_].text == kw && i_ + 1 < t_.size() && t_[i_ + 1].text == ":";
    }
    std::vector<Token> rest_of_line(int line) {
        std::vector<Token> out;
        while (!done() && t_[i_].line == line) out.push_back(next());
        return out;
    }
    double number(const Token& tk) {
        auto v = to_number(tk.text);
        if (!v) throw parse_error(tk.line, "expected a number but found '" + tk.text + "'");
        return *v;
    }

    // a count or an explicit list of names on one line
    static std::vector<std::string> names_from(const std::vector<Token>& toks, const char* what) {
        if (toks.empty()) throw parse_error(0, std::string("empty ") + what + " declaration");
        if (toks.size() == 1) {
            if (auto n = to_index(toks[0].text)) {
                if (*n == 0) throw parse_error(toks[0].line, std::string("zero ") + what);
                std::vector<std::string> out;
                for (int k = 0; k < *n; ++k) out.push_back(std::to_string(k));
                return out;
            }
        }
        std::vector<std::string> out;
        for (auto& tk : toks) out.push_back(tk.text);
        return out;
    }

    void header() {
        bool have_agents = false, have_states = false, have_actions = false, have_obs = false;
        std::optional<std::vector<Token>> start_tokens;
        std::string start_mode;
        int start_line = 0;
        while (!done()) {
            const Token& kw = peek();
            if (kw.text == "T" || kw.text == "O" || kw.text == "R") break;
            next();
            std::string key = kw.text;
            if (key == "start" && !done() && (peek().text == "include" || peek().text == "exclude")) {
                start_mode = next().text;
            }
            expect_colon();
            if (key == "agents") {
                auto toks = rest_of_line(kw.line);
                n_agents_ = static_cast<int>(names_from(toks, "agents").size());
                have_agents = true;
            } else if (key == "discount") {
                auto toks = rest_of_line(kw.line);
                if (toks.size() != 1) throw parse_error(kw.line, "discount expects one value");
                if (std::abs(number(toks[0]) - 1.0) > 1e-12) {
                    discount_warn_ = true;
                    std::cerr << "warning: discount " << toks[0].text << " ignored; horizons are undiscounted\n";
                }
            } else if (key == "values") {
                auto toks = rest_of_line(kw.line);
                if (toks.size() != 1 || (toks[0].text != "reward" && toks[0].text != "cost"))
                    throw parse_error(kw.line, "values must be 'reward' or 'cost'");
                cost_ = toks[0].text == "cost";
            } else if (key == "states") {
                states_ = names_from(rest_of_line(kw.line), "states");
                have_states = true;
            } else if (key == "actions" || key == "observations") {
                if (!have_agents) throw parse_error(kw.line, "'agents' must precede '" + key + "'");
                auto& dst = key == "actions" ? actions_ : obs_;
                dst.clear();
                auto same = rest_of_line(kw.line);
                if (!same.empty()) throw parse_error(kw.line, key + " must list one agent per line");
                for (int a = 0; a < n_agents_; ++a) {
                    if (done()) throw parse_error(kw.line, "missing " + key + " for agent " + std::to_string(a));
                    int ln = peek().line;
                    dst.push_back(names_from(rest_of_line(ln), key.c_str()));
                }
                (key == "actions" ? have_actions : have_obs) = true;
            } else if (key == "start") {
                start_line = kw.line;
                std::vector<Token> toks = rest_of_line(kw.line);
                // probabilities may continue on following lines
                while (!done() && to_number(peek().text) && !(peek().text == "T" || peek().text == "O" || peek().text == "R"))
                    toks.push_back(next());
                start_tokens = toks;
            } else {
                throw parse_error(kw.line, "unknown header keyword '" + key + "'");
            }
        }
        if (!have_agents || !have_states || !have_actions || !have_obs)
            throw parse_error(last_line_, "header must declare agents, states, actions and observations");
        int nS = static_cast<int>(states_.size());
        start_.assign(nS, 0.0);
        if (!start_tokens || start_tokens->empty() || (*start_tokens)[0].text == "uniform") {
            if (!start_mode.empty()) throw parse_error(start_line, "start include/exclude needs states");
            std::fill(start_.begin(), start_.end(), 1.0 / nS);
        } else if (!start_mode.empty()) {
            std::vector<bool> listed(nS, false);
            for (auto& tk : *start_tokens) listed[state(tk)] = true;
            int cnt = 0;
            for (int s = 0; s < nS; ++s) cnt += (listed[s] == (start_mode == "include"));
            if (cnt == 0) throw parse_error(start_line, "start leaves no states");
            for (int s = 0; s < nS; ++s)
                if (listed[s] == (start_mode == "include")) start_[s] = 1.0 / cnt;
        } else if (start_tokens->size() == 1 && !to_number((*start_tokens)[0].text)) {
            start_[state((*start_tokens)[0])] = 1.0;
        } else if (static_cast<int>(start_tokens->size()) == nS) {
            for (int s = 0; s < nS; ++s) start_[s] = number((*start_tokens)[s]);
        } else if (start_tokens->size() == 1 && nS != 1) {
            start_[state((*start_tokens)[0])] = 1.0;
        } else {
            throw parse_error(start_line, "start distribution has " + std::to_string(start_tokens->size()) +
                                              " entries for " + std::to_string(nS) + " states");
        }
    }

    static int lookup(const std::vector<std::string>& names, const Token& tk, const char* what) {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == tk.text) return static_cast<int>(k);
        if (auto v = to_index(tk.text); v && *v < static_cast<int>(names.size())) return *v;
        throw parse_error(tk.line, std::string("unknown ") + what + " '" + tk.text + "'");
    }
    int state(const Token& tk) const { return lookup(states_, tk, "state"); }

    std::vector<int> state_list(const Token& tk) const {
        if (tk.text == "*") {
            std::vector<int> all(states_.size());
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        return {state(tk)};
    }

    // joint action/observation specifier: one joint index, '*', or one token per agent
    std::vector<int> joint_list(const std::vector<Token>& toks, const std::vector<std::vector<std::string>>& sets,
                                int total, const char* what) const {
        if (toks.empty()) throw parse_error(last_line_, std::string("missing ") + what);
        if (toks.size() == 1 && (toks[0].text == "*" || n_agents_ > 1)) {
            if (toks[0].text == "*") {
                std::vector<int> all(total);
                std::iota(all.begin(), all.end(), 0);
                return all;
            }
            auto v = to_index(toks[0].text);
            if (!v || *v >= total)
                throw parse_error(toks[0].line, std::string("expected ") + std::to_string(n_agents_) + " " + what +
                                                    " components but found 1");
            return {*v};
        }
        if (static_cast<int>(toks.size()) != n_agents_)
            throw parse_error(toks[0].line, std::string("expected ") + std::to_string(n_agents_) + " " + what +
                                                " components but found " + std::to_string(toks.size()));
        std::vector<std::vector<int>> per(n_agents_);
        for (int a = 0; a < n_agents_; ++a) {
            if (toks[a].text == "*") {
                per[a].resize(sets[a].size());
                std::iota(per[a].begin(), per[a].end(), 0);
            } else {
                per[a] = {lookup(sets[a], toks[a], what)};
            }
        }
        std::vector<int> out{0};
        for (int a = 0; a < n_agents_; ++a) {
            std::vector<int> nxt;
            for (int base : out)
                for (int x : per[a]) nxt.push_back(base * static_cast<int>(sets[a].size()) + x);
            out = std::move(nxt);
        }
        return out;
    }

    // tokens up to the next ':' on the same line
    std::vector<Token> field(int line) {
        std::vector<Token> out;
        while (!done() && peek().line == line && peek().text != ":") out.push_back(next());
        return out;
    }

    std::vector<double> numbers(std::size_t count, int line) {
        std::vector<double> out;
        while (out.size() < count) {
            if (done()) throw parse_error(line, "expected " + std::to_string(count) + " numbers");
            out.push_back(number(next()));
        }
        return out;
    }

    bool next_is_colon(int line) const { return !done() && peek().line == line && peek().text == ":"; }

    void body() {
        const Token& kw = next();
        if (kw.text != "T" && kw.text != "O" && kw.text != "R")
            throw parse_error(kw.line, "unexpected token '" + kw.text + "'");
        char kind = kw.text[0];
        int line = kw.line;
        expect_colon();
        auto acts = joint_list(field(line), actions_, nja_, "action");
        int nS = static_cast<int>(states_.size());
        if (kind == 'T') {
            if (!next_is_colon(line)) {
                matrix_or_keyword(acts, [&](int a, int s, int s2, double p) { T_[(static_cast<std::size_t>(s) * nja_ + a) * nS + s2] = p; }, nS, nS, line);
                return;
            }
            expect_colon();
            auto from = field(line);
            if (from.size() != 1) throw parse_error(line, "expected one start state");
            auto ss = state_list(from[0]);
            if (!next_is_colon(line)) {
                auto row = row_or_keyword(nS, line);
                for (int a : acts)
                    for (int s : ss)
                        for (int s2 = 0; s2 < nS; ++s2) T_[(static_cast<std::size_t>(s) * nja_ + a) * nS + s2] = row[s2];
                return;
            }
            expect_colon();
            auto to = field(line);
            double p;
            if (next_is_colon(line)) {
                expect_colon();
                p = number(next());
            } else if (to.size() == 2) {
                p = number(to[1]);
                to.pop_back();
            } else {
                p = number(next());
            }
            if (to.size() != 1) throw parse_error(line, "expected one end state");
            auto ss2 = state_list(to[0]);
            for (int a : acts)
                for (int s : ss)
                    for (int s2 : ss2) T_[(static_cast<std::size_t>(s) * nja_ + a) * nS + s2] = p;
        } else if (kind == 'O') {
            if (!next_is_colon(line)) {
                matrix_or_keyword(acts, [&](int a, int s2, int o, double p) { O_[(static_cast<std::size_t>(a) * nS + s2) * njo_ + o] = p; }, nS, njo_, line);
                return;
            }
            expect_colon();
            auto to = field(line);
            if (to.size() != 1) throw parse_error(line, "expected one end state");
            auto ss2 = state_list(to[0]);
            if (!next_is_colon(line)) {
                auto row = row_or_keyword(njo_, line);
                for (int a : acts)
                    for (int s2 : ss2)
                        for (int o = 0; o < njo_; ++o) O_[(static_cast<std::size_t>(a) * nS + s2) * njo_ + o] = row[o];
                return;
            }
            expect_colon();
            auto otoks = field(line);
            double p;
            if (next_is_colon(line)) {
                expect_colon();
                p = number(next());
            } else if (!otoks.empty() && static_cast<int>(otoks.size()) == n_agents_ + 1) {
                p = number(otoks.back());
                otoks.pop_back();
            } else {
                p = number(next());
            }
            auto os = joint_list(otoks, obs_, njo_, "observation");
            for (int a : acts)
                for (int s2 : ss2)
                    for (int o : os) O_[(static_cast<std::size_t>(a) * nS + s2) * njo_ + o] = p;
        } else {
            expect_colon();
            auto from = field(line);
            if (from.size() != 1) throw parse_error(line, "expected one start state");
            RewardEntry e;
            e.a = acts;
            e.s = state_list(from[0]);
            e.all_next = true;
            if (!next_is_colon(line)) throw parse_error(line, "reward rows over end states are not supported");
            expect_colon();
            auto to = field(line);
            if (to.size() != 1) throw parse_error(line, "expected one end state");
            e.all_next = to[0].text == "*";
            e.s2 = state_list(to[0]);
            if (!next_is_colon(line)) throw parse_error(line, "expected ':' before the observation");
            expect_colon();
            auto otoks = field(line);
            double r;
            if (next_is_colon(line)) {
                expect_colon();
                r = number(next());
            } else if (static_cast<int>(otoks.size()) == n_agents_ + 1 ||
                       (otoks.size() == 2 && otoks[0].text == "*")) {
                r = number(otoks.back());
                otoks.pop_back();
            } else {
                r = number(next());
            }
            if (!(otoks.size() == 1 && otoks[0].text == "*")) e.all_next = false;
            e.o = joint_list(otoks, obs_, njo_, "observation");
            e.r = r;
            rewards_.push_back(std::move(e));
        }
    }

    std::vector<double> row_or_keyword(int len, int line) {
        if (!done() && peek().text == "uniform") {
            next();
            return std::vector<double>(len, 1.0 / len);
        }
        return numbers(static_cast<std::size_t>(len), line);
    }

    template <class Set>
    void matrix_or_keyword(const std::vector<int>& acts, Set set, int rows, int cols, int line) {
        if (!done() && peek().text == "uniform") {
            next();
            for (int a : acts)
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) set(a, r, c, 1.0 / cols);
            return;
        }
        if (!done() && peek().text == "identity") {
            const Token& tk = next();
            if (rows != cols) throw parse_error(tk.line, "identity needs a square matrix");
            for (int a : acts)
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) set(a, r, c, r == c ? 1.0 : 0.0);
            return;
        }
        auto vals = numbers(static_cast<std::size_t>(rows) * cols, line);
        for (int a : acts)
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) set(a, r, c, vals[static_cast<std::size_t>(r) * cols + c]);
    }

    void resolve_rewards(std::vector<double>& R) {
        int nS = static_cast<int>(states_.size());
        bool simple = true;
        for (auto& e : rewards_) simple = simple && e.all_next;
        if (simple) {
            for (auto& e : rewards_)
                for (int a : e.a)
                    for (int s : e.s) R[static_cast<std::size_t>(s) * nja_ + a] = e.r;
            return;
        }
        // expected reward over (s', o) with later entries overriding earlier ones
        for (int s = 0; s < nS; ++s)
            for (int a = 0; a < nja_; ++a) {
                double total = 0.0;
                for (int s2 = 0; s2 < nS; ++s2) {
                    double pt = T_[(static_cast<std::size_t>(s) * nja_ + a) * nS + s2];
                    if (pt == 0.0) continue;
                    for (int o = 0; o < njo_; ++o) {
                        double po = O_[(static_cast<std::size_t>(a) * nS + s2) * njo_ + o];
                        if (po == 0.0) continue;
                        double r = 0.0;
                        for (auto it = rewards_.rbegin(); it != rewards_.rend(); ++it) {
                            auto has = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
                            if (has(it->a, a) && has(it->s, s) && has(it->s2, s2) && has(it->o, o)) {
                                r = it->r;
                                break;
                            }
                        }
                        total += pt * po * r;
                    }
                }
                R[static_cast<std::size_t>(s) * nja_ + a] = total;
            }
    }
};

} // namespace detail

inline DecPomdp parse_dpomdp(std::istream& in, const std::string& name = "model") {
    detail::Parser p(detail::tokenize(in));
    return p.run(name);
}

inline DecPomdp parse_dpomdp(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    return parse_dpomdp(in, name);
}

inline DecPomdp load_dpomdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    std::string name = path;
    if (auto k = name.find_last_of('/'); k != std::string::npos) name = name.substr(k + 1);
    if (auto k = name.find('.'); k != std::string::npos) name = name.substr(0, k);
    return parse_dpomdp(in, name);
}

} // namespace decpomdp

#endif
