#ifndef DECPOMDP_IO_HPP
#define DECPOMDP_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "parser.hpp"
#include "search.hpp"

#ifndef DECPOMDP_FIXTURE_DIR
#define DECPOMDP_FIXTURE_DIR "fixtures"
#endif

namespace decpomdp {

using json = nlohmann::json;

// ---------------------------------------------------------------- fixtures

inline const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = {"dectiger", "grid", "boxpushing", "firefighting", "recycling",
                                                   "mars",     "broadcast", "grid3x3", "hotel"};
    return names;
}

inline std::filesystem::path fixture_dir() {
    if (const char* env = std::getenv("DECPOMDP_FIXTURES"); env && *env) return env;
    return DECPOMDP_FIXTURE_DIR;
}

// A bare benchmark name resolves inside the fixture directory; anything else is a path.
inline std::filesystem::path resolve_model(const std::string& name_or_path) {
    std::filesystem::path p(name_or_path);
    if (std::filesystem::exists(p)) return p;
    for (const auto& f : {fixture_dir() / name_or_path, fixture_dir() / (name_or_path + ".dpomdp")})
        if (std::filesystem::exists(f)) return f;
    return p;
}

inline DecPomdp load_model(const std::string& name_or_path) {
    auto path = resolve_model(name_or_path);
    DecPomdp m = load_dpomdp(path.string());
    m.name = path.stem().string();
    return m;
}

// ---------------------------------------------------------------- names

inline std::string to_string(HeuristicKind k) {
    switch (k) {
    case HeuristicKind::qmdp: return "qmdp";
    case HeuristicKind::maxr: return "maxr";
    case HeuristicKind::mdp: return "mdp";
    case HeuristicKind::tr: return "tr";
    }
    return "?";
}

inline HeuristicKind heuristic_from_string(const std::string& s) {
    if (s == "qmdp") return HeuristicKind::qmdp;
    if (s == "maxr") return HeuristicKind::maxr;
    if (s == "mdp") return HeuristicKind::mdp;
    if (s == "tr") return HeuristicKind::tr;
    throw std::invalid_argument("unknown heuristic: " + s);
}

inline std::string to_string(Reveal r) { return r == Reveal::at_r ? "at_r" : "at_r1"; }

inline Reveal reveal_from_string(const std::string& s) {
    if (s == "at_r") return Reveal::at_r;
    if (s == "at_r1") return Reveal::at_r_plus_1;
    throw std::invalid_argument("unknown reveal variant: " + s);
}

inline std::string to_string(Mode m) { return m == Mode::policy_finding ? "policy" : "upper"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "policy") return Mode::policy_finding;
    if (s == "upper") return Mode::upper_bound;
    throw std::invalid_argument("unknown mode: " + s);
}

// ---------------------------------------------------------------- configurations

inline json config_to_json(const SolverConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    j["window"] = c.k;
    j["limit"] = c.L;
    j["heuristic"] = to_string(c.heuristic.kind);
    j["r"] = c.heuristic.r;
    j["variant"] = to_string(c.heuristic.variant);
    j["p_max"] = c.p_max ? json(*c.p_max) : json(nullptr);
    j["time_limit"] = c.time_limit;
    j["memory_limit"] = c.memory_limit;
    j["lower_bound"] = c.provided_lower_bound ? json(*c.provided_lower_bound) : json(nullptr);
    return j;
}

// Missing keys keep the defaults of `base`.
inline SolverConfig config_from_json(const json& j, SolverConfig base = {}) {
    if (j.contains("mode")) base.mode = mode_from_string(j["mode"]);
    if (j.contains("window")) base.k = j["window"];
    if (j.contains("limit")) base.L = j["limit"];
    if (j.contains("heuristic")) base.heuristic.kind = heuristic_from_string(j["heuristic"]);
    if (j.contains("r")) base.heuristic.r = j["r"];
    if (j.contains("variant")) base.heuristic.variant = reveal_from_string(j["variant"]);
    if (j.contains("p_max") && !j["p_max"].is_null()) base.p_max = j["p_max"].get<double>();
    if (j.contains("time_limit")) base.time_limit = j["time_limit"];
    if (j.contains("memory_limit")) base.memory_limit = j["memory_limit"];
    if (j.contains("lower_bound") && !j["lower_bound"].is_null())
        base.provided_lower_bound = j["lower_bound"].get<double>();
    return base;
}

// Named configurations used by the benchmark suites.
inline const std::map<std::string, SolverConfig>& named_configs() {
    static const std::map<std::string, SolverConfig> table = [] {
        std::map<std::string, SolverConfig> t;
        auto pf = [](HeuristicKind kind, int r, int k, double L, double secs) {
            SolverConfig c;
            c.mode = Mode::policy_finding;
            c.heuristic.kind = kind;
            c.heuristic.r = r;
            c.k = k;
            c.L = L;
            c.time_limit = secs;
            c.memory_limit = std::size_t{16} << 30;
            return c;
        };
        auto tr = [](int r, double secs) {
            SolverConfig c;
            c.mode = Mode::upper_bound;
            c.heuristic.kind = HeuristicKind::tr;
            c.heuristic.r = r;
            c.time_limit = secs;
            c.memory_limit = std::size_t{16} << 30;
            return c;
        };
        t["cmp-k2"] = pf(HeuristicKind::qmdp, 1, 2, 1e3, 60);
        t["cmp-k3"] = pf(HeuristicKind::qmdp, 1, 3, 1e4, 60);
        t["fast-k1"] = pf(HeuristicKind::mdp, 1, 1, 20, 60);
        t["fast-k2"] = pf(HeuristicKind::mdp, 1, 2, 100, 60);
        t["fast-k3"] = pf(HeuristicKind::mdp, 1, 3, 100, 60);
        t["quality-k2"] = pf(HeuristicKind::mdp, 2, 2, 1e3, 600);
        t["quality-k3"] = pf(HeuristicKind::mdp, 2, 3, 1e4, 600);
        t["quality-maxr"] = pf(HeuristicKind::maxr, 3, 3, 1e4, 600);
        t["tr-r3"] = tr(3, 120);
        t["tr-r5"] = tr(5, 1800);
        t["tr-r5-fast"] = tr(5, 120);
        return t;
    }();
    return table;
}

// ---------------------------------------------------------------- policies

inline json policy_to_json(const DecPomdp& m, const ClusterPolicy& pol) {
    json agents = json::array();
    for (std::size_t i = 0; i < pol.rules.size(); ++i) {
        json stages = json::array();
        for (const auto& stage : pol.rules[i]) {
            json rules = json::array();
            for (const auto& rule : stage) {
                json suffix = json::array();
                for (int o : rule.suffix) suffix.push_back(m.observations[i][o]);
                rules.push_back({{"suffix", suffix}, {"action", m.actions[i][rule.action]}});
            }
            stages.push_back(rules);
        }
        agents.push_back(stages);
    }
    return {{"window", pol.k}, {"horizon", pol.horizon()}, {"agents", agents}};
}

inline ClusterPolicy policy_from_json(const DecPomdp& m, const json& j) {
    auto index_of = [](const std::vector<std::string>& names, const std::string& x, const char* what) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == x) return static_cast<int>(i);
        throw policy_error(std::string("unknown ") + what + ": " + x);
    };
    ClusterPolicy pol;
    pol.k = j.at("window");
    const json& agents = j.at("agents");
    if (static_cast<int>(agents.size()) != m.n_agents()) throw policy_error("policy agent count does not match");
    pol.rules.resize(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i)
        for (const auto& stage : agents[i]) {
            std::vector<ClusterRule> rules;
            for (const auto& rule : stage) {
                ClusterRule r;
                for (const auto& o : rule.at("suffix")) r.suffix.push_back(index_of(m.observations[i], o, "observation"));
                r.action = index_of(m.actions[i], rule.at("action"), "action");
                rules.push_back(std::move(r));
            }
            pol.rules[i].push_back(std::move(rules));
        }
    return pol;
}

// ---------------------------------------------------------------- run records

inline json environment_fingerprint() {
    json e;
#if defined(__clang__)
    e["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    e["compiler"] = std::string("gcc ") + __VERSION__;
#else
    e["compiler"] = "unknown";
#endif
#ifdef NDEBUG
    e["build"] = "release";
#else
    e["build"] = "debug";
#endif
    e["cxx_standard"] = static_cast<long>(__cplusplus);
    e["hardware_threads"] = std::thread::hardware_concurrency();
    std::string cpu = "unknown";
    if (std::ifstream f("/proc/cpuinfo"); f) {
        for (std::string line; std::getline(f, line);)
            if (line.rfind("model name", 0) == 0) {
                cpu = line.substr(line.find(':') + 2);
                break;
            }
    }
    e["cpu"] = cpu;
    return e;
}

struct RunRecord {
    std::string benchmark;
    int horizon = 0;
    std::string config_name;
    SolverConfig config;
    std::optional<double> value;        // exact value of the returned policy
    std::optional<double> upper_bound;
    long expansions = 0;
    double wall_time = 0.0;
    std::size_t peak_memory = 0;
    bool timed_out = false;
    bool memory_out = false;
    bool degraded = false;
    bool completed = false;
    std::optional<double> gap;
};

inline RunRecord make_record(const std::string& bench, int h, const std::string& name, const SolverConfig& cfg,
                             const SolveResult& r) {
    RunRecord rec;
    rec.benchmark = bench;
    rec.horizon = h;
    rec.config_name = name;
    rec.config = cfg;
    if (r.best_policy) rec.value = r.value;
    rec.upper_bound = r.upper_bound;
    rec.expansions = r.expansions;
    rec.wall_time = r.wall_time;
    rec.peak_memory = r.peak_memory;
    rec.timed_out = r.timed_out;
    rec.memory_out = r.memory_out;
    rec.degraded = r.degraded;
    rec.completed = r.completed;
    return rec;
}

inline json record_to_json(const RunRecord& r) {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    return {{"benchmark", r.benchmark},
            {"horizon", r.horizon},
            {"mode", to_string(r.config.mode)},
            {"config_name", r.config_name},
            {"config", config_to_json(r.config)},
            {"result",
             {{"value", opt(r.value)},
              {"upper_bound", opt(r.upper_bound)},
              {"gap", opt(r.gap)},
              {"expansions", r.expansions},
              {"wall_time", r.wall_time},
              {"peak_memory", r.peak_memory},
              {"timed_out", r.timed_out},
              {"memory_out", r.memory_out},
              {"degraded", r.degraded},
              {"completed", r.completed}}},
            {"environment", environment_fingerprint()}};
}

inline std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_header() {
    return "benchmark,horizon,mode,config,value,upper_bound,gap,expansions,wall_time,peak_memory,timed_out,"
           "memory_out,degraded,completed";
}

inline std::string record_to_csv(const RunRecord& r) {
    auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
    std::ostringstream os;
    os << r.benchmark << ',' << r.horizon << ',' << to_string(r.config.mode) << ',' << r.config_name << ','
       << opt(r.value) << ',' << opt(r.upper_bound) << ',' << opt(r.gap) << ',' << r.expansions << ','
       << format_number(r.wall_time) << ',' << r.peak_memory << ',' << r.timed_out << ',' << r.memory_out << ','
       << r.degraded << ',' << r.completed;
    return os.str();
}

inline std::string record_to_text(const RunRecord& r) {
    auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string("-"); };
    std::ostringstream os;
    os << "benchmark    " << r.benchmark << "\n"
       << "horizon      " << r.horizon << "\n"
       << "mode         " << to_string(r.config.mode) << "\n"
       << "config       " << (r.config_name.empty() ? "custom" : r.config_name) << "\n"
       << "value        " << opt(r.value) << "\n"
       << "upper_bound  " << opt(r.upper_bound) << "\n";
    if (r.gap) os << "gap          " << opt(r.gap) << "\n";
    os << "expansions   " << r.expansions << "\n"
       << "wall_time    " << format_number(r.wall_time) << "\n"
       << "timed_out    " << (r.timed_out ? "yes" : "no") << "\n"
       << "degraded     " << (r.degraded ? "yes" : "no") << "\n"
       << "completed    " << (r.completed ? "yes" : "no") << "\n";
    return os.str();
}

// Relative gap per (benchmark, horizon): best upper bound against best policy value.
inline void fill_gaps(std::vector<RunRecord>& runs) {
    std::map<std::pair<std::string, int>, std::pair<std::optional<double>, std::optional<double>>> best;
    for (const auto& r : runs) {
        auto& [lo, hi] = best[{r.benchmark, r.horizon}];
        if (r.value) lo = lo ? std::max(*lo, *r.value) : *r.value;
        if (r.upper_bound && r.config.mode == Mode::upper_bound) hi = hi ? std::min(*hi, *r.upper_bound) : *r.upper_bound;
    }
    for (auto& r : runs) {
        const auto& [lo, hi] = best[{r.benchmark, r.horizon}];
        if (lo && hi && *hi != 0.0) r.gap = (*hi - *lo) / std::abs(*hi);
    }
}

} // namespace decpomdp

#endif
