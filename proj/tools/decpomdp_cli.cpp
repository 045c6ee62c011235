// Command-line front end: solve, bench and verify.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <decpomdp/decpomdp.hpp>
#include <decpomdp/io.hpp>
#include <decpomdp/verify.hpp>

using namespace decpomdp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_timeout = 2;
constexpr int exit_no_result = 3;
constexpr int exit_usage = 64;
constexpr int exit_data = 65;

struct SolveArgs {
    std::string model;
    int horizon = 0;
    std::string mode = "policy";
    int window = 2;
    double limit = 1000.0;
    std::string heuristic = "mdp";
    int r = 2;
    std::string variant = "at_r1";
    std::optional<double> p_max;
    double time_limit = 0.0;
    double memory_limit_mb = 0.0;
    std::optional<double> lower_bound;
    std::string format = "text";
    std::string policy_out;
    std::string out;
};

struct BenchArgs {
    std::string suite;
    std::string format = "csv";
    std::string out;
    double time_scale = 1.0;
};

struct VerifyArgs {
    std::string check;
    bool all = false;
    std::string model;
    int horizon = 3;
    int window = 2;
    std::uint64_t seed = 1;
};

// Writes to --out when given, stdout otherwise.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

std::string render(const std::vector<RunRecord>& runs, const std::string& format) {
    std::ostringstream os;
    if (format == "json") {
        json arr = json::array();
        for (const auto& r : runs) arr.push_back(record_to_json(r));
        os << (runs.size() == 1 ? arr[0] : arr).dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else if (format == "csv") {
        os << csv_header() << "\n";
        for (const auto& r : runs) os << record_to_csv(r) << "\n";
    } else {
        for (std::size_t i = 0; i < runs.size(); ++i) os << (i ? "\n" : "") << record_to_text(runs[i]);
    }
    return os.str();
}

int run_solve(const SolveArgs& a) {
    SolverConfig cfg;
    cfg.mode = mode_from_string(a.mode);
    cfg.k = a.window;
    cfg.L = a.limit;
    cfg.heuristic.kind = heuristic_from_string(a.heuristic);
    cfg.heuristic.r = a.r;
    cfg.heuristic.variant = reveal_from_string(a.variant);
    cfg.p_max = a.p_max;
    cfg.time_limit = a.time_limit;
    cfg.memory_limit = static_cast<std::size_t>(a.memory_limit_mb * 1024.0 * 1024.0);
    cfg.provided_lower_bound = a.lower_bound;
    DecPomdp m = load_model(a.model);
    SolveResult res = solve(m, a.horizon, cfg);
    RunRecord rec = make_record(m.name, a.horizon, "", cfg, res);
    if (!a.policy_out.empty() && res.best_policy) {
        std::ofstream f(a.policy_out);
        if (!f) throw std::runtime_error("cannot write " + a.policy_out);
        f << policy_to_json(m, *res.best_policy).dump(2) << "\n";
    }
    emit(a.out, render({rec}, a.format));
    if (!res.best_policy && !res.upper_bound) return exit_no_result;
    return res.timed_out || res.memory_out ? exit_timeout : exit_ok;
}

// Suite file: {"configs": {name: {...}}, "runs": [{"benchmark", "horizon", "config"}]}.
// Config names not defined in the file fall back to the built-in table.
int run_bench(const BenchArgs& a) {
    json suite;
    {
        std::ifstream f(a.suite);
        if (!f) throw std::runtime_error("cannot read suite " + a.suite);
        try {
            f >> suite;
        } catch (const json::exception& e) {
            throw parse_error(0, std::string("suite: ") + e.what());
        }
    }
    std::map<std::string, SolverConfig> configs = named_configs();
    if (suite.contains("configs"))
        for (const auto& [name, body] : suite["configs"].items()) {
            SolverConfig base = body.contains("base") ? configs.at(body["base"].get<std::string>()) : SolverConfig{};
            configs[name] = config_from_json(body, base);
        }
    struct Row {
        std::string bench, config;
        int h;
    };
    std::vector<Row> rows;
    if (suite.contains("runs"))
        for (const auto& r : suite["runs"]) rows.push_back({r.at("benchmark"), r.at("config"), r.at("horizon")});
    // every model and config is checked before the first run starts
    std::map<std::string, DecPomdp> models;
    std::vector<std::string> missing;
    for (const auto& r : rows) {
        if (!configs.count(r.config)) throw std::invalid_argument("unknown config: " + r.config);
        if (r.h < 1) throw std::invalid_argument("horizon must be at least 1");
        if (models.count(r.bench)) continue;
        auto path = resolve_model(r.bench);
        if (!std::filesystem::exists(path)) {
            missing.push_back(r.bench);
            continue;
        }
        models.emplace(r.bench, load_model(r.bench));
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& x : missing) list += (list.empty() ? "" : ", ") + x;
        std::cerr << "missing models: " << list << "\n";
        return exit_data;
    }
    std::vector<RunRecord> runs;
    bool any_timeout = false;
    for (const auto& r : rows) {
        SolverConfig cfg = configs.at(r.config);
        cfg.time_limit *= a.time_scale;
        SolveResult res = solve(models.at(r.bench), r.h, cfg);
        any_timeout = any_timeout || res.timed_out || res.memory_out;
        runs.push_back(make_record(r.bench, r.h, r.config, cfg, res));
        std::cerr << r.bench << " h" << r.h << " " << r.config << " done in " << res.wall_time << " s\n";
    }
    fill_gaps(runs);
    emit(a.out, render(runs, a.format));
    return any_timeout ? exit_timeout : exit_ok;
}

int run_verify(const VerifyArgs& a) {
    std::vector<std::string> models;
    if (a.all)
        models = benchmark_names();
    else if (!a.model.empty())
        models.push_back(a.model);
    else
        throw std::invalid_argument("verify needs --model or --all");
    bool ok = true;
    for (const auto& name : models) {
        DecPomdp m = load_model(name);
        CheckReport rep;
        if (a.check == "lossless") {
            rep = check_lossless(m, a.horizon, a.window);
        } else if (a.check == "admissible") {
            HeuristicSpec spec;
            spec.kind = HeuristicKind::tr;
            spec.r = 2;
            rep = check_admissible(m, a.horizon, spec);
        } else if (a.check == "incremental") {
            rep = check_incremental(m, a.horizon, a.window, a.seed);
        } else {
            rep = check_sandwich(m, a.horizon);
        }
        ok = ok && rep.ok;
        std::cout << (rep.ok ? "PASS " : "FAIL ") << a.check << " " << name << " h" << a.horizon << ": " << rep.detail
                  << "\n";
    }
    return ok ? exit_ok : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dec-POMDP policy search with clustered histories"};
    app.require_subcommand(1);

    SolveArgs sa;
    auto* solve_cmd = app.add_subcommand("solve", "solve one model at one horizon");
    solve_cmd->add_option("--model", sa.model, "benchmark name or .dpomdp path")->required();
    solve_cmd->add_option("--horizon", sa.horizon, "planning horizon")->required()->check(CLI::PositiveNumber);
    solve_cmd->add_option("--mode", sa.mode)->check(CLI::IsMember({"policy", "upper"}));
    solve_cmd->add_option("--window", sa.window, "history window k")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--limit", sa.limit, "expansion budget L per stage")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--heuristic", sa.heuristic)->check(CLI::IsMember({"qmdp", "maxr", "mdp", "tr"}));
    solve_cmd->add_option("--r", sa.r, "reduced horizon")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--variant", sa.variant)->check(CLI::IsMember({"at_r", "at_r1"}));
    solve_cmd->add_option("--pmax", sa.p_max, "probability merging threshold")->check(CLI::Range(0.0, 1.0));
    solve_cmd->add_option("--time-limit", sa.time_limit, "seconds, 0 for none")->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--memory-limit", sa.memory_limit_mb, "MiB, 0 for none")->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--lower-bound", sa.lower_bound, "known policy value for upper-bound pruning");
    solve_cmd->add_option("--format", sa.format)->check(CLI::IsMember({"json", "csv", "text"}));
    solve_cmd->add_option("--policy-out", sa.policy_out, "write the policy as JSON");
    solve_cmd->add_option("--out", sa.out, "write the run record here instead of stdout");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "run a suite of (benchmark, horizon, config) rows");
    bench_cmd->add_option("suite", ba.suite, "suite JSON file")->required();
    bench_cmd->add_option("--format", ba.format)->check(CLI::IsMember({"json", "csv", "text"}));
    bench_cmd->add_option("--out", ba.out);
    bench_cmd->add_option("--time-scale", ba.time_scale, "multiplier on every time limit")->check(CLI::PositiveNumber);

    VerifyArgs va;
    auto* verify_cmd = app.add_subcommand("verify", "run a correctness check on small instances");
    verify_cmd->add_option("--check", va.check)
        ->required()
        ->check(CLI::IsMember({"lossless", "admissible", "incremental", "sandwich"}));
    verify_cmd->add_flag("--all", va.all, "every bundled benchmark");
    verify_cmd->add_option("--model", va.model);
    verify_cmd->add_option("--horizon", va.horizon)->check(CLI::PositiveNumber);
    verify_cmd->add_option("--window", va.window)->check(CLI::PositiveNumber);
    verify_cmd->add_option("--seed", va.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*solve_cmd) return run_solve(sa);
        if (*bench_cmd) return run_bench(ba);
        return run_verify(va);
    } catch (const parse_error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return exit_data;
    } catch (const model_error& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return exit_data;
    } catch (const budget_error& e) {
        std::cerr << "limit reached without a result: " << e.what() << "\n";
        return exit_no_result;
    } catch (const std::bad_alloc&) {
        std::cerr << "out of memory without a result\n";
        return exit_no_result;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
