#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <decpomdp/io.hpp>

using namespace decpomdp;

namespace {

struct CliRun {
    int code;
    std::string out;
};

CliRun cli(const std::string& args, const std::string& env = "") {
    std::string cmd = env + " '" DECPOMDP_CLI_PATH "' " + args + " 2>/dev/null";
    CliRun r{-1, {}};
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto p = std::filesystem::temp_directory_path() / ("decpomdp_cli_test_" + name);
    std::ofstream(p) << content;
    return p;
}

} // namespace

TEST(Cli, SolvePolicyModeDecTiger) {
    CliRun r = cli("solve --model dectiger.dpomdp --horizon 6 --mode policy --window 2 --heuristic mdp --r 2 "
                "--limit 1000 --format json");
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_NEAR(j["result"]["value"].get<double>(), 10.38, 0.005);
    EXPECT_EQ(j["benchmark"], "dectiger");
    EXPECT_EQ(j["mode"], "policy");
    EXPECT_TRUE(j.contains("environment"));
}

TEST(Cli, SolveUpperModeFireFighting) {
    CliRun r = cli("solve --mode upper --heuristic tr --r 5 --variant at_r1 --horizon 4 --model firefighting.dpomdp "
                "--format json");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(json::parse(r.out)["result"]["upper_bound"].get<double>(), -6.579, 0.005);
}

TEST(Cli, HorizonZeroIsAUsageError) { EXPECT_EQ(cli("solve --model dectiger --horizon 0").code, 64); }

TEST(Cli, UnknownFlagIsAUsageError) { EXPECT_EQ(cli("solve --model dectiger --horizon 2 --bogus").code, 64); }

TEST(Cli, MalformedModelIsAParseError) {
    auto p = temp_file("bad.dpomdp", "agents: 2\nstates: 2\nstart: 0.5 0.5\nT: * : 0 : 0 : 0.9\n");
    EXPECT_EQ(cli("solve --model '" + p.string() + "' --horizon 2").code, 65);
}

TEST(Cli, TimeoutWithResult) {
    CliRun r = cli("solve --model grid --horizon 40 --mode upper --heuristic tr --r 3 --time-limit 0.3 --format json");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(json::parse(r.out)["result"]["upper_bound"].is_null());
}

TEST(Cli, SeventeenSignificantDigitsInCsv) {
    CliRun r = cli("solve --model dectiger --horizon 3 --format csv");
    ASSERT_EQ(r.code, 0);
    std::stringstream row(r.out.substr(r.out.find('\n') + 1));
    std::vector<std::string> fields;
    for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
    ASSERT_GT(fields.size(), 4u);
    EXPECT_EQ(fields[4], format_number(std::stod(fields[4])));
}

TEST(Cli, PolicyFileRoundTrips) {
    auto p = std::filesystem::temp_directory_path() / "decpomdp_cli_test_policy.json";
    CliRun r = cli("solve --model dectiger --horizon 4 --format json --policy-out '" + p.string() + "'");
    ASSERT_EQ(r.code, 0);
    std::ifstream f(p);
    json pol = json::parse(f);
    ASSERT_EQ(pol["agents"].size(), 2u);
    ASSERT_EQ(pol["agents"][0].size(), 4u);
    EXPECT_EQ(pol["agents"][0][0][0]["suffix"].size(), 0u);
    DecPomdp m = load_model("dectiger");
    EXPECT_NEAR(evaluate_policy(m, policy_from_json(m, pol), 4).value,
                json::parse(r.out)["result"]["value"].get<double>(), 1e-12);
}

TEST(Cli, RecordsAreStableModuloEnvironment) {
    auto strip = [](std::string s) {
        json j = json::parse(s);
        j.erase("environment");
        j["result"].erase("wall_time");
        return j.dump();
    };
    CliRun a = cli("solve --model recycling --horizon 5 --format json");
    CliRun b = cli("solve --model recycling --horizon 5 --format json");
    EXPECT_EQ(strip(a.out), strip(b.out));
}

TEST(Cli, FixtureDirectoryOverride) {
    auto dir = std::filesystem::temp_directory_path() / "decpomdp_cli_test_fixtures";
    std::filesystem::create_directories(dir);
    std::filesystem::copy_file(std::filesystem::path(DECPOMDP_FIXTURE_DIR) / "broadcast.dpomdp", dir / "mine.dpomdp",
                               std::filesystem::copy_options::overwrite_existing);
    EXPECT_EQ(cli("solve --model mine --horizon 2", "DECPOMDP_FIXTURES='" + dir.string() + "'").code, 0);
    EXPECT_NE(cli("solve --model mine --horizon 2").code, 0);
}

TEST(Cli, EmptySuite) {
    auto p = temp_file("empty_suite.json", R"({"runs": []})");
    CliRun r = cli("bench '" + p.string() + "'");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, csv_header() + "\n");
}

TEST(Cli, SuiteWithMissingModelFailsBeforeRunning) {
    auto p = temp_file("missing_suite.json",
                       R"({"runs": [{"benchmark": "dectiger", "horizon": 3, "config": "fast-k1"},
                                    {"benchmark": "nosuchmodel", "horizon": 3, "config": "fast-k1"}]})");
    CliRun r = cli("bench '" + p.string() + "'");
    EXPECT_EQ(r.code, 65);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, SuiteGapColumn) {
    auto p = temp_file("gap_suite.json",
                       R"({"configs": {"tiny-tr": {"base": "tr-r3", "time_limit": 30}},
                           "runs": [{"benchmark": "dectiger", "horizon": 4, "config": "quality-k2"},
                                    {"benchmark": "dectiger", "horizon": 4, "config": "tiny-tr"}]})");
    CliRun r = cli("bench '" + p.string() + "' --format json");
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    ASSERT_EQ(j.size(), 2u);
    for (const auto& row : j) {
        ASSERT_FALSE(row["result"]["gap"].is_null());
        EXPECT_NEAR(row["result"]["gap"].get<double>(), 0.0, 1e-9);
    }
}

TEST(Cli, VerifyChecks) {
    EXPECT_EQ(cli("verify --check lossless --model broadcast.dpomdp --horizon 3 --window 2").code, 0);
    EXPECT_EQ(cli("verify --check admissible --model dectiger.dpomdp --horizon 3").code, 0);
    EXPECT_EQ(cli("verify --check sandwich --all --horizon 2").code, 0);
    EXPECT_EQ(cli("verify --check incremental --all --horizon 4 --window 2").code, 0);
}
