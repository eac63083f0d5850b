#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aes/aes.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + AES_CLI_PATH + std::string(" ") + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("aes_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& text)
    {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir;
};

} // namespace

TEST_F(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("dp-check --bogus 3").code, 1);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, DpCheckPassesAndIsSeeded)
{
    const auto zero = run("dp-check --trials 0");
    EXPECT_EQ(zero.code, 0);
    EXPECT_NE(zero.output.find("0/0 pass"), std::string::npos);
    const auto a = run("dp-check --trials 200 --max-elements 4 --seed 5");
    EXPECT_EQ(a.code, 0) << a.output;
    EXPECT_NE(a.output.find("200/200 pass"), std::string::npos);
    EXPECT_EQ(run("dp-check --trials 200 --max-elements 4 --seed 5").output, a.output);
    EXPECT_EQ(run("dp-check --trials 1 --max-elements 20").code, 2);
}

TEST_F(Cli, SimulateWritesOneCsvPerPolicyAndSummary)
{
    const auto cfg = write("exp.json", R"({"policy": ["aes", "egreedy", "ucb"], "n_batches": 5, "n_reps": 2,
                                          "batch_size": 50, "master_seed": 3})");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir / "out").string());
    ASSERT_EQ(r.code, 0) << r.output;
    for (const auto* p : {"aes", "egreedy", "ucb"}) {
        std::ifstream in(dir / "out" / (std::string("metrics_") + p + ".csv"));
        const auto rows = aes::read_metrics_csv(in);
        EXPECT_EQ(rows.size(), 10u);
        EXPECT_EQ(rows.front().policy, p);
    }
    const auto summary = slurp(dir / "out" / "summary.csv");
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
}

TEST_F(Cli, SimulateZeroBatchesIsVacuous)
{
    const auto cfg = write("exp.json", R"({"policy": "aes", "n_batches": 0})");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(dir / "out" / "metrics_aes.csv"), std::string(aes::kMetricsHeader) + "\n");
}

TEST_F(Cli, SimulateMissingGraphNamesThePath)
{
    const auto cfg = write("exp.json", R"({"policy": "aes", "n_batches": 1, "graph": "no_such_graph.json"})");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("no_such_graph.json"), std::string::npos) << r.output;
}

TEST_F(Cli, SimulateBadConfigIsADataError)
{
    const auto cfg = write("exp.json", R"({"policy": "aes", "n_batches": 1, "surprise": true})");
    EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "o").string()).code, 2);
    EXPECT_EQ(run("simulate --config " + (dir / "none.json").string()).code, 2);
    const auto broken = write("broken.json", "{");
    EXPECT_EQ(run("simulate --config " + broken.string()).code, 2);
}

TEST_F(Cli, DeterministicReruns)
{
    const auto cfg = write("exp.json", R"({"policy": ["aes", "mvt"], "n_batches": 4, "n_reps": 3, "batch_size": 40})");
    const auto a = run("simulate --deterministic --config " + cfg.string() + " --out " + (dir / "a").string(),
                       "AES_SEED=17");
    const auto b = run("simulate --deterministic --jobs 1 --config " + cfg.string() + " --out " + (dir / "b").string(),
                       "AES_SEED=17");
    const auto c = run("simulate --deterministic --config " + cfg.string() + " --out " + (dir / "c").string(),
                       "AES_SEED=18");
    ASSERT_EQ(a.code, 0) << a.output;
    ASSERT_EQ(b.code, 0);
    ASSERT_EQ(c.code, 0);
    for (const auto* f : {"metrics_aes.csv", "metrics_mvt.csv", "summary.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_NE(slurp(dir / "a" / "metrics_aes.csv"), slurp(dir / "c" / "metrics_aes.csv"));
    EXPECT_EQ(run("simulate --config " + cfg.string(), "AES_SEED=abc").code, 2);
}

TEST_F(Cli, GenGraphThenReplay)
{
    const auto graph = dir / "g.json";
    ASSERT_EQ(run("gen-graph --sizes 2x3x2x2x1 --constraints 3 --seed 2 --out " + graph.string()).code, 0);
    const auto g = aes::load_graph_file(graph.string());
    EXPECT_EQ(g.tree().product_size(), 24u);
    EXPECT_EQ(g.edge_count(), 2u * 3 + 3 * 2 + 1 * 2 + 3 * 1 - 3);

    const auto log = dir / "log.csv";
    ASSERT_EQ(run("gen-replay --graph " + graph.string() + " --impressions 20000 --seed 2 --out " + log.string()).code, 0);
    const auto r = run("replay --graph " + graph.string() + " --log " + log.string() +
                       " --policies aes,random --n-batches 3 --n-reps 2 --batch-size 100 --out " + (dir / "rep").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir / "rep" / "metrics_aes.csv"));
    EXPECT_TRUE(fs::exists(dir / "rep" / "summary.csv"));
    EXPECT_EQ(run("replay --log " + (dir / "missing.csv").string()).code, 2);
}

TEST_F(Cli, RawReplayLogAggregates)
{
    const auto log = dir / "raw.csv";
    ASSERT_EQ(run("gen-replay --raw --impressions 4000 --out " + log.string()).code, 0);
    const auto r = run("replay --log " + log.string() + " --policies egreedy --n-batches 2 --n-reps 1 --out " +
                       (dir / "rep").string());
    EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(Cli, SpeedTestSingleImpression)
{
    const auto r = run("speed-test --sizes 32 --impressions 1 --reps 1 --out " + (dir / "t.csv").string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto csv = slurp(dir / "t.csv");
    EXPECT_EQ(csv.rfind("policy,n_creatives,mean_time,std_time,ops_count\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST_F(Cli, SweepWritesOneRowPerPolicyAndSize)
{
    const auto out = dir / "sweep.csv";
    const auto r = run("sweep --sizes 1,32 --policies aes,egreedy --n-batches 2 --n-reps 2 --batch-size 50 --out " +
                       out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto csv = slurp(out);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
