#include "gddm/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gddm;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GDDM_CONFIG_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("gddm_test_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI and returns its exit status; stdout and stderr go to `log`.
    int run(const std::string& args)
    {
        const std::string cmd = std::string(GDDM_CLI_PATH) + " " + args + " > " +
                                (dir_ / "log").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string log() const { return slurp(dir_ / "log"); }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path write(const std::string& name, const Json& j) const
    {
        std::ofstream(dir_ / name) << j.dump(2);
        return dir_ / name;
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    fs::path dir_;
};

// Single-fixation trials keep likelihood evaluation cheap.
Json small_dataset(int n)
{
    return {{"simulate",
             {{"model", "addm"},
              {"params", {{"eta", 0.7}, {"kappa", 0.5}, {"a", 2.1}, {"b", 0.3}, {"x0", -0.2}}},
              {"fixations", {{"shape", 2.0}, {"rate", 0.01}}},
              {"n_trials", n},
              {"dt", 1e-3}}}};
}

}  // namespace

TEST_F(Cli, HelpExitsZero)
{
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(log().find("density"), std::string::npos);
    EXPECT_EQ(run("density --help"), 0);
}

TEST_F(Cli, BadInputsExitWithTwo)
{
    const fs::path good = kConfigs / "example_5_1.json";
    Json j = read_json_file(good);
    j["schedule"]["colour"] = "red";
    EXPECT_EQ(run("density " + write("bad.json", j).string() + " -o " + path("o.csv").string()), 2);
    EXPECT_NE(log().find("unknown key 'colour'"), std::string::npos) << log();

    std::ofstream(path("broken.json")) << "{\"model\": \"schedule\",\n \"schedule\": }";
    EXPECT_EQ(run("density " + path("broken.json").string() + " -o " + path("o.csv").string()), 2);
    EXPECT_NE(log().find("line 2"), std::string::npos) << log();

    EXPECT_EQ(run("density /nonexistent.json -o " + path("o.csv").string()), 2);
    EXPECT_EQ(run("density " + good.string() + " -o " + path("o.csv").string() + " --quad-order 0"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_FALSE(fs::exists(path("o.csv")));
}

TEST_F(Cli, DensityExportConservesMass)
{
    const fs::path out = path("density.csv");
    ASSERT_EQ(run("density " + (kConfigs / "example_5_1.json").string() + " -o " + out.string()), 0)
        << log();
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,f_upper,f_lower");
    std::vector<double> t{0.0}, fu{0.0}, fl{0.0};
    double q = -1.0;
    while (std::getline(in, line)) {
        if (line.rfind("# npp,", 0) == 0) {
            q = std::stod(line.substr(6));
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        std::getline(row, a, ',');
        std::getline(row, b, ',');
        std::getline(row, c, ',');
        t.push_back(std::stod(a));
        fu.push_back(std::stod(b));
        fl.push_back(std::stod(c));
    }
    ASSERT_EQ(t.size(), 2049u);  // 2048 grid rows plus the origin
    EXPECT_GE(q, 0.0);
    double mass = q;
    for (std::size_t i = 1; i < t.size(); ++i)
        mass += 0.5 * (t[i] - t[i - 1]) * (fu[i] + fu[i - 1] + fl[i] + fl[i - 1]);
    EXPECT_NEAR(mass, 1.0, 1e-4);

    const Json manifest = read_json_file(path("density.csv.manifest.json"));
    EXPECT_EQ(manifest.at("command"), "density");
    EXPECT_EQ(manifest.at("settings").at("engine").at("interior_order"), 30);
}

TEST_F(Cli, DryRunWritesNothing)
{
    EXPECT_EQ(run("--dry-run density " + (kConfigs / "example_5_3.json").string() + " -o " +
                  path("d.csv").string()),
              0)
        << log();
    EXPECT_FALSE(fs::exists(path("d.csv")));
    EXPECT_FALSE(fs::exists(path("d.csv.manifest.json")));
}

TEST_F(Cli, SimulatedDatasetRoundTripsThroughLoglik)
{
    Json sim = small_dataset(50)["simulate"];
    const fs::path trials = path("trials.csv");
    ASSERT_EQ(run("--seed 3 simulate " + write("sim.json", sim).string() + " -o " + trials.string()),
              0)
        << log();
    ASSERT_TRUE(fs::exists(path("trials.json")));

    const Json from_file = {{"data", {{"trials", "trials.csv"}, {"sidecar", "trials.json"}}}};
    ASSERT_EQ(run("--threads 1 loglik " + write("ll.json", from_file).string() + " -o " +
                  path("ll.out.json").string() + " --compare-threads 2"),
              0)
        << log();
    const Json out = read_json_file(path("ll.out.json"));
    EXPECT_EQ(out.at("n_trials"), 50);
    EXPECT_LT(out.at("comparison").at("abs_difference").get<double>(), 1e-10);

    const Json inline_data = {{"data", small_dataset(50)}};
    ASSERT_EQ(run("--seed 3 loglik " + write("ll2.json", inline_data).string() + " -o " +
                  path("ll2.out.json").string()),
              0)
        << log();
    EXPECT_EQ(read_json_file(path("ll2.out.json")).at("loglik"), out.at("loglik"));
}

TEST_F(Cli, FitResumedFromItsOwnOutputStops)
{
    const Json cfg = {{"data", small_dataset(300)},
                      {"init", {{"eta", 0.6}, {"kappa", 0.6}, {"a", 2.0}, {"b", 0.2}, {"x0", -0.1}}}};
    const fs::path config = write("fit.json", cfg);
    ASSERT_EQ(run("--seed 5 fit " + config.string() + " -o " + path("fit1.json").string()), 0) << log();
    const Json first = read_json_file(path("fit1.json"));
    EXPECT_TRUE(first.at("converged").get<bool>());
    ASSERT_EQ(run("--seed 5 fit " + config.string() + " -o " + path("fit2.json").string() +
                  " --init-from " + path("fit1.json").string()),
              0)
        << log();
    const Json second = read_json_file(path("fit2.json"));
    EXPECT_LE(second.at("iterations").get<int>(), 2);
    EXPECT_NEAR(second.at("loglik").get<double>(), first.at("loglik").get<double>(), 1e-6);
}

TEST_F(Cli, KsReportHasTheStatistic)
{
    const fs::path out = path("ks.json");
    ASSERT_EQ(run("--seed 2 kstest " + (kConfigs / "example_5_1.json").string() + " -o " +
                  out.string() + " --paths 2000 --dt 1e-3"),
              0)
        << log();
    const Json r = read_json_file(out);
    EXPECT_EQ(r.at("n").get<int>() + r.at("excluded_non_responses").get<int>(), 2000);
    EXPECT_TRUE(r.at("signed_time").get<bool>());
    EXPECT_GE(r.at("p_value").get<double>(), 0.0);
    EXPECT_LE(r.at("p_value").get<double>(), 1.0);
}

TEST_F(Cli, McmcWritesAChain)
{
    const Json cfg = {{"data", small_dataset(100)},
                      {"free", {"kappa"}},
                      {"n_burn", 10},
                      {"n_draws", 25},
                      {"proposal_scale", {{"kappa", 0.02}}}};
    ASSERT_EQ(run("mcmc " + write("mcmc.json", cfg).string() + " -o " + path("chain.csv").string()),
              0)
        << log();
    std::ifstream in(path("chain.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "draw,eta,kappa,a,b,x0,loglik");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++rows;
    EXPECT_EQ(rows, 25);
}
