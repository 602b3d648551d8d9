#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "persist/lab.hpp"
#include "persist/transforms.hpp"

namespace {

using namespace persist;
namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("persist_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Outcome run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + PERSIST_CLI_PATH + "' " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return o;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) o.out.append(buf, n);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndVersion) {
  EXPECT_EQ(run("--help").code, 0);
  const Outcome v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(PERSIST_VERSION), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, UaKernelJsonMatchesOracle) {
  write("g2.txt", "2 1\n1 2\n");
  write("g3.txt", "3 2\n1 2\n1 3\n");
  const Outcome o = run("kernel --kind ua --from g2.txt --to g3.txt");
  ASSERT_EQ(o.code, 0);
  const Json j = Json::parse(o.out);
  for (const char* key : {"kind", "m", "n", "value", "log_value", "oracle"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["kind"], "ua");
  EXPECT_EQ(j["m"], 2);
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["oracle"]["exact"], "3/2");
  EXPECT_NEAR(j["value"].get<double>(), 1.5, 1e-12);
  EXPECT_NEAR(j["log_value"].get<double>(), std::log(1.5), 1e-12);
}

TEST_F(Cli, ErAndPerfectMemoryKernels) {
  write("g2.txt", "2 0\n");
  write("g3.txt", "3 1\n1 3\n");
  Json er = Json::parse(run("kernel --kind er --theta 0.5 --from g2.txt --to g3.txt").out);
  EXPECT_NEAR(er["value"].get<double>(), er["oracle"]["value"].get<double>(), 1e-12);
  Json pm = Json::parse(run("kernel --kind pm --theta 0.5 --from g2.txt --to g3.txt").out);
  EXPECT_EQ(pm["oracle"]["exact"], "2");
  EXPECT_NEAR(pm["value"].get<double>(), 2.0, 1e-12);
  EXPECT_EQ(run("kernel --kind er --from g2.txt --to g3.txt").code, 2);
}

TEST_F(Cli, ExtendedKernelAndLargeGraphsSkipOracle) {
  write("g2.txt", "2 0\n");
  write("limit.txt", "window 3\n1 2 0\n");
  const Json ext = Json::parse(run("kernel --kind ua-extended --from g2.txt --limit limit.txt").out);
  EXPECT_TRUE(ext["n"].is_null());
  // ((j-1)/m)^(e_j(M) + 1 - j) at m = 2: only j = 2 contributes, (1/2)^(0 + 1 - 2) = 2.
  EXPECT_EQ(ext["oracle"]["exact"], "2");
  EXPECT_NEAR(ext["value"].get<double>(), 2.0, 1e-12);
  write("g6.txt", "6 0\n");
  const Json big = Json::parse(run("kernel --kind ua --from g2.txt --to g6.txt").out);
  EXPECT_TRUE(big["oracle"].is_null());
  EXPECT_NEAR(big["value"].get<double>(), ua_kernel(Graph(2), Graph(6)), 1e-12);
}

TEST_F(Cli, SimulateTrajectoryReplays) {
  const Outcome o = run("--seed 17 simulate --chain er-relabel --theta 0.3 --horizon 12");
  ASSERT_EQ(o.code, 0);
  std::stringstream ss(o.out);
  const Trajectory tr = read_trajectory_jsonl(ss);
  const ChainSpec spec{ChainKind::er_relabel, 0.3};
  EXPECT_EQ(tr, simulate(spec, 12, CounterRng::stream(17, 0), 17));
}

TEST_F(Cli, SimulateWritesFile) {
  ASSERT_EQ(run("simulate --chain records --horizon 20 --out traj.jsonl").code, 0);
  std::stringstream ss(read("traj.jsonl"));
  EXPECT_EQ(read_trajectory_jsonl(ss).horizon(), 20u);
  EXPECT_EQ(run("simulate --chain records --out missing-dir/traj.jsonl").code, 4);
}

TEST_F(Cli, ConfigFileIsTwinOfFlags) {
  write("sim.cfg", "# records chain\nchain = records\nhorizon = 9\nseed = 5\nsummary = true\n");
  write("sim.json", R"({"chain": "records", "horizon": 9, "seed": 5, "summary": true})");
  const Outcome a = run("--config sim.cfg simulate");
  const Outcome b = run("simulate --config=sim.json");
  const Outcome c = run("--seed 5 simulate --chain records --horizon 9 --summary");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  // Explicit flags win over the file.
  const Outcome d = run("--config sim.cfg simulate --horizon 3");
  EXPECT_EQ(std::count(d.out.begin(), d.out.end(), '\n'), 4);
  write("bad.cfg", "colour = red\n");
  EXPECT_EQ(run("--config bad.cfg simulate --chain bst").code, 2);
  EXPECT_EQ(run("--config nope.cfg simulate --chain bst").code, 4);
}

TEST_F(Cli, TransformIsolateHasNoForbiddenEdges) {
  const Outcome o = run("--seed 3 transform --isolate 2 --horizon 120");
  ASSERT_EQ(o.code, 0);
  std::stringstream lines(o.out);
  std::size_t count = 0;
  for (std::string line; std::getline(lines, line); ++count) EXPECT_TRUE(Json::parse(line)["forbidden_free"].get<bool>());
  EXPECT_EQ(count, 120u);
  std::stringstream ss(o.out);
  const Trajectory tr = read_trajectory_jsonl(ss);
  const Graph g = std::get<Graph>(tr.state(120));
  for (Vertex v = 1; v <= 120; ++v)
    if (v != 2) EXPECT_FALSE(g.has_edge(std::min<Vertex>(v, 2), std::max<Vertex>(v, 2)));
  EXPECT_EQ(tr, simulate_conditioned(ConditionedChain{IsolatedNode{2}}, 120, 3).trajectory);
}

TEST_F(Cli, TransformTargetFile) {
  write("limit.txt", "window 4\n1 2 0\n3 4 0\n2 3 1\n");
  const Outcome o = run("--seed 8 transform --target-file limit.txt --horizon 60");
  ASSERT_EQ(o.code, 0);
  std::stringstream ss(o.out);
  const Graph g = std::get<Graph>(read_trajectory_jsonl(ss).state(60));
  EXPECT_FALSE(g.has_edge(1, 2));
  EXPECT_FALSE(g.has_edge(3, 4));
  EXPECT_EQ(run("transform --horizon 5").code, 2);
  EXPECT_EQ(run("transform --isolate 1 --target-file limit.txt").code, 2);
  write("broken.txt", "1 2 7\n");
  EXPECT_EQ(run("transform --target-file broken.txt").code, 2);
}

TEST_F(Cli, SilhouetteCurves) {
  write("tree.txt", "-\n0\n");
  const Outcome b = run("silhouette --tree tree.txt --depth 2");
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(b.out, "beta_of_end,value\n0,2\n0.25,2\n0.5,1\n0.75,1\n1,1\n");
  const Outcome y = run("silhouette --tree tree.txt --depth 1 --curve Y");
  EXPECT_EQ(y.out, "beta_of_end,value\n0,0\n0.5,0.25\n1,0\n");
  const Outcome pi = run("silhouette --size 300 --source pi-left --depth 5 --curve Y --format jsonl");
  ASSERT_EQ(pi.code, 0);
  const auto tree = bst_snapshots(pi_stream(PiSide::left, 300), {300}).front();
  const SmoothedSilhouette ys(tree);
  std::stringstream lines(pi.out);
  const auto grid = end_grid(5);
  std::size_t g = 0;
  for (std::string line; std::getline(lines, line); ++g) {
    const Json j = Json::parse(line);
    EXPECT_EQ(j["beta_of_end"].get<double>(), beta_map(grid[g]));
    EXPECT_EQ(j["value"].get<double>(), ys(grid[g]));
  }
  EXPECT_EQ(g, grid.size());
  EXPECT_EQ(run("silhouette --size 10 --depth 17").code, 3);
  EXPECT_EQ(run("silhouette --size 20000 --source pi-right").code, 3);
  EXPECT_EQ(run("silhouette --size 5 --curve Z").code, 2);
}

TEST_F(Cli, ExperimentBundle) {
  write("exp.cfg", "chain = uniform-attachment\nhorizon = 30\nreplicates = 3\noutputs = summary, edge-freeze\n");
  const Outcome o = run("--config exp.cfg --out run1 experiment --window 4");
  ASSERT_EQ(o.code, 0);
  const Json manifest = Json::parse(read("run1/manifest.json"));
  EXPECT_EQ(manifest["config"]["window"], 4);
  EXPECT_EQ(manifest["config"]["replicates"], 3);
  EXPECT_EQ(manifest["reports"], (Json{"summary.csv", "edge-freeze.csv"}));
  EXPECT_EQ(manifest["oracles"]["edge-freeze.expected_never"], "entry_tail_prob");
  ASSERT_EQ(run("--config exp.cfg --out run2 experiment --window 4 --threads 3").code, 0);
  EXPECT_EQ(read("run1/summary.csv"), read("run2/summary.csv"));
  EXPECT_EQ(read("run1/edge-freeze.csv"), read("run2/edge-freeze.csv"));
}

TEST_F(Cli, ExperimentErrors) {
  EXPECT_EQ(run("experiment --horizon 0 --replicates 0 --out x").code, 2);
  EXPECT_EQ(run("experiment --chain bst --outputs edge-freeze --out x").code, 2);
  EXPECT_EQ(run("experiment --horizon 5 --out /proc/persist-none/x").code, 4);
  EXPECT_EQ(run("experiment --chain bst --horizon 5 --outputs figure2 --source pi-left --depth 17 --out x").code, 2);
}

}  // namespace
