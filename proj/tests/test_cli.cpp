#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  fs::path log = fs::temp_directory_path() / "riesz_cli_stdout.txt";
  std::string cmd = std::string(RIESZ_CLI_PATH) + " " + args + " > " + log.string() + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("riesz_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, RegimeReportsInterval) {
  auto dir = fresh_dir("regime");
  auto r = cli("regime --out " + dir.string() + " --set regime.d=2 --set regime.b=0.75 --set regime.delta=1.1 --set regime.theta=0.5");
  EXPECT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(slurp(dir / "regime.json"));
  EXPECT_EQ(j["report"]["delta_max"], 1.125);
  EXPECT_EQ(r.out.rfind("pass theta in [0.48333", 0), 0u) << r.out;
  r = cli("regime --out " + dir.string() + " --set regime.d=2 --set regime.b=0.75 --set regime.delta=1.1 --set regime.theta=0.56");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("fail", 0), 0u) << r.out;
}

TEST(Cli, SinglePointMinimizerSitsAtOrigin) {
  auto dir = fresh_dir("n1");
  auto r = cli("minimize --set model.kernel=log2d --set model.n=1 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  std::istringstream in(slurp(dir / "points.csv"));
  std::string hash, header, row;
  std::getline(in, hash);
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(hash.rfind("# manifest-hash: ", 0), 0u);
  EXPECT_EQ(header, "x0,x1");
  double x = std::stod(row.substr(0, row.find(',')));
  double y = std::stod(row.substr(row.find(',') + 1));
  EXPECT_LT(std::hypot(x, y), 1e-6);
  auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(j["manifest_hash"].get<std::string>(), hash.substr(17));
  EXPECT_EQ(j["status"], "converged");
}

TEST(Cli, SeededRunsAreByteIdentical) {
  auto a = fresh_dir("det_a");
  auto b = fresh_dir("det_b");
  auto c = fresh_dir("det_c");
  std::string args = "minimize --set model.kernel=log1d --set model.n=40 --seed 5 --out ";
  ASSERT_EQ(cli(args + a.string()).code, 0);
  ASSERT_EQ(cli(args + b.string()).code, 0);
  ASSERT_EQ(cli("minimize --set model.kernel=log1d --set model.n=40 --seed 6 --out " + c.string()).code, 0);
  EXPECT_EQ(slurp(a / "points.csv"), slurp(b / "points.csv"));
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_NE(slurp(a / "points.csv"), slurp(c / "points.csv"));
}

TEST(Cli, BadInputExitsWithTwo) {
  auto dir = fresh_dir("bad");
  EXPECT_EQ(cli("minimize --set model.kernel=bogus --out " + dir.string()).code, 2);
  EXPECT_EQ(cli("minimize --set model.n=abc --out " + dir.string()).code, 2);
  EXPECT_EQ(cli("partition --set partition.lo=0,0 --set partition.hi=1.5,4 --out " + dir.string()).code, 2);
  EXPECT_EQ(cli("scan --points /nonexistent.csv --out " + dir.string()).code, 2);
  EXPECT_NE(cli("").code, 0);
}

TEST(Cli, PartitionWritesUnitCells) {
  auto dir = fresh_dir("part");
  ASSERT_EQ(cli("partition --set partition.lo=0,0 --set partition.hi=2,3 --out " + dir.string()).code, 0);
  std::istringstream in(slurp(dir / "partition.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# manifest-hash: ", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "lo0,lo1,hi0,hi1,mass");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 6);
}
