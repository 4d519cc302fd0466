#include "fcla/cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fcla;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args)
{
  args.insert(args.begin(), "fcla_sim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name)
{
  return (std::filesystem::temp_directory_path() / ("fcla_cli_" + name)).string();
}

std::string slurp(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::size_t lines(const std::string& s)
{
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST(Cli, HelpAndBadArguments)
{
  EXPECT_EQ(call({"--help"}).code, 0);
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"bogus"}).code, 2);
  EXPECT_EQ(call({"sweep-power", "--nope"}).code, 2);
  EXPECT_EQ(call({"sweep-power", "--trials", "0"}).code, 2);
  EXPECT_EQ(call({"sweep-power", "--grid", "1:0:2"}).code, 2);
}

TEST(Cli, Selftest)
{
  const Outcome r = call({"selftest"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(lines(r.out), 12u);
}

TEST(Cli, AuditExitCodes)
{
  const Scenario s = sample_scenario(5, SamplingParams{});
  const Placement p = initial_placement(s.config);
  BcdOptions o;
  o.max_outer_iters = 2;
  const BcdResult r = run(s, p, o);

  const std::string good = tmp("good.txt");
  io::save_solution(good, s, r.placement, r.beams);
  const Outcome a = call({"audit", good});
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("status = feasible"), std::string::npos);

  BeamSolution loud = r.beams;
  loud.W *= 2.0;
  const std::string bad = tmp("bad.txt");
  io::save_solution(bad, s, r.placement, loud);
  const Outcome b = call({"audit", bad});
  EXPECT_EQ(b.code, 1);
  EXPECT_NE(b.out.find("status = infeasible"), std::string::npos);

  EXPECT_EQ(call({"audit", tmp("missing.txt")}).code, 2);
  std::ofstream(tmp("garbage.txt")) << "this is not a solution\n";
  EXPECT_EQ(call({"audit", tmp("garbage.txt")}).code, 2);
  for (const auto& f : {good, bad, tmp("garbage.txt")}) std::remove(f.c_str());
}

TEST(Cli, SweepPowerRowsToStdout)
{
  const Outcome r = call({"sweep-power", "--grid", "0,4", "--trials", "2", "--max-iters", "2", "--schemes", "FPA,FCLA_phi"});
  ASSERT_EQ(r.code, 0) << r.err;
  // header + 2 grid x 2 trials x 2 schemes, then header + 2 x 2 aggregates
  EXPECT_EQ(lines(r.out), 1u + 8u + 1u + 4u);
  EXPECT_EQ(r.out.rfind("experiment,", 0), 0u);
}

TEST(Cli, FilesAreByteIdenticalAcrossRuns)
{
  const std::string a = tmp("a.csv"), b = tmp("b.csv");
  const std::vector<std::string> common = {"sweep-region", "--grid", "2,3", "--trials", "2", "--max-iters", "2",
                                           "--gamma-db", "-10,-5"};
  auto with = [&](const std::string& out) {
    auto v = common;
    v.push_back("--out");
    v.push_back(out);
    return v;
  };
  ASSERT_EQ(call(with(a)).code, 0);
  ASSERT_EQ(call(with(b)).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(aggregate_path(a)), slurp(aggregate_path(b)));
  EXPECT_FALSE(slurp(a).empty());
  const io::KeyValueFile meta = io::KeyValueFile::load(a + ".meta");
  EXPECT_EQ(meta.raw("params.Gamma_db"), "-10,-5");
  for (const auto& f : {a, b, aggregate_path(a), aggregate_path(b), a + ".meta", b + ".meta"}) std::remove(f.c_str());
}

TEST(Cli, ConfigFile)
{
  const std::string cfg = tmp("cfg.txt");
  std::ofstream(cfg) << "grid = 0\ntrials = 1\nmax_iters = 1\nschemes = FPA\n";
  const Outcome r = call({"sweep-power", "--config", cfg});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out), 1u + 1u + 1u + 1u);
  std::ofstream(cfg) << "grid = 0\nunknown_key = 3\n";
  EXPECT_EQ(call({"sweep-power", "--config", cfg}).code, 2);
  std::remove(cfg.c_str());
}
