#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "levylab.hpp"

using namespace levylab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

PathBatch sample_batch() {
  auto grid = make_grid({0.0, 0.1, 0.25, 1.0 / 3.0});
  PathBatch batch{2, grid, {}};
  for (int p = 0; p < 3; ++p) {
    PathRecord record(2, grid);
    for (std::size_t i = 0; i < grid->size(); ++i) {
      Point x(2);
      x << 0.1 * p + 1.0 / 7.0 * static_cast<double>(i), -1e-300 * p + 12345.678;
      record.set(i, x);
    }
    batch.paths.push_back(record);
  }
  batch.paths[1].explode(0.2);
  return batch;
}

// A scratch directory per test, removed afterwards.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("levylab_io_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with `args`; returns the exit code and fills stdout/stderr.
  int run(const std::string& args, const std::string& env = "") {
    const std::string command = env + " \"" LEVYLAB_CLI_PATH "\" " + args + " > \"" + (dir_ / "stdout").string() +
                                "\" 2> \"" + (dir_ / "stderr").string() + "\"";
    const int status = std::system(command.c_str());
    out_ = slurp(dir_ / "stdout");
    err_ = slurp(dir_ / "stderr");
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::string out_;
  std::string err_;
};

}  // namespace

TEST(PathsCsv, RoundTripIsByteIdentical) {
  const auto batch = sample_batch();
  const std::string text = paths_csv_string(batch);
  std::istringstream in(text);
  const auto back = read_paths_csv(in);
  EXPECT_EQ(paths_csv_string(back), text);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.dim, 2u);
  EXPECT_EQ(*back.grid, *batch.grid);
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_EQ(back.paths[p].alive(i), batch.paths[p].alive(i));
      if (!batch.paths[p].alive(i)) continue;
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(back.paths[p].coord(i, j), batch.paths[p].coord(i, j));
    }
  }
  // Explosion times are only known up to the grid: the first dead grid time.
  EXPECT_EQ(back.paths[1].explosion_time(), 0.25);
}

TEST(PathsCsv, Format) {
  const auto text = paths_csv_string(sample_batch());
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "path_id,t,x1,x2,alive");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0,0,12345.678,1");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0.1,0.14285714285714285,12345.678,1");
  EXPECT_NE(text.find("1,0.25,,,0\n"), std::string::npos);
  EXPECT_NE(text.find("0,0.3333333333333333,"), std::string::npos);
}

TEST(PathsCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_paths_csv(in);
  };
  EXPECT_THROW(parse(""), ValidationError);
  EXPECT_THROW(parse("id,t,x1,alive\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n0,0,abc,1\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n0,0,1\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n0,0,1,2\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n1,0,1,1\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n0,0,1,1\n0,1,,0\n0,2,3,1\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x1,alive\n0,0,1,1\n0,1,1,1\n1,0,1,1\n"), ValidationError);
  EXPECT_THROW(parse("path_id,t,x2,alive\n0,0,1,1\n"), ValidationError);
}

TEST(ExpressionParser, PrecedenceAndAssociativity) {
  auto eval = [](const std::string& text, double x = 0.0) { return Expression::parse(text, 1)(x); };
  EXPECT_EQ(eval("1 + 2 * 3"), 7.0);
  EXPECT_EQ(eval("(1 + 2) * 3"), 9.0);
  EXPECT_EQ(eval("2 ^ 3 ^ 2"), 512.0);
  EXPECT_EQ(eval("-2 ^ 2"), -4.0);
  EXPECT_EQ(eval("2 ^ -1"), 0.5);
  EXPECT_EQ(eval("8 / 4 / 2"), 1.0);
  EXPECT_EQ(eval("10 - 4 - 3"), 3.0);
  EXPECT_EQ(eval("--3"), 3.0);
  EXPECT_EQ(eval("1.5e2 + .5"), 150.5);
}

TEST(ExpressionParser, VariablesFunctionsAndConstants) {
  Point x(3);
  x << 0.5, -2.0, 4.0;
  EXPECT_DOUBLE_EQ(Expression::parse("x1 + x2 * x3", 3)(x), -7.5);
  EXPECT_DOUBLE_EQ(Expression::parse("x + 1", 3)(x), 1.5);
  EXPECT_DOUBLE_EQ(Expression::parse("exp(log(x3))", 3)(x), 4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("sqrt(x3) + abs(x2)", 3)(x), 4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("min(x1, x2) + max(x1, x3)", 3)(x), 2.0);
  EXPECT_DOUBLE_EQ(Expression::parse("sin(pi / 2) + cos(0)", 3)(x), 2.0);
  EXPECT_DOUBLE_EQ(Expression::parse("log(e)", 3)(x), 1.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 0.2 * sin(x)", 1)(0.3), 1.0 + 0.2 * std::sin(0.3));
  const auto e = Expression::parse("  x1*x1  ", 1);
  EXPECT_EQ(e.text(), "  x1*x1  ");
  EXPECT_EQ(e.dim(), 1u);
  EXPECT_THROW(e(x), ValidationError);
}

TEST(ExpressionParser, Errors) {
  for (const char* bad : {"", "1 +", "(1", "1)", "foo(1)", "x2", "x0", "max(1)", "exp(1, 2)", "1 $ 2", "3 4"}) {
    EXPECT_THROW(Expression::parse(bad, 1), ValidationError) << bad;
  }
  try {
    Expression::parse("1 + * 2", 1);
    FAIL();
  } catch (const ValidationError& err) {
    EXPECT_NE(std::string(err.what()).find("column"), std::string::npos);
  }
}

TEST(TripletJson, ConstantBrownian) {
  const auto field = triplet_field_from_json(Json::parse(R"({"dim": 2, "gamma": [[1, 0], [0, 1]]})"));
  EXPECT_TRUE(field.is_constant());
  const auto t = field(Point::Zero(2));
  EXPECT_EQ(t.gamma(), Matrix::Identity(2, 2));
  EXPECT_EQ(t.drift(), Point::Zero(2));
  EXPECT_TRUE(t.nu().is_zero());
}

TEST(TripletJson, StableWithExpressions) {
  const auto field = triplet_field_from_json(Json::parse(
      R"j({"dim": 1, "drift": ["x"], "gamma": [[0]], "nu": {"kind": "stable", "c": 1.5, "alpha": "1 + 0.2 * sin(x)", "killing": 0.25}})j"));
  EXPECT_FALSE(field.is_constant());
  const auto t = field(point1(0.7));
  EXPECT_DOUBLE_EQ(t.drift()[0], 0.7);
  const auto* stable = t.nu().get<StableLike>();
  ASSERT_NE(stable, nullptr);
  EXPECT_DOUBLE_EQ(stable->c, 1.5);
  EXPECT_DOUBLE_EQ(stable->alpha, 1.0 + 0.2 * std::sin(0.7));
  EXPECT_DOUBLE_EQ(stable->killing, 0.25);
}

TEST(TripletJson, RelativeAtomsAndCemetery) {
  const auto field = triplet_field_from_json(Json::parse(
      R"({"dim": 1, "nu": {"kind": "atoms", "atoms": [{"jump": [2.0], "mass": 0.5}, {"cemetery": true, "mass": 0.1}]}})"));
  EXPECT_FALSE(field.is_constant());
  const auto t = field(point1(1.0));
  const auto* atoms = t.nu().get<Atoms>();
  ASSERT_NE(atoms, nullptr);
  ASSERT_EQ(atoms->atoms.size(), 2u);
  EXPECT_DOUBLE_EQ((*atoms->atoms[0].location)[0], 3.0);
  EXPECT_DOUBLE_EQ(atoms->atoms[0].mass, 0.5);
  EXPECT_FALSE(atoms->atoms[1].location.has_value());
}

TEST(TripletJson, Errors) {
  for (const char* bad : {R"({})", R"({"dim": 0})", R"({"dim": 1, "drift": [1, 2]})", R"({"dim": 1, "gamma": [1]})",
                          R"({"dim": 1, "nu": {"kind": "levy"}})", R"({"dim": 1, "nu": {"kind": "stable", "c": 1}})",
                          R"({"dim": 1, "drift": ["x3"]})", R"({"dim": 1, "gamma": [[-1]]})"}) {
    EXPECT_THROW(triplet_field_from_json(Json::parse(bad))(point1(0.0)), ValidationError) << bad;
  }
  EXPECT_THROW(compensation_from_name("chi3"), ValidationError);
}

TEST(ReportJson, Serializes) {
  DoobReport doob;
  doob.bound = 0.16;
  doob.trials = 10;
  const Json j = to_json(doob);
  EXPECT_EQ(j.at("trials"), 10);
  EXPECT_EQ(j.at("passed"), true);
  ExplosionReport ex;
  EXPECT_TRUE(to_json(ex).at("earliest_explosion").is_null());
  EXPECT_EQ(to_json(KsResult{0.25, 0.5}).dump(), R"({"p_value":0.5,"statistic":0.25})");
}

TEST_F(CliTest, SimulatePotentialExample) {
  ASSERT_EQ(run("simulate-potential --potential zero --eps 0.01 --T 1 --paths 1000 --seed 7 --out " + path("p.csv")),
            0)
      << err_;
  const auto manifest = Json::parse(out_);
  EXPECT_EQ(manifest.at("command"), "simulate-potential");
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
  EXPECT_TRUE(manifest.contains("version"));
  const auto batch = read_paths_csv_file(path("p.csv"));
  EXPECT_EQ(batch.size(), 1000u);
  EXPECT_EQ(slurp(path("p.csv")), paths_csv_string(batch));
  EXPECT_FALSE(fs::exists(path("p.csv.tmp")));
  const std::string first = slurp(path("p.csv"));
  ASSERT_EQ(run("simulate-potential --potential zero --eps 0.01 --T 1 --paths 1000 --seed 7 --out " + path("p.csv")),
            0);
  EXPECT_EQ(slurp(path("p.csv")), first);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("simulate-potential --potential zero --eps 0 --T 1 --out " + path("p.csv")), 1);
  EXPECT_NE(err_.find("eps"), std::string::npos);
  EXPECT_EQ(run("simulate-potential --no-such-flag 3 --T 1 --out " + path("p.csv")), 64);
  EXPECT_EQ(run("no-such-command"), 64);
  EXPECT_EQ(run(""), 64);
  EXPECT_EQ(run("simulate-stable --T 1 --paths 10 --c-expr '1 +' --out " + path("s.csv")), 1);
  EXPECT_EQ(run("simulate-euler --T 1 --triplet-config " + path("missing.json") + " --out " + path("e.csv")), 1);
  EXPECT_EQ(run("simulate-rwre --env levy:1 --T 1 --out " + path("rwre")), 1);
  // A steep potential pushes the step search past its cap: numerical failure.
  spit(dir_ / "steep.csv", "x,value\n-10000,100000000000\n10000,-100000000000\n");
  EXPECT_EQ(run("simulate-potential --potential " + path("steep.csv") + " --eps 0.1 --T 0.1 --paths 2 --out " +
                path("steep_out.csv")),
            2)
      << err_;
}

TEST_F(CliTest, SeedFallsBackToEnvironment) {
  ASSERT_EQ(run("diagnose-clock --trials 200", "LEVYLAB_SEED=11"), 0) << err_;
  EXPECT_EQ(Json::parse(out_).at("seed"), 11);
  const auto with_env = Json::parse(out_).at("report");
  ASSERT_EQ(run("diagnose-clock --trials 200 --seed 11"), 0);
  EXPECT_EQ(Json::parse(out_).at("report"), with_env);
  EXPECT_EQ(run("diagnose-clock --trials 200", "LEVYLAB_SEED=abc"), 1);
}

TEST_F(CliTest, ClockReportMatchesLibrary) {
  ASSERT_EQ(run("diagnose-clock --eps 0.01 --t 1 --threshold 0.5 --trials 2000 --seed 3 --threads 1"), 0) << err_;
  const auto report = Json::parse(out_).at("report");
  const auto direct = doob_bound_check(0.01, 1.0, 0.5, 2000, 3);
  EXPECT_EQ(report, to_json(direct));
  EXPECT_NEAR(report.at("bound").get<double>(), 0.1616, 1e-12);
}

TEST_F(CliTest, EulerAndPathDiagnostics) {
  spit(dir_ / "bm.json", R"({"dim": 1, "gamma": [[1]]})");
  ASSERT_EQ(run("simulate-euler --triplet-config " + path("bm.json") +
                " --eps 0.01 --T 1 --paths 500 --points 11 --seed 2 --out " + path("bm.csv")),
            0)
      << err_;
  ASSERT_EQ(run("simulate-euler --triplet-config " + path("bm.json") +
                " --eps 0.1 --T 1 --paths 500 --points 11 --seed 3 --out " + path("bm2.csv")),
            0);
  ASSERT_EQ(run("diagnose-paths --in " + path("bm.csv") + " --compare " + path("bm2.csv") + " --times 0.5 1 " +
                "--triplet-config " + path("bm.json") + " --bump-center 0 --bump-radius 2 --box-lo -10 --box-hi 10 " +
                "--out " + path("report.json")),
            0)
      << err_;
  const auto report = Json::parse(slurp(path("report.json")));
  EXPECT_EQ(report.at("paths"), 500);
  EXPECT_EQ(report.at("marginals").size(), 2u);
  EXPECT_TRUE(report.at("marginals")[1].contains("ks"));
  EXPECT_EQ(report.at("residual").at("times").size(), 2u);
  EXPECT_EQ(report.at("explosions").at("final_fraction"), 0.0);
  EXPECT_EQ(Json::parse(out_).at("outputs")[0], path("report.json"));
  EXPECT_EQ(run("diagnose-paths --in " + path("bm.csv") + " --times 0.55"), 1);
}

TEST_F(CliTest, RwreWritesPerEnvironmentFiles) {
  ASSERT_EQ(run("simulate-rwre --env bernoulli:1:1 --eps 0.1 --T 0.5 --envs 3 --paths 50 --seed 4 --out " +
                path("rwre")),
            0)
      << err_;
  for (int e = 0; e < 3; ++e) {
    const auto batch = read_paths_csv_file(path("rwre/env_" + std::to_string(e) + ".csv"));
    EXPECT_EQ(batch.size(), 50u);
  }
  const auto summary = Json::parse(slurp(path("rwre/summary.json")));
  EXPECT_EQ(summary.at("environments").size(), 3u);
  EXPECT_TRUE(summary.contains("quenched_variance"));
  EXPECT_TRUE(summary.contains("annealed_variance"));
}

TEST_F(CliTest, OperatorDiagnostics) {
  spit(dir_ / "op.json", R"({
    "limit": {"dim": 1, "gamma": [[1]], "nu": {"kind": "stable", "c": 1, "alpha": 1.2}},
    "fields": [{"dim": 1, "gamma": [[1]], "nu": {"kind": "stable", "c": 1, "alpha": 1.3}},
               {"dim": 1, "gamma": [[1]], "nu": {"kind": "stable", "c": 1, "alpha": 1.21}}],
    "box": {"lo": [-1], "hi": [1]},
    "grid_per_axis": 4,
    "hypothesis_samples": 50
  })");
  ASSERT_EQ(run("diagnose-operator --config " + path("op.json") + " --seed 1"), 0) << err_;
  const auto report = Json::parse(out_).at("report");
  ASSERT_EQ(report.at("convergence").size(), 2u);
  // One jump gap per probe; every gap shrinks as alpha approaches the limit.
  const auto& coarse = report.at("convergence")[0];
  const auto& fine = report.at("convergence")[1];
  ASSERT_EQ(coarse.at("jump_gap").size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_GT(coarse.at("jump_gap")[k].get<double>(), fine.at("jump_gap")[k].get<double>());
  EXPECT_GT(coarse.at("carre_gap")[0][0].get<double>(), fine.at("carre_gap")[0][0].get<double>());
  EXPECT_TRUE(report.at("pmp").at("passed").get<bool>());
  spit(dir_ / "broken.json", "{not json");
  EXPECT_EQ(run("diagnose-operator --config " + path("broken.json")), 1);
}
