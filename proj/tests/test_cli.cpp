#include <cstdlib>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "slidesearch/csv.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(SLIDESEARCH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  slidesearch::testing::TempDir dir("cli_codes");
  const std::string d = dir.path().string();
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("synth --sep -1 --out " + d), 2);
  EXPECT_EQ(run("run --config " + d + "/missing.conf"), 2);
  EXPECT_EQ(run("run --set nonsense=1 --set manifest=x.csv"), 2);
  EXPECT_EQ(run("cohort --manifest " + d + "/missing.csv --out " + d), 3);
  std::ofstream(dir / "bad.csv") << "slide_id,patient_id\nx,y\n";
  EXPECT_EQ(run("cohort --manifest " + d + "/bad.csv --out " + d), 3);
}

TEST(Cli, StagedWorkflowMatchesRun) {
  slidesearch::testing::TempDir dir("cli_flow");
  const std::string d = dir.path().string();
  ASSERT_EQ(run("synth --patients 5 --patches 25 --sep 6 --seed 3 --out " + d + "/data"), 0);
  const std::string manifest = d + "/data/manifest.csv";
  ASSERT_EQ(run("cohort --manifest " + manifest + " --folds 3 --seed 1 --out " + d + "/cohort"), 0);
  EXPECT_TRUE(fs::exists(dir / "cohort/folds.csv"));
  EXPECT_EQ(slidesearch::csv::read_table(dir / "cohort/cohort.csv").rows.size(), 30u);

  ASSERT_EQ(run("mosaic --manifest " + manifest + " --rate 0.2 --seed 3 --out " + d + "/mosaic"), 0);
  ASSERT_EQ(run("index build --manifest " + manifest + " --mosaic " + d + "/mosaic --out " + d +
                "/i.bob"),
            0);
  ASSERT_EQ(run("index search --index " + d + "/i.bob --all --n 3 --out " + d + "/bob.csv"), 0);
  ASSERT_EQ(run("vsearch --manifest " + manifest + " --model mean --n 3 --out " + d + "/vec.csv"), 0);
  EXPECT_EQ(run("index search --index " + d + "/i.bob --query nope --n 3"), 3);

  ASSERT_EQ(run("evaluate --results " + d + "/bob.csv --results " + d + "/vec.csv --manifest " +
                manifest + " --n 1,3 --out " + d + "/eval"),
            0);
  for (const char* f : {"per_organ.csv", "per_diagnosis.csv", "summary.csv", "wins.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "eval" / f)) << f;
  }
  const auto summary = slidesearch::csv::read_table(dir / "eval/summary.csv");
  EXPECT_EQ(summary.rows.size(), 4u);  // 2 result files x 2 n values

  const auto per_organ = slidesearch::csv::read_table(dir / "eval/per_organ.csv");
  const std::string first_model = per_organ.rows.at(0).at(per_organ.column("model"));
  EXPECT_EQ(run("stats ttest --scores " + d + "/eval/per_organ.csv --baseline " + first_model +
                " --out " + d + "/t.csv"),
            0);
  EXPECT_TRUE(fs::exists(dir / "t.csv"));
  EXPECT_EQ(run("stats gmm --scatter " + d + "/eval/per_diagnosis.csv --out " + d + "/g.csv"), 0);
  EXPECT_TRUE(fs::exists(dir / "g.csv"));

  {
    std::ofstream conf(dir / "run.conf");
    conf << "manifest = " << manifest << "\nout = " << d << "/run\nvector_models = mean\n"
         << "barcode_rates = 0.2\nseed = 3\n";
  }
  ASSERT_EQ(run("run --config " + d + "/run.conf --set n=1"), 0);
  const auto run_summary = slidesearch::csv::read_table(dir / "run/summary.csv");
  EXPECT_EQ(run_summary.rows.size(), 2u);
}

}  // namespace
