// Copyright 2026 The TEL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the tel binary end to end.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "tel/io.hpp"

namespace tel {
namespace {

namespace fs = std::filesystem;

struct Result {
  int status = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TEL_BINARY) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tel_cli_" + std::string(::testing::UnitTest::GetInstance()
                                         ->current_test_info()
                                         ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(Cli, VerifySmokeRunPasses) {
  Result r = run("verify --trials 1 --max-size 4");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, VerifyCatchesInjectedSignFlip) {
  Result r = run("verify --trials 1 --max-size 4 --inject-sign-flip");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("first failing seed"), std::string::npos);
}

TEST_F(Cli, BadArgumentsExitWithOne) {
  EXPECT_EQ(run("filter --input nowhere.png --sigma 0.1 --output x.png").status, 1);
  EXPECT_EQ(run("verify --trials 0").status, 1);
  EXPECT_EQ(run("no-such-command").status, 1);
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(Cli, FilterConstantImageIsUnchanged) {
  save_image(DenseTensor<float>(3, 6, 5, 0.4f), path("in.png"));
  Result r = run("filter --input " + path("in.png") + " --sigma 0.02 --output " + path("out.png"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_image(path("out.png")), load_image(path("in.png")));
}

TEST_F(Cli, FilterHugeSigmaGivesGlobalMean) {
  DenseTensor<float> t(1, 4, 4);
  for (std::size_t i = 0; i < 16; ++i) t.data()[i] = static_cast<float>(i) / 16.0f;
  save_tensor(t, path("in.telt"));
  Result r = run("filter --input " + path("in.telt") + " --sigma 1e9 --output " +
                 path("out.telt"));
  ASSERT_EQ(r.status, 0) << r.out;
  const DenseTensor<float> out = load_tensor(path("out.telt"));
  for (float v : out.data()) EXPECT_NEAR(v, 7.5f / 16.0f, 1e-6f);
}

TEST_F(Cli, FilterWithGuideAndDistanceDump) {
  DenseTensor<float> values(2, 3, 3, 0.5f), guide(1, 3, 3, 0.0f);
  save_tensor(values, path("v.telt"));
  save_tensor(guide, path("g.telt"));
  Result r = run("filter --input " + path("v.telt") + " --guide " + path("g.telt") +
                 " --sigma 0.1 --output " + path("o.telt") + " --dump-distance " +
                 path("d.telt"));
  ASSERT_EQ(r.status, 0) << r.out;
  DenseTensor<float> d = load_tensor(path("d.telt"));
  EXPECT_EQ(d.height(), 9u);
  EXPECT_EQ(d.width(), 9u);
  for (float v : d.data()) EXPECT_EQ(v, 0.0f);
}

TEST_F(Cli, OversizeDistanceDumpIsRejected) {
  save_tensor(DenseTensor<float>(1, 65, 64, 0.0f), path("big.telt"));
  Result r = run("filter --input " + path("big.telt") + " --sigma 0.1 --output " +
                 path("o.telt") + " --dump-distance " + path("d.telt"));
  EXPECT_EQ(r.status, 1) << r.out;
  EXPECT_FALSE(fs::exists(path("d.telt")));
}

TEST_F(Cli, SynthBlocksFullRatioCopiesBytes) {
  std::vector<std::uint8_t> v(40 * 30);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % 30) < 12 ? 1 : (i / 30 < 20 ? 2 : 255);
  save_label_map(LabelMap(40, 30, 3, v), path("full.png"));
  Result r = run("synth-blocks --labels " + path("full.png") +
                 " --ratio 1.0 --num-classes 3 --output " + path("same.png"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(slurp(path("same.png")), slurp(path("full.png")));

  for (double ratio : {0.1, 0.2, 0.5}) {
    std::ostringstream args;
    args << "synth-blocks --labels " << path("full.png") << " --ratio " << ratio
         << " --num-classes 3 --output " << path("sparse.png");
    Result s = run(args.str());
    ASSERT_EQ(s.status, 0) << s.out;
    std::istringstream in(s.out.substr(s.out.find("achieved ratio") + 15));
    double achieved = 0.0;
    in >> achieved;
    EXPECT_NEAR(achieved, ratio, 0.01);
  }
  EXPECT_EQ(run("synth-blocks --labels " + path("full.png") +
                " --ratio 0 --num-classes 3 --output " + path("z.png")).status, 1);
  EXPECT_EQ(run("synth-blocks --labels " + path("full.png") +
                " --ratio 0.5 --num-classes 2 --output " + path("z.png")).status, 1);
}

TEST_F(Cli, DemoTrainWritesDeterministicMetrics) {
  const std::string common = "--seed 3 demo-train --fixture two-region --steps 20 ";
  Result a = run(common + "--metrics " + path("a.csv") + " --output " + path("a.png"));
  Result b = run(common + "--metrics " + path("b.csv") + " --output " + path("b.png"));
  ASSERT_EQ(a.status, 0) << a.out;
  ASSERT_EQ(b.status, 0) << b.out;
  const std::string csv = slurp(path("a.csv"));
  EXPECT_EQ(csv, slurp(path("b.csv")));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,L_seg,L_tree,pixel_acc,mIoU,pseudo_label_acc,prediction_acc");
  // Records at steps 0 and 10, then the final model at 20.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  LabelMap pred = load_label_map(path("a.png"), 2);
  EXPECT_EQ(pred.height(), 32u);
  EXPECT_EQ(pred.labeled_count(), 32u * 32u);
}

TEST_F(Cli, DemoTrainVariants) {
  EXPECT_EQ(run("demo-train --fixture checkerboard --steps 5 --lambda 0 --output " +
                path("c.png")).status, 0);
  EXPECT_EQ(run("demo-train --steps 5 --naive-threshold 0.9 --output " + path("n.png")).status, 0);
  EXPECT_EQ(run("demo-train --steps 5 --aggregation LH_P --delta cross_entropy --output " +
                path("p.png")).status, 0);
  EXPECT_EQ(run("demo-train --steps 5 --naive-threshold 0.3").status, 1);
  EXPECT_EQ(run("demo-train --steps 5 --delta L7").status, 1);
  EXPECT_EQ(run("demo-train --fixture " + path("missing.png")).status, 1);
}

TEST_F(Cli, BenchWritesOneRowPerSize) {
  Result r = run("bench --sizes 16,80 --channels 3 --output " + path("b.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  std::istringstream in(slurp(path("b.csv")));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "size,ms_mst,ms_fwd,ms_bwd,ms_dense_or_NA");
  EXPECT_EQ(lines[1].rfind("16,", 0), 0u);
  EXPECT_NE(lines[1].substr(lines[1].rfind(',') + 1), "NA");
  EXPECT_EQ(lines[2].substr(lines[2].rfind(',') + 1), "NA");
}

}  // namespace
}  // namespace tel
