#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "a2v/checkpoint.hpp"
#include "a2v/config.hpp"
#include "test_util.hpp"

using a2v::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(A2V_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  TempDir dir("cli_codes");
  EXPECT_EQ(run("print-config"), 0);
  EXPECT_EQ(run("train --out x"), 1);  // missing --manifest
  std::ofstream(dir / "bad.json") << "{\"gen\": {\"resolution\": 48}}";
  EXPECT_EQ(run("print-config --config " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(run("inspect --ckpt " + (dir / "missing.a2vc").string()), 1);
  std::ofstream(dir / "junk.a2vc") << "not a checkpoint";
  EXPECT_EQ(run("inspect --ckpt " + (dir / "junk.a2vc").string()), 2);
}

TEST(Cli, EndToEnd) {
  TempDir dir("cli_e2e");
  const auto d = dir.path().string();
  ASSERT_EQ(run("synth-data --n 3 --seed 4 --out " + d + "/corpus"), 0);

  auto cfg = a2v::testing::tiny_config();
  a2v::save_config(cfg, dir / "cfg.json");
  ASSERT_EQ(run("train --config " + d + "/cfg.json --manifest " + d + "/corpus/manifest.jsonl --out " + d +
                "/run --ablation BM+CL+TAL"),
            0);
  ASSERT_TRUE(fs::exists(dir / "run" / "ckpt_epoch_002.a2vc"));
  EXPECT_FALSE(fs::exists(dir / "run" / "ckpt_epoch_004.a2vc"));
  const auto ckpt = d + "/run/ckpt_epoch_002.a2vc";
  EXPECT_EQ(a2v::load_checkpoint(ckpt).state["curriculum"]["phase"], 2);
  EXPECT_EQ(run("inspect --ckpt " + ckpt), 0);

  const auto clip = d + "/corpus/clip_00000";
  EXPECT_EQ(run("generate --ckpt " + ckpt + " --image " + clip + "/frames/000000.ppm --audio " + clip +
                "/audio.wav --out " + d + "/gen/c0"),
            0);
  EXPECT_TRUE(fs::exists(dir / "gen" / "c0" / "video.json"));
  EXPECT_EQ(run("adapt --ckpt " + ckpt + " --image " + clip + "/frames/000000.ppm --audio " + clip +
                "/audio.wav --epochs 1 --out " + d + "/adapted.a2vc"),
            0);
  EXPECT_EQ(run("generate --ckpt " + d + "/adapted.a2vc --image " + clip + "/frames/000000.ppm --audio " + clip +
                "/audio.wav --out " + d + "/gen_adapted/c0"),
            0);

  fs::create_directories(dir / "ref");
  fs::copy(clip, dir / "ref" / "c0", fs::copy_options::recursive);
  EXPECT_EQ(run("evaluate --generated " + d + "/gen --reference " + d + "/ref --report " + d + "/report.jsonl --ckpt " +
                ckpt),
            0);
  std::ifstream report(dir / "report.jsonl");
  std::string line;
  int clips = 0;
  while (std::getline(report, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") == "clip") ++clips;
  }
  EXPECT_EQ(clips, 1);
}
