#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "a2v/checkpoint.hpp"
#include "a2v/config.hpp"
#include "a2v/dataset.hpp"
#include "a2v/error.hpp"
#include "a2v/trainer.hpp"

namespace acceptance {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Named boolean checks; failures are listed in the summary detail.
class Checks {
 public:
  void expect(const std::string& name, bool ok) {
    ++total_;
    if (!ok) {
      failed_.push_back(name);
      std::printf("    failed: %s\n", name.c_str());
    }
  }

  template <typename F>
  void expect_error(const std::string& name, a2v::ErrorCode code, F&& f) {
    bool ok = false;
    try {
      f();
    } catch (const a2v::Error& e) {
      ok = e.code() == code;
    } catch (...) {
    }
    expect(name, ok);
  }

  void near(const std::string& name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    if (!ok) std::printf("    %s: got %.9g want %.9g (tol %g)\n", name.c_str(), got, want, tol);
    expect(name, ok);
  }

  bool ok() const { return failed_.empty(); }
  int total() const { return total_; }
  int failed() const { return static_cast<int>(failed_.size()); }
  Outcome outcome(const std::string& what) const {
    return {ok(), std::to_string(total_ - failed()) + "/" + std::to_string(total_) + " " + what};
  }

 private:
  int total_ = 0;
  std::vector<std::string> failed_;
};

/// Scratch directory shared by every criterion of one acceptance run.
fs::path work_dir();

/// Narrow networks at the smallest valid resolution for the mechanics checks.
a2v::Config small_config();

/// In-memory synthetic clips.
std::vector<a2v::ClipData> synthetic_clips(int n, std::uint64_t seed, const a2v::Config& cfg, double seconds);

/// 200-clip synthetic corpus (64x64, 2 s clips), rendered on first use.
const fs::path& corpus_manifest();
inline constexpr int kCorpusClips = 200;
inline constexpr int kHeldOutClips = 20;

/// The curriculum smoke run on the 200-clip corpus, trained once and shared.
struct SmokeRun {
  a2v::Config cfg;
  fs::path run_dir;
  std::vector<fs::path> checkpoints;
  std::unique_ptr<a2v::Trainer> trainer;
  std::vector<a2v::ClipData> held_out;
  std::vector<a2v::Waveform> held_out_audio;
  double seconds = 0.0;
};
SmokeRun& smoke_run();

/// Worked examples that need the trained smoke-run networks.
void post_training_examples(Checks& checks);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

Outcome criterion1_examples();
Outcome criterion2_gradients();
Outcome criterion3_framing();
Outcome criterion4_smoke();
Outcome criterion5_ablation();
Outcome criterion6_fewshot();
Outcome criterion7_determinism();
Outcome criterion8_metrics();

}  // namespace acceptance
