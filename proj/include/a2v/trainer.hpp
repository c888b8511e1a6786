#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "a2v/checkpoint.hpp"
#include "a2v/config.hpp"
#include "a2v/curriculum.hpp"
#include "a2v/dataset.hpp"
#include "a2v/discriminators.hpp"
#include "a2v/generator.hpp"
#include "a2v/losses.hpp"

namespace a2v {

/// Every network of a training run. Construction seeds the torch RNG from
/// train.seed so identical configs yield identical initial weights.
struct Models {
  SpadeGenerator gen{nullptr};
  FrameDiscriminator frame{nullptr};
  TemporalDiscriminator temporal{nullptr};
  SyncDiscriminator sync{nullptr};
  LandmarkRegressor landmark{nullptr};
  FeatureExtractor extractor{nullptr};

  explicit Models(const Config& cfg);

  /// Namespaces: gen, disc.frame, disc.temporal, disc.sync, aux.landmark,
  /// aux.extractor.
  void export_to(TensorMap& out) const;
  void import_from(const TensorMap& in);
};

/// One training sample: target frame `target` of clip `clip`, and the audio
/// window used for the mismatched sync pair.
struct SampleRef {
  int clip = 0;
  int target = 0;
  int negative = 0;
};

/// Frames k-4..k of each sample with their audio windows; the sync pair uses
/// the audio window centered on frame k-2.
struct TrainBatch {
  torch::Tensor identity;       // [B, 3, R, R]
  torch::Tensor frames;         // [B, 5, 3, R, R]
  torch::Tensor mfcc;           // [B, 5, rows, n_mfcc]
  torch::Tensor landmarks;      // [B, 5, 12, 2], undefined if any clip lacks them
  torch::Tensor sync_audio;     // [B, rows, n_mfcc]
  torch::Tensor sync_negative;  // [B, rows, n_mfcc]
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  int phase = 1;
  double lr = 0.0;
  /// Unweighted active losses by name, plus g_total (weighted sum of the
  /// active losses), the discriminator terms d_frame / d_temporal / d_sync /
  /// d_total, and landmark when the regressor was updated. Inactive losses
  /// are measured without gradient as monitor.<name>; g_objective is the
  /// weighted sum over all seven losses (bl only when landmarks exist).
  std::map<std::string, double> values;
};

struct EpochSummary {
  int epoch = 0;  // 1-based index of the finished epoch
  int phase = 1;
  int steps = 0;
  std::map<std::string, double> means;
  PhaseDecision decision = PhaseDecision::Continue;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoints and train_log.jsonl; empty disables both
  int max_epochs = -1;            // stop after this many epochs in this call (-1: run to completion)
  std::function<void(const EpochSummary&)> on_epoch;
};

class Trainer {
 public:
  /// Throws ShortWindow when a clip has fewer than five frames.
  Trainer(const Config& cfg, std::vector<ClipData> data);

  /// Restores networks, optimizer moments and curriculum state.
  static std::unique_ptr<Trainer> resume(const Checkpoint& ckpt, std::vector<ClipData> data);

  /// Sample order of an epoch; a pure function of (seed, epoch).
  std::vector<SampleRef> epoch_plan(int epoch) const;
  TrainBatch make_batch(const std::vector<SampleRef>& samples) const;

  /// One discriminator update (all active discriminators) followed by one
  /// generator update. Throws MissingLandmarks in phase 3 without landmarks,
  /// NonFiniteLoss on a NaN/inf loss.
  StepRecord train_step(const TrainBatch& batch);

  EpochSummary run_epoch(const std::function<void(const StepRecord&)>& on_step = {});

  /// Runs epochs until the curriculum finishes, writing ckpt_epoch_NNN.a2vc
  /// after every epoch. Returns the checkpoint paths written by this call.
  std::vector<std::filesystem::path> train(const TrainOptions& opts);

  Checkpoint to_checkpoint() const;

  const Config& config() const noexcept { return cfg_; }
  Models& models() noexcept { return models_; }
  CurriculumState& state() noexcept { return state_; }
  const CurriculumState& state() const noexcept { return state_; }
  const std::vector<ClipData>& data() const noexcept { return data_; }

 private:
  struct Optimizers;

  void set_lr(double lr);
  void import_optimizers(const TensorMap& in);
  void export_optimizers(TensorMap& out) const;

  Config cfg_;
  std::vector<ClipData> data_;
  Models models_;
  CurriculumState state_;
  std::shared_ptr<Optimizers> optim_;
};

}  // namespace a2v
