#pragma once

#include <string>
#include <vector>

#include "a2v/audio.hpp"
#include "a2v/checkpoint.hpp"
#include "a2v/config.hpp"
#include "a2v/image.hpp"

namespace a2v {

enum class AdaptScope { AllGenerator, ModulationOnly };

struct AdaptationConfig {
  int epochs = 5;
  double lr = 0.0002;
  AdaptScope scope = AdaptScope::AllGenerator;
  int batch_size = 8;
  bool allow_untrained = false;  // accept checkpoints that never left phase 1

  /// Throws ConfigInvalid.
  void validate() const;
};

AdaptationConfig adaptation_defaults(const Config& cfg);
AdaptScope parse_scope(const std::string& s);
std::string scope_name(AdaptScope s);

struct AdaptResult {
  Checkpoint checkpoint;          // derived checkpoint holding the adapted generator
  std::vector<double> epoch_loss;  // mean perceptual loss before training, then after each epoch
  int epochs_run = 0;
};

/// Fine-tunes a copy of the checkpoint's generator so frames generated from
/// the clip's audio windows stay perceptually close to `unseen`, the only
/// pixels known for the new identity. One epoch is one pass over the windows.
/// `source` is never modified; discriminator and auxiliary tensors are copied
/// verbatim. Throws ResolutionMismatch and UntrainedCheckpoint.
AdaptResult adapt(const Checkpoint& source, const Image& unseen, const Waveform& audio,
                  const AdaptationConfig& cfg);

}  // namespace a2v
