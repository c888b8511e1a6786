#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "a2v/config.hpp"

namespace a2v {

enum class LossId { GanFrame, Fm, Pl, Rl, Cl, Tal, Bl };

std::string_view loss_name(LossId id);
std::optional<LossId> loss_from_name(std::string_view name);

struct WeightedLoss {
  LossId id;
  double weight;
};

/// Active losses of a phase with their configured weights, in a fixed order.
/// Phase 1: gan_frame, fm, pl. Phase 2 adds rl, cl, tal; phase 3 adds bl.
/// Throws InvalidPhase outside 1..3.
std::vector<WeightedLoss> phase_losses(int phase, const LossConfig& cfg);

/// Constant lr for constant_epochs, then linear decay to zero over
/// decay_epochs, zero afterwards. Throws InvalidArgument on a negative epoch.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// True iff history has at least `window` entries and, within the last
/// `window` entries, max - min of all but the oldest is at most
/// rel_tol * |mean of all of them|.
bool plateau_detect(const std::vector<double>& history, int window, double rel_tol);

/// Highest phase reachable under an ablation label: "BM" -> 1,
/// "BM+CL+TAL" -> 2, "BM+CL+TAL+BL" -> 3. Throws ConfigInvalid otherwise.
int ablation_max_phase(std::string_view label);

struct CurriculumState {
  int phase = 1;
  int epoch = 0;              // completed epochs
  int phase_start_epoch = 0;  // epoch at which the current phase began
  int step = 0;               // completed train steps
  std::vector<LossId> active{LossId::GanFrame, LossId::Fm, LossId::Pl};
  // Epoch means per loss name (plus g_total / d_total); one entry per epoch,
  // NaN for epochs in which a loss was inactive.
  std::map<std::string, std::vector<double>> loss_history;
  std::vector<int> phase_of_epoch;
  std::uint64_t rng_seed = 0;
  bool finished = false;

  int epochs_in_phase() const { return epoch - phase_start_epoch; }
};

nlohmann::json to_json(const CurriculumState& s);
CurriculumState curriculum_from_json(const nlohmann::json& j);

/// Result of the end-of-epoch check.
enum class PhaseDecision { Continue, Advance, Stop };

/// Decides what happens after `state.epoch` completed epochs. A phase ends
/// once it ran min_phase_epochs and every active loss plateaued, or after its
/// max epochs. The last reachable phase (train.max_phase) inherits the epoch
/// budget of the phases it cuts off. Training stops when the lr schedule has
/// reached zero.
PhaseDecision decide_phase(const CurriculumState& state, const TrainConfig& cfg);

/// Applies a decision: moves to the next phase or marks the run finished.
void apply_decision(CurriculumState& state, PhaseDecision d, const LossConfig& loss_cfg);

}  // namespace a2v
