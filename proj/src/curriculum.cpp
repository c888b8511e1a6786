#include "a2v/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "a2v/error.hpp"

namespace a2v {

namespace {

constexpr std::array<std::string_view, 7> kNames{"gan_frame", "fm", "pl", "rl", "cl", "tal", "bl"};

double weight_of(LossId id, const LossConfig& c) {
  switch (id) {
    case LossId::GanFrame: return c.gan;
    case LossId::Fm: return c.fm;
    case LossId::Pl: return c.pl;
    case LossId::Rl: return c.rl;
    case LossId::Cl: return c.cl;
    case LossId::Tal: return c.tal;
    case LossId::Bl: return c.bl;
  }
  return 0.0;
}

std::vector<double> tail_in_phase(const std::vector<double>& h, const CurriculumState& s) {
  const auto begin = static_cast<std::size_t>(std::clamp(s.phase_start_epoch, 0, static_cast<int>(h.size())));
  return {h.begin() + static_cast<std::ptrdiff_t>(begin), h.end()};
}

}  // namespace

std::string_view loss_name(LossId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<LossId> loss_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<LossId>(i);
  }
  return std::nullopt;
}

std::vector<WeightedLoss> phase_losses(int phase, const LossConfig& cfg) {
  if (phase < 1 || phase > 3) throw Error(ErrorCode::InvalidPhase, "phase " + std::to_string(phase));
  std::vector<LossId> ids{LossId::GanFrame, LossId::Fm, LossId::Pl};
  if (phase >= 2) ids.insert(ids.end(), {LossId::Rl, LossId::Cl, LossId::Tal});
  if (phase >= 3) ids.push_back(LossId::Bl);
  std::vector<WeightedLoss> out;
  for (auto id : ids) out.push_back({id, weight_of(id, cfg)});
  return out;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw Error(ErrorCode::InvalidArgument, "negative epoch");
  if (epoch < cfg.constant_epochs) return cfg.lr;
  if (epoch >= cfg.constant_epochs + cfg.decay_epochs) return 0.0;
  return cfg.lr * (1.0 - static_cast<double>(epoch - cfg.constant_epochs) / cfg.decay_epochs);
}

bool plateau_detect(const std::vector<double>& history, int window, double rel_tol) {
  if (window < 1 || static_cast<int>(history.size()) < window) return false;
  const auto first = history.end() - window;
  // The window's oldest entry only anchors the mean; the spread is taken over
  // the values the loss settled to after it.
  const auto settled = window > 1 ? first + 1 : first;
  const auto [lo, hi] = std::minmax_element(settled, history.end());
  const double mean = std::accumulate(first, history.end(), 0.0) / window;
  return *hi - *lo <= rel_tol * std::abs(mean);
}

int ablation_max_phase(std::string_view label) {
  if (label == "BM") return 1;
  if (label == "BM+CL+TAL") return 2;
  if (label == "BM+CL+TAL+BL") return 3;
  throw Error(ErrorCode::ConfigInvalid, "unknown ablation '" + std::string(label) + "'");
}

nlohmann::json to_json(const CurriculumState& s) {
  nlohmann::json active = nlohmann::json::array();
  for (auto id : s.active) active.push_back(loss_name(id));
  nlohmann::json history = nlohmann::json::object();
  for (const auto& [name, values] : s.loss_history) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : values) {
      if (std::isfinite(v)) {
        arr.push_back(v);
      } else {
        arr.push_back(nullptr);
      }
    }
    history[name] = arr;
  }
  return {{"phase", s.phase},
          {"epoch", s.epoch},
          {"phase_start_epoch", s.phase_start_epoch},
          {"step", s.step},
          {"active_losses", active},
          {"loss_history", history},
          {"phase_of_epoch", s.phase_of_epoch},
          {"rng_seed", s.rng_seed},
          {"finished", s.finished}};
}

CurriculumState curriculum_from_json(const nlohmann::json& j) {
  CurriculumState s;
  try {
    s.phase = j.at("phase").get<int>();
    s.epoch = j.at("epoch").get<int>();
    s.phase_start_epoch = j.at("phase_start_epoch").get<int>();
    s.step = j.at("step").get<int>();
    s.active.clear();
    for (const auto& name : j.at("active_losses")) {
      auto id = loss_from_name(name.get<std::string>());
      if (!id) throw Error(ErrorCode::CorruptArchive, "unknown loss " + name.get<std::string>());
      s.active.push_back(*id);
    }
    for (const auto& [name, arr] : j.at("loss_history").items()) {
      auto& dst = s.loss_history[name];
      for (const auto& v : arr) dst.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    s.phase_of_epoch = j.at("phase_of_epoch").get<std::vector<int>>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.finished = j.at("finished").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptArchive, std::string("curriculum state: ") + e.what());
  }
  if (s.phase < 1 || s.phase > 3) throw Error(ErrorCode::InvalidPhase, "phase " + std::to_string(s.phase));
  return s;
}

PhaseDecision decide_phase(const CurriculumState& state, const TrainConfig& cfg) {
  if (lr_schedule(state.epoch, cfg) == 0.0) return PhaseDecision::Stop;
  const int last = std::min(cfg.max_phase, 3);
  const int done = state.epochs_in_phase();
  int budget = cfg.max_phase_epochs[static_cast<std::size_t>(state.phase - 1)];
  if (state.phase == last) {
    for (int p = state.phase + 1; p <= 3; ++p) budget += cfg.max_phase_epochs[static_cast<std::size_t>(p - 1)];
  }

  bool plateau = true;
  for (auto id : state.active) {
    auto it = state.loss_history.find(std::string(loss_name(id)));
    if (it == state.loss_history.end() ||
        !plateau_detect(tail_in_phase(it->second, state), cfg.plateau_window, cfg.plateau_rel_tol)) {
      plateau = false;
      break;
    }
  }
  const bool phase_done = (done >= cfg.min_phase_epochs && plateau) || done >= budget;
  if (!phase_done) return PhaseDecision::Continue;
  return state.phase < last ? PhaseDecision::Advance : PhaseDecision::Stop;
}

void apply_decision(CurriculumState& state, PhaseDecision d, const LossConfig& loss_cfg) {
  if (d == PhaseDecision::Stop) {
    state.finished = true;
  } else if (d == PhaseDecision::Advance) {
    ++state.phase;
    state.phase_start_epoch = state.epoch;
    state.active.clear();
    for (const auto& w : phase_losses(state.phase, loss_cfg)) state.active.push_back(w.id);
  }
}

}  // namespace a2v
