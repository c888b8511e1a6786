#include "a2v/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "a2v/error.hpp"

namespace a2v {

namespace {

constexpr int kWindow = SyncDiscriminatorImpl::kFrames;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void set_trainable(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters(true)) p.set_requires_grad(on);
}

// Parameter updates may only use gradients from active losses: any gradient
// found on a module outside the update set is a wiring bug.
void assert_no_grad(const torch::nn::Module& m, const char* name) {
  for (const auto& p : m.parameters(true)) {
    if (p.grad().defined() && p.grad().abs().sum().item<double>() != 0.0) {
      throw std::logic_error(std::string("gradient reached inactive network ") + name);
    }
  }
}

double checked(const torch::Tensor& t, const std::string& name, int step) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NonFiniteLoss, name + " = " + std::to_string(v) + " at step " + std::to_string(step));
  }
  return v;
}

nlohmann::json values_json(const std::map<std::string, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

const char* decision_name(PhaseDecision d) {
  switch (d) {
    case PhaseDecision::Continue: return "continue";
    case PhaseDecision::Advance: return "advance";
    case PhaseDecision::Stop: return "stop";
  }
  return "?";
}

}  // namespace

Models::Models(const Config& cfg) {
  torch::manual_seed(cfg.train.seed);
  gen = SpadeGenerator(cfg);
  frame = FrameDiscriminator(cfg);
  temporal = TemporalDiscriminator(cfg);
  sync = SyncDiscriminator(cfg);
  landmark = LandmarkRegressor(cfg.gen.resolution);
  extractor = make_extractor(cfg.loss);
}

void Models::export_to(TensorMap& out) const {
  export_module(*gen, "gen", out);
  export_module(*frame, "disc.frame", out);
  export_module(*temporal, "disc.temporal", out);
  export_module(*sync, "disc.sync", out);
  export_module(*landmark, "aux.landmark", out);
  export_module(*extractor, "aux.extractor", out);
}

void Models::import_from(const TensorMap& in) {
  import_module(*gen, "gen", in);
  import_module(*frame, "disc.frame", in);
  import_module(*temporal, "disc.temporal", in);
  import_module(*sync, "disc.sync", in);
  import_module(*landmark, "aux.landmark", in);
  import_module(*extractor, "aux.extractor", in);
}

struct Trainer::Optimizers {
  std::vector<std::pair<std::string, torch::nn::Module*>> modules;
  std::map<std::string, std::unique_ptr<torch::optim::Adam>> adam;
};

Trainer::Trainer(const Config& cfg, std::vector<ClipData> data)
    : cfg_(cfg), data_(std::move(data)), models_(cfg), optim_(std::make_shared<Optimizers>()) {
  cfg_.validate();
  // Single-threaded kernels keep floating-point reductions in a fixed order.
  torch::set_num_threads(1);
  if (data_.empty()) throw Error(ErrorCode::EmptyBatch, "no training clips");
  for (const auto& c : data_) {
    if (c.size() < kWindow) {
      throw Error(ErrorCode::ShortWindow, c.clip_id + " has " + std::to_string(c.size()) + " frames");
    }
  }
  state_.rng_seed = cfg_.train.seed;
  state_.active.clear();
  for (const auto& w : phase_losses(1, cfg_.loss)) state_.active.push_back(w.id);

  const auto opts = torch::optim::AdamOptions(cfg_.train.lr).betas({cfg_.train.beta1, cfg_.train.beta2});
  auto add = [&](const std::string& name, torch::nn::Module& m, torch::optim::AdamOptions o) {
    optim_->modules.emplace_back(name, &m);
    optim_->adam[name] = std::make_unique<torch::optim::Adam>(m.parameters(true), o);
  };
  add("gen", *models_.gen, opts);
  add("disc.frame", *models_.frame, opts);
  add("disc.temporal", *models_.temporal, opts);
  add("disc.sync", *models_.sync, opts);
  add("aux.landmark", *models_.landmark, torch::optim::AdamOptions(cfg_.train.landmark_lr));
}

std::unique_ptr<Trainer> Trainer::resume(const Checkpoint& ckpt, std::vector<ClipData> data) {
  auto t = std::make_unique<Trainer>(checkpoint_config(ckpt), std::move(data));
  if (!ckpt.state.contains("curriculum")) throw Error(ErrorCode::CorruptArchive, "checkpoint has no curriculum state");
  t->models_.import_from(ckpt.tensors);
  t->import_optimizers(ckpt.tensors);
  t->state_ = curriculum_from_json(ckpt.state.at("curriculum"));
  return t;
}

void Trainer::set_lr(double lr) {
  for (const auto& [name, opt] : optim_->adam) {
    if (name == "aux.landmark") continue;
    for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

void Trainer::export_optimizers(TensorMap& out) const {
  for (const auto& [name, module] : optim_->modules) {
    auto& opt = *optim_->adam.at(name);
    for (const auto& p : module->named_parameters(true)) {
      auto it = opt.state().find(p.value().unsafeGetTensorImpl());
      if (it == opt.state().end()) continue;
      const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
      const std::string base = "optim." + name + "." + p.key() + ".";
      out[base + "exp_avg"] = st.exp_avg();
      out[base + "exp_avg_sq"] = st.exp_avg_sq();
      out[base + "step"] = torch::tensor(st.step(), torch::kInt64);
    }
  }
}

void Trainer::import_optimizers(const TensorMap& in) {
  for (const auto& [name, module] : optim_->modules) {
    auto& opt = *optim_->adam.at(name);
    for (const auto& p : module->named_parameters(true)) {
      const std::string base = "optim." + name + "." + p.key() + ".";
      auto avg = in.find(base + "exp_avg");
      if (avg == in.end()) continue;
      auto sq = in.find(base + "exp_avg_sq");
      auto step = in.find(base + "step");
      if (sq == in.end() || step == in.end() || avg->second.sizes() != p.value().sizes()) {
        throw Error(ErrorCode::WeightsShapeMismatch, "incomplete optimizer state for " + base);
      }
      auto st = std::make_unique<torch::optim::AdamParamState>();
      st->step(step->second.item<std::int64_t>());
      st->exp_avg(avg->second.clone());
      st->exp_avg_sq(sq->second.clone());
      opt.state()[p.value().unsafeGetTensorImpl()] = std::move(st);
    }
  }
}

std::vector<SampleRef> Trainer::epoch_plan(int epoch) const {
  std::mt19937_64 rng(mix_seed(state_.rng_seed, static_cast<std::uint64_t>(epoch)));
  std::vector<SampleRef> plan;
  for (int c = 0; c < static_cast<int>(data_.size()); ++c) {
    for (int s = 0; s < cfg_.train.samples_per_clip; ++s) plan.push_back({c, 0, 0});
  }
  std::shuffle(plan.begin(), plan.end(), rng);
  const int min_off = cfg_.train.sync_negative_min_offset;
  for (auto& s : plan) {
    const int n = static_cast<int>(data_[static_cast<std::size_t>(s.clip)].size());
    s.target = std::uniform_int_distribution<int>(kWindow - 1, n - 1)(rng);
    const int center = s.target - kWindow / 2;
    std::vector<int> candidates;
    for (int j = 0; j < n; ++j) {
      if (std::abs(j - center) >= min_off) candidates.push_back(j);
    }
    if (candidates.empty()) {
      throw Error(ErrorCode::ShortWindow, data_[static_cast<std::size_t>(s.clip)].clip_id +
                                              " is too short for a shifted sync negative");
    }
    s.negative = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  }
  return plan;
}

TrainBatch Trainer::make_batch(const std::vector<SampleRef>& samples) const {
  if (samples.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
  std::vector<torch::Tensor> ids, frames, mfcc, lms, pos, neg;
  bool all_landmarks = true;
  for (const auto& s : samples) {
    const auto& c = data_.at(static_cast<std::size_t>(s.clip));
    const int first = s.target - kWindow + 1;
    ids.push_back(c.frames[c.identity_frame]);
    frames.push_back(c.frames.slice(0, first, s.target + 1));
    mfcc.push_back(c.mfcc.slice(0, first, s.target + 1));
    pos.push_back(c.mfcc[s.target - kWindow / 2]);
    neg.push_back(c.mfcc[s.negative]);
    if (c.has_landmarks()) {
      lms.push_back(c.landmarks.slice(0, first, s.target + 1));
    } else {
      all_landmarks = false;
    }
  }
  TrainBatch b;
  b.identity = to_unit_range(torch::stack(ids));
  b.frames = to_unit_range(torch::stack(frames));
  b.mfcc = torch::stack(mfcc);
  if (all_landmarks) b.landmarks = torch::stack(lms);
  b.sync_audio = torch::stack(pos);
  b.sync_negative = torch::stack(neg);
  return b;
}

StepRecord Trainer::train_step(const TrainBatch& batch) {
  const int phase = state_.phase;
  const auto losses = phase_losses(phase, cfg_.loss);
  if (phase == 3 && !batch.landmarks.defined()) {
    throw Error(ErrorCode::MissingLandmarks, "phase 3 needs eye landmarks for every clip in the batch");
  }
  StepRecord rec;
  rec.step = state_.step;
  rec.epoch = state_.epoch;
  rec.phase = phase;
  rec.lr = lr_schedule(cfg_.train.lr_restart_per_phase ? state_.epochs_in_phase() : state_.epoch, cfg_.train);
  set_lr(rec.lr);

  auto& m = models_;
  const bool temporal_on = phase >= 2;
  const auto b = batch.frames.size(0);
  const int t = temporal_on ? kWindow : 1;
  const auto r = batch.frames.size(-1);
  auto real_seq = batch.frames.slice(1, kWindow - t);
  auto real = real_seq.reshape({b * t, 3, r, r});
  auto mfcc = batch.mfcc.slice(1, kWindow - t).flatten(0, 1);
  auto identity = batch.identity.repeat_interleave(t, 0);
  auto labels = torch::cat({torch::ones({b}), torch::zeros({b})});

  auto fake = m.gen->forward(mfcc, identity);
  auto fake_seq = fake.view({b, t, 3, r, r});

  // Discriminator update.
  for (const auto& [name, opt] : optim_->adam) opt->zero_grad();
  {
    auto fake_d = fake.detach();
    auto d_frame = gan_loss(m.frame->forward(real, identity), m.frame->forward(fake_d, identity),
                            GanSide::Discriminator);
    auto d_total = d_frame;
    rec.values["d_frame"] = checked(d_frame, "d_frame", rec.step);
    if (temporal_on) {
      auto d_temporal = gan_loss(m.temporal->forward(real_seq), m.temporal->forward(fake_d.view({b, t, 3, r, r})),
                                 GanSide::Discriminator);
      auto v = m.sync->embed_video(real_seq);
      auto a = m.sync->embed_audio(torch::cat({batch.sync_audio, batch.sync_negative}));
      auto d_sync = contrastive_loss(torch::cat({v, v}), a, labels, cfg_.loss.margin);
      rec.values["d_temporal"] = checked(d_temporal, "d_temporal", rec.step);
      rec.values["d_sync"] = checked(d_sync, "d_sync", rec.step);
      d_total = d_total + d_temporal + d_sync;
    }
    rec.values["d_total"] = checked(d_total, "d_total", rec.step);
    d_total.backward();
    assert_no_grad(*m.gen, "gen");
    if (!temporal_on) {
      assert_no_grad(*m.temporal, "disc.temporal");
      assert_no_grad(*m.sync, "disc.sync");
    }
    optim_->adam.at("disc.frame")->step();
    if (temporal_on) {
      optim_->adam.at("disc.temporal")->step();
      optim_->adam.at("disc.sync")->step();
    }
  }

  // Generator update; discriminators act as fixed critics.
  for (const auto& [name, opt] : optim_->adam) opt->zero_grad();
  set_trainable(*m.frame, false);
  set_trainable(*m.temporal, false);
  set_trainable(*m.sync, false);
  set_trainable(*m.landmark, false);
  {
    auto fake_out = m.frame->forward(fake, identity);
    DiscriminatorOutput real_out;
    {
      torch::NoGradGuard no_grad;
      real_out = m.frame->forward(real, identity);
    }
    torch::Tensor g_total = torch::zeros({});
    for (const auto& w : losses) {
      torch::Tensor value;
      switch (w.id) {
        case LossId::GanFrame: value = gan_loss(fake_out, fake_out, GanSide::Generator); break;
        case LossId::Fm: value = feature_matching_loss(real_out.features, fake_out.features); break;
        case LossId::Pl: value = perceptual_loss(real, fake, m.extractor, 1.0); break;
        case LossId::Rl: value = reconstruction_loss(real, fake); break;
        case LossId::Tal: {
          auto out = m.temporal->forward(fake_seq);
          value = gan_loss(out, out, GanSide::Generator);
          break;
        }
        case LossId::Cl: {
          torch::Tensor a;
          {
            torch::NoGradGuard no_grad;
            a = m.sync->embed_audio(torch::cat({batch.sync_audio, batch.sync_negative}));
          }
          auto v = m.sync->embed_video(fake_seq);
          value = contrastive_loss(torch::cat({v, v}), a, labels, cfg_.loss.margin);
          break;
        }
        case LossId::Bl: {
          auto real_ear = ear_tensor(batch.landmarks.slice(1, kWindow - t).flatten(0, 1));
          value = blink_loss(real_ear, ear_tensor(m.landmark->forward(fake)));
          if (!cfg_.loss.blink_gradient) value = value.detach();
          break;
        }
      }
      rec.values[std::string(loss_name(w.id))] = checked(value, std::string(loss_name(w.id)), rec.step);
      g_total = g_total + w.weight * value;
    }
    rec.values["g_total"] = checked(g_total, "g_total", rec.step);
    g_total.backward();
    assert_no_grad(*m.frame, "disc.frame");
    assert_no_grad(*m.temporal, "disc.temporal");
    assert_no_grad(*m.sync, "disc.sync");
    assert_no_grad(*m.landmark, "aux.landmark");
    assert_no_grad(*m.extractor, "aux.extractor");
    optim_->adam.at("gen")->step();
  }
  set_trainable(*m.frame, true);
  set_trainable(*m.temporal, true);
  set_trainable(*m.sync, true);

  // Losses outside the active set are measured without gradient on the same
  // generated frames, so the full objective can be tracked across phases.
  {
    torch::NoGradGuard no_grad;
    auto full_seq = fake_seq.detach();
    if (t < kWindow) {
      auto head = m.gen->forward(batch.mfcc.slice(1, 0, kWindow - t).flatten(0, 1),
                                 batch.identity.repeat_interleave(kWindow - t, 0));
      full_seq = torch::cat({head.view({b, kWindow - t, 3, r, r}), full_seq}, 1);
    }
    auto full = full_seq.flatten(0, 1);
    auto full_real = batch.frames.flatten(0, 1);
    double objective = 0.0;
    for (const auto& w : phase_losses(3, cfg_.loss)) {
      const std::string name(loss_name(w.id));
      if (auto it = rec.values.find(name); it != rec.values.end()) {
        objective += w.weight * it->second;
        continue;
      }
      torch::Tensor value;
      switch (w.id) {
        case LossId::Rl: value = reconstruction_loss(full_real, full); break;
        case LossId::Tal: {
          auto out = m.temporal->forward(full_seq);
          value = gan_loss(out, out, GanSide::Generator);
          break;
        }
        case LossId::Cl: {
          auto a = m.sync->embed_audio(torch::cat({batch.sync_audio, batch.sync_negative}));
          auto v = m.sync->embed_video(full_seq);
          value = contrastive_loss(torch::cat({v, v}), a, labels, cfg_.loss.margin);
          break;
        }
        case LossId::Bl:
          if (!batch.landmarks.defined()) continue;
          value = blink_loss(ear_tensor(batch.landmarks.flatten(0, 1)), ear_tensor(m.landmark->forward(full)));
          break;
        default: continue;
      }
      const double v = checked(value, "monitor." + name, rec.step);
      rec.values["monitor." + name] = v;
      objective += w.weight * v;
    }
    rec.values["g_objective"] = objective;
  }

  // The landmark regressor learns from real frames until blink supervision
  // starts, then stays frozen.
  if (phase < 3 && batch.landmarks.defined()) {
    set_trainable(*m.landmark, true);
    auto& opt = *optim_->adam.at("aux.landmark");
    opt.zero_grad();
    auto target = batch.frames.select(1, kWindow - 1);
    auto lm_loss = (m.landmark->forward(target) - batch.landmarks.select(1, kWindow - 1)).abs().mean();
    rec.values["landmark"] = checked(lm_loss, "landmark", rec.step);
    lm_loss.backward();
    opt.step();
    set_trainable(*m.landmark, false);
  }
  ++state_.step;
  return rec;
}

EpochSummary Trainer::run_epoch(const std::function<void(const StepRecord&)>& on_step) {
  if (state_.finished) throw Error(ErrorCode::InvalidPhase, "training already finished");
  const auto plan = epoch_plan(state_.epoch);
  const auto bs = static_cast<std::size_t>(cfg_.train.batch_size);
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  EpochSummary summary;
  summary.phase = state_.phase;
  for (std::size_t start = 0; start < plan.size(); start += bs) {
    std::vector<SampleRef> chunk(plan.begin() + static_cast<std::ptrdiff_t>(start),
                                 plan.begin() + static_cast<std::ptrdiff_t>(std::min(plan.size(), start + bs)));
    const auto rec = train_step(make_batch(chunk));
    for (const auto& [k, v] : rec.values) {
      sums[k] += v;
      ++counts[k];
    }
    ++summary.steps;
    if (on_step) on_step(rec);
  }
  for (const auto& [k, v] : sums) summary.means[k] = v / counts[k];

  // Every known loss gets an entry per epoch so histories stay index-aligned.
  std::vector<std::string> keys{"g_total", "g_objective", "d_total", "d_frame", "d_temporal", "d_sync", "landmark"};
  for (const auto& w : phase_losses(3, cfg_.loss)) keys.emplace_back(loss_name(w.id));
  for (const auto& k : keys) {
    auto it = summary.means.find(k);
    state_.loss_history[k].push_back(it == summary.means.end() ? std::numeric_limits<double>::quiet_NaN()
                                                               : it->second);
  }
  state_.phase_of_epoch.push_back(state_.phase);
  ++state_.epoch;
  summary.epoch = state_.epoch;
  summary.decision = decide_phase(state_, cfg_.train);
  apply_decision(state_, summary.decision, cfg_.loss);
  return summary;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.fingerprint = config_fingerprint(cfg_);
  ckpt.config = to_json(cfg_);
  ckpt.state = {{"kind", "training"}, {"curriculum", to_json(state_)}};
  models_.export_to(ckpt.tensors);
  export_optimizers(ckpt.tensors);
  return ckpt;
}

std::vector<std::filesystem::path> Trainer::train(const TrainOptions& opts) {
  std::vector<std::filesystem::path> written;
  std::ofstream log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    log.open(opts.out_dir / "train_log.jsonl", std::ios::app);
    if (!log) throw Error(ErrorCode::Io, "cannot open training log in " + opts.out_dir.string());
  }
  auto emit = [&](const nlohmann::json& j) {
    if (log.is_open()) log << j.dump() << "\n" << std::flush;
  };

  int run = 0;
  while (!state_.finished && (opts.max_epochs < 0 || run < opts.max_epochs)) {
    const int phase = state_.phase;
    nlohmann::json active = nlohmann::json::array();
    for (auto id : state_.active) active.push_back(loss_name(id));
    emit({{"type", "epoch_start"}, {"epoch", state_.epoch + 1}, {"phase", phase}, {"active_losses", active}});
    EpochSummary summary;
    try {
      summary = run_epoch([&](const StepRecord& r) {
        emit({{"type", "step"},
              {"step", r.step},
              {"epoch", r.epoch + 1},
              {"phase", r.phase},
              {"lr", r.lr},
              {"losses", values_json(r.values)}});
      });
    } catch (const Error& e) {
      emit({{"type", "error"}, {"epoch", state_.epoch + 1}, {"phase", phase}, {"step", state_.step},
            {"code", to_string(e.code())}, {"message", e.what()}});
      throw;
    }
    emit({{"type", "epoch"},
          {"epoch", summary.epoch},
          {"phase", summary.phase},
          {"steps", summary.steps},
          {"active_losses", active},
          {"means", values_json(summary.means)},
          {"decision", decision_name(summary.decision)}});
    if (!opts.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.a2vc", summary.epoch);
      const auto path = opts.out_dir / name;
      save_checkpoint(to_checkpoint(), path);
      written.push_back(path);
    }
    if (opts.on_epoch) opts.on_epoch(summary);
    ++run;
  }
  return written;
}

}  // namespace a2v
