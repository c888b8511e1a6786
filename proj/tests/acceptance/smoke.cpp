// Curriculum smoke run on the 200-clip corpus plus the measurements taken on
// its held-out clips.

#include <algorithm>
#include <chrono>
#include <numeric>

#include "a2v/losses.hpp"
#include "a2v/manifest.hpp"
#include "a2v/synthetic.hpp"
#include "a2v/wav.hpp"
#include "common.hpp"

namespace acceptance {

using a2v::ClipData;
using torch::indexing::Slice;

namespace {

constexpr double kObjectiveDrop = 0.30;
constexpr double kSyncGap = 0.10;
constexpr double kMouthCorrelation = 0.30;

double mean_score(const a2v::DiscriminatorOutput& out) {
  double s = 0.0;
  for (const auto& t : out.scores) s += t.mean().item<double>();
  return s / static_cast<double>(out.scores.size());
}

torch::Tensor identity_of(const ClipData& c) {
  return a2v::to_unit_range(c.frames[c.identity_frame]).unsqueeze(0);
}

// [N, 3, R, R] frames generated from the clip's own audio windows.
torch::Tensor generate(a2v::Models& m, const ClipData& c) {
  torch::NoGradGuard no_grad;
  const auto pyramid = a2v::build_pyramid(identity_of(c), static_cast<int>(c.frames.size(-1)));
  return m.gen->from_embedding(m.gen->encoder()->forward(c.mfcc), pyramid);
}

// Stacks windows k-4..k for k = 4..N-1 -> [N-4, 5, 3, R, R].
torch::Tensor windows_of(const torch::Tensor& frames) {
  std::vector<torch::Tensor> w;
  for (int64_t k = 4; k < frames.size(0); ++k) w.push_back(frames.slice(0, k - 4, k + 1));
  return torch::stack(w);
}

// Audio index at least 8 windows away from k - 2.
int64_t far_index(int64_t k, int64_t n) { return (k - 2 + n / 2) % n; }

struct SyncStats {
  double matched = 0.0;
  double mismatched = 0.0;
  double offset2 = 0.0;
};

SyncStats sync_stats(a2v::Models& m, const torch::Tensor& frames, const ClipData& c) {
  torch::NoGradGuard no_grad;
  const auto n = frames.size(0);
  auto v = m.sync->embed_video(windows_of(frames));
  std::vector<int64_t> match, far, off2;
  for (int64_t k = 4; k < n; ++k) {
    match.push_back(k - 2);
    far.push_back(far_index(k, n));
    off2.push_back(k);
  }
  auto audio = [&](const std::vector<int64_t>& idx) {
    return m.sync->embed_audio(c.mfcc.index_select(0, torch::tensor(idx, torch::kLong)));
  };
  return {a2v::sync_distance(v, audio(match)).mean().item<double>(),
          a2v::sync_distance(v, audio(far)).mean().item<double>(),
          a2v::sync_distance(v, audio(off2)).mean().item<double>()};
}

// Darkness of the central lower half: the open mouth is the darkest region.
std::vector<double> mouth_proxy(const torch::Tensor& frames) {
  const auto r = frames.size(-1);
  auto gray = 0.299 * frames.select(1, 0) + 0.587 * frames.select(1, 1) + 0.114 * frames.select(1, 2);
  auto region = gray.index({Slice(), Slice(r / 2, r), Slice(r / 4, 3 * r / 4)});
  auto p = (-region.mean({1, 2})).to(torch::kDouble).contiguous();
  return {p.data_ptr<double>(), p.data_ptr<double>() + p.numel()};
}

}  // namespace

SmokeRun& smoke_run() {
  static SmokeRun run = [] {
    SmokeRun r;
    r.cfg = a2v::Config{};
    r.cfg.train.max_phase_epochs = {5, 5, 5};
    // one target per clip and epoch leaves the sync network undertrained
    r.cfg.train.samples_per_clip = 3;
    r.run_dir = work_dir() / "smoke";
    const auto report = a2v::load_manifest(corpus_manifest());
    if (report.entries.size() != static_cast<std::size_t>(kCorpusClips)) {
      throw std::runtime_error("corpus has " + std::to_string(report.entries.size()) + " valid clips");
    }
    a2v::ManifestReport train, held;
    const auto split = report.entries.end() - kHeldOutClips;
    train.entries.assign(report.entries.begin(), split);
    held.entries.assign(split, report.entries.end());
    r.held_out = a2v::load_dataset(held, r.cfg);
    for (const auto& e : held.entries) r.held_out_audio.push_back(a2v::read_wav(e.audio_path));

    r.trainer = std::make_unique<a2v::Trainer>(r.cfg, a2v::load_dataset(train, r.cfg));
    a2v::TrainOptions opts;
    opts.out_dir = r.run_dir;
    opts.on_epoch = [](const a2v::EpochSummary& s) {
      std::printf("  epoch %2d phase %d  g_total %.4f  g_objective %.4f  d_total %.4f\n", s.epoch, s.phase,
                  s.means.at("g_total"), s.means.at("g_objective"), s.means.at("d_total"));
      std::fflush(stdout);
    };
    const auto t0 = std::chrono::steady_clock::now();
    r.checkpoints = r.trainer->train(opts);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome criterion4_smoke() {
  auto& run = smoke_run();
  auto& state = run.trainer->state();
  auto& m = run.trainer->models();
  Checks checks;

  // (a) completes through phase 3
  const bool reached3 = std::count(state.phase_of_epoch.begin(), state.phase_of_epoch.end(), 3) > 0;
  checks.expect("(a) run finished in phase 3", state.finished && state.phase == 3 && reached3);

  // (b) full generator objective, first epoch vs last
  const auto& obj = state.loss_history.at("g_objective");
  const double drop = 1.0 - obj.back() / obj.front();
  const auto& active = state.loss_history.at("g_total");
  std::printf("  (b) g_objective %.4f -> %.4f (drop %.1f%%); active-set g_total %.4f -> %.4f\n", obj.front(),
              obj.back(), 100 * drop, active.front(), active.back());
  checks.expect("(b) objective drop >= 30%", drop >= kObjectiveDrop);

  // (c) sync distances on generated held-out frames; (d) mouth proxy vs RMS
  double gen_match = 0, gen_far = 0, real_match = 0, real_far = 0, r_sum = 0;
  int clips = 0;
  for (std::size_t i = 0; i < run.held_out.size(); ++i) {
    const auto& c = run.held_out[i];
    const auto gen = generate(m, c);
    const auto g = sync_stats(m, gen, c);
    const auto real = sync_stats(m, a2v::to_unit_range(c.frames), c);
    gen_match += g.matched;
    gen_far += g.mismatched;
    real_match += real.matched;
    real_far += real.mismatched;
    auto rms = a2v::frame_rms(run.held_out_audio[i], run.cfg.audio.fps);
    rms.resize(static_cast<std::size_t>(c.size()));
    r_sum += pearson(mouth_proxy(gen), rms);
    ++clips;
  }
  const double n = clips;
  const double gap = (gen_far - gen_match) / n;
  const double mouth_r = r_sum / n;
  std::printf("  (c) generated: matched d %.4f, mismatched d %.4f, gap %.4f; real frames gap %.4f\n", gen_match / n,
              gen_far / n, gap, (real_far - real_match) / n);
  std::printf("  (d) mean per-clip r(mouth proxy, audio RMS) = %.4f over %d held-out clips\n", mouth_r, clips);
  checks.expect("(c) sync gap >= 0.1", gap >= kSyncGap);
  checks.expect("(d) mouth correlation > 0.3", mouth_r > kMouthCorrelation);

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%zu epochs, final phase %d; objective drop %.1f%%; sync gap %.3f; mouth r %.3f; trained in %.0f s",
                state.phase_of_epoch.size(), state.phase, 100 * drop, gap, mouth_r, run.seconds);
  return {checks.ok(), buf};
}

void post_training_examples(Checks& checks) {
  auto& run = smoke_run();
  auto& m = run.trainer->models();
  torch::NoGradGuard no_grad;

  // distinct windows embed less alike than a window with itself
  {
    const auto& c = run.held_out[0];
    auto e = torch::nn::functional::normalize(m.gen->encoder()->forward(c.mfcc),
                                              torch::nn::functional::NormalizeFuncOptions().dim(1));
    auto again = torch::nn::functional::normalize(m.gen->encoder()->forward(c.mfcc),
                                                  torch::nn::functional::NormalizeFuncOptions().dim(1));
    const double matched = (e * again).sum(1).mean().item<double>();
    auto cos = e.matmul(e.t());
    const auto n = cos.size(0);
    const double distinct = (cos.sum().item<double>() - cos.diagonal().sum().item<double>()) / (n * (n - 1));
    std::printf("    encoder cosine: matched %.4f, distinct windows %.4f\n", matched, distinct);
    checks.expect("encoder distinct-window cosine below matched", distinct < matched);
  }

  double lower = 0, upper = 0, real_score = 0, fake_score = 0, ordered = 0, shuffled = 0;
  double match = 0, off2 = 0, far = 0;
  const auto n = static_cast<double>(run.held_out.size());
  const auto silence = a2v::extract_windows(a2v::Waveform(std::vector<float>(16000, 0.0f), 16000), run.cfg.audio);
  const auto silent_mfcc = a2v::mfcc_tensor(silence[0].mfcc).unsqueeze(0);
  for (std::size_t i = 0; i < run.held_out.size(); ++i) {
    const auto& c = run.held_out[i];
    const auto pyramid = a2v::build_pyramid(identity_of(c), run.cfg.gen.resolution);
    auto rms = a2v::frame_rms(run.held_out_audio[i], run.cfg.audio.fps);
    rms.resize(static_cast<std::size_t>(c.size()));
    const auto loud = std::max_element(rms.begin(), rms.end()) - rms.begin();
    auto speech = m.gen->from_embedding(m.gen->encoder()->forward(c.mfcc.slice(0, loud, loud + 1)), pyramid);
    auto quiet = m.gen->from_embedding(m.gen->encoder()->forward(silent_mfcc), pyramid);
    const auto h = speech.size(-2);
    auto diff = (speech - quiet).abs();
    lower += diff.slice(2, h / 2).mean().item<double>();
    upper += diff.slice(2, 0, h / 2).mean().item<double>();

    const auto real = a2v::to_unit_range(c.frames);
    const auto gen = generate(m, c);
    const auto id = identity_of(c);
    real_score += mean_score(m.frame->forward(real, id));
    fake_score += mean_score(m.frame->forward(gen, id));

    const auto win = windows_of(real);
    ordered += mean_score(m.temporal->forward(win));
    shuffled += mean_score(m.temporal->forward(win.index_select(1, torch::tensor({2, 0, 4, 1, 3}, torch::kLong))));

    const auto s = sync_stats(m, real, c);
    match += s.matched;
    off2 += s.offset2;
    far += s.mismatched;
  }
  std::printf("    speech vs silence pixel change: lower half %.4f, upper half %.4f\n", lower / n, upper / n);
  std::printf("    frame D mean score: real %.4f, generated %.4f\n", real_score / n, fake_score / n);
  std::printf("    temporal D mean score: ordered %.4f, shuffled %.4f\n", ordered / n, shuffled / n);
  std::printf("    sync d on real frames: matched %.4f, 2-frame offset %.4f, mismatched %.4f\n", match / n, off2 / n,
              far / n);
  checks.expect("speech vs silence changes the lower half more", lower > upper);
  checks.expect("frame D scores real above generated", real_score > fake_score);
  checks.expect("temporal D scores ordered above shuffled", ordered > shuffled);
  checks.expect("sync matched below 2-frame offset", match < off2);
  checks.expect("sync matched below mismatched mean", match < far);

  // (5,5,5) cap, seed 7: fifteen checkpoints ending in phase 3
  checks.expect("smoke run wrote 15 checkpoints", run.checkpoints.size() == 15);
  checks.expect("smoke run final phase 3", run.trainer->state().phase == 3);
}

}  // namespace acceptance
