// Command-line front end: synth-data, train, generate, adapt, evaluate,
// inspect, print-config.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "a2v/checkpoint.hpp"
#include "a2v/config.hpp"
#include "a2v/curriculum.hpp"
#include "a2v/dataset.hpp"
#include "a2v/error.hpp"
#include "a2v/fewshot.hpp"
#include "a2v/generator.hpp"
#include "a2v/image.hpp"
#include "a2v/manifest.hpp"
#include "a2v/metrics.hpp"
#include "a2v/synthetic.hpp"
#include "a2v/trainer.hpp"
#include "a2v/video.hpp"
#include "a2v/wav.hpp"

namespace fs = std::filesystem;
using a2v::Error;
using a2v::ErrorCode;

namespace {

a2v::Config config_or_default(const std::string& path) {
  a2v::Config cfg = path.empty() ? a2v::Config{} : a2v::load_config(path);
  cfg.validate();
  return cfg;
}

struct ClipFrames {
  std::string id;
  std::vector<fs::path> files;
  fs::path dir;
};

// A directory of frames is one clip; otherwise each subdirectory holding
// frames (directly or under frames/) is a clip.
std::map<std::string, ClipFrames> discover_clips(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::MissingFile, root.string());
  std::map<std::string, ClipFrames> out;
  auto direct = a2v::list_frames(root);
  if (!direct.empty()) {
    out[root.filename().string()] = {root.filename().string(), direct, root};
    return out;
  }
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    auto files = a2v::list_frames(entry.path() / "frames");
    if (files.empty()) files = a2v::list_frames(entry.path());
    if (files.empty()) continue;
    const auto id = entry.path().filename().string();
    out[id] = {id, files, entry.path()};
  }
  if (out.empty()) throw Error(ErrorCode::MissingFile, "no frames under " + root.string());
  return out;
}

std::vector<a2v::Image> read_all(const std::vector<fs::path>& files) {
  std::vector<a2v::Image> out;
  for (const auto& f : files) out.push_back(a2v::read_pnm(f));
  return out;
}

int cmd_synth(int n, std::uint64_t seed, const std::string& out, int resolution) {
  a2v::SyntheticOptions opts;
  opts.resolution = resolution;
  const auto manifest = a2v::make_synthetic_corpus(n, seed, out, opts);
  std::cout << manifest.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path, const std::string& out,
              const std::string& ablation, const std::string& resume, int max_epochs) {
  a2v::Config cfg = config_or_default(config_path);
  if (!ablation.empty()) cfg.train.max_phase = a2v::ablation_max_phase(ablation);
  const auto report = a2v::load_manifest(manifest_path);
  for (const auto& issue : report.issues) {
    std::cerr << "manifest line " << issue.line << " (" << issue.clip_id << "): " << a2v::to_string(issue.code)
              << ": " << issue.message << "\n";
  }
  if (report.entries.empty()) throw Error(ErrorCode::ManifestSyntax, "manifest has no valid entries");
  auto data = a2v::load_dataset(report, cfg);

  std::unique_ptr<a2v::Trainer> trainer;
  if (!resume.empty()) {
    const auto ckpt = a2v::load_checkpoint(resume);
    trainer = a2v::Trainer::resume(ckpt, std::move(data));
  } else {
    trainer = std::make_unique<a2v::Trainer>(cfg, std::move(data));
    fs::create_directories(out);
    a2v::save_config(cfg, fs::path(out) / "config.json");
  }
  a2v::TrainOptions opts;
  opts.out_dir = out;
  opts.max_epochs = max_epochs;
  opts.on_epoch = [](const a2v::EpochSummary& s) {
    std::cout << "epoch " << s.epoch << " phase " << s.phase << " g_total " << s.means.at("g_total") << " d_total "
              << s.means.at("d_total") << "\n"
              << std::flush;
  };
  const auto written = trainer->train(opts);
  if (!written.empty()) std::cout << "last checkpoint " << written.back().string() << "\n";
  return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& image_path, const std::string& audio_path,
                 const std::string& out, const std::string& mux) {
  const auto ckpt = a2v::load_checkpoint(ckpt_path);
  const auto cfg = a2v::checkpoint_config(ckpt);
  torch::set_num_threads(1);
  a2v::SpadeGenerator gen(cfg);
  a2v::import_module(*gen, "gen", ckpt.tensors);
  gen->eval();
  const auto image = a2v::read_pnm(image_path);
  if (image.width != cfg.gen.resolution || image.height != cfg.gen.resolution) {
    throw Error(ErrorCode::ResolutionMismatch, "identity image must be " + std::to_string(cfg.gen.resolution) +
                                                   "x" + std::to_string(cfg.gen.resolution));
  }
  const auto audio = a2v::read_wav(audio_path);
  const auto frames = a2v::generate_video(audio, a2v::image_to_tensor(image), gen, cfg.audio);
  std::vector<a2v::Image> images;
  for (const auto& f : frames) images.push_back(a2v::tensor_to_image(f.pixels));
  const auto d = a2v::assemble_video(images, audio, cfg.audio.fps, out, mux);
  std::cout << d.frame_count << " frames written to " << out << "\n";
  return 0;
}

int cmd_adapt(const std::string& ckpt_path, const std::string& image_path, const std::string& audio_path,
              const std::string& out, std::optional<int> epochs, std::optional<double> lr,
              const std::string& scope, bool allow_untrained) {
  const auto ckpt = a2v::load_checkpoint(ckpt_path);
  auto acfg = a2v::adaptation_defaults(a2v::checkpoint_config(ckpt));
  if (epochs) acfg.epochs = *epochs;
  if (lr) acfg.lr = *lr;
  if (!scope.empty()) acfg.scope = a2v::parse_scope(scope);
  acfg.allow_untrained = allow_untrained;
  const auto result = a2v::adapt(ckpt, a2v::read_pnm(image_path), a2v::read_wav(audio_path), acfg);
  a2v::save_checkpoint(result.checkpoint, out);
  for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
    std::cout << "epoch " << i << " perceptual " << result.epoch_loss[i] << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& generated, const std::string& reference, const std::string& report_path,
                 const std::string& ckpt_path, const std::string& embeddings, const std::string& wer_path) {
  a2v::Config cfg;
  std::optional<a2v::Checkpoint> ckpt;
  if (!ckpt_path.empty()) {
    ckpt = a2v::load_checkpoint(ckpt_path);
    cfg = a2v::checkpoint_config(*ckpt);
  }
  torch::set_num_threads(1);
  std::unique_ptr<a2v::IdentityEmbedder> embedder;
  if (!embeddings.empty()) {
    embedder = std::make_unique<a2v::FileEmbedder>(embeddings);
  } else {
    auto fx = a2v::make_extractor(cfg.loss);
    if (ckpt) a2v::import_module(*fx, "aux.extractor", ckpt->tensors);
    embedder = std::make_unique<a2v::ExtractorEmbedder>(fx);
  }
  a2v::LandmarkRegressor regressor{nullptr};
  if (ckpt) {
    regressor = a2v::LandmarkRegressor(cfg.gen.resolution);
    a2v::import_module(*regressor, "aux.landmark", ckpt->tensors);
    regressor->eval();
  }
  std::map<std::string, double> wer;
  if (!wer_path.empty()) wer = a2v::read_wer_predictions(wer_path);

  const auto gen_clips = discover_clips(generated);
  const auto ref_clips = discover_clips(reference);
  std::ofstream report(report_path);
  if (!report) throw Error(ErrorCode::Io, "cannot write " + report_path);
  int worst = 0;
  int n_ok = 0;
  double ssim_sum = 0, psnr_sum = 0, cpbd_sum = 0, cos_sum = 0, euc_sum = 0;
  int psnr_n = 0, cpbd_n = 0;
  auto error_record = [&](const std::string& id, const Error& e) {
    report << nlohmann::json{{"type", "error"}, {"clip_id", id}, {"code", a2v::to_string(e.code())},
                             {"message", e.what()}}
                  .dump()
           << "\n";
    worst = std::max(worst, e.is_validation() ? 1 : 2);
  };
  for (const auto& [id, gen] : gen_clips) {
    auto ref = ref_clips.find(id);
    if (ref == ref_clips.end() && gen_clips.size() == 1 && ref_clips.size() == 1) ref = ref_clips.begin();
    if (ref == ref_clips.end()) {
      error_record(id, Error(ErrorCode::MissingFile, "no reference clip " + id));
      continue;
    }
    try {
      std::vector<std::string> gkeys, rkeys;
      for (const auto& f : gen.files) gkeys.push_back("generated/" + id + "/" + f.filename().string());
      for (const auto& f : ref->second.files) rkeys.push_back("reference/" + id + "/" + f.filename().string());
      const auto gframes = read_all(gen.files);
      auto m = a2v::evaluate_clip(id, gframes, read_all(ref->second.files), *embedder, gkeys, rkeys);
      if (regressor) {
        torch::NoGradGuard no_grad;
        std::vector<torch::Tensor> ts;
        for (const auto& img : gframes) ts.push_back(a2v::image_to_tensor(img));
        auto ear = a2v::ear_tensor(regressor->forward(torch::stack(ts))).to(torch::kDouble).contiguous();
        m.blink_count = a2v::detect_blinks({ear.data_ptr<double>(), ear.data_ptr<double>() + ear.numel()});
      } else if (fs::exists(gen.dir / "landmarks.txt")) {
        std::vector<double> ear;
        for (const auto& lm : a2v::read_landmarks(gen.dir / "landmarks.txt")) ear.push_back(a2v::mean_ear(lm));
        m.blink_count = a2v::detect_blinks(ear);
      }
      if (auto w = wer.find(id); w != wer.end()) m.wer = w->second;
      report << a2v::to_json(m).dump() << "\n";
      ++n_ok;
      ssim_sum += m.ssim_mean;
      if (std::isfinite(m.psnr_mean)) {
        psnr_sum += m.psnr_mean;
        ++psnr_n;
      }
      if (std::isfinite(m.cpbd_mean)) {
        cpbd_sum += m.cpbd_mean;
        ++cpbd_n;
      }
      cos_sum += m.acd.cosine;
      euc_sum += m.acd.euclidean;
    } catch (const Error& e) {
      error_record(id, e);
    }
  }
  nlohmann::json agg = {{"type", "aggregate"}, {"clips", n_ok}, {"embedder", embedder->label()}};
  if (n_ok > 0) {
    agg["ssim_mean"] = ssim_sum / n_ok;
    agg["psnr_mean"] = psnr_n > 0 ? nlohmann::json(psnr_sum / psnr_n) : nlohmann::json("inf");
    agg["cpbd_mean"] = cpbd_n > 0 ? nlohmann::json(cpbd_sum / cpbd_n) : nlohmann::json(nullptr);
    agg["acd_cosine"] = cos_sum / n_ok;
    agg["acd_euclidean"] = euc_sum / n_ok;
  }
  report << agg.dump() << "\n";
  std::cout << agg.dump(2) << "\n";
  return worst;
}

int cmd_inspect(const std::string& ckpt_path) {
  const auto ckpt = a2v::load_checkpoint(ckpt_path);
  std::map<std::string, std::int64_t> per_ns;
  for (const auto& [name, t] : ckpt.tensors) {
    const auto first = name.find('.');
    auto ns = name.substr(0, first);
    if (ns == "disc" || ns == "aux" || ns == "optim") ns = name.substr(0, name.find('.', first + 1));
    per_ns[ns] += t.numel();
  }
  nlohmann::json j = {{"version", ckpt.version},
                      {"fingerprint", ckpt.fingerprint},
                      {"digest", a2v::tensors_digest(ckpt.tensors)},
                      {"tensors", ckpt.tensors.size()},
                      {"elements_by_namespace", per_ns},
                      {"state", ckpt.state},
                      {"config", ckpt.config}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-driven talking-face generation: data, training, adaptation, evaluation"};
  app.require_subcommand(1);

  int synth_n = 10;
  std::uint64_t synth_seed = 3;
  int synth_res = 64;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-data", "Render a procedural talking-face corpus");
  synth->add_option("--n", synth_n, "number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--resolution", synth_res, "frame side in pixels");
  synth->add_option("--out", synth_out, "output directory")->required();

  std::string cfg_path, manifest, train_out, ablation, resume;
  int max_epochs = -1;
  auto* train = app.add_subcommand("train", "Run the three-phase curriculum");
  train->add_option("--config", cfg_path, "JSON config (defaults when omitted)");
  train->add_option("--manifest", manifest, "JSON Lines manifest")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--ablation", ablation, "BM | BM+CL+TAL | BM+CL+TAL+BL");
  train->add_option("--resume", resume, "continue from a checkpoint");
  train->add_option("--max-epochs", max_epochs, "stop after this many epochs");

  std::string ckpt, image, audio, gen_out, mux;
  auto* generate = app.add_subcommand("generate", "Generate frames for an identity image and a WAV file");
  generate->add_option("--ckpt", ckpt)->required();
  generate->add_option("--image", image, "identity image (PPM)")->required();
  generate->add_option("--audio", audio, "16-bit mono WAV")->required();
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--mux", mux, "shell command run afterwards; {frames} {audio} {fps} {out} are substituted");

  std::string adapt_out, scope;
  std::optional<int> adapt_epochs;
  std::optional<double> adapt_lr;
  bool allow_untrained = false;
  auto* adapt = app.add_subcommand("adapt", "Fine-tune the generator to an unseen identity");
  adapt->add_option("--ckpt", ckpt)->required();
  adapt->add_option("--image", image)->required();
  adapt->add_option("--audio", audio)->required();
  adapt->add_option("--epochs", adapt_epochs, "passes over the audio windows (default 5)");
  adapt->add_option("--lr", adapt_lr, "learning rate (default 0.0002)");
  adapt->add_option("--scope", scope, "all_generator | modulation_only");
  adapt->add_flag("--allow-untrained", allow_untrained, "accept checkpoints that never reached phase 2");
  adapt->add_option("--out", adapt_out, "derived checkpoint")->required();

  std::string generated, reference, report, embeddings, wer;
  auto* evaluate = app.add_subcommand("evaluate", "Compare generated and reference frames");
  evaluate->add_option("--generated", generated)->required();
  evaluate->add_option("--reference", reference)->required();
  evaluate->add_option("--report", report, "JSON Lines report")->required();
  evaluate->add_option("--ckpt", ckpt, "checkpoint supplying the extractor and landmark regressor");
  evaluate->add_option("--embeddings", embeddings, "precomputed identity embeddings");
  evaluate->add_option("--wer", wer, "lipreading predictions: clip_id, reference, hypothesis (TSV)");

  auto* inspect = app.add_subcommand("inspect", "Print a checkpoint summary");
  inspect->add_option("--ckpt", ckpt)->required();

  std::string print_cfg;
  auto* print_config = app.add_subcommand("print-config", "Print the effective config with every default");
  print_config->add_option("--config", print_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(synth_n, synth_seed, synth_out, synth_res);
    if (*train) return cmd_train(cfg_path, manifest, train_out, ablation, resume, max_epochs);
    if (*generate) return cmd_generate(ckpt, image, audio, gen_out, mux);
    if (*adapt) return cmd_adapt(ckpt, image, audio, adapt_out, adapt_epochs, adapt_lr, scope, allow_untrained);
    if (*evaluate) return cmd_evaluate(generated, reference, report, ckpt, embeddings, wer);
    if (*inspect) return cmd_inspect(ckpt);
    if (*print_config) {
      std::cout << a2v::to_json(config_or_default(print_cfg)).dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
