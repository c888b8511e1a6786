#include "a2v/fewshot.hpp"

#include "a2v/dataset.hpp"
#include "a2v/error.hpp"
#include "a2v/generator.hpp"
#include "a2v/losses.hpp"

namespace a2v {

void AdaptationConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::ConfigInvalid, "adapt.epochs must be >= 0");
  if (!(lr > 0.0)) throw Error(ErrorCode::ConfigInvalid, "adapt.lr must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::ConfigInvalid, "adapt.batch_size must be >= 1");
}

AdaptScope parse_scope(const std::string& s) {
  if (s == "all_generator") return AdaptScope::AllGenerator;
  if (s == "modulation_only") return AdaptScope::ModulationOnly;
  throw Error(ErrorCode::ConfigInvalid, "unknown adapt.scope '" + s + "'");
}

std::string scope_name(AdaptScope s) {
  return s == AdaptScope::AllGenerator ? "all_generator" : "modulation_only";
}

AdaptationConfig adaptation_defaults(const Config& cfg) {
  AdaptationConfig a;
  a.epochs = cfg.adapt.epochs;
  a.lr = cfg.adapt.lr;
  a.scope = parse_scope(cfg.adapt.scope);
  a.batch_size = cfg.adapt.batch_size;
  return a;
}

AdaptResult adapt(const Checkpoint& source, const Image& unseen, const Waveform& audio,
                  const AdaptationConfig& acfg) {
  acfg.validate();
  const Config cfg = checkpoint_config(source);
  const int r = cfg.gen.resolution;
  if (unseen.width != r || unseen.height != r) {
    throw Error(ErrorCode::ResolutionMismatch, "identity image is " + std::to_string(unseen.width) + "x" +
                                                   std::to_string(unseen.height) + ", checkpoint expects " +
                                                   std::to_string(r) + "x" + std::to_string(r));
  }
  const int phase = source.state.contains("curriculum") ? source.state["curriculum"].value("phase", 1) : 0;
  if (phase < 2 && !acfg.allow_untrained) {
    throw Error(ErrorCode::UntrainedCheckpoint, "checkpoint stopped in phase " + std::to_string(phase));
  }

  AdaptResult result;
  result.checkpoint = source;  // deep copy below for the generator only
  result.checkpoint.state = {{"kind", "adapted"},
                             {"source_fingerprint", source.fingerprint},
                             {"source_digest", tensors_digest(source.tensors)},
                             {"adaptation",
                              {{"epochs", acfg.epochs},
                               {"lr", acfg.lr},
                               {"scope", scope_name(acfg.scope)},
                               {"batch_size", acfg.batch_size}}}};
  if (source.state.contains("curriculum")) result.checkpoint.state["curriculum"] = source.state["curriculum"];

  torch::set_num_threads(1);
  SpadeGenerator gen(cfg);
  import_module(*gen, "gen", source.tensors);
  auto extractor = make_extractor(cfg.loss);
  import_module(*extractor, "aux.extractor", source.tensors);

  const auto mfcc = stack_mfcc(extract_windows(audio, cfg.audio));
  const auto n = mfcc.size(0);
  const auto identity = image_to_tensor(unseen).unsqueeze(0);

  auto evaluate = [&] {
    torch::NoGradGuard no_grad;
    const auto pyramid = build_pyramid(identity, r);
    double total = 0.0;
    for (std::int64_t s = 0; s < n; s += acfg.batch_size) {
      const auto e = std::min<std::int64_t>(n, s + acfg.batch_size);
      auto fake = gen->from_embedding(gen->encoder()->forward(mfcc.slice(0, s, e)), pyramid);
      total += perceptual_loss(identity.expand_as(fake), fake, extractor, 1.0).item<double>() * static_cast<double>(e - s);
    }
    return total / static_cast<double>(n);
  };
  result.epoch_loss.push_back(evaluate());
  if (acfg.epochs == 0) return result;

  std::vector<torch::Tensor> params;
  if (acfg.scope == AdaptScope::AllGenerator) {
    params = gen->parameters(true);
  } else {
    params = gen->modulation_parameters();
    for (auto& p : gen->parameters(true)) p.set_requires_grad(false);
    for (auto& p : params) p.set_requires_grad(true);
  }
  torch::optim::Adam opt(params, torch::optim::AdamOptions(acfg.lr).betas({cfg.train.beta1, cfg.train.beta2}));
  for (int epoch = 0; epoch < acfg.epochs; ++epoch) {
    for (std::int64_t s = 0; s < n; s += acfg.batch_size) {
      const auto e = std::min<std::int64_t>(n, s + acfg.batch_size);
      opt.zero_grad();
      auto fake = gen->forward(mfcc.slice(0, s, e), identity.expand({e - s, -1, -1, -1}));
      auto loss = perceptual_loss(identity.expand_as(fake), fake, extractor, 1.0);
      if (!std::isfinite(loss.item<double>())) throw Error(ErrorCode::NonFiniteLoss, "adaptation loss");
      loss.backward();
      opt.step();
    }
    result.epoch_loss.push_back(evaluate());
    ++result.epochs_run;
  }
  for (auto& p : gen->parameters(true)) p.set_requires_grad(true);
  TensorMap adapted;
  export_module(*gen, "gen", adapted);
  for (auto& [name, t] : adapted) result.checkpoint.tensors[name] = t;
  return result;
}

}  // namespace a2v
