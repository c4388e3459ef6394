#include "inclg/trainer.hpp"

#include "inclg/logging.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "inclg/checkpoint.hpp"
#include "inclg/errors.hpp"
#include "inclg/metrics.hpp"

namespace fs = std::filesystem;

namespace inclg {

const std::array<const char*, 8>& StepLosses::names() {
  static const std::array<const char*, 8> n = {"pixel",         "landmark",      "tv",
                                               "style",         "perceptual",    "adversarial_g",
                                               "adversarial_d", "generator_total"};
  return n;
}

std::array<double, 8> StepLosses::values() const {
  return {pixel, landmark, tv, style, perceptual, adversarial_g, adversarial_d, generator_total};
}

namespace {

std::vector<torch::Tensor> parameters_of(const torch::nn::Module& module) {
  return module.parameters();
}

double checked(const char* term, const torch::Tensor& value) {
  const double v = value.item<double>();
  if (!std::isfinite(v)) throw NonFiniteLossError(term, v);
  return v;
}

void set_lr(torch::optim::Optimizer& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, double lr,
                                              const TrainingConfig& config) {
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(lr).betas({config.beta1, config.beta2}));
}

class RequiresGradScope {
 public:
  RequiresGradScope(std::vector<torch::Tensor> params, bool enabled) : params_(std::move(params)) {
    for (auto& p : params_) p.set_requires_grad(enabled);
  }
  ~RequiresGradScope() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  RequiresGradScope(const RequiresGradScope&) = delete;
  RequiresGradScope& operator=(const RequiresGradScope&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

}  // namespace

GanTrainer::GanTrainer(TrainingConfig config, std::shared_ptr<GeneratorModule> generator,
                       PatchDiscriminator discriminator, std::shared_ptr<FeatureExtractor> extractor)
    : config_(std::move(config)),
      generator_(std::move(generator)),
      discriminator_(std::move(discriminator)),
      extractor_(std::move(extractor)) {
  config_.validate();
  if (!generator_ || !discriminator_ || !extractor_) {
    throw ConfigError("trainer needs a generator, a discriminator and a feature extractor");
  }
  generator_optimizer_ = make_adam(parameters_of(*generator_), config_.learning_rate, config_);
  discriminator_optimizer_ = make_adam(parameters_of(*discriminator_),
                                       config_.learning_rate * config_.discriminator_lr_ratio, config_);
}

GanTrainer GanTrainer::create(const TrainingConfig& config) {
  config.validate();
  torch::manual_seed(config.seed);
  auto generator = std::make_shared<MultiTaskGeneratorImpl>(config.model);
  PatchDiscriminator discriminator(config.model.discriminator_channels);
  auto extractor =
      std::make_shared<VggFeatureExtractor>(config.extractor_layers, config.extractor_weights, config.seed);
  return GanTrainer(config, std::move(generator), std::move(discriminator), std::move(extractor));
}

void GanTrainer::to(torch::Dtype dtype) {
  generator_->to(dtype);
  discriminator_->to(dtype);
  extractor_->to(dtype);
  // optimiser state is created lazily, so fresh optimisers pick up the new tensors
  generator_optimizer_ = make_adam(parameters_of(*generator_), config_.learning_rate, config_);
  discriminator_optimizer_ = make_adam(parameters_of(*discriminator_),
                                       config_.learning_rate * config_.discriminator_lr_ratio, config_);
}

void GanTrainer::set_learning_rates() {
  const double lr = config_.learning_rate_at(iteration_);
  set_lr(*generator_optimizer_, lr);
  set_lr(*discriminator_optimizer_, lr * config_.discriminator_lr_ratio);
}

StepLosses GanTrainer::train_step(const Batch& batch, const StepObserver* observer) {
  if (iteration_ >= config_.max_iterations) {
    throw ConfigError("training already reached max_iterations");
  }
  set_learning_rates();
  generator_->train();
  discriminator_->train();

  const auto dtype = generator_->parameters().front().scalar_type();
  const auto images = batch.images.to(dtype);
  const auto masks = batch.masks.to(dtype);
  const auto targets = batch.landmarks.to(dtype);

  const auto output = generator_->forward(images, masks);
  StepLosses losses;
  losses.learning_rate = config_.learning_rate_at(iteration_);

  // (1) discriminator update; generator outputs are detached
  {
    discriminator_->update_spectral_estimates();
    discriminator_optimizer_->zero_grad();
    const auto scores = discriminator_->forward(torch::cat({images, output.raw.detach()}, 0));
    const auto split = scores.split(images.size(0), 0);
    const auto loss_d = discriminator_hinge_loss(split[0], split[1]);
    losses.adversarial_d = checked("adversarial_d", loss_d);
    loss_d.backward();
    discriminator_optimizer_->step();
  }
  if (observer && observer->after_discriminator_update) observer->after_discriminator_update();

  // (2) generator update; discriminator weights are frozen
  {
    RequiresGradScope freeze(parameters_of(*discriminator_), false);
    generator_optimizer_->zero_grad();
    LossBundle bundle;
    bundle.pixel = pixel_loss(output.raw, images, masks, config_.pixel_hole_weight);
    bundle.landmark = landmark_loss(output.landmarks, targets);
    bundle.tv = tv_loss(output.raw);
    const auto fake_features = extractor_->extract(output.raw);
    std::vector<torch::Tensor> real_features;
    {
      torch::NoGradGuard no_grad;
      real_features = extractor_->extract(images);
    }
    bundle.style = style_loss_from_features(fake_features, real_features);
    bundle.perceptual = perceptual_loss_from_features(fake_features, real_features);
    bundle.adversarial_g = generator_hinge_loss(discriminator_->forward(output.raw));

    losses.pixel = checked("pixel", *bundle.pixel);
    losses.landmark = checked("landmark", *bundle.landmark);
    losses.tv = checked("tv", *bundle.tv);
    losses.style = checked("style", *bundle.style);
    losses.perceptual = checked("perceptual", *bundle.perceptual);
    losses.adversarial_g = checked("adversarial_g", *bundle.adversarial_g);
    const auto total = aggregate_generator_loss(bundle, config_.weights);
    losses.generator_total = checked("generator_total", total);
    total.backward();
    generator_optimizer_->step();
  }
  if (observer && observer->after_generator_update) observer->after_generator_update();

  ++iteration_;
  const auto values = losses.values();
  for (std::size_t i = 0; i < values.size(); ++i) loss_sums_[i] += values[i];
  ++loss_count_;
  return losses;
}

std::array<double, 8> GanTrainer::running_means() const {
  std::array<double, 8> means{};
  if (loss_count_ == 0) return means;
  for (std::size_t i = 0; i < means.size(); ++i) means[i] = loss_sums_[i] / loss_count_;
  return means;
}

void GanTrainer::record_validation(double score) {
  if (!best_validation_ || score < *best_validation_) best_validation_ = score;
}

void GanTrainer::save_checkpoint(const fs::path& path) const {
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
  archive.write("config", c10::IValue(to_config_text(config_)));
  archive.write("iteration", c10::IValue(iteration_));

  torch::serialize::OutputArchive generator, discriminator, optimizer_g, optimizer_d;
  write_state(generator, module_state(*generator_));
  write_state(discriminator, module_state(*discriminator_));
  generator_optimizer_->save(optimizer_g);
  discriminator_optimizer_->save(optimizer_d);
  archive.write("generator", generator);
  archive.write("discriminator", discriminator);
  archive.write("optimizer_g", optimizer_g);
  archive.write("optimizer_d", optimizer_d);

  archive.write("loss_sums", torch::tensor(std::vector<double>(loss_sums_.begin(), loss_sums_.end()),
                                           torch::kDouble));
  archive.write("loss_count", c10::IValue(loss_count_));
  archive.write("best_validation",
                c10::IValue(best_validation_.value_or(std::numeric_limits<double>::quiet_NaN())));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // write-then-rename so a crash never leaves a half-written checkpoint behind
  const auto partial = fs::path(path.string() + ".partial");
  archive.save_to(partial.string());
  fs::rename(partial, path);
}

void GanTrainer::load_checkpoint(const fs::path& path) {
  auto archive = open_checkpoint(path);
  try {
    c10::IValue iteration, loss_count, best;
    if (!archive.try_read("iteration", iteration) || !archive.try_read("loss_count", loss_count) ||
        !archive.try_read("best_validation", best)) {
      throw CheckpointError(path.string() + ": missing training counters");
    }
    torch::Tensor sums;
    if (!archive.try_read("loss_sums", sums) || sums.numel() != 8) {
      throw CheckpointError(path.string() + ": missing loss_sums");
    }
    torch::serialize::InputArchive generator, discriminator, optimizer_g, optimizer_d;
    for (auto [key, sub] : {std::pair{"generator", &generator}, std::pair{"discriminator", &discriminator},
                            std::pair{"optimizer_g", &optimizer_g}, std::pair{"optimizer_d", &optimizer_d}}) {
      if (!archive.try_read(key, *sub)) throw CheckpointError(path.string() + ": missing section " + key);
    }
    const auto g_state = read_state(generator, *generator_, "generator");
    const auto d_state = read_state(discriminator, *discriminator_, "discriminator");
    if (iteration.toInt() < 0 || iteration.toInt() > config_.max_iterations) {
      throw CheckpointError(path.string() + ": iteration " + std::to_string(iteration.toInt()) +
                            " outside [0, max_iterations]");
    }

    // stage optimiser state on scratch optimisers before touching live state
    auto scratch_g = make_adam(parameters_of(*generator_), config_.learning_rate, config_);
    auto scratch_d = make_adam(parameters_of(*discriminator_), config_.learning_rate, config_);
    scratch_g->load(optimizer_g);
    scratch_d->load(optimizer_d);

    apply_state(*generator_, g_state);
    apply_state(*discriminator_, d_state);
    generator_optimizer_ = std::move(scratch_g);
    discriminator_optimizer_ = std::move(scratch_d);
    iteration_ = iteration.toInt();
    const auto s = sums.to(torch::kDouble);
    for (std::size_t i = 0; i < loss_sums_.size(); ++i) loss_sums_[i] = s[static_cast<int64_t>(i)].item<double>();
    loss_count_ = loss_count.toInt();
    const double b = best.toDouble();
    best_validation_ = std::isnan(b) ? std::nullopt : std::optional<double>(b);
    set_learning_rates();
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

ValidationMetrics validate(GeneratorModule& generator, const ValidationSet& set, int batch_size) {
  if (set.size() == 0) throw DataError("validation set is empty");
  if (batch_size < 1) throw ConfigError("validation batch size must be >= 1");
  torch::NoGradGuard no_grad;
  const bool was_training = generator.is_training();
  generator.eval();
  const auto dtype = generator.parameters().front().scalar_type();

  ValidationMetrics metrics;
  double pixel_sum = 0.0;
  double psnr_sum = 0.0;
  double landmark_sum = 0.0;
  for (int64_t start = 0; start < set.size(); start += batch_size) {
    const auto count = std::min<int64_t>(batch_size, set.size() - start);
    const auto images = set.images.narrow(0, start, count).to(dtype);
    const auto masks = set.masks.narrow(0, start, count).to(dtype);
    const auto targets = set.landmarks.narrow(0, start, count);
    const auto output = generator.forward(images, masks);
    for (int64_t i = 0; i < count; ++i) {
      pixel_sum += (output.image[i] - images[i]).abs().mean().item<double>();
      psnr_sum += masked_psnr(output.image[i], images[i], masks[i]);
      landmark_sum += landmark_error(output.landmarks[i], targets[i]);
    }
  }
  if (was_training) generator.train();
  const auto n = static_cast<double>(set.size());
  metrics.pixel_loss = pixel_sum / n;
  metrics.masked_psnr = psnr_sum / n;
  metrics.landmark_error = landmark_sum / n;
  metrics.samples = set.size();
  return metrics;
}

namespace {

std::string checkpoint_name(std::int64_t iteration) {
  std::ostringstream name;
  name << "iter_" << std::setw(8) << std::setfill('0') << iteration << ".pt";
  return name.str();
}

}  // namespace

TrainLoopResult train_loop(GanTrainer& trainer, BatchIterator& batches, const fs::path& checkpoint_dir,
                           const fs::path& log_path, const ValidationSet* validation) {
  const auto& config = trainer.config();
  TrainLoopResult result;
  fs::create_directories(checkpoint_dir);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  const bool fresh_log = !fs::exists(log_path) || trainer.iteration() == 0;
  std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write training log " + log_path.string());
  log << std::setprecision(10);
  if (fresh_log) {
    log << "iteration";
    for (const auto* name : StepLosses::names()) log << ',' << name;
    log << ",lr\n";
  }

  while (trainer.iteration() < config.max_iterations) {
    const auto batch = batches.batch(trainer.iteration());
    result.last = trainer.train_step(batch);
    const auto t = trainer.iteration();
    log << t;
    for (double v : result.last.values()) log << ',' << v;
    log << ',' << result.last.learning_rate << '\n';
    log.flush();

    if (config.checkpoint_interval > 0 && t % config.checkpoint_interval == 0) {
      const auto path = checkpoint_dir / checkpoint_name(t);
      trainer.save_checkpoint(path);
      result.checkpoints.push_back(path);
    }
    if (validation && config.validation_interval > 0 && t % config.validation_interval == 0) {
      result.last_validation = validate(trainer.generator(), *validation, config.batch_size);
      trainer.record_validation(result.last_validation->pixel_loss + result.last_validation->landmark_error);
      logging::info("iteration {}: val pixel {:.5f}, landmark error {:.5f}, hole PSNR {:.2f} dB", t,
                   result.last_validation->pixel_loss, result.last_validation->landmark_error,
                   result.last_validation->masked_psnr);
    }
    if (t % 50 == 0 || t == config.max_iterations) {
      logging::info("iteration {}/{}: L_G {:.5f}, L_D {:.5f}, pixel {:.5f}", t, config.max_iterations,
                   result.last.generator_total, result.last.adversarial_d, result.last.pixel);
    }
  }
  const auto final_path = checkpoint_dir / "final.pt";
  trainer.save_checkpoint(final_path);
  result.checkpoints.push_back(final_path);
  return result;
}

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  auto archive = open_checkpoint(path);
  c10::IValue config, iteration;
  if (!archive.try_read("config", config) || !config.isString() || !archive.try_read("iteration", iteration)) {
    throw CheckpointError(path.string() + ": missing config snapshot");
  }
  return {parse_config(config.toStringRef()), iteration.toInt()};
}

void load_generator_weights(const fs::path& path, torch::nn::Module& generator) {
  auto archive = open_checkpoint(path);
  torch::serialize::InputArchive section;
  try {
    if (!archive.try_read("generator", section)) {
      throw CheckpointError(path.string() + ": missing section generator");
    }
    apply_state(generator, read_state(section, generator, "generator"));
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load generator from " + path.string() + ": " + e.what_without_backtrace());
  }
}

}  // namespace inclg
