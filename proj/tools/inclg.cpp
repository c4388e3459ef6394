#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "inclg/config.hpp"
#include "inclg/data.hpp"
#include "inclg/errors.hpp"
#include "inclg/inference.hpp"
#include "inclg/logging.hpp"
#include "inclg/search.hpp"
#include "inclg/server.hpp"
#include "inclg/trainer.hpp"

namespace fs = std::filesystem;
using namespace inclg;

namespace {

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& pairs) {
  std::map<std::string, std::string> out;
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + pair + "' is not key=value");
    out[pair.substr(0, eq)] = pair.substr(eq + 1);
  }
  return out;
}

TrainingConfig resolve_config(const fs::path& path, const std::vector<std::string>& overrides) {
  auto config = load_config(path);
  apply_overrides(config, parse_overrides(overrides));
  config.validate();
  return config;
}

std::optional<ValidationSet> load_validation(const TrainingConfig& config) {
  if (config.val_images.empty()) return std::nullopt;
  return ValidationSet::load(read_flist(config.val_images), read_flist(config.val_landmarks),
                             read_flist(config.val_masks), config.model.image_size);
}

int run_train(const fs::path& config_path, const std::vector<std::string>& overrides, const fs::path& resume) {
  auto config = resolve_config(config_path, overrides);
  BatchIterator batches(read_flist(config.train_images), read_flist(config.train_landmarks),
                        read_flist(config.train_masks), config.batch_size, config.seed, config.model.image_size);
  const auto validation = load_validation(config);
  auto trainer = GanTrainer::create(config);
  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    logging::info("resumed from {} at iteration {}", resume.string(), trainer.iteration());
  }
  fs::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "config.yml") << to_config_text(config);
  const auto result = train_loop(trainer, batches, config.output_dir / "checkpoints",
                                 config.output_dir / "train_log.csv", validation ? &*validation : nullptr);
  std::cout << "final checkpoint: " << result.checkpoints.back().string() << '\n';
  return 0;
}

int run_tune(const fs::path& config_path, const std::vector<std::string>& overrides, int trials,
             std::int64_t iterations) {
  auto config = resolve_config(config_path, overrides);
  if (trials <= 0) trials = config.search_trials;
  if (iterations < 0) iterations = config.search_iterations;
  const auto result = hyperparameter_search(config, trials, default_trial_runner(iterations));

  const auto dir = config.output_dir / "search";
  fs::create_directories(dir);
  std::ofstream log(dir / "trials.csv");
  log << "trial,seed,landmark_weight,learning_rate,decay_factor,batch_size,score\n" << std::setprecision(10);
  for (const auto& t : result.trials) {
    log << t.index << ',' << t.config.seed << ',' << t.config.weights.landmark << ',' << t.config.learning_rate
        << ',' << t.config.decay_factor << ',' << t.config.batch_size << ',' << t.score << '\n';
  }
  std::ofstream(dir / "best.yml") << to_config_text(result.best);
  std::cout << "best score " << result.best_score << ", config written to " << (dir / "best.yml").string() << '\n';
  return 0;
}

int run_test(const fs::path& config_path, const std::vector<std::string>& overrides, const fs::path& checkpoint,
             const fs::path& out) {
  const auto config = resolve_config(config_path, overrides);
  const auto model = InpaintingModel::load(checkpoint);
  BatchTestOptions options;
  if (!config.test_landmarks.empty()) options.landmarks = read_flist(config.test_landmarks);
  const auto summary =
      batch_test(*model, read_flist(config.test_images), read_flist(config.test_masks), out, options);
  std::cout << "written " << summary.written << ", skipped " << summary.skipped << ", mean latency "
            << summary.mean_latency_ms << " ms";
  if (summary.mean_psnr) std::cout << ", hole PSNR " << *summary.mean_psnr << " dB";
  if (summary.mean_landmark_error) std::cout << ", landmark error " << *summary.mean_landmark_error;
  std::cout << '\n';
  return summary.written > 0 ? 0 : 1;
}

int run_serve(fs::path checkpoint, ServerOptions options) {
  if (const char* env = std::getenv("INCLG_CHECKPOINT"); env && *env) checkpoint = env;
  if (const char* env = std::getenv("INCLG_PORT"); env && *env) options.port = std::stoi(env);
  if (checkpoint.empty()) throw ConfigError("serve needs --checkpoint or INCLG_CHECKPOINT");
  InpaintServer server(InpaintingModel::load(checkpoint), options);
  server.bind();
  server.run();
  return 0;
}

int run_split(const fs::path& mask_list, int n_train, int n_val, std::uint64_t seed, const fs::path& out) {
  const auto split = group_and_sample_masks(read_flist(mask_list), n_train, n_val, seed);
  fs::create_directories(out);
  write_flist(out / "masks_train.flist", split.train);
  write_flist(out / "masks_val.flist", split.val);
  for (int g = 0; g < 3; ++g) {
    const auto label = group_label(static_cast<MaskGroup>(g));
    write_flist(out / ("group_" + label + ".flist"), split.groups[g]);
    std::cout << label << ": " << split.groups[g].size() << " masks\n";
  }
  std::cout << "discarded " << split.discarded.size() << ", train " << split.train.size() << ", val "
            << split.val.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task face inpainting with landmark guidance"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  fs::path config_path, resume, checkpoint, out;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "train the generator and discriminator");
  train->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  train->add_option("--set", overrides, "override a config key (key=value)");

  int trials = 0;
  std::int64_t trial_iterations = -1;
  auto* tune = app.add_subcommand("tune", "random hyperparameter search");
  tune->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  tune->add_option("--trials", trials, "number of trials (default: search_trials)");
  tune->add_option("--iterations", trial_iterations, "steps per trial (0 = one pass over the training list)");
  tune->add_option("--set", overrides, "override a config key (key=value)");

  auto* test = app.add_subcommand("test", "inpaint the test lists with a checkpoint");
  test->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  test->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  test->add_option("--out", out, "output directory")->required();
  test->add_option("--set", overrides, "override a config key (key=value)");

  ServerOptions server_options;
  auto* serve = app.add_subcommand("serve", "HTTP inpainting service");
  serve->add_option("--checkpoint", checkpoint, "checkpoint file (env INCLG_CHECKPOINT)");
  serve->add_option("--port", server_options.port, "port (env INCLG_PORT)");
  serve->add_option("--host", server_options.host, "bind address");
  serve->add_option("--max-in-flight", server_options.max_in_flight, "concurrent /inpaint requests before 429");

  fs::path root;
  std::vector<std::string> extensions = {".png", ".jpg", ".jpeg"};
  auto* flist = app.add_subcommand("flist", "write a sorted file list of the images under a directory");
  flist->add_option("root", root, "directory to scan")->required()->check(CLI::ExistingDirectory);
  flist->add_option("--out", out, "flist to write")->required();
  flist->add_option("--ext", extensions, "extensions to keep");

  fs::path mask_list;
  int n_train = 3300, n_val = 200;
  std::uint64_t seed = 42;
  auto* split = app.add_subcommand("split-masks", "group masks by hole ratio and sample train/val lists");
  split->add_option("--masks", mask_list, "flist of mask files")->required()->check(CLI::ExistingFile);
  split->add_option("--train", n_train, "training masks per group");
  split->add_option("--val", n_val, "validation masks per group");
  split->add_option("--seed", seed, "sampling seed");
  split->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    logging::set_level(logging::parse_level(log_level));
    if (*train) return run_train(config_path, overrides, resume);
    if (*tune) return run_tune(config_path, overrides, trials, trial_iterations);
    if (*test) return run_test(config_path, overrides, checkpoint, out);
    if (*serve) return run_serve(checkpoint, server_options);
    if (*flist) {
      const auto files = build_flist(root, extensions);
      write_flist(out, files);
      std::cout << files.size() << " files\n";
      return 0;
    }
    if (*split) return run_split(mask_list, n_train, n_val, seed, out);
  } catch (const NonFiniteLossError& e) {
    std::cerr << "training stopped: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
