#include "inclg/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "inclg/errors.hpp"

namespace inclg {

ModelConfig ModelConfig::reduced() {
  ModelConfig config;
  config.image_size = 32;
  config.base_channels = 16;
  config.residual_blocks = 2;
  config.landmark_branches = {16, 32, 64};
  config.discriminator_channels = 16;
  return config;
}

void ModelConfig::validate() const {
  if (image_size < 16 || image_size % 4 != 0) {
    throw ConfigError("image_size must be a multiple of 4 and at least 16, got " +
                      std::to_string(image_size));
  }
  if (base_channels < 1 || residual_blocks < 0 || residual_dilation < 1) {
    throw ConfigError("base_channels, residual_blocks and residual_dilation must be positive");
  }
  if (landmark_branches.empty()) {
    throw ConfigError("landmark_branches needs at least one branch");
  }
  for (std::size_t i = 1; i < landmark_branches.size(); ++i) {
    if (landmark_branches[i] <= landmark_branches[i - 1]) {
      throw ConfigError("landmark_branches must be strictly increasing");
    }
  }
  if (landmark_count < 1 || landmark_map_size < 2 || landmark_map_copies < 1) {
    throw ConfigError("landmark geometry must be positive");
  }
  if (!(attention_temperature > 0.0)) throw ConfigError("attention_temperature must be > 0");
  if (discriminator_channels < 1) throw ConfigError("discriminator_channels must be positive");
}

void TrainingConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(discriminator_lr_ratio > 0.0)) throw ConfigError("discriminator_lr_ratio must be > 0");
  if (!(decay_factor > 0.0) || decay_factor > 1.0) {
    throw ConfigError("decay_factor must lie in (0, 1]");
  }
  if (decay_interval < 1) throw ConfigError("decay_interval must be >= 1");
  if (checkpoint_interval < 0 || validation_interval < 0) {
    throw ConfigError("intervals must be >= 0");
  }
  for (double w : {weights.pixel, weights.landmark, weights.tv, weights.style,
                   weights.perceptual, weights.adversarial, pixel_hole_weight}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

double TrainingConfig::learning_rate_at(std::int64_t iteration) const {
  const auto steps = static_cast<double>(iteration / decay_interval);
  return learning_rate * std::pow(decay_factor, steps);
}

namespace {

using Setter = std::function<void(TrainingConfig&, const YAML::Node&)>;

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("config key '" + key + "' expects a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> sequence(const YAML::Node& node, const std::string& key) {
  std::vector<T> out;
  if (node.IsScalar()) {
    // "a, b, c" is accepted as well as [a, b, c]
    std::stringstream ss(node.Scalar());
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto first = item.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      const auto last = item.find_last_not_of(" \t");
      out.push_back(scalar<T>(YAML::Node(item.substr(first, last - first + 1)), key));
    }
    return out;
  }
  if (!node.IsSequence()) throw ConfigError("config key '" + key + "' expects a list");
  for (const auto& item : node) out.push_back(scalar<T>(item, key));
  return out;
}

SearchDimension dimension(const YAML::Node& node, const std::string& key, bool discrete) {
  SearchDimension dim;
  const auto values = sequence<double>(node, key);
  if (discrete) {
    if (values.empty()) throw ConfigError("config key '" + key + "' needs at least one choice");
    dim.choices = values;
    return dim;
  }
  if (values.size() == 1) {
    dim.low = dim.high = values[0];
  } else if (values.size() == 2) {
    dim.low = values[0];
    dim.high = values[1];
  } else {
    throw ConfigError("config key '" + key + "' expects [low, high]");
  }
  if (dim.low > dim.high) throw ConfigError("config key '" + key + "' has low > high");
  return dim;
}

#define INCLG_SCALAR(name, field, type) \
  {name, [](TrainingConfig& c, const YAML::Node& n) { c.field = scalar<type>(n, name); }}
#define INCLG_PATH(name, field) \
  {name, [](TrainingConfig& c, const YAML::Node& n) { c.field = scalar<std::string>(n, name); }}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      INCLG_SCALAR("image_size", model.image_size, int),
      INCLG_SCALAR("base_channels", model.base_channels, int),
      INCLG_SCALAR("residual_blocks", model.residual_blocks, int),
      INCLG_SCALAR("residual_dilation", model.residual_dilation, int),
      {"landmark_branches",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.model.landmark_branches = sequence<int>(n, "landmark_branches");
       }},
      INCLG_SCALAR("landmark_map_size", model.landmark_map_size, int),
      INCLG_SCALAR("landmark_map_copies", model.landmark_map_copies, int),
      INCLG_SCALAR("attention_temperature", model.attention_temperature, double),
      INCLG_SCALAR("discriminator_channels", model.discriminator_channels, int),
      INCLG_SCALAR("weight_pixel", weights.pixel, double),
      INCLG_SCALAR("weight_landmark", weights.landmark, double),
      INCLG_SCALAR("weight_tv", weights.tv, double),
      INCLG_SCALAR("weight_style", weights.style, double),
      INCLG_SCALAR("weight_perceptual", weights.perceptual, double),
      INCLG_SCALAR("weight_adversarial", weights.adversarial, double),
      INCLG_SCALAR("pixel_hole_weight", pixel_hole_weight, double),
      INCLG_SCALAR("learning_rate", learning_rate, double),
      INCLG_SCALAR("discriminator_lr_ratio", discriminator_lr_ratio, double),
      INCLG_SCALAR("beta1", beta1, double),
      INCLG_SCALAR("beta2", beta2, double),
      INCLG_SCALAR("decay_factor", decay_factor, double),
      INCLG_SCALAR("decay_interval", decay_interval, std::int64_t),
      INCLG_SCALAR("batch_size", batch_size, int),
      INCLG_SCALAR("max_iterations", max_iterations, std::int64_t),
      INCLG_SCALAR("seed", seed, std::uint64_t),
      INCLG_SCALAR("checkpoint_interval", checkpoint_interval, std::int64_t),
      INCLG_SCALAR("validation_interval", validation_interval, std::int64_t),
      {"extractor_layers",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.extractor_layers = sequence<std::string>(n, "extractor_layers");
       }},
      INCLG_PATH("extractor_weights", extractor_weights),
      INCLG_PATH("train_images", train_images),
      INCLG_PATH("train_landmarks", train_landmarks),
      INCLG_PATH("train_masks", train_masks),
      INCLG_PATH("val_images", val_images),
      INCLG_PATH("val_landmarks", val_landmarks),
      INCLG_PATH("val_masks", val_masks),
      INCLG_PATH("test_images", test_images),
      INCLG_PATH("test_masks", test_masks),
      INCLG_PATH("test_landmarks", test_landmarks),
      INCLG_PATH("output_dir", output_dir),
      {"search_landmark_weight",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.landmark_weight = dimension(n, "search_landmark_weight", false);
       }},
      {"search_landmark_weight_choices",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.landmark_weight = dimension(n, "search_landmark_weight_choices", true);
       }},
      {"search_learning_rate",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.learning_rate = dimension(n, "search_learning_rate", false);
       }},
      {"search_decay_factor",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.decay_factor = dimension(n, "search_decay_factor", false);
       }},
      {"search_learning_rate_choices",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.learning_rate = dimension(n, "search_learning_rate_choices", true);
       }},
      {"search_decay_factor_choices",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.decay_factor = dimension(n, "search_decay_factor_choices", true);
       }},
      {"search_batch_size",
       [](TrainingConfig& c, const YAML::Node& n) {
         c.search.batch_size = dimension(n, "search_batch_size", true);
       }},
      INCLG_SCALAR("search_trials", search_trials, int),
      INCLG_SCALAR("search_iterations", search_iterations, std::int64_t),
  };
  return table;
}

#undef INCLG_SCALAR
#undef INCLG_PATH

void apply_reduced(TrainingConfig& config, const YAML::Node& node) {
  config.reduced = scalar<bool>(node, "reduced");
  if (config.reduced) config.model = ModelConfig::reduced();
}

void apply_key(TrainingConfig& config, const std::string& key, const YAML::Node& node) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, node);
}

}  // namespace

TrainingConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid key-value text: ") + e.what());
  }
  TrainingConfig config;
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw ConfigError("config must be a flat key-value mapping");

  // `reduced` resets the model geometry, so it goes first.
  if (root["reduced"]) apply_reduced(config, root["reduced"]);
  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    if (key == "reduced") continue;
    if (entry.second.IsMap()) throw ConfigError("config key '" + key + "' must not be nested");
    apply_key(config, key, entry.second);
  }
  config.validate();
  return config;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto config = parse_config(buffer.str());

  const auto base = path.parent_path();
  for (auto* p : {&config.train_images, &config.train_landmarks, &config.train_masks,
                  &config.val_images, &config.val_landmarks, &config.val_masks,
                  &config.test_images, &config.test_masks, &config.test_landmarks,
                  &config.output_dir, &config.extractor_weights}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return config;
}

void apply_overrides(TrainingConfig& config,
                     const std::map<std::string, std::string>& overrides) {
  if (const auto it = overrides.find("reduced"); it != overrides.end()) {
    apply_reduced(config, YAML::Load(it->second));
  }
  for (const auto& [key, value] : overrides) {
    if (key == "reduced") continue;
    YAML::Node node;
    try {
      node = YAML::Load(value);
    } catch (const YAML::Exception&) {
      node = YAML::Node(value);
    }
    if (node.IsNull()) node = YAML::Node(value);
    apply_key(config, key, node);
  }
  config.validate();
}

namespace {

std::string join(const std::vector<double>& values) {
  std::ostringstream out;
  out << std::setprecision(17) << '[';
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << values[i];
  out << ']';
  return out.str();
}

void write_dimension(std::ostream& out, const std::string& key,
                     const std::optional<SearchDimension>& dim) {
  if (!dim) return;
  if (!dim->choices.empty()) {
    out << (key == "search_batch_size" ? key : key + "_choices") << ": " << join(dim->choices)
        << '\n';
  } else {
    out << key << ": " << join({dim->low, dim->high}) << '\n';
  }
}

std::string quoted(const std::filesystem::path& p) {
  std::string s = p.string();
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string to_config_text(const TrainingConfig& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "reduced: " << (c.reduced ? "true" : "false") << '\n';
  out << "image_size: " << c.model.image_size << '\n';
  out << "base_channels: " << c.model.base_channels << '\n';
  out << "residual_blocks: " << c.model.residual_blocks << '\n';
  out << "residual_dilation: " << c.model.residual_dilation << '\n';
  out << "landmark_branches: [";
  for (std::size_t i = 0; i < c.model.landmark_branches.size(); ++i) {
    out << (i ? ", " : "") << c.model.landmark_branches[i];
  }
  out << "]\n";
  out << "landmark_map_size: " << c.model.landmark_map_size << '\n';
  out << "landmark_map_copies: " << c.model.landmark_map_copies << '\n';
  out << "attention_temperature: " << c.model.attention_temperature << '\n';
  out << "discriminator_channels: " << c.model.discriminator_channels << '\n';
  out << "weight_pixel: " << c.weights.pixel << '\n';
  out << "weight_landmark: " << c.weights.landmark << '\n';
  out << "weight_tv: " << c.weights.tv << '\n';
  out << "weight_style: " << c.weights.style << '\n';
  out << "weight_perceptual: " << c.weights.perceptual << '\n';
  out << "weight_adversarial: " << c.weights.adversarial << '\n';
  out << "pixel_hole_weight: " << c.pixel_hole_weight << '\n';
  out << "learning_rate: " << c.learning_rate << '\n';
  out << "discriminator_lr_ratio: " << c.discriminator_lr_ratio << '\n';
  out << "beta1: " << c.beta1 << '\n';
  out << "beta2: " << c.beta2 << '\n';
  out << "decay_factor: " << c.decay_factor << '\n';
  out << "decay_interval: " << c.decay_interval << '\n';
  out << "batch_size: " << c.batch_size << '\n';
  out << "max_iterations: " << c.max_iterations << '\n';
  out << "seed: " << c.seed << '\n';
  out << "checkpoint_interval: " << c.checkpoint_interval << '\n';
  out << "validation_interval: " << c.validation_interval << '\n';
  out << "extractor_layers: [";
  for (std::size_t i = 0; i < c.extractor_layers.size(); ++i) {
    out << (i ? ", " : "") << c.extractor_layers[i];
  }
  out << "]\n";
  out << "extractor_weights: " << quoted(c.extractor_weights) << '\n';
  out << "train_images: " << quoted(c.train_images) << '\n';
  out << "train_landmarks: " << quoted(c.train_landmarks) << '\n';
  out << "train_masks: " << quoted(c.train_masks) << '\n';
  out << "val_images: " << quoted(c.val_images) << '\n';
  out << "val_landmarks: " << quoted(c.val_landmarks) << '\n';
  out << "val_masks: " << quoted(c.val_masks) << '\n';
  out << "test_images: " << quoted(c.test_images) << '\n';
  out << "test_masks: " << quoted(c.test_masks) << '\n';
  out << "test_landmarks: " << quoted(c.test_landmarks) << '\n';
  out << "output_dir: " << quoted(c.output_dir) << '\n';
  write_dimension(out, "search_landmark_weight", c.search.landmark_weight);
  write_dimension(out, "search_learning_rate", c.search.learning_rate);
  write_dimension(out, "search_decay_factor", c.search.decay_factor);
  write_dimension(out, "search_batch_size", c.search.batch_size);
  out << "search_trials: " << c.search_trials << '\n';
  out << "search_iterations: " << c.search_iterations << '\n';
  return out.str();
}

}  // namespace inclg
