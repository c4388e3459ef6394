#include "inclg/checkpoint.hpp"

#include <set>
#include <sstream>

#include "inclg/errors.hpp"

namespace inclg {

NamedTensors module_state(const torch::nn::Module& module) {
  NamedTensors state;
  for (const auto& item : module.named_parameters()) state.emplace(item.key(), item.value());
  for (const auto& item : module.named_buffers()) state.emplace(item.key(), item.value());
  return state;
}

void write_state(torch::serialize::OutputArchive& archive, const NamedTensors& state) {
  for (const auto& [name, tensor] : state) archive.write(name, tensor.detach());
}

namespace {

std::string describe(const std::vector<std::string>& keys) {
  std::ostringstream out;
  for (std::size_t i = 0; i < keys.size() && i < 8; ++i) out << (i ? ", " : "") << keys[i];
  if (keys.size() > 8) out << ", ... (" << keys.size() << " total)";
  return out.str();
}

}  // namespace

NamedTensors read_state(torch::serialize::InputArchive& archive, const torch::nn::Module& module,
                        const std::string& section) {
  const auto expected = module_state(module);
  const auto stored_keys = archive.keys();
  const std::set<std::string> stored(stored_keys.begin(), stored_keys.end());

  std::vector<std::string> missing, extra;
  for (const auto& [name, _] : expected) {
    if (!stored.count(name)) missing.push_back(name);
  }
  for (const auto& name : stored) {
    if (!expected.count(name)) extra.push_back(name);
  }

  NamedTensors loaded;
  // walk in module order so the first reported mismatch is the earliest layer
  const auto check = [&](const std::string& name, const torch::Tensor& target) {
    if (!stored.count(name)) return;
    torch::Tensor value;
    archive.read(name, value, /*is_buffer=*/false);
    if (value.sizes() != target.sizes()) {
      throw CheckpointError(section + ": shape mismatch at first offending layer '" + name +
                            "': checkpoint " + c10::str(value.sizes()) + ", model " +
                            c10::str(target.sizes()));
    }
    loaded.emplace(name, value);
  };
  for (const auto& item : module.named_parameters()) check(item.key(), item.value());
  for (const auto& item : module.named_buffers()) check(item.key(), item.value());

  if (!missing.empty() || !extra.empty()) {
    throw CheckpointError(section + ": key mismatch; missing [" + describe(missing) + "], unexpected [" +
                          describe(extra) + "]");
  }
  return loaded;
}

void apply_state(torch::nn::Module& module, const NamedTensors& state) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters()) item.value().copy_(state.at(item.key()));
  for (auto& item : module.named_buffers()) item.value().copy_(state.at(item.key()));
}

torch::serialize::InputArchive open_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw CheckpointError("checkpoint not found: " + path.string());
  }
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
    c10::IValue format;
    if (!archive.try_read("format", format) || !format.isString() ||
        format.toStringRef() != kCheckpointFormat) {
      throw CheckpointError(path.string() + " is not an inclg checkpoint");
    }
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

}  // namespace inclg
