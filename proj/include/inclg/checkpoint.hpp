#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

namespace inclg {

/// Checkpoint archive layout (libtorch zip archive):
///
///   format          "inclg-checkpoint-v1"
///   config          flat config text (see to_config_text)
///   iteration       int
///   generator/      one entry per parameter and buffer, keyed by its
///   discriminator/  hierarchical module name, e.g. "encoder.block1.feature.weight"
///   optimizer_g/    libtorch Adam state
///   optimizer_d/
///   loss_sums       float64 [8], loss_count int, best_validation float64 (NaN = none)
inline constexpr const char* kCheckpointFormat = "inclg-checkpoint-v1";

using NamedTensors = std::map<std::string, torch::Tensor>;

/// Parameters and buffers keyed by hierarchical name.
NamedTensors module_state(const torch::nn::Module& module);

void write_state(torch::serialize::OutputArchive& archive, const NamedTensors& state);

/// Reads every tensor `module` expects from `archive` and checks names and
/// shapes. Missing or unexpected keys throw CheckpointError listing both sets;
/// a shape mismatch names the first offending entry. Nothing is applied.
NamedTensors read_state(torch::serialize::InputArchive& archive, const torch::nn::Module& module,
                        const std::string& section);

/// Copies tensors into the module's parameters/buffers in place.
void apply_state(torch::nn::Module& module, const NamedTensors& state);

torch::serialize::InputArchive open_checkpoint(const std::filesystem::path& path);

}  // namespace inclg
