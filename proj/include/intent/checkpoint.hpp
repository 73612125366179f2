// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint file:
//   "INTENTCK" | u32 version | u64 header length | header JSON
//   | f32 tensors in layout order
// All integers and floats little-endian. The header holds the model config
// and the declared tensor list; the loader rejects any shape mismatch.

#include <filesystem>
#include <string>

#include "intent/model.hpp"

namespace intent {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::string serialize_checkpoint(const ModelParams<T>& params);

template <typename T>
ModelParams<T> deserialize_checkpoint(std::string_view bytes);

ModelConfig checkpoint_config(std::string_view bytes);

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const std::filesystem::path& path);

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace intent
