#pragma once

#include <filesystem>
#include <vector>

#include "spectlv/tensor.hpp"

namespace spectlv {

// Checkpoint file: 8-byte magic "SPLVCKPT", uint32 little-endian header
// length, JSON header [{"name","shape"}...], then one float32 little-endian
// payload per tensor in header order.
void save_checkpoint(const std::vector<Tensor<float>*>& tensors,
                     const std::filesystem::path& path);

// Loads into the given tensors; names and shapes must match the file.
void load_checkpoint(const std::vector<Tensor<float>*>& tensors,
                     const std::filesystem::path& path);

}  // namespace spectlv
