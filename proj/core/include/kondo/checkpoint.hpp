#pragma once

#include <filesystem>
#include <vector>

#include "kondo/tensor.hpp"

namespace kondo {

/// Checkpoint layout: a plain-text manifest followed by raw little-endian
/// float64 values in manifest order.
///
///   kondo-checkpoint 1
///   <parameter count>
///   <name> <rank> <extent>...      (one line per parameter)
///   end
///   <binary payload>
void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params);
/// Loads values into `params`; names and shapes must match the manifest.
void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace kondo
