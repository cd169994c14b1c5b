#pragma once

#include <filesystem>
#include <string>

#include "vmg/model.hpp"

namespace vmg {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  VMGNetwork network;
  /// Textual engine state so a run can continue its random stream.
  std::string rng_state;
};

/// JSON document with the network config, every parameter tensor, the
/// input/target statistics and the RNG state. Doubles round-trip exactly.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws std::runtime_error for unreadable files, unknown versions or
/// tensors whose shapes disagree with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

}  // namespace vmg
