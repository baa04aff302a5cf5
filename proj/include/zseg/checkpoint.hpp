#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "zseg/layers.hpp"

namespace zseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Everything needed to resume training or to reuse weights.
///
/// On disk: "ZSEG", u32 version, then length-prefixed strings and
/// little-endian integers for the header fields, a (name, u64) counter
/// table, and a (name, 4 x u32 dims, f32 data) tensor table.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string architecture;
  std::uint32_t base_width = 0;
  std::uint32_t levels = 0;
  std::uint32_t discriminator_levels = 0;
  std::uint64_t epoch = 0;  // completed epochs
  std::string rng_state;
  std::vector<std::pair<std::string, std::uint64_t>> counters;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  /// Throws CheckpointError(names) when missing.
  std::uint64_t counter(const std::string& name) const;
  void set_counter(const std::string& name, std::uint64_t value);
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
/// Throws CheckpointError with bad_magic, version or truncated faults.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& source = "buffer");

/// Writes atomically through a temporary file in the same directory.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// What a parameter capture or restore covers.
enum class StateScope {
  weights,           // parameters and normalization buffers
  training,          // weights plus optimizer slots
};

/// Appends the set's tensors under `prefix` ("gen." etc.). Optimizer slots
/// are stored as "<name>/velocity", "<name>/moment1", "<name>/moment2".
void capture(const BasicParameterSet<float>& params, const std::string& prefix, StateScope scope,
             Checkpoint& checkpoint);

/// Copies tensors back. Throws CheckpointError(names) when a required name
/// is absent, or when the checkpoint holds names under `prefix` that the set
/// does not know; CheckpointError(shape) on a shape mismatch.
void restore(BasicParameterSet<float>& params, const std::string& prefix, StateScope scope,
             const Checkpoint& checkpoint);

}  // namespace zseg
