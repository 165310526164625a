#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "lstp/tensor/adam.hpp"
#include "lstp/tensor/array.hpp"
#include "lstp/tensor/params.hpp"

namespace lstp::tensor {

enum class Precision : std::uint8_t { kF32, kF64 };

template <typename T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::kF32 : Precision::kF64;
}

/// One named array as stored on disk: little-endian raw bytes.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  Precision precision = Precision::kF32;
  std::vector<std::byte> bytes;

  template <typename T>
  static CheckpointEntry from_array(std::string name, const Array<T>& array);

  /// Converts to the requested precision if the stored one differs.
  template <typename T>
  Array<T> to_array() const;
};

/// A manifest of string metadata plus an ordered list of arrays.
/// See docs/checkpoint_format.md for the byte layout.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  const CheckpointEntry& at(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
void append_params(Checkpoint& ckpt, const ParamStore<T>& params, const std::string& prefix = "");

/// Loads arrays `prefix + name` for every name already present in `params`;
/// shapes must match exactly.
template <typename T>
void load_params(const Checkpoint& ckpt, ParamStore<T>& params, const std::string& prefix = "");

/// Optimizer state as `adam.m/<name>`, `adam.v/<name>` arrays plus the
/// `adam.t`, `adam.lr`, ... metadata keys.
template <typename T>
void append_adam(Checkpoint& ckpt, const Adam<T>& adam, const ParamStore<T>& params);

template <typename T>
void load_adam(const Checkpoint& ckpt, Adam<T>& adam, const ParamStore<T>& params);

}  // namespace lstp::tensor
