#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ganblend/config.hpp"
#include "ganblend/tensor.hpp"

namespace ganblend {

// Keys compare bytewise, which is the order entries take in a GWTC file.
using ParamMap = std::map<std::string, Tensor, std::less<>>;

// Throws Error(Manifest) naming the first missing, unexpected or mis-shaped parameter.
void validate_manifest(const GeneratorConfig& config, const ParamMap& params);

// Immutable generator parameter set whose names and shapes match manifest(meta).
class Checkpoint {
 public:
  Checkpoint(GeneratorConfig meta, ParamMap params);

  const GeneratorConfig& meta() const noexcept { return meta_; }
  const ParamMap& params() const noexcept { return params_; }
  const Tensor& param(std::string_view name) const;
  std::size_t size() const noexcept { return params_.size(); }

 private:
  GeneratorConfig meta_;
  ParamMap params_;
};

bool bit_equal(const Checkpoint& a, const Checkpoint& b) noexcept;

// GWTC v1, little-endian:
//   "GWTC" | u32 version=1 | u64 entry_count
//   per entry (sorted by name): u32 name_len | name | u8 dtype | u8 rank |
//     rank x u32 dims | u64 payload_len | payload
// dtype 0 = f32 tensor, dtype 1 = raw bytes (only "__meta__", rank 0, holding
// the config as canonical JSON).
inline constexpr std::string_view kGwtcMagic = "GWTC";
inline constexpr std::uint32_t kGwtcVersion = 1;
inline constexpr std::string_view kMetaEntryName = "__meta__";

std::vector<std::uint8_t> encode_gwtc(const Checkpoint& ckpt);
Checkpoint decode_gwtc(std::span<const std::uint8_t> bytes);

void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

// In-memory model store. Concurrent readers, serialized writers; entries are
// immutable once inserted.
class Registry {
 public:
  struct Entry {
    std::string id;
    std::string name;
    std::shared_ptr<const Checkpoint> checkpoint;
  };

  std::string put(Checkpoint ckpt, std::string name = {});
  std::shared_ptr<const Checkpoint> get(std::string_view id) const;
  Entry entry(std::string_view id) const;
  std::vector<Entry> list() const;

 private:
  mutable std::shared_mutex mutex_;
  std::vector<Entry> entries_;
  std::uint64_t next_id_ = 1;
};

}  // namespace ganblend
