#pragma once

// Single-archive parameter checkpoints: binary blobs keyed by module path
// plus a config fingerprint that is verified on load.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msgnet/nn.hpp"

namespace msgnet {

// FNV-1a 64-bit over a canonical string, rendered as 16 hex digits.
std::string fingerprint(const std::string& canonical);

struct Checkpoint {
  std::string kind;         // "scene" | "enhancer" | "detector"
  std::string config_hash;  // fingerprint of the producing config
  std::map<std::string, std::vector<double>> entries;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Convenience: dump a registry under a kind/config hash, or restore into one.
// Loading verifies kind and fingerprint and throws std::runtime_error on
// mismatch.
void save_registry(const ParamRegistry& reg, const std::string& kind,
                   const std::string& config_hash, const std::filesystem::path& path);
void load_registry(ParamRegistry& reg, const std::string& kind, const std::string& config_hash,
                   const std::filesystem::path& path);

}  // namespace msgnet
