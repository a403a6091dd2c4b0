#include "msgnet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace msgnet {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  uint64_t n = read_pod<uint64_t>(in);
  if (n > (1ull << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

std::string fingerprint(const std::string& canonical) {
  uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_string(out, ckpt.kind);
  write_string(out, ckpt.config_hash);
  write_pod<uint64_t>(out, ckpt.entries.size());
  for (const auto& [key, values] : ckpt.entries) {
    write_string(out, key);
    write_pod<uint64_t>(out, values.size());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + ": not an msgnet checkpoint");
  Checkpoint ckpt;
  ckpt.kind = read_string(in);
  ckpt.config_hash = read_string(in);
  uint64_t count = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string key = read_string(in);
    uint64_t n = read_pod<uint64_t>(in);
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated tensor data");
    ckpt.entries.emplace(std::move(key), std::move(values));
  }
  return ckpt;
}

void save_registry(const ParamRegistry& reg, const std::string& kind,
                   const std::string& config_hash, const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.config_hash = config_hash;
  ckpt.entries = reg.dump_values();
  save_checkpoint(ckpt, path);
}

void load_registry(ParamRegistry& reg, const std::string& kind, const std::string& config_hash,
                   const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != kind)
    throw std::runtime_error(path.string() + ": checkpoint kind '" + ckpt.kind +
                             "' does not match expected '" + kind + "'");
  if (ckpt.config_hash != config_hash)
    throw std::runtime_error(path.string() + ": config fingerprint mismatch (" +
                             ckpt.config_hash + " vs " + config_hash + ")");
  reg.load_values(ckpt.entries);
}

}  // namespace msgnet
