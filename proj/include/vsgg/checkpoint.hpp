#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vsgg/nn.hpp"

namespace vsgg {

// Versioned binary container: magic, length-prefixed JSON header (config
// echo, scalar metadata, blob directory), then packed float32 payloads.
// Blobs are stored sorted by name, so save -> load -> save is byte-identical.
struct CheckpointBlob {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  int version = 1;
  std::string kind;         // "stage1" | "stage2" | ...
  std::string config_json;  // full run-config echo (raw JSON)
  std::map<std::string, std::string> scalars;
  std::vector<CheckpointBlob> blobs;

  void add_blob(const std::string& name, const std::vector<int>& shape,
                const std::vector<float>& data);
  const CheckpointBlob* find(const std::string& name) const;

  template <typename T>
  void pack_params(const nn::ParamRefs<T>& params, const std::string& prefix = "") {
    for (const nn::Param<T>* p : params) {
      std::vector<float> data(p->w.size());
      for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(p->w[i]);
      add_blob(prefix + p->name, p->shape, data);
    }
  }

  template <typename T>
  void unpack_params(const nn::ParamRefs<T>& params, const std::string& prefix = "") const {
    for (nn::Param<T>* p : params) {
      const CheckpointBlob* blob = find(prefix + p->name);
      if (blob == nullptr)
        throw std::runtime_error("checkpoint: missing blob " + prefix + p->name);
      if (blob->data.size() != p->w.size())
        throw std::runtime_error("checkpoint: size mismatch for " + p->name);
      for (size_t i = 0; i < p->w.size(); ++i) p->w[i] = static_cast<T>(blob->data[i]);
    }
  }

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// FNV-1a over the packed float32 image of the parameters; used for the
// frozen-denoiser assertion.
template <typename T>
uint64_t param_checksum(const nn::ParamRefs<T>& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const nn::Param<T>* p : params)
    for (const T& v : p->w) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      static_assert(sizeof(bits) == sizeof(f));
      __builtin_memcpy(&bits, &f, sizeof(bits));
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
  return h;
}

}  // namespace vsgg
