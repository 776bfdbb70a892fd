#include "vsgg/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "json.hpp"
#include "vsgg/dataset_io.hpp"
#include "vsgg/jsonw.hpp"

namespace vsgg {
namespace {

constexpr char kMagic[8] = {'V', 'S', 'G', 'G', 'C', 'K', 'P', '1'};

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t read_u64(const std::string& bytes, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
  return v;
}

}  // namespace

void Checkpoint::add_blob(const std::string& name, const std::vector<int>& shape,
                          const std::vector<float>& data) {
  blobs.push_back(CheckpointBlob{name, shape, data});
}

const CheckpointBlob* Checkpoint::find(const std::string& name) const {
  for (const CheckpointBlob& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

std::string Checkpoint::serialize() const {
  std::vector<const CheckpointBlob*> ordered;
  ordered.reserve(blobs.size());
  for (const CheckpointBlob& b : blobs) ordered.push_back(&b);
  std::sort(ordered.begin(), ordered.end(),
            [](const CheckpointBlob* a, const CheckpointBlob* b) {
              return a->name < b->name;
            });

  JsonWriter w;
  w.begin_object();
  w.key("version").value(version).comma();
  w.key("kind").value(kind).comma();
  // The config echo is stored as a string so reserialization cannot reformat
  // it; byte-identical round trips depend on this.
  w.key("config").value(config_json).comma();
  w.key("scalars").begin_object();
  bool first = true;
  for (const auto& [k, v] : scalars) {
    if (!first) w.comma();
    first = false;
    w.key(k.c_str()).value(v);
  }
  w.end_object().comma();
  w.key("blobs").begin_array();
  uint64_t offset = 0;
  for (size_t i = 0; i < ordered.size(); ++i) {
    if (i) w.comma();
    w.begin_object();
    w.key("name").value(ordered[i]->name).comma();
    w.key("shape").array(ordered[i]->shape).comma();
    w.key("offset").value(offset).comma();
    w.key("count").value(static_cast<uint64_t>(ordered[i]->data.size()));
    w.end_object();
    offset += ordered[i]->data.size();
  }
  w.end_array();
  w.end_object();
  const std::string header = w.take();

  std::string out(kMagic, sizeof(kMagic));
  append_u64(out, header.size());
  out += header;
  for (const CheckpointBlob* b : ordered)
    out.append(reinterpret_cast<const char*>(b->data.data()), b->data.size() * 4);
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const uint64_t header_len = read_u64(bytes, 8);
  if (bytes.size() < 16 + header_len)
    throw std::runtime_error("checkpoint: truncated header");
  const nlohmann::json header = nlohmann::json::parse(bytes.substr(16, header_len));

  Checkpoint ckpt;
  ckpt.version = header.at("version").get<int>();
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.config_json = header.at("config").get<std::string>();
  for (const auto& [k, v] : header.at("scalars").items())
    ckpt.scalars[k] = v.get<std::string>();

  const size_t payload = 16 + header_len;
  for (const auto& jb : header.at("blobs")) {
    CheckpointBlob blob;
    blob.name = jb.at("name").get<std::string>();
    blob.shape = jb.at("shape").get<std::vector<int>>();
    const uint64_t offset = jb.at("offset").get<uint64_t>();
    const uint64_t count = jb.at("count").get<uint64_t>();
    if (payload + (offset + count) * 4 > bytes.size())
      throw std::runtime_error("checkpoint: truncated blob " + blob.name);
    blob.data.resize(count);
    std::memcpy(blob.data.data(), bytes.data() + payload + offset * 4, count * 4);
    ckpt.blobs.push_back(std::move(blob));
  }
  return ckpt;
}

void Checkpoint::save(const std::string& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace vsgg
