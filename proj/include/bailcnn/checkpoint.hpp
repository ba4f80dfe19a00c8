#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bailcnn/errors.hpp"
#include "bailcnn/io.hpp"
#include "bailcnn/model.hpp"

namespace bailcnn {

// Checkpoint layout:
//   "BAILCNN1" | version byte | u32 header length | UTF-8 JSON header
//   | raw little-endian f32 blobs | u32 CRC-32 of header+blobs
// The header carries the ModelConfig and a tensor manifest of
// (name, shape, dtype, byte offset into the blob section).

inline constexpr std::string_view kCheckpointMagic = "BAILCNN1";
inline constexpr uint8_t kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size},
                        {"embed_dim", c.embed_dim},
                        {"conv1_filters", c.conv1_filters},
                        {"conv2_filters", c.conv2_filters},
                        {"kernel_size", c.kernel_size},
                        {"pool_size", c.pool_size},
                        {"dropout_rate", c.dropout_rate},
                        {"dense1_units", c.dense1_units},
                        {"dense2_units", c.dense2_units},
                        {"output_units", c.output_units},
                        {"max_len", c.max_len}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.embed_dim = j.at("embed_dim").get<size_t>();
  c.conv1_filters = j.at("conv1_filters").get<size_t>();
  c.conv2_filters = j.at("conv2_filters").get<size_t>();
  c.kernel_size = j.at("kernel_size").get<size_t>();
  c.pool_size = j.at("pool_size").get<size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.dense1_units = j.at("dense1_units").get<size_t>();
  c.dense2_units = j.at("dense2_units").get<size_t>();
  c.output_units = j.at("output_units").get<size_t>();
  c.max_len = j.at("max_len").get<size_t>();
  return c;
}

inline void append_f32le(std::string& out, const float* values, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &values[i], 4);
    io::put_u32le(out, bits);
  }
}

}  // namespace detail

inline std::string checkpoint_bytes(const Parameters<float>& params,
                                    const ModelConfig& config) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string blobs;
  size_t offset = 0;
  params.for_each([&](const char* name, const Tensor<float>& t) {
    manifest.push_back(nlohmann::json{{"name", name},
                                      {"shape", t.shape},
                                      {"dtype", "f32"},
                                      {"offset", offset}});
    detail::append_f32le(blobs, t.ptr(), t.numel());
    offset += t.numel() * 4;
  });
  nlohmann::json header{{"config", detail::config_to_json(config)},
                        {"tensors", manifest}};
  const std::string header_str = header.dump();

  std::string out;
  out.reserve(13 + header_str.size() + blobs.size() + 4);
  out += kCheckpointMagic;
  out.push_back(static_cast<char>(kCheckpointVersion));
  io::put_u32le(out, static_cast<uint32_t>(header_str.size()));
  out += header_str;
  out += blobs;

  std::string payload = header_str + blobs;
  io::put_u32le(out, io::crc32_of(payload));
  return out;
}

inline void save_checkpoint(const Parameters<float>& params,
                            const ModelConfig& config,
                            const std::filesystem::path& path) {
  io::write_file(path, checkpoint_bytes(params, config));
}

inline std::pair<Parameters<float>, ModelConfig> checkpoint_parse(
    std::string_view bytes) {
  if (bytes.size() < 13 || bytes.substr(0, 8) != kCheckpointMagic) {
    throw DataError("checkpoint: bad magic (not a BAILCNN1 file)");
  }
  const uint8_t version = static_cast<uint8_t>(bytes[8]);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  }
  const uint32_t header_len = io::get_u32le(bytes, 9);
  if (13 + static_cast<size_t>(header_len) + 4 > bytes.size()) {
    throw DataError("checkpoint: truncated header");
  }
  const std::string_view payload = bytes.substr(13, bytes.size() - 13 - 4);
  const uint32_t want_crc = io::get_u32le(bytes, bytes.size() - 4);
  if (io::crc32_of(payload) != want_crc) {
    throw DataError("checkpoint: CRC mismatch (file corrupt or truncated)");
  }

  const nlohmann::json header = nlohmann::json::parse(
      payload.substr(0, header_len), nullptr, false);
  if (header.is_discarded()) {
    throw DataError("checkpoint: unparseable header");
  }
  ModelConfig config = detail::config_from_json(header.at("config"));
  config.validate();

  Parameters<float> params = Parameters<float>::zeros(config);
  const std::string_view blobs = payload.substr(header_len);

  size_t manifest_index = 0;
  const auto& tensors = header.at("tensors");
  params.for_each([&](const char* name, Tensor<float>& t) {
    if (manifest_index >= tensors.size()) {
      throw DataError(std::string("checkpoint: manifest missing tensor ") +
                      name);
    }
    const auto& entry = tensors[manifest_index++];
    if (entry.at("name").get<std::string>() != name) {
      throw DataError("checkpoint: manifest tensor '" +
                      entry.at("name").get<std::string>() + "' where '" +
                      name + "' was expected");
    }
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw DataError(std::string("checkpoint: unsupported dtype for ") +
                      name);
    }
    const auto shape = entry.at("shape").get<std::vector<size_t>>();
    if (shape != t.shape) {
      throw DataError(std::string("checkpoint: shape mismatch for ") + name +
                      ": manifest " + shape_string(shape) + ", config needs " +
                      shape_string(t.shape));
    }
    const size_t offset = entry.at("offset").get<size_t>();
    const size_t nbytes = t.numel() * 4;
    if (offset + nbytes > blobs.size()) {
      throw DataError(std::string("checkpoint: blob out of range for ") +
                      name);
    }
    for (size_t i = 0; i < t.numel(); ++i) {
      const uint32_t bits = io::get_u32le(blobs, offset + i * 4);
      std::memcpy(&t.data[i], &bits, 4);
    }
  });
  if (manifest_index != tensors.size()) {
    throw DataError("checkpoint: manifest has extra tensors");
  }
  return {std::move(params), config};
}

inline std::pair<Parameters<float>, ModelConfig> load_checkpoint(
    const std::filesystem::path& path) {
  return checkpoint_parse(io::read_file(path));
}

}  // namespace bailcnn
