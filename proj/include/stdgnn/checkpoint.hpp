#pragma once

// Binary container: 8-byte magic, little-endian uint64 header length, a JSON
// header, then a little-endian payload described by the header.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdgnn/common.hpp"
#include "stdgnn/io.hpp"
#include "stdgnn/tensor.hpp"

namespace stdgnn {

inline constexpr std::array<char, 8> kContainerMagic{'S', 'T', 'D', 'G', 'N', 'N', '0', '1'};

namespace detail {

template <class T>
void append_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <class T>
T read_le(const char* p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

struct Container {
  nlohmann::json header;
  std::string payload;
};

inline void write_container(const std::filesystem::path& path, const nlohmann::json& header,
                            const std::string& payload) {
  const std::string head = header.dump();
  std::string out(kContainerMagic.begin(), kContainerMagic.end());
  detail::append_le<std::uint64_t>(out, head.size());
  out += head;
  out += payload;
  auto f = open_output(path, std::ios::binary);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw RuntimeFailure("failed writing " + path.string());
}

inline Container read_container(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  if (raw.size() < 16 || !std::equal(kContainerMagic.begin(), kContainerMagic.end(), raw.begin())) {
    throw RuntimeFailure(path.string() + ": not a stdgnn container");
  }
  const auto len = detail::read_le<std::uint64_t>(raw.data() + 8);
  if (len > raw.size() - 16) throw RuntimeFailure(path.string() + ": truncated header");
  Container c;
  try {
    c.header = nlohmann::json::parse(raw.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFailure(path.string() + ": bad header: " + e.what());
  }
  c.payload = raw.substr(16 + len);
  return c;
}

/// Saves parameter values in list order. `meta` is stored verbatim under
/// "meta" (hyperparameters, seed).
inline void save_params(const std::filesystem::path& path, const ParamList& params, const nlohmann::json& meta) {
  nlohmann::json header;
  header["kind"] = "params";
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto* p : params) {
    header["tensors"].push_back({{"name", p->name}, {"shape", p->value.shape()}});
    for (double v : p->value.storage()) detail::append_le<double>(payload, v);
  }
  write_container(path, header, payload);
}

/// Loads values into `params`, which must match the saved names and shapes.
/// Returns the stored meta object.
inline nlohmann::json load_params(const std::filesystem::path& path, const ParamList& params) {
  const auto c = read_container(path);
  const auto& tensors = c.header.at("tensors");
  if (tensors.size() != params.size()) {
    throw ValidationError(path.string() + ": checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model has " + std::to_string(params.size()));
  }
  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto name = tensors[k].at("name").get<std::string>();
    const auto shape = tensors[k].at("shape").get<std::vector<std::size_t>>();
    if (name != p.name || shape != p.value.shape()) {
      throw ValidationError(path.string() + ": tensor " + name + Tensor::shape_string(shape) +
                            " does not match " + p.name + Tensor::shape_string(p.value.shape()));
    }
    if (offset + p.value.size() * 8 > c.payload.size()) throw RuntimeFailure(path.string() + ": truncated payload");
    for (auto& v : p.value.storage()) {
      v = detail::read_le<double>(c.payload.data() + offset);
      offset += 8;
    }
  }
  if (offset != c.payload.size()) throw RuntimeFailure(path.string() + ": trailing payload bytes");
  return c.header.value("meta", nlohmann::json::object());
}

}  // namespace stdgnn
