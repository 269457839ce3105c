// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "idpoe/errors.hpp"

namespace idpoe {
namespace {

constexpr char kMagic[8] = {'I', 'D', 'P', 'O', 'E', 'C', 'K', 'P'};

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw DataError("checkpoint truncated in header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json index = nlohmann::json::array();
  std::vector<torch::Tensor> payload;
  uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    auto data = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    const uint64_t nbytes = static_cast<uint64_t>(data.numel()) * sizeof(float);
    index.push_back({{"name", name},
                     {"dtype", "float32"},
                     {"shape", data.sizes().vec()},
                     {"offset", offset},
                     {"nbytes", nbytes}});
    offset += nbytes;
    payload.push_back(data);
  }
  nlohmann::json header = {{"format", "idpoe-checkpoint"},
                           {"version", Checkpoint::kVersion},
                           {"model_kind", ckpt.model_kind},
                           {"config", ckpt.config},
                           {"schedule", ckpt.schedule},
                           {"meta", ckpt.meta},
                           {"tensors", index}};
  const std::string text = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_le<uint32_t>(out, Checkpoint::kVersion);
    write_le<uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint payload is written in native little-endian order");
    for (const auto& data : payload) {
      out.write(reinterpret_cast<const char*>(data.data_ptr<float>()),
                static_cast<std::streamsize>(data.numel() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not an idpoe checkpoint");
  }
  const auto version = read_le<uint32_t>(in);
  if (version != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_le<uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.model_kind = header.value("model_kind", "");
  ckpt.config = header.value("config", nlohmann::json::object());
  ckpt.schedule = header.value("schedule", nlohmann::json::object());
  ckpt.meta = header.value("meta", nlohmann::json::object());
  const auto payload_start = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    auto shape = entry.at("shape").get<std::vector<int64_t>>();
    const auto offset = entry.at("offset").get<uint64_t>();
    const auto nbytes = entry.at("nbytes").get<uint64_t>();
    auto tensor = torch::empty(shape, torch::kFloat32);
    if (static_cast<uint64_t>(tensor.numel()) * sizeof(float) != nbytes) {
      throw DataError("checkpoint tensor size mismatch for " +
                      entry.at("name").get<std::string>());
    }
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(tensor.data_ptr<float>()),
            static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError("checkpoint payload truncated");
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), tensor);
  }
  return ckpt;
}

std::vector<std::pair<std::string, torch::Tensor>> module_tensors(
    const torch::nn::Module& module, const std::string& prefix) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : module.named_parameters()) {
    out.emplace_back(prefix + item.key(), item.value().detach().clone());
  }
  for (const auto& item : module.named_buffers()) {
    out.emplace_back(prefix + item.key(), item.value().detach().clone());
  }
  return out;
}

void load_module_tensors(torch::nn::Module& module, const Checkpoint& ckpt,
                         const std::string& prefix) {
  torch::NoGradGuard no_grad;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    const auto* src = ckpt.find(prefix + name);
    if (src == nullptr) throw DataError("checkpoint lacks tensor " + prefix + name);
    if (!src->sizes().equals(target.sizes())) {
      throw DataError("checkpoint tensor " + prefix + name + " has wrong shape");
    }
    target.copy_(*src);
  };
  for (auto& item : module.named_parameters()) assign(item.key(), item.value());
  for (auto& item : module.named_buffers()) assign(item.key(), item.value());
}

}  // namespace idpoe
