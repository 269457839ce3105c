// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/image_io.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "idpoe/errors.hpp"

namespace idpoe {

void write_ppm(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(2) != 3 || image.scalar_type() != torch::kUInt8) {
    throw ShapeError("PPM images must be uint8 (H, W, 3)");
  }
  auto data = image.contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << data.size(1) << ' ' << data.size(0) << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data_ptr<uint8_t>()),
            static_cast<std::streamsize>(data.numel()));
  if (!out) throw DataError("short write to " + path.string());
}

namespace {

// Next header token, skipping whitespace and comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

torch::Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  if (ppm_token(in) != "P6") throw DataError(path.string() + " is not a binary PPM");
  int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(ppm_token(in));
    h = std::stoll(ppm_token(in));
    maxval = std::stoll(ppm_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed PPM header in " + path.string());
  }
  if (w < 1 || h < 1 || maxval != 255) {
    throw DataError("unsupported PPM geometry in " + path.string());
  }
  auto image = torch::empty({h, w, 3}, torch::kUInt8);
  in.read(reinterpret_cast<char*>(image.data_ptr<uint8_t>()),
          static_cast<std::streamsize>(image.numel()));
  if (in.gcount() != image.numel()) throw DataError("truncated PPM " + path.string());
  return image;
}

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialisation failed");
    }
  }
  void update(const char* data, std::size_t n) {
    EVP_DigestUpdate(ctx_.get(), data, n);
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
      out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace idpoe
