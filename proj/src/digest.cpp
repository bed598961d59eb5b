#include "ait/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace ait {

namespace {

struct DigestCtx {
  EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~DigestCtx() {
    EVP_MD_CTX_free(ctx);
    EVP_MD_free(md);
  }
};

}  // namespace

Sha256 sha256(std::span<const std::uint8_t> data) {
  thread_local DigestCtx d;
  Sha256 out{};
  unsigned int len = 0;
  if (!d.md || !d.ctx || EVP_DigestInit_ex(d.ctx, d.md, nullptr) != 1 ||
      EVP_DigestUpdate(d.ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(d.ctx, out.data(), &len) != 1 ||
      len != out.size())
    throw std::runtime_error("sha256 failed");
  return out;
}

Sha256 sha256(std::string_view data) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

}  // namespace ait
