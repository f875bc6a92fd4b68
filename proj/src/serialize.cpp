#include "planx/serialize.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace planx {

namespace {

// Compact SHA-256, enough for content addressing of configs and blobs.
struct Sha256 {
  std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                 0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
  std::array<std::uint8_t, 64> buf{};
  std::uint64_t total = 0;
  std::size_t fill = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void block(const std::uint8_t* p) {
    static const std::uint32_t K[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i) {
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    }
    for (int i = 16; i < 64; ++i) {
      std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto a = h;
    for (int i = 0; i < 64; ++i) {
      std::uint32_t S1 = rotr(a[4], 6) ^ rotr(a[4], 11) ^ rotr(a[4], 25);
      std::uint32_t ch = (a[4] & a[5]) ^ (~a[4] & a[6]);
      std::uint32_t t1 = a[7] + S1 + ch + K[i] + w[i];
      std::uint32_t S0 = rotr(a[0], 2) ^ rotr(a[0], 13) ^ rotr(a[0], 22);
      std::uint32_t maj = (a[0] & a[1]) ^ (a[0] & a[2]) ^ (a[1] & a[2]);
      std::uint32_t t2 = S0 + maj;
      a[7] = a[6]; a[6] = a[5]; a[5] = a[4]; a[4] = a[3] + t1;
      a[3] = a[2]; a[2] = a[1]; a[1] = a[0]; a[0] = t1 + t2;
    }
    for (int i = 0; i < 8; ++i) h[i] += a[i];
  }

  void update(const void* data, std::size_t len) {
    const std::uint8_t* p = static_cast<const std::uint8_t*>(data);
    total += len;
    while (len > 0) {
      std::size_t take = std::min(len, buf.size() - fill);
      std::memcpy(buf.data() + fill, p, take);
      fill += take;
      p += take;
      len -= take;
      if (fill == buf.size()) {
        block(buf.data());
        fill = 0;
      }
    }
  }

  std::string hex() {
    std::uint64_t bits = total * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    std::uint8_t zero = 0;
    while (fill != 56) update(&zero, 1);
    std::uint8_t lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(lenb, 8);
    char out[65];
    for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 64);
  }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
  Sha256 s;
  s.update(data, len);
  return s.hex();
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256_file: cannot open " + path);
  Sha256 s;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    s.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return s.hex();
}

std::string registry_hash(const ParamRegistry& params) {
  Sha256 s;
  for (const auto& e : params.entries) {
    s.update(e.name.data(), e.name.size());
    s.update(e.tensor.ptr(), e.tensor.numel() * sizeof(float));
  }
  return s.hex();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

void save_checkpoint(const std::string& prefix, const ParamRegistry& params,
                     const std::string& meta_json) {
  nlohmann::json manifest;
  manifest["format"] = "planx-checkpoint-v1";
  manifest["meta"] = nlohmann::json::parse(meta_json);
  std::uint64_t offset = 0;
  std::string blob;
  for (const auto& e : params.entries) {
    nlohmann::json p;
    p["name"] = e.name;
    p["shape"] = e.tensor.shape;
    p["offset"] = offset;
    manifest["params"].push_back(p);
    std::size_t bytes = e.tensor.numel() * sizeof(float);
    blob.append(reinterpret_cast<const char*>(e.tensor.ptr()), bytes);
    offset += bytes;
  }
  if (!manifest.contains("params")) manifest["params"] = nlohmann::json::array();
  write_file_atomic(prefix + ".bin", blob);
  write_file_atomic(prefix + ".json", manifest.dump(2));
}

std::string load_checkpoint(const std::string& prefix, ParamRegistry& params) {
  nlohmann::json manifest = nlohmann::json::parse(read_file(prefix + ".json"));
  std::string blob = read_file(prefix + ".bin");
  const auto& plist = manifest.at("params");
  if (plist.size() != params.entries.size()) {
    throw std::runtime_error("checkpoint " + prefix + ": expected " +
                             std::to_string(params.entries.size()) + " params, manifest has " +
                             std::to_string(plist.size()));
  }
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& e = params.entries[i];
    const auto& p = plist[i];
    if (p.at("name").get<std::string>() != e.name) {
      throw std::runtime_error("checkpoint " + prefix + ": parameter name mismatch at index " +
                               std::to_string(i) + " (" + p.at("name").get<std::string>() +
                               " vs " + e.name + ")");
    }
    std::vector<int> shape = p.at("shape").get<std::vector<int>>();
    if (shape != e.tensor.shape) {
      throw std::runtime_error("checkpoint " + prefix + ": shape mismatch for '" + e.name + "'");
    }
    std::uint64_t off = p.at("offset").get<std::uint64_t>();
    std::size_t bytes = e.tensor.numel() * sizeof(float);
    if (off + bytes > blob.size()) throw std::runtime_error("checkpoint " + prefix + ": blob too small");
    std::memcpy(e.tensor.ptr(), blob.data() + off, bytes);
  }
  return manifest.at("meta").dump();
}

bool checkpoint_exists(const std::string& prefix) {
  return std::filesystem::exists(prefix + ".json") && std::filesystem::exists(prefix + ".bin");
}

}  // namespace planx
