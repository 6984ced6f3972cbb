#include "egoexo/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace egoexo {

namespace {

constexpr uint32_t kSha256K[64] = {
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

inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

}  // namespace

Sha256::Sha256() {
  state_[0] = 0x6a09e667;
  state_[1] = 0xbb67ae85;
  state_[2] = 0x3c6ef372;
  state_[3] = 0xa54ff53a;
  state_[4] = 0x510e527f;
  state_[5] = 0x9b05688c;
  state_[6] = 0x1f83d9ab;
  state_[7] = 0x5be0cd19;
}

void Sha256::process_block(const uint8_t* p) {
  uint32_t w[64];
  for (int i = 0; i < 16; ++i)
    w[i] = (uint32_t(p[i * 4]) << 24) | (uint32_t(p[i * 4 + 1]) << 16) |
           (uint32_t(p[i * 4 + 2]) << 8) | uint32_t(p[i * 4 + 3]);
  for (int i = 16; i < 64; ++i) {
    const uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
    const uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
    w[i] = w[i - 16] + s0 + w[i - 7] + s1;
  }
  uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3];
  uint32_t e = state_[4], f = state_[5], g = state_[6], h = state_[7];
  for (int i = 0; i < 64; ++i) {
    const uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
    const uint32_t ch = (e & f) ^ (~e & g);
    const uint32_t t1 = h + s1 + ch + kSha256K[i] + w[i];
    const uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
    const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
    const uint32_t t2 = s0 + maj;
    h = g; g = f; f = e; e = d + t1;
    d = c; c = b; b = a; a = t1 + t2;
  }
  state_[0] += a; state_[1] += b; state_[2] += c; state_[3] += d;
  state_[4] += e; state_[5] += f; state_[6] += g; state_[7] += h;
}

void Sha256::update(const void* bytes, size_t len) {
  if (done_) throw ContractError("Sha256: update after finalize");
  const uint8_t* p = static_cast<const uint8_t*>(bytes);
  total_ += len;
  while (len > 0) {
    const size_t take = std::min(len, sizeof(buf_) - buf_len_);
    std::memcpy(buf_ + buf_len_, p, take);
    buf_len_ += take;
    p += take;
    len -= take;
    if (buf_len_ == sizeof(buf_)) {
      process_block(buf_);
      buf_len_ = 0;
    }
  }
}

std::string Sha256::hex() {
  if (!done_) {
    const uint64_t bit_len = total_ * 8;
    const uint8_t pad = 0x80;
    update(&pad, 1);
    total_ -= 1;
    const uint8_t zero = 0;
    while (buf_len_ != 56) {
      update(&zero, 1);
      total_ -= 1;
    }
    uint8_t len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = uint8_t(bit_len >> (56 - 8 * i));
    update(len_bytes, 8);
    done_ = true;
  }
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (uint32_t s : state_)
    for (int i = 28; i >= 0; i -= 4) out.push_back(digits[(s >> i) & 0xF]);
  return out;
}

std::string Sha256::of_string(const std::string& s) {
  Sha256 h;
  h.update(s.data(), s.size());
  return h.hex();
}

std::string Sha256::of_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for hashing: " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h.update(buf, static_cast<size_t>(f.gcount()));
  }
  return h.hex();
}

// ---- little-endian primitives -------------------------------------------

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated file while reading u32");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void put_f32s(std::ostream& os, const std::vector<Scalar>& data) {
  std::vector<float> f(data.size());
  for (size_t i = 0; i < data.size(); ++i) f[i] = static_cast<float>(data[i]);
  os.write(reinterpret_cast<const char*>(f.data()),
           static_cast<std::streamsize>(f.size() * sizeof(float)));
}

std::vector<Scalar> get_f32s(std::istream& is, size_t n) {
  std::vector<float> f(n);
  is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw IoError("truncated file while reading f32 payload");
  std::vector<Scalar> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<Scalar>(f[i]);
  return out;
}

void check_magic(std::istream& is, const char* magic, const std::string& what) {
  const size_t len = std::strlen(magic);
  std::string got(len, '\0');
  is.read(got.data(), static_cast<std::streamsize>(len));
  if (!is || got != magic) throw IoError("bad magic in " + what + " (expected " + magic + ")");
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write tensor file: " + path.string());
  f.write("E2EV1", 5);
  put_u32(f, static_cast<uint32_t>(t.shape().size()));
  for (int d : t.shape()) put_u32(f, static_cast<uint32_t>(d));
  put_f32s(f, t.data());
  if (!f) throw IoError("write failed: " + path.string());
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open tensor file: " + path.string());
  check_magic(f, "E2EV1", path.string());
  const uint32_t rank = get_u32(f);
  if (rank > 8) throw IoError("implausible tensor rank in " + path.string());
  std::vector<int> shape(rank);
  size_t n = 1;
  for (auto& d : shape) {
    d = static_cast<int>(get_u32(f));
    n *= static_cast<size_t>(d);
  }
  return Tensor::from_data(shape, get_f32s(f, n));
}

void write_checkpoint(const std::filesystem::path& path, const std::string& config_json,
                      const std::map<std::string, Tensor>& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path.string());
  f.write("E2EVCKPT", 8);
  put_u32(f, static_cast<uint32_t>(config_json.size()));
  f.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  put_u32(f, static_cast<uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) put_u32(f, static_cast<uint32_t>(d));
    put_f32s(f, t.data());
  }
  if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  check_magic(f, "E2EVCKPT", path.string());
  Checkpoint ck;
  const uint32_t json_len = get_u32(f);
  ck.config_json.resize(json_len);
  f.read(ck.config_json.data(), json_len);
  const uint32_t count = get_u32(f);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t rank = get_u32(f);
    std::vector<int> shape(rank);
    size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<int>(get_u32(f));
      n *= static_cast<size_t>(d);
    }
    ck.params.emplace_back(std::move(name), Tensor::from_data(shape, get_f32s(f, n)));
  }
  if (!f) throw IoError("truncated checkpoint: " + path.string());
  return ck;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write: " + path.string());
  f << content;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace egoexo
