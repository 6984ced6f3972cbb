#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egoexo/tensor.hpp"

namespace egoexo {

// Minimal SHA-256 (FIPS 180-4). Used for config hashes, checkpoint hashes
// and the frozen-teacher invariant; not security sensitive.
class Sha256 {
 public:
  Sha256();
  void update(const void* bytes, size_t len);
  std::string hex();  // finalizes

  static std::string of_string(const std::string& s);
  static std::string of_file(const std::filesystem::path& path);

 private:
  void process_block(const uint8_t* block);
  uint32_t state_[8];
  uint64_t total_ = 0;
  uint8_t buf_[64];
  size_t buf_len_ = 0;
  bool done_ = false;
};

// Binary tensor file, magic "E2EV1":
//   bytes 0..4  "E2EV1"
//   u32         rank
//   u32 * rank  dims
//   f32 * n     row-major payload
// All integers and floats little-endian.
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

// Checkpoint, magic "E2EVCKPT": config JSON blob, then a named parameter
// table (name, dims, f32 payload), names in store order.
struct Checkpoint {
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> params;
};
void write_checkpoint(const std::filesystem::path& path, const std::string& config_json,
                      const std::map<std::string, Tensor>& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace egoexo
