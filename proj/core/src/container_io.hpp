#pragma once

// Internal binary container shared by checkpoints ("XAVT") and attention
// dumps ("XAVA"): magic, u32 version, u64 tensor count, then per tensor
// (lexicographic by name): u32 name length, name, u8 trainable flag, u32
// rank, rank x u64 extents, row-major f32 little-endian payload.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xavt/tensor.hpp"

namespace xavt::detail {

struct RawTensor {
  Shape shape;
  bool trainable = false;
  std::string payload;  // f32 little-endian
};

void put_u32(std::string& out, uint32_t v);
void put_u64(std::string& out, uint64_t v);
void put_f32(std::string& out, float f);

uint64_t fnv1a(const std::string& bytes);

std::string serialize_payload(const Tensor& t);
Tensor payload_to_tensor(const RawTensor& raw, Dtype dt);

std::map<std::string, RawTensor> read_container(const std::string& path, const char* magic);
void write_container(const std::string& path, const char* magic,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const std::function<bool(const std::string&)>& trainable_of);

}  // namespace xavt::detail
