#include "container_io.hpp"

#include <cstring>
#include <fstream>

namespace xavt::detail {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("truncated container file");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string serialize_payload(const Tensor& t) {
  std::string out;
  Tensor f = t.dtype() == Dtype::kF32 ? t : t.to(Dtype::kF32);
  auto data = f.data<float>();
  out.reserve(data.size() * 4);
  for (float v : data) put_f32(out, v);
  return out;
}

Tensor payload_to_tensor(const RawTensor& raw, Dtype dt) {
  std::vector<float> values(raw.payload.size() / 4);
  Reader r(raw.payload);
  for (auto& v : values) {
    uint32_t bits = r.u32();
    std::memcpy(&v, &bits, 4);
  }
  Tensor t = Tensor::from(raw.shape, std::move(values));
  return dt == Dtype::kF32 ? t : t.to(Dtype::kF64);
}

std::map<std::string, RawTensor> read_container(const std::string& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);
  std::string m = r.bytes(4);
  if (m != magic) throw IoError(path + ": bad magic, expected " + magic);
  uint32_t version = r.u32();
  if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
  uint64_t count = r.u64();
  std::map<std::string, RawTensor> out;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    RawTensor raw;
    raw.trainable = r.u8() != 0;
    uint32_t rank = r.u32();
    int64_t n = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      uint64_t e = r.u64();
      raw.shape.push_back(static_cast<int64_t>(e));
      n *= static_cast<int64_t>(e);
    }
    raw.payload = r.bytes(static_cast<size_t>(n) * 4);
    if (out.count(name)) throw IoError(path + ": duplicate tensor name " + name);
    out.emplace(std::move(name), std::move(raw));
  }
  return out;
}

void write_container(const std::string& path, const char* magic,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const std::function<bool(const std::string&)>& trainable_of) {
  std::string out;
  out += magic;
  put_u32(out, 1);
  put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    out.push_back(trainable_of(name) ? 1 : 0);
    put_u32(out, static_cast<uint32_t>(t->rank()));
    for (int64_t e : t->shape()) put_u64(out, static_cast<uint64_t>(e));
    out += serialize_payload(*t);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace xavt::detail
