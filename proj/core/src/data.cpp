#include "xavt/data.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "container_io.hpp"

namespace xavt {

namespace fs = std::filesystem;

void write_sample_file(const std::string& path, const Sample& s) {
  if (s.video.rank() != 4) throw ShapeError("sample video must be [2T,H,W,C]");
  if (s.audio.rank() != 2) throw ShapeError("sample audio must be [T_spec,mel]");
  std::string out;
  out += "XAVC";
  detail::put_u32(out, 1);
  detail::put_u64(out, 1);  // B
  for (int i = 0; i < 4; ++i) detail::put_u64(out, static_cast<uint64_t>(s.video.extent(i)));
  detail::put_u64(out, static_cast<uint64_t>(s.audio.extent(0)));
  detail::put_u64(out, static_cast<uint64_t>(s.audio.extent(1)));
  out += detail::serialize_payload(s.video);
  out += detail::serialize_payload(s.audio);
  detail::put_u32(out, static_cast<uint32_t>(s.label));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed: " + path);
}

namespace {

uint32_t take_u32(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) throw IoError("truncated clip file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
  return v;
}

uint64_t take_u64(const std::string& buf, size_t& pos) {
  if (pos + 8 > buf.size()) throw IoError("truncated clip file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
  return v;
}

std::vector<float> take_f32s(const std::string& buf, size_t& pos, int64_t n) {
  if (pos + static_cast<size_t>(n) * 4 > buf.size()) throw IoError("truncated clip file");
  std::vector<float> out(static_cast<size_t>(n));
  for (auto& v : out) {
    uint32_t bits = take_u32(buf, pos);
    std::memcpy(&v, &bits, 4);
  }
  return out;
}

}  // namespace

Sample read_sample_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t pos = 0;
  if (buf.size() < 4 || buf.substr(0, 4) != "XAVC") throw IoError(path + ": bad magic, expected XAVC");
  pos = 4;
  uint32_t version = take_u32(buf, pos);
  if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
  uint64_t b = take_u64(buf, pos);
  if (b != 1) throw IoError(path + ": expected one sample per file, got B=" + std::to_string(b));
  int64_t f2 = static_cast<int64_t>(take_u64(buf, pos));
  int64_t h = static_cast<int64_t>(take_u64(buf, pos));
  int64_t w = static_cast<int64_t>(take_u64(buf, pos));
  int64_t c = static_cast<int64_t>(take_u64(buf, pos));
  int64_t tspec = static_cast<int64_t>(take_u64(buf, pos));
  int64_t mel = static_cast<int64_t>(take_u64(buf, pos));
  Sample s;
  s.video = Tensor::from({f2, h, w, c}, take_f32s(buf, pos, f2 * h * w * c));
  s.audio = Tensor::from({tspec, mel}, take_f32s(buf, pos, tspec * mel));
  s.label = static_cast<int64_t>(take_u32(buf, pos));
  return s;
}

void write_index(const std::string& path,
                 const std::vector<std::pair<std::string, int64_t>>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  for (const auto& [p, label] : rows) os << p << '\t' << label << '\n';
  if (!os) throw IoError("write failed: " + path);
}

std::vector<std::pair<std::string, int64_t>> read_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::pair<std::string, int64_t>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw IoError(path + ": malformed index line: " + line);
    out.emplace_back(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  return out;
}

std::vector<Sample> load_dataset(const std::string& index_path) {
  fs::path base = fs::path(index_path).parent_path();
  std::vector<Sample> out;
  for (const auto& [rel, label] : read_index(index_path)) {
    Sample s = read_sample_file((base / rel).string());
    if (s.label != label)
      throw IoError("label mismatch for " + rel + ": index says " + std::to_string(label) +
                    ", file says " + std::to_string(s.label));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace xavt
