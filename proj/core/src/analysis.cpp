#include "xavt/analysis.hpp"

#include <cmath>
#include <fstream>

#include "container_io.hpp"

namespace xavt {

void AttentionDump::add(int layer, const std::string& dir, Tensor weights) {
  if (weights.rank() != 3) throw ShapeError("dump entries must be [heads, queries, keys]");
  entries[{layer, dir}] = std::move(weights);
  depth = std::max(depth, layer);
}

bool AttentionDump::has(int layer, const std::string& dir) const {
  return entries.count({layer, dir}) > 0;
}

const Tensor& AttentionDump::at(int layer, const std::string& dir) const {
  auto it = entries.find({layer, dir});
  if (it == entries.end())
    throw ContractError("attention dump has no entry for layer " + std::to_string(layer) +
                        " direction " + dir);
  return it->second;
}

AttentionDump collect_dump(const Model& m, const Sample& s) {
  auto [video, audio] = extract_view(s, m.config(), 0, 1, 0, 1);
  InstrumentSink sink;
  ForwardCtx ctx;
  ctx.sink = &sink;
  m.forward(video, m.config().has_audio() ? &audio : nullptr, &ctx);
  AttentionDump dump;
  for (const AttnRecord& r : sink.records) dump.add(r.layer, r.dir, r.dense());
  dump.depth = m.config().depth;
  return dump;
}

void save_dump(const AttentionDump& dump, const std::string& path) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const auto& [key, t] : dump.entries)
    tensors.emplace_back("layer" + std::to_string(key.first) + "." + key.second, &t);
  std::sort(tensors.begin(), tensors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  detail::write_container(path, "XAVA", tensors, [](const std::string&) { return false; });
}

AttentionDump load_dump(const std::string& path) {
  AttentionDump dump;
  for (const auto& [name, raw] : detail::read_container(path, "XAVA")) {
    if (name.rfind("layer", 0) != 0)
      throw IoError(path + ": unexpected tensor name " + name);
    size_t dot = name.find('.');
    if (dot == std::string::npos) throw IoError(path + ": unexpected tensor name " + name);
    int layer = std::stoi(name.substr(5, dot - 5));
    std::string dir = name.substr(dot + 1);
    dump.add(layer, dir, detail::payload_to_tensor(raw, Dtype::kF32));
  }
  return dump;
}

double entropy_ratio(const Tensor& weights) {
  if (weights.rank() != 3) throw ShapeError("entropy_ratio expects [heads, queries, keys]");
  int64_t rows = weights.extent(0) * weights.extent(1);
  int64_t keys = weights.extent(2);
  if (keys == 1) return 1.0;  // a singleton row is uniform
  double log_k = std::log(static_cast<double>(keys));
  double acc = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    // H/ln(K) written as 1 - sum(w*ln(K*w))/ln(K) so uniform rows hit 1.0
    // exactly and one-hot rows hit 0.0 exactly
    double deficit = 0.0;
    for (int64_t j = 0; j < keys; ++j) {
      double w = weights.at(r * keys + j);
      if (w > 0.0) deficit += w * std::log(static_cast<double>(keys) * w);
    }
    acc += 1.0 - deficit / log_k;
  }
  return acc / static_cast<double>(rows);
}

double entropy_ratio(const AttentionDump& dump, int layer, const std::string& dir) {
  return entropy_ratio(dump.at(layer, dir));
}

std::vector<double> entropy_curve(const Model& m, const std::vector<Sample>& samples,
                                  const std::string& dir) {
  if (samples.empty()) throw ContractError("entropy_curve: no samples");
  int depth = m.config().depth;
  std::vector<double> acc(static_cast<size_t>(depth), 0.0);
  for (const Sample& s : samples) {
    AttentionDump dump = collect_dump(m, s);
    for (int l = 1; l <= depth; ++l)
      acc[static_cast<size_t>(l - 1)] += entropy_ratio(dump, l, dir);
  }
  for (double& v : acc) v /= static_cast<double>(samples.size());
  return acc;
}

AttentionMap export_attention_map(const AttentionDump& dump, const ModelConfig& cfg, int layer,
                                  const std::string& dir, int64_t query) {
  if (dir.size() != 3 || dir[1] != '2')
    throw ContractError("export_attention_map: direction must look like 's2a'");
  char key_expert = dir[0];
  char query_expert = dir[2];
  if (key_expert != 's' && key_expert != 't')
    throw ContractError("export_attention_map: key side of '" + dir +
                        "' has no (frame, patch) layout");
  const Tensor& w = dump.at(layer, dir);
  int64_t heads = w.extent(0), q_total = w.extent(1), k_total = w.extent(2);
  if (query < 0) {
    // default: the query expert's class token (token 0 of row 0)
    if (query_expert == 't')
      throw ContractError("export_attention_map: temporal queries have no class token; pass an "
                          "explicit query index");
    query = 0;
  }
  if (query >= q_total)
    throw ContractError("export_attention_map: query index out of range");

  int gh = cfg.grid_h(), gw = cfg.grid_w(), t = cfg.t();
  int64_t n = static_cast<int64_t>(gh) * gw;
  bool key_cls = key_expert == 's';  // spatial keys carry a per-frame class token
  int64_t per_frame = n + (key_cls ? 1 : 0);
  if (k_total % per_frame != 0 || k_total / per_frame != t)
    throw ContractError("export_attention_map: key layout does not match the configuration");

  AttentionMap map;
  map.grid_h = gh;
  map.grid_w = gw;
  double max_w = 0.0;
  std::vector<Tensor> raw;
  for (int f = 0; f < t; ++f) {
    Tensor grid = Tensor::zeros({gh, gw}, Dtype::kF32);
    for (int64_t i = 0; i < n; ++i) {
      int64_t key = f * per_frame + (key_cls ? 1 : 0) + i;
      double acc = 0.0;
      for (int64_t h = 0; h < heads; ++h) acc += w.at((h * q_total + query) * k_total + key);
      double v = acc / static_cast<double>(heads);
      grid.set(i, v);
      max_w = std::max(max_w, v);
    }
    raw.push_back(grid);
  }
  for (Tensor& grid : raw) {
    if (max_w > 0.0)
      for (int64_t i = 0; i < grid.numel(); ++i) grid.set(i, grid.at(i) / max_w);
    map.frames.push_back(grid);
  }
  return map;
}

void write_pgm(const Tensor& grid, const std::string& path) {
  if (grid.rank() != 2) throw ShapeError("write_pgm expects a [h, w] grid");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << "P5\n" << grid.extent(1) << " " << grid.extent(0) << "\n255\n";
  for (int64_t i = 0; i < grid.numel(); ++i) {
    double v = std::min(1.0, std::max(0.0, grid.at(i)));
    os.put(static_cast<char>(std::lround(v * 255.0)));
  }
  if (!os) throw IoError("write failed: " + path);
}

void write_grid_tsv(const AttentionMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  for (size_t f = 0; f < map.frames.size(); ++f) {
    if (f) os << '\n';
    const Tensor& grid = map.frames[f];
    for (int64_t y = 0; y < grid.extent(0); ++y) {
      for (int64_t x = 0; x < grid.extent(1); ++x) {
        if (x) os << '\t';
        os << grid.at(y * grid.extent(1) + x);
      }
      os << '\n';
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace xavt
