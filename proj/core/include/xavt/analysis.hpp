#pragma once

#include "xavt/model.hpp"
#include "xavt/train.hpp"

namespace xavt {

// Per (layer, direction) attention weight matrices [heads, queries, keys]
// collected from one instrumented forward pass.
struct AttentionDump {
  int depth = 0;
  std::map<std::pair<int, std::string>, Tensor> entries;

  void add(int layer, const std::string& dir, Tensor weights);
  bool has(int layer, const std::string& dir) const;
  const Tensor& at(int layer, const std::string& dir) const;  // lookup error when absent
};

// Instrumented forward over one sample (center view), capturing every
// self- and cross-attention direction.
AttentionDump collect_dump(const Model& m, const Sample& s);

// Dump file: "XAVA" container of tensors named "layer{L}.{dir}".
void save_dump(const AttentionDump& dump, const std::string& path);
AttentionDump load_dump(const std::string& path);

// Mean over heads and queries of H(row)/ln(num_keys) with 0*ln(0) = 0;
// 1.0 exactly for uniform rows, 0.0 exactly for one-hot rows.
double entropy_ratio(const Tensor& weights);
double entropy_ratio(const AttentionDump& dump, int layer, const std::string& dir);

// Per-layer entropy ratios of one direction, averaged over samples.
std::vector<double> entropy_curve(const Model& m, const std::vector<Sample>& samples,
                                  const std::string& dir);

// One query's key-attention weights reshaped onto the key expert's patch
// grid, head-averaged and max-normalized to [0,1]; one grid per frame.
struct AttentionMap {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<Tensor> frames;  // each [grid_h, grid_w]
};

// The key side of `dir` must have a (frame, patch) layout (spatial or
// temporal keys). `query` is the global query-token index; pass -1 for the
// default query (the query expert's class token when it has one).
AttentionMap export_attention_map(const AttentionDump& dump, const ModelConfig& cfg, int layer,
                                  const std::string& dir, int64_t query = -1);

// Binary portable graymap (P5, 8-bit) of a [h, w] grid in [0,1].
void write_pgm(const Tensor& grid, const std::string& path);
// Tab-separated numeric grids, one blank-line-separated block per frame.
void write_grid_tsv(const AttentionMap& map, const std::string& path);

}  // namespace xavt
