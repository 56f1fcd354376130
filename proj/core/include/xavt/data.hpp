#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xavt/tensor.hpp"

namespace xavt {

// One audio-visual classification sample. Clips carry no timestamp metadata
// on disk; durations are normalized to 1 second.
struct Sample {
  Tensor video;  // [2T, H, W, C] f32, values in [0,1]
  Tensor audio;  // [T_spec, mel] f32
  int64_t label = 0;
};

constexpr double kClipDurationS = 1.0;

// Raw clip file: magic "XAVC", u32 version, then B, 2T, H, W, C, T_spec, mel
// as u64 little-endian, followed by row-major f32 little-endian video data,
// spectrogram data, and a u32 label. One sample per file (B == 1).
void write_sample_file(const std::string& path, const Sample& s);
Sample read_sample_file(const std::string& path);

// Plain-text index: "relative_path<TAB>label" lines.
void write_index(const std::string& path, const std::vector<std::pair<std::string, int64_t>>& rows);
std::vector<std::pair<std::string, int64_t>> read_index(const std::string& path);

// Loads every sample listed by an index file (paths resolved relative to the
// index's directory).
std::vector<Sample> load_dataset(const std::string& index_path);

}  // namespace xavt
