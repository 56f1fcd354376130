#pragma once

#include <string>
#include <vector>

#include "xavt/ops.hpp"
#include "xavt/param.hpp"

namespace xavt {

// Minibatch of RGB(-ish) clips, values in [0,1].
struct VideoBatch {
  Tensor data;  // [B, 2T, H, W, C]
  double frame_rate = 0.0;  // raw frames per second

  int64_t batch() const { return data.extent(0); }
  int64_t raw_frames() const { return data.extent(1); }
  int64_t height() const { return data.extent(2); }
  int64_t width() const { return data.extent(3); }
  int64_t channels() const { return data.extent(4); }
  double duration_s() const { return static_cast<double>(raw_frames()) / frame_rate; }
  void validate() const;
};

// Minibatch of Mel spectrograms.
struct SpectrogramBatch {
  Tensor data;  // [B, T_spec, mel_bins]
  double duration_s = 0.0;

  int64_t batch() const { return data.extent(0); }
  int64_t time_frames() const { return data.extent(1); }
  int64_t mel_bins() const { return data.extent(2); }
  void validate() const;
};

struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;
};

enum class Layout { kSpatial, kTemporal, kAudio };

const char* layout_name(Layout l);

// Batch of token embeddings plus the axis metadata the attention windows
// are defined over. The inter-module currency.
//   spatial : rows = B*T, tokens = N (+1 class), patch grid (grid_h, grid_w)
//   temporal: rows = B,   tokens = T*N, no class token
//   audio   : rows = B,   tokens = M (+1 class), patch grid (time_pos, freq_pos)
struct TokenSequence {
  Tensor tokens;  // [rows, tokens_per_row, dim]
  Layout layout = Layout::kSpatial;
  int batch = 0;
  int frames = 0;   // T (spatial frames == temporal tubes)
  int grid_h = 0;   // visual patches per column
  int grid_w = 0;   // visual patches per row
  int time_pos = 0;  // audio patches along time
  int freq_pos = 0;  // audio patches along frequency
  bool has_cls = false;

  int64_t rows() const { return tokens.extent(0); }
  int64_t tokens_per_row() const { return tokens.extent(1); }
  int64_t dim() const { return tokens.extent(2); }
  // patch tokens per frame (visual) or total patches (audio)
  int64_t patch_count() const {
    return layout == Layout::kAudio ? static_cast<int64_t>(time_pos) * freq_pos
                                    : static_cast<int64_t>(grid_h) * grid_w;
  }
  TokenSequence with_tokens(Tensor t) const {
    TokenSequence out = *this;
    out.tokens = std::move(t);
    return out;
  }
  void validate() const;
};

struct PatchProj {
  Parameter* w = nullptr;  // [patch_elems, D]
  Parameter* b = nullptr;  // [D]
};

// Raw patch extraction (data prep, not differentiated).
// Spatial: even frames split into p x p x C patches -> [B, T, N, p*p*C].
Tensor extract_spatial_patches(const VideoBatch& v, int p);
// Inverse of extract_spatial_patches; returns the even frames [B, T, H, W, C].
Tensor assemble_spatial_patches(const Tensor& patches, int p, int64_t h, int64_t w, int64_t c);
// Temporal: frame pairs (2f, 2f+1) form 2 x p x p x C tubes -> [B, T, N, 2*p*p*C].
Tensor extract_temporal_tubes(const VideoBatch& v, int p);
// Inverse of extract_temporal_tubes; returns the full clip [B, 2T, H, W, C].
Tensor assemble_temporal_tubes(const Tensor& tubes, int p, int64_t h, int64_t w, int64_t c);
// Audio: overlapping patch x patch windows with the given stride on both
// axes, frequency-major within each time position -> [B, M, patch*patch].
Tensor extract_audio_patches(const SpectrogramBatch& s, int patch, int stride);

// count of windows along one axis: floor((extent - patch) / stride) + 1
int64_t patch_positions(int64_t extent, int patch, int stride);

TokenSequence tokenize_spatial(const VideoBatch& v, int p, const PatchProj& proj,
                               const Parameter* pos, const Parameter* cls);
TokenSequence tokenize_temporal(const VideoBatch& v, int p, const PatchProj& proj,
                                const Parameter* pos);
TokenSequence tokenize_audio(const SpectrogramBatch& s, int patch, int stride,
                             const PatchProj& proj, const Parameter* pos, const Parameter* cls);

struct TimeMlpParams {
  Parameter* w1 = nullptr;  // [2, hidden]
  Parameter* b1 = nullptr;  // [hidden]
  Parameter* w2 = nullptr;  // [hidden, d]
  Parameter* b2 = nullptr;  // [d]
  Parameter* cls_row = nullptr;  // [d], dedicated row for class tokens
};

// The t frames of a clip partition its duration into t equal non-overlapping
// intervals [i*dur/t, (i+1)*dur/t).
std::vector<TimeInterval> frame_intervals(int t, double duration_s);

// Two-layer perceptron on (start, end) pairs -> [len, d].
Tensor time_interval_embed(const std::vector<TimeInterval>& intervals, const TimeMlpParams& mlp);

// Contiguous partition of [0, positions) into `groups` parts whose sizes
// differ by at most one; returns the group of each position.
std::vector<int> contiguous_groups(int positions, int groups);

// Per-token embedding matrix [rows, tokens, d]. Spatial tokens map to their
// frame's row, audio tokens to their time group's row, temporal tokens to
// their tube's row; class tokens map to the dedicated cls row.
Tensor assign_time_embeddings(const TokenSequence& seq, const Tensor& embeds,
                              const Tensor& cls_row);

}  // namespace xavt
