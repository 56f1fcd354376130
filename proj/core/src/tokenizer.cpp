#include "xavt/tokenizer.hpp"

#include <cmath>

namespace xavt {

const char* layout_name(Layout l) {
  switch (l) {
    case Layout::kSpatial: return "spatial";
    case Layout::kTemporal: return "temporal";
    case Layout::kAudio: return "audio";
  }
  return "?";
}

void VideoBatch::validate() const {
  if (data.rank() != 5) throw ShapeError("video batch must be [B,2T,H,W,C], got " + shape_str(data.shape()));
  if (raw_frames() % 2 != 0)
    throw ConfigError("video frame count must be even, got " + std::to_string(raw_frames()));
  if (frame_rate <= 0.0) throw ConfigError("video frame_rate must be positive");
}

void SpectrogramBatch::validate() const {
  if (data.rank() != 3)
    throw ShapeError("spectrogram batch must be [B,T_spec,mel], got " + shape_str(data.shape()));
  if (duration_s <= 0.0) throw ConfigError("spectrogram duration must be positive");
}

void TokenSequence::validate() const {
  if (tokens.rank() != 3)
    throw ShapeError("token tensor must be [rows, tokens, dim], got " + shape_str(tokens.shape()));
  int64_t cls = has_cls ? 1 : 0;
  switch (layout) {
    case Layout::kSpatial:
      if (rows() != static_cast<int64_t>(batch) * frames ||
          tokens_per_row() != static_cast<int64_t>(grid_h) * grid_w + cls)
        throw ShapeError("spatial layout metadata inconsistent with " + shape_str(tokens.shape()));
      break;
    case Layout::kTemporal:
      if (has_cls) throw ShapeError("temporal layout carries no class token");
      if (rows() != batch ||
          tokens_per_row() != static_cast<int64_t>(frames) * grid_h * grid_w)
        throw ShapeError("temporal layout metadata inconsistent with " + shape_str(tokens.shape()));
      break;
    case Layout::kAudio:
      if (rows() != batch || tokens_per_row() != static_cast<int64_t>(time_pos) * freq_pos + cls)
        throw ShapeError("audio layout metadata inconsistent with " + shape_str(tokens.shape()));
      break;
  }
}

namespace {

void check_divisible(int64_t h, int64_t w, int p) {
  if (p <= 0 || h % p != 0 || w % p != 0)
    throw ConfigError("spatial extents " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by patch size " + std::to_string(p));
}

}  // namespace

Tensor extract_spatial_patches(const VideoBatch& v, int p) {
  v.validate();
  check_divisible(v.height(), v.width(), p);
  int64_t b = v.batch(), f2 = v.raw_frames(), h = v.height(), w = v.width(), c = v.channels();
  int64_t t = f2 / 2, gh = h / p, gw = w / p, n = gh * gw;
  int64_t plen = static_cast<int64_t>(p) * p * c;
  Tensor out = Tensor::zeros({b, t, n, plen}, v.data.dtype());
  // (py, px, ch) row-major within a patch
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti) {
      int64_t frame = 2 * ti;  // every even frame
      for (int64_t gy = 0; gy < gh; ++gy)
        for (int64_t gx = 0; gx < gw; ++gx) {
          int64_t tok = gy * gw + gx;
          for (int64_t py = 0; py < p; ++py)
            for (int64_t px = 0; px < p; ++px)
              for (int64_t ch = 0; ch < c; ++ch) {
                int64_t src = (((bi * f2 + frame) * h + gy * p + py) * w + gx * p + px) * c + ch;
                int64_t dst = ((bi * t + ti) * n + tok) * plen + (py * p + px) * c + ch;
                out.set(dst, v.data.at(src));
              }
        }
    }
  return out;
}

Tensor assemble_spatial_patches(const Tensor& patches, int p, int64_t h, int64_t w, int64_t c) {
  int64_t b = patches.extent(0), t = patches.extent(1), n = patches.extent(2);
  int64_t gh = h / p, gw = w / p;
  if (n != gh * gw || patches.extent(3) != static_cast<int64_t>(p) * p * c)
    throw ShapeError("assemble_spatial_patches: geometry mismatch");
  Tensor out = Tensor::zeros({b, t, h, w, c}, patches.dtype());
  int64_t plen = patches.extent(3);
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t gy = 0; gy < gh; ++gy)
        for (int64_t gx = 0; gx < gw; ++gx) {
          int64_t tok = gy * gw + gx;
          for (int64_t py = 0; py < p; ++py)
            for (int64_t px = 0; px < p; ++px)
              for (int64_t ch = 0; ch < c; ++ch) {
                int64_t src = ((bi * t + ti) * n + tok) * plen + (py * p + px) * c + ch;
                int64_t dst = (((bi * t + ti) * h + gy * p + py) * w + gx * p + px) * c + ch;
                out.set(dst, patches.at(src));
              }
        }
  return out;
}

Tensor extract_temporal_tubes(const VideoBatch& v, int p) {
  v.validate();
  check_divisible(v.height(), v.width(), p);
  int64_t b = v.batch(), f2 = v.raw_frames(), h = v.height(), w = v.width(), c = v.channels();
  int64_t t = f2 / 2, gh = h / p, gw = w / p, n = gh * gw;
  int64_t plen = 2 * static_cast<int64_t>(p) * p * c;
  Tensor out = Tensor::zeros({b, t, n, plen}, v.data.dtype());
  // (pair frame, py, px, ch) row-major within a tube
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t gy = 0; gy < gh; ++gy)
        for (int64_t gx = 0; gx < gw; ++gx) {
          int64_t tok = gy * gw + gx;
          for (int64_t fo = 0; fo < 2; ++fo)
            for (int64_t py = 0; py < p; ++py)
              for (int64_t px = 0; px < p; ++px)
                for (int64_t ch = 0; ch < c; ++ch) {
                  int64_t src =
                      (((bi * f2 + 2 * ti + fo) * h + gy * p + py) * w + gx * p + px) * c + ch;
                  int64_t dst = ((bi * t + ti) * n + tok) * plen +
                                ((fo * p + py) * p + px) * c + ch;
                  out.set(dst, v.data.at(src));
                }
        }
  return out;
}

Tensor assemble_temporal_tubes(const Tensor& tubes, int p, int64_t h, int64_t w, int64_t c) {
  int64_t b = tubes.extent(0), t = tubes.extent(1), n = tubes.extent(2);
  int64_t gh = h / p, gw = w / p;
  if (n != gh * gw || tubes.extent(3) != 2 * static_cast<int64_t>(p) * p * c)
    throw ShapeError("assemble_temporal_tubes: geometry mismatch");
  Tensor out = Tensor::zeros({b, 2 * t, h, w, c}, tubes.dtype());
  int64_t plen = tubes.extent(3);
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t gy = 0; gy < gh; ++gy)
        for (int64_t gx = 0; gx < gw; ++gx) {
          int64_t tok = gy * gw + gx;
          for (int64_t fo = 0; fo < 2; ++fo)
            for (int64_t py = 0; py < p; ++py)
              for (int64_t px = 0; px < p; ++px)
                for (int64_t ch = 0; ch < c; ++ch) {
                  int64_t src = ((bi * t + ti) * n + tok) * plen + ((fo * p + py) * p + px) * c + ch;
                  int64_t dst =
                      (((bi * 2 * t + 2 * ti + fo) * h + gy * p + py) * w + gx * p + px) * c + ch;
                  out.set(dst, tubes.at(src));
                }
        }
  return out;
}

int64_t patch_positions(int64_t extent, int patch, int stride) {
  if (extent < patch) return 0;
  return (extent - patch) / stride + 1;
}

Tensor extract_audio_patches(const SpectrogramBatch& s, int patch, int stride) {
  s.validate();
  int64_t b = s.batch(), tf = s.time_frames(), mel = s.mel_bins();
  int64_t nt = patch_positions(tf, patch, stride);
  int64_t nf = patch_positions(mel, patch, stride);
  if (nt < 1 || nf < 1)
    throw ConfigError("spectrogram " + std::to_string(tf) + "x" + std::to_string(mel) +
                      " smaller than one " + std::to_string(patch) + "x" + std::to_string(patch) +
                      " patch");
  int64_t m = nt * nf;
  int64_t plen = static_cast<int64_t>(patch) * patch;
  Tensor out = Tensor::zeros({b, m, plen}, s.data.dtype());
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < nt; ++ti)
      for (int64_t fi = 0; fi < nf; ++fi) {
        int64_t tok = ti * nf + fi;  // frequency-major within each time position
        int64_t t0 = ti * stride, f0 = fi * stride;
        for (int64_t wt = 0; wt < patch; ++wt)
          for (int64_t wf = 0; wf < patch; ++wf) {
            int64_t src = (bi * tf + t0 + wt) * mel + f0 + wf;
            int64_t dst = (bi * m + tok) * plen + wt * patch + wf;
            out.set(dst, s.data.at(src));
          }
      }
  return out;
}

namespace {

// patches [B, T(or 1), N, plen] -> tokens [rows, N(+1 cls), D]
Tensor project_tokens(const Tensor& patches, int64_t rows, const PatchProj& proj,
                      const Parameter* pos, const Parameter* cls) {
  int64_t n = patches.extent(patches.rank() - 2);
  int64_t plen = patches.extent(patches.rank() - 1);
  Tensor flat = reshape(patches, {rows, n, plen});
  Tensor tok = add_broadcast(matmul(flat, proj.w->value), proj.b->value);
  if (cls) {
    Tensor crow = repeat_leading(reshape(cls->value, {1, cls->value.numel()}), rows);
    tok = concat({crow, tok}, 1);
  }
  return add_broadcast(tok, pos->value);
}

}  // namespace

TokenSequence tokenize_spatial(const VideoBatch& v, int p, const PatchProj& proj,
                               const Parameter* pos, const Parameter* cls) {
  Tensor patches = extract_spatial_patches(v, p);
  int64_t b = patches.extent(0), t = patches.extent(1);
  TokenSequence seq;
  seq.layout = Layout::kSpatial;
  seq.batch = static_cast<int>(b);
  seq.frames = static_cast<int>(t);
  seq.grid_h = static_cast<int>(v.height() / p);
  seq.grid_w = static_cast<int>(v.width() / p);
  seq.has_cls = cls != nullptr;
  seq.tokens = project_tokens(patches, b * t, proj, pos, cls);
  seq.validate();
  return seq;
}

TokenSequence tokenize_temporal(const VideoBatch& v, int p, const PatchProj& proj,
                                const Parameter* pos) {
  Tensor tubes = extract_temporal_tubes(v, p);
  int64_t b = tubes.extent(0), t = tubes.extent(1), n = tubes.extent(2);
  TokenSequence seq;
  seq.layout = Layout::kTemporal;
  seq.batch = static_cast<int>(b);
  seq.frames = static_cast<int>(t);
  seq.grid_h = static_cast<int>(v.height() / p);
  seq.grid_w = static_cast<int>(v.width() / p);
  seq.has_cls = false;
  Tensor flat = reshape(tubes, {b, t * n, tubes.extent(3)});
  Tensor tok = add_broadcast(matmul(flat, proj.w->value), proj.b->value);
  seq.tokens = add_broadcast(tok, pos->value);
  seq.validate();
  return seq;
}

TokenSequence tokenize_audio(const SpectrogramBatch& s, int patch, int stride,
                             const PatchProj& proj, const Parameter* pos, const Parameter* cls) {
  Tensor patches = extract_audio_patches(s, patch, stride);
  int64_t b = patches.extent(0);
  TokenSequence seq;
  seq.layout = Layout::kAudio;
  seq.batch = static_cast<int>(b);
  seq.frames = 0;
  seq.time_pos = static_cast<int>(patch_positions(s.time_frames(), patch, stride));
  seq.freq_pos = static_cast<int>(patch_positions(s.mel_bins(), patch, stride));
  seq.has_cls = cls != nullptr;
  seq.tokens = project_tokens(patches, b, proj, pos, cls);
  seq.validate();
  return seq;
}

std::vector<TimeInterval> frame_intervals(int t, double duration_s) {
  if (t <= 0 || duration_s <= 0.0) throw ContractError("frame_intervals: invalid arguments");
  std::vector<TimeInterval> out(static_cast<size_t>(t));
  double step = duration_s / static_cast<double>(t);
  for (int i = 0; i < t; ++i) out[static_cast<size_t>(i)] = {i * step, (i + 1) * step};
  return out;
}

Tensor time_interval_embed(const std::vector<TimeInterval>& intervals, const TimeMlpParams& mlp) {
  for (const TimeInterval& iv : intervals)
    if (!(iv.start_s >= 0.0 && iv.start_s < iv.end_s))
      throw ContractError("time interval requires 0 <= start < end, got [" +
                          std::to_string(iv.start_s) + "," + std::to_string(iv.end_s) + ")");
  int64_t len = static_cast<int64_t>(intervals.size());
  Dtype dt = mlp.w1->value.dtype();
  Tensor x = Tensor::zeros({len, 2}, dt);
  for (int64_t i = 0; i < len; ++i) {
    x.set(2 * i, intervals[static_cast<size_t>(i)].start_s);
    x.set(2 * i + 1, intervals[static_cast<size_t>(i)].end_s);
  }
  Tensor h = gelu(add_broadcast(matmul(x, mlp.w1->value), mlp.b1->value));
  return add_broadcast(matmul(h, mlp.w2->value), mlp.b2->value);
}

std::vector<int> contiguous_groups(int positions, int groups) {
  if (positions <= 0 || groups <= 0) throw ContractError("contiguous_groups: invalid arguments");
  // boundaries start[i] = floor(i*positions/groups); sizes differ by <= 1
  std::vector<int> out(static_cast<size_t>(positions));
  for (int g = 0; g < groups; ++g) {
    int lo = static_cast<int>((static_cast<int64_t>(g) * positions) / groups);
    int hi = static_cast<int>((static_cast<int64_t>(g + 1) * positions) / groups);
    for (int i = lo; i < hi; ++i) out[static_cast<size_t>(i)] = g;
  }
  return out;
}

Tensor assign_time_embeddings(const TokenSequence& seq, const Tensor& embeds,
                              const Tensor& cls_row) {
  seq.validate();
  int64_t t = embeds.extent(0);
  int64_t d = embeds.extent(1);
  if (cls_row.numel() != d) throw ShapeError("assign_time_embeddings: cls row width mismatch");
  int64_t rows = seq.rows(), tokens = seq.tokens_per_row();
  std::vector<int64_t> idx(static_cast<size_t>(rows * tokens));
  int64_t cls_index = t;  // stacked table is [embeds; cls_row]
  switch (seq.layout) {
    case Layout::kSpatial: {
      if (seq.frames != t)
        throw ContractError("assign_time_embeddings: expected " + std::to_string(seq.frames) +
                            " embedding rows, got " + std::to_string(t));
      for (int64_t r = 0; r < rows; ++r) {
        int64_t frame = r % seq.frames;
        for (int64_t k = 0; k < tokens; ++k)
          idx[static_cast<size_t>(r * tokens + k)] =
              (seq.has_cls && k == 0) ? cls_index : frame;
      }
      break;
    }
    case Layout::kTemporal: {
      if (seq.frames != t)
        throw ContractError("assign_time_embeddings: expected " + std::to_string(seq.frames) +
                            " embedding rows, got " + std::to_string(t));
      int64_t n = seq.patch_count();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t k = 0; k < tokens; ++k)
          idx[static_cast<size_t>(r * tokens + k)] = k / n;
      break;
    }
    case Layout::kAudio: {
      std::vector<int> groups = contiguous_groups(seq.time_pos, static_cast<int>(t));
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t k = 0; k < tokens; ++k) {
          if (seq.has_cls && k == 0) {
            idx[static_cast<size_t>(r * tokens + k)] = cls_index;
          } else {
            int64_t pk = k - (seq.has_cls ? 1 : 0);
            int64_t ti = pk / seq.freq_pos;
            idx[static_cast<size_t>(r * tokens + k)] = groups[static_cast<size_t>(ti)];
          }
        }
      break;
    }
  }
  Tensor table = concat({embeds, reshape(cls_row, {1, d})}, 0);
  return reshape(gather_rows(table, idx), {rows, tokens, d});
}

}  // namespace xavt
