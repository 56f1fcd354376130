#include "xavt/attention.hpp"

#include <cmath>

namespace xavt {

const char* window_name(WindowKind w) {
  switch (w) {
    case WindowKind::kSpace: return "space";
    case WindowKind::kTime: return "time";
    case WindowKind::kSpaceTime: return "space-time";
  }
  return "?";
}

WindowKind window_from_name(const std::string& name) {
  if (name == "space") return WindowKind::kSpace;
  if (name == "time") return WindowKind::kTime;
  if (name == "space-time" || name == "spacetime" || name == "global") return WindowKind::kSpaceTime;
  throw ConfigError("unknown window shape: " + name);
}

Tensor AttnRecord::dense() const {
  Tensor out = Tensor::zeros({heads, q_total, k_total}, Dtype::kF32);
  auto dst = out.data<float>();
  for (const AttnSegment& seg : segments) {
    int64_t groups = static_cast<int64_t>(seg.q_ids.size());
    int64_t lq = seg.q_ids.empty() ? 0 : static_cast<int64_t>(seg.q_ids[0].size());
    int64_t lk = seg.k_ids.empty() ? 0 : static_cast<int64_t>(seg.k_ids[0].size());
    for (int64_t g = 0; g < groups; ++g)
      for (int64_t h = 0; h < seg.heads; ++h)
        for (int64_t i = 0; i < lq; ++i)
          for (int64_t j = 0; j < lk; ++j) {
            int64_t q = seg.q_ids[static_cast<size_t>(g)][static_cast<size_t>(i)];
            int64_t k = seg.k_ids[static_cast<size_t>(g)][static_cast<size_t>(j)];
            double w = seg.weights.at(((g * seg.heads + h) * lq + i) * lk + j);
            dst[(h * q_total + q) * k_total + k] = static_cast<float>(w);
          }
  }
  return out;
}

const AttnRecord* InstrumentSink::find(int layer, const std::string& dir) const {
  for (const AttnRecord& r : records)
    if (r.layer == layer && r.dir == dir) return &r;
  return nullptr;
}

namespace {

// A windowed view of one operand: the grouped tensor plus global-token-id
// maps; query sides also carry the inverse rearrangement.
struct Grouped {
  Tensor t;  // [G, L, d]
  std::vector<std::vector<int>> ids;
  std::function<Tensor(const Tensor&)> restore;  // [G, L, d] -> [rows, tokens, d] (query side)
};

std::vector<std::vector<int>> consecutive_ids(int64_t groups, int64_t len) {
  std::vector<std::vector<int>> ids(static_cast<size_t>(groups));
  for (int64_t g = 0; g < groups; ++g) {
    auto& v = ids[static_cast<size_t>(g)];
    v.resize(static_cast<size_t>(len));
    for (int64_t i = 0; i < len; ++i) v[static_cast<size_t>(i)] = static_cast<int>(g * len + i);
  }
  return ids;
}

// ids for [B,T,N] tokens regrouped as (b,n) groups of length T, where the
// global sequence is spatial ([B*T, cls+N]) or temporal ([B, T*N]).
std::vector<std::vector<int>> patch_time_ids(int b, int t, int n, bool spatial_rows, int cls_off) {
  std::vector<std::vector<int>> ids(static_cast<size_t>(b) * n);
  for (int bi = 0; bi < b; ++bi)
    for (int ni = 0; ni < n; ++ni) {
      auto& v = ids[static_cast<size_t>(bi) * n + ni];
      v.resize(static_cast<size_t>(t));
      for (int ti = 0; ti < t; ++ti) {
        int global = spatial_rows ? (bi * t + ti) * (n + cls_off) + cls_off + ni
                                  : bi * t * n + ti * n + ni;
        v[static_cast<size_t>(ti)] = global;
      }
    }
  return ids;
}

[[noreturn]] void window_error(const TokenSequence& seq, WindowKind w, const char* why) {
  throw ContractError(std::string("window '") + window_name(w) + "' incompatible with " +
                      layout_name(seq.layout) + " layout: " + why);
}

// Flatten any layout to one group per video: [B, total, d]; ids are global.
Grouped flatten_per_video(const TokenSequence& seq) {
  Grouped g;
  int64_t b = seq.batch;
  int64_t total = seq.rows() / b * seq.tokens_per_row();
  Tensor flat = reshape(seq.tokens, {b, total, seq.dim()});
  g.t = flat;
  g.ids = consecutive_ids(b, total);
  Shape orig = seq.tokens.shape();
  g.restore = [orig](const Tensor& t) { return reshape(t, orig); };
  return g;
}

Grouped group_space(const TokenSequence& seq) {
  Grouped g;
  switch (seq.layout) {
    case Layout::kSpatial:
      g.t = seq.tokens;
      g.ids = consecutive_ids(seq.rows(), seq.tokens_per_row());
      g.restore = [](const Tensor& t) { return t; };
      return g;
    case Layout::kTemporal: {
      int64_t b = seq.batch, t = seq.frames, n = seq.patch_count(), d = seq.dim();
      g.t = reshape(seq.tokens, {b * t, n, d});
      g.ids = consecutive_ids(b * t, n);
      Shape orig = seq.tokens.shape();
      g.restore = [orig](const Tensor& x) { return reshape(x, orig); };
      return g;
    }
    case Layout::kAudio:
      window_error(seq, WindowKind::kSpace, "audio tokens have no frame alignment");
  }
  window_error(seq, WindowKind::kSpace, "unsupported layout");
}

// Patch tokens regrouped by (video, patch); class tokens are handled by a
// separate global pass (query side) or rejected (key side).
Grouped group_time_patches(const TokenSequence& seq) {
  Grouped g;
  int64_t b = seq.batch, t = seq.frames, n = seq.patch_count(), d = seq.dim();
  if (seq.layout == Layout::kAudio)
    window_error(seq, WindowKind::kTime, "audio tokens have no frame alignment");
  if (seq.layout == Layout::kSpatial) {
    int cls_off = seq.has_cls ? 1 : 0;
    Tensor patches = seq.has_cls ? narrow(seq.tokens, 1, 1, n) : seq.tokens;
    Tensor grouped = reshape(permute(reshape(patches, {b, t, n, d}), {0, 2, 1, 3}), {b * n, t, d});
    g.t = grouped;
    g.ids = patch_time_ids(static_cast<int>(b), static_cast<int>(t), static_cast<int>(n), true,
                           cls_off);
    g.restore = [b, t, n, d](const Tensor& x) {
      return reshape(permute(reshape(x, {b, n, t, d}), {0, 2, 1, 3}), {b * t, n, d});
    };
    return g;
  }
  // temporal
  Tensor grouped = reshape(permute(reshape(seq.tokens, {b, t, n, d}), {0, 2, 1, 3}), {b * n, t, d});
  g.t = grouped;
  g.ids = patch_time_ids(static_cast<int>(b), static_cast<int>(t), static_cast<int>(n), false, 0);
  g.restore = [b, t, n, d](const Tensor& x) {
    return reshape(permute(reshape(x, {b, n, t, d}), {0, 2, 1, 3}), {b, t * n, d});
  };
  return g;
}

// Scaled dot-product attention over aligned groups; returns output and the
// softmax weights [G*heads, Lq, Lk].
std::pair<Tensor, Tensor> attention_core(const Tensor& q, const Tensor& kv,
                                         const AttentionParams& ap) {
  int64_t gq = q.extent(0), lq = q.extent(1), d = q.extent(2);
  int64_t gk = kv.extent(0), lk = kv.extent(1);
  if (gq != gk)
    throw ContractError("attention: query and key group counts differ (" + std::to_string(gq) +
                        " vs " + std::to_string(gk) + ")");
  int heads = ap.heads;
  if (heads < 1 || d % heads != 0)
    throw ContractError("attention: dim " + std::to_string(d) + " not divisible by heads " +
                        std::to_string(heads));
  int64_t hd = d / heads;
  auto split_heads = [&](const Tensor& x, int64_t len) {
    return reshape(permute(reshape(x, {gq, len, heads, hd}), {0, 2, 1, 3}), {gq * heads, len, hd});
  };
  Tensor qh = split_heads(matmul(q, ap.w_q->value), lq);
  Tensor kh = split_heads(matmul(kv, ap.w_k->value), lk);
  Tensor vh = split_heads(matmul(kv, ap.w_v->value), lk);
  Tensor scores = scale(matmul(qh, transpose_last2(kh)), 1.0 / std::sqrt(static_cast<double>(hd)));
  Tensor weights = softmax_lastdim(scores);
  Tensor mixed = matmul(weights, vh);  // [G*H, Lq, hd]
  Tensor out = reshape(permute(reshape(mixed, {gq, heads, lq, hd}), {0, 2, 1, 3}), {gq, lq, d});
  return {out, weights};
}

void capture_segment(ForwardCtx* ctx, AttnRecord& rec, const Tensor& weights,
                     const Grouped& q, const Grouped& k, int heads) {
  AttnSegment seg;
  seg.weights = weights.detach();
  seg.heads = heads;
  seg.q_ids = q.ids;
  seg.k_ids = k.ids;
  rec.segments.push_back(std::move(seg));
  (void)ctx;
}

}  // namespace

namespace {

TokenSequence windowed_attention(const TokenSequence& q_seq, const TokenSequence& kv_seq,
                                 const AttentionParams& ap, WindowKind window, ForwardCtx* ctx,
                                 const std::string& dir) {
  q_seq.validate();
  kv_seq.validate();
  if (q_seq.dim() != kv_seq.dim())
    throw ContractError("mhca: embed dims differ (" + std::to_string(q_seq.dim()) + " vs " +
                        std::to_string(kv_seq.dim()) + ")");
  if (q_seq.batch != kv_seq.batch) throw ContractError("mhca: batch sizes differ");

  bool want_capture = ctx && ctx->sink && ctx->sink->capture && !dir.empty();
  AttnRecord rec;
  rec.layer = ctx ? ctx->layer : 0;
  rec.dir = dir;
  rec.heads = ap.heads;
  rec.q_total = q_seq.rows() * q_seq.tokens_per_row();
  rec.k_total = kv_seq.rows() * kv_seq.tokens_per_row();

  Tensor out_tokens;
  switch (window) {
    case WindowKind::kSpaceTime: {
      Grouped q = flatten_per_video(q_seq);
      Grouped k = flatten_per_video(kv_seq);
      auto [out, w] = attention_core(q.t, k.t, ap);
      if (want_capture) capture_segment(ctx, rec, w, q, k, ap.heads);
      out_tokens = q.restore(out);
      break;
    }
    case WindowKind::kSpace: {
      if (q_seq.layout != Layout::kAudio && kv_seq.layout != Layout::kAudio &&
          q_seq.frames != kv_seq.frames)
        throw ContractError("mhca: space window requires matching frame counts");
      Grouped q = group_space(q_seq);
      Grouped k = group_space(kv_seq);
      auto [out, w] = attention_core(q.t, k.t, ap);
      if (want_capture) capture_segment(ctx, rec, w, q, k, ap.heads);
      out_tokens = q.restore(out);
      break;
    }
    case WindowKind::kTime: {
      if (q_seq.layout != Layout::kAudio && kv_seq.layout != Layout::kAudio &&
          q_seq.patch_count() != kv_seq.patch_count())
        throw ContractError("mhca: time window requires matching patch grids");
      if (kv_seq.layout == Layout::kSpatial && kv_seq.has_cls)
        throw ContractError("mhca: class tokens on the key side of a time window are unsupported");
      Grouped q = group_time_patches(q_seq);
      Grouped k = group_time_patches(kv_seq);
      auto [out, w] = attention_core(q.t, k.t, ap);
      if (want_capture) capture_segment(ctx, rec, w, q, k, ap.heads);
      Tensor patch_out = q.restore(out);  // [B*T, N, d] for spatial queries
      if (q_seq.layout == Layout::kSpatial && q_seq.has_cls) {
        // class-token queries attend everything in their video
        int64_t b = q_seq.batch, t = q_seq.frames, n = q_seq.patch_count(), d = q_seq.dim();
        Tensor cls = reshape(narrow(q_seq.tokens, 1, 0, 1), {b, t, d});
        Grouped cq;
        cq.t = cls;
        cq.ids.resize(static_cast<size_t>(b));
        for (int64_t bi = 0; bi < b; ++bi) {
          auto& v = cq.ids[static_cast<size_t>(bi)];
          v.resize(static_cast<size_t>(t));
          for (int64_t ti = 0; ti < t; ++ti)
            v[static_cast<size_t>(ti)] = static_cast<int>((bi * t + ti) * (n + 1));
        }
        Grouped ck = flatten_per_video(kv_seq);
        auto [cls_out, cw] = attention_core(cq.t, ck.t, ap);
        if (want_capture) capture_segment(ctx, rec, cw, cq, ck, ap.heads);
        out_tokens = concat({reshape(cls_out, {b * t, 1, d}), patch_out}, 1);
      } else {
        out_tokens = patch_out;
      }
      break;
    }
  }
  if (want_capture) ctx->sink->records.push_back(std::move(rec));
  return q_seq.with_tokens(out_tokens);
}

}  // namespace

TokenSequence mhca(const TokenSequence& q, const TokenSequence& kv, const AttentionParams& ap,
                   WindowKind window, ForwardCtx* ctx, const std::string& dir) {
  if (ctx && ctx->sink) ++ctx->sink->mhca_calls;
  return windowed_attention(q, kv, ap, window, ctx, dir);
}

TokenSequence mhsa(const TokenSequence& x, const AttentionParams& ap, WindowKind window,
                   ForwardCtx* ctx, const std::string& dir) {
  if (ctx && ctx->sink) ++ctx->sink->mhsa_calls;
  return windowed_attention(x, x, ap, window, ctx, dir);
}

Tensor adapter(const Tensor& x, const AdapterParams& ad) {
  return matmul(gelu(matmul(x, ad.w_down->value)), ad.w_up->value);
}

namespace {

// Stochastic depth over residual branches: per-sample Bernoulli keep mask
// scaled by 1/(1-rate). Identity when not training or rate == 0.
Tensor drop_path(const Tensor& branch, const TokenSequence& seq, ForwardCtx* ctx) {
  if (!ctx || !ctx->training || ctx->drop_path <= 0.0) return branch;
  if (!ctx->drop_rng) throw ContractError("drop_path: rng required in training mode");
  double rate = ctx->drop_path;
  int64_t b = seq.batch;
  int64_t rows_per_sample = seq.rows() / b;
  Tensor scales = Tensor::zeros({seq.rows()}, branch.dtype());
  for (int64_t bi = 0; bi < b; ++bi) {
    double keep = ctx->drop_rng->uniform() >= rate ? 1.0 / (1.0 - rate) : 0.0;
    for (int64_t r = 0; r < rows_per_sample; ++r) scales.set(bi * rows_per_sample + r, keep);
  }
  return scale_rows(branch, scales);
}

}  // namespace

TokenSequence expert_attn_block(const TokenSequence& x, const AttnBlockParams& bp,
                                ForwardCtx* ctx, const std::string& dir) {
  Tensor normed = layer_norm(x.tokens, bp.ln1.gamma->value, bp.ln1.beta->value, kLayerNormEps);
  TokenSequence m = mhsa(x.with_tokens(normed), bp.attn, bp.self_window, ctx, dir);
  Tensor branch = add(adapter(m.tokens, bp.adapter), m.tokens);
  branch = drop_path(branch, x, ctx);
  return x.with_tokens(add(x.tokens, branch));
}

TokenSequence ffn_block(const TokenSequence& b, const FfnBlockParams& bp, ForwardCtx* ctx) {
  Tensor normed = layer_norm(b.tokens, bp.ln2.gamma->value, bp.ln2.beta->value, kLayerNormEps);
  Tensor hidden = gelu(add_broadcast(matmul(normed, bp.ffn.w1->value), bp.ffn.b1->value));
  Tensor f = add_broadcast(matmul(hidden, bp.ffn.w2->value), bp.ffn.b2->value);
  Tensor branch = add(f, adapter(normed, bp.adapter));
  branch = drop_path(branch, b, ctx);
  return b.with_tokens(add(b.tokens, branch));
}

}  // namespace xavt
