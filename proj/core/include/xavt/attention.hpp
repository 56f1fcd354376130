#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xavt/rng.hpp"
#include "xavt/tokenizer.hpp"

namespace xavt {

constexpr double kLayerNormEps = 1e-6;

// Key subset a query may attend to: same frame (space), same patch across
// frames (time), or everything (space-time / global).
enum class WindowKind { kSpace, kTime, kSpaceTime };

const char* window_name(WindowKind w);
WindowKind window_from_name(const std::string& name);

struct AttentionParams {
  Parameter* w_q = nullptr;  // [D, D]
  Parameter* w_k = nullptr;
  Parameter* w_v = nullptr;
  int heads = 1;
};

struct AdapterParams {
  Parameter* w_down = nullptr;  // [D, d]
  Parameter* w_up = nullptr;    // [d, D]
};

struct LayerNormParams {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
};

struct FfnParams {
  Parameter* w1 = nullptr;  // [D, hidden]
  Parameter* b1 = nullptr;
  Parameter* w2 = nullptr;  // [hidden, D]
  Parameter* b2 = nullptr;
};

// One windowed attention evaluation is computed in window-shaped groups; a
// segment stores the grouped weights plus the map from (group, position) to
// global token ids so the full [heads, queries, keys] matrix can be rebuilt.
struct AttnSegment {
  Tensor weights;  // [groups*heads, Lq, Lk], detached values
  int heads = 1;
  std::vector<std::vector<int>> q_ids;  // per group, length Lq
  std::vector<std::vector<int>> k_ids;  // per group, length Lk
};

struct AttnRecord {
  int layer = 0;
  std::string dir;
  int heads = 1;
  int64_t q_total = 0;
  int64_t k_total = 0;
  std::vector<AttnSegment> segments;
  // Expanded weight matrix; entries outside every window are exactly zero.
  Tensor dense() const;  // [heads, q_total, k_total] f32
};

struct InstrumentSink {
  bool capture = true;
  int mhsa_calls = 0;
  int mhca_calls = 0;
  std::vector<AttnRecord> records;

  const AttnRecord* find(int layer, const std::string& dir) const;
};

// Per-forward options threaded through the blocks.
struct ForwardCtx {
  bool training = false;
  double drop_path = 0.0;
  Rng* drop_rng = nullptr;  // required when training && drop_path > 0
  InstrumentSink* sink = nullptr;
  int layer = 1;
};

// Multi-head self attention restricted to `window` (Softmax((XWq)(XWk)^T)(XWv)
// per head, logits scaled by 1/sqrt(D/heads), heads concatenated).
TokenSequence mhsa(const TokenSequence& x, const AttentionParams& ap, WindowKind window,
                   ForwardCtx* ctx = nullptr, const std::string& dir = "");

// Cross attention: queries from `q`, keys/values from `kv`, restricted to
// `window` over the shared (frame, patch) index system.
TokenSequence mhca(const TokenSequence& q, const TokenSequence& kv, const AttentionParams& ap,
                   WindowKind window, ForwardCtx* ctx = nullptr, const std::string& dir = "");

// gelu(x Wd) Wu; the residual lives at call sites.
Tensor adapter(const Tensor& x, const AdapterParams& ad);

struct AttnBlockParams {
  LayerNormParams ln1;
  AttentionParams attn;
  AdapterParams adapter;
  WindowKind self_window = WindowKind::kSpace;
};

struct FfnBlockParams {
  LayerNormParams ln2;
  FfnParams ffn;
  AdapterParams adapter;
};

// Y = X + ADAP(MHSA(LN X)) + MHSA(LN X); the single MHSA(LN X) evaluation
// feeds both terms.
TokenSequence expert_attn_block(const TokenSequence& x, const AttnBlockParams& bp,
                                ForwardCtx* ctx = nullptr, const std::string& dir = "");

// X' = B + FFN(LN B) + ADAP(LN B); one LN(B) evaluation feeds both branches.
TokenSequence ffn_block(const TokenSequence& b, const FfnBlockParams& bp,
                        ForwardCtx* ctx = nullptr);

}  // namespace xavt
