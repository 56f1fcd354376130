#pragma once

#include <array>
#include <optional>
#include <string>

#include "xavt/attention.hpp"

namespace xavt {

// Learnables of one cross-attention direction (key expert -> query expert).
// The down/up projections belong to the query expert and are shared by all
// of its incoming directions; ln/embed/xattn are owned per direction. The
// embed is either a learned per-token table sized to the query layout or the
// time-interval MLP for audio-involved directions.
struct BcaDirParams {
  std::string name;  // e.g. "t2s"
  AdapterParams proj;  // query expert's shared w_down [D,d] / w_up [d,D]
  LayerNormParams ln;
  AttentionParams xattn;  // at bottleneck dim d
  Parameter* embed_table = nullptr;  // [query tokens, d] when not time-embedded
  TimeMlpParams tmlp;                // when time-embedded
  bool time_embed = false;
  WindowKind window = WindowKind::kSpaceTime;
  bool enabled = true;
};

// Per-pair context needed to evaluate the time-interval embeddings.
struct TimeEmbedCtx {
  int frames = 0;        // t groups, equal to the spatial frame count
  double duration_s = 1.0;
};

// Bottleneck operand: embed + LN(Y W_down), the Y' of the B-CA equations.
// The same prepared value serves as the query side of `dir` and as the key
// side of the mirror direction.
TokenSequence bca_prepare(const TokenSequence& y, const BcaDirParams& dir,
                          const TimeEmbedCtx& te);

// Phi delta for one direction given prepared operands:
// gelu(MHCA(Y'_q, Y'_kv)) W_up.
Tensor bca_phi(const TokenSequence& q_prepped, const TokenSequence& kv_prepped,
               const BcaDirParams& dir, ForwardCtx* ctx);

// Convenience for tests: full Phi from raw expert features.
Tensor bca_phi_raw(const TokenSequence& y_q, const TokenSequence& y_kv,
                   const BcaDirParams& dir, const BcaDirParams& mirror, const TimeEmbedCtx& te,
                   ForwardCtx* ctx = nullptr);

// One B-CA module: b1 = y1 + Phi_{2->1}, b2 = y2 + Phi_{1->2}; both Phi read
// the pre-exchange features.
std::pair<TokenSequence, TokenSequence> exchange_two(const TokenSequence& y1,
                                                     const TokenSequence& y2,
                                                     const BcaDirParams& dir_to_1,
                                                     const BcaDirParams& dir_to_2,
                                                     const TimeEmbedCtx& te, ForwardCtx* ctx);

// Three-expert exchange: b_i = y_i + Phi_{j->i} + Phi_{k->i}, all six Phi
// reading pre-exchange features. Pairs are (1,2), (1,3), (2,3); dirs[p][0]
// receives into the lower-indexed expert of pair p.
struct ThreeExchangeParams {
  // pair (1,2): dir into 1, dir into 2; pair (1,3): into 1, into 3; pair (2,3): into 2, into 3
  std::array<std::array<const BcaDirParams*, 2>, 3> dirs{};
  std::array<TimeEmbedCtx, 3> te{};
};

std::array<TokenSequence, 3> exchange_three(const TokenSequence& y1, const TokenSequence& y2,
                                            const TokenSequence& y3,
                                            const ThreeExchangeParams& p, ForwardCtx* ctx);

}  // namespace xavt
