#include "xavt/bca.hpp"

namespace xavt {

TokenSequence bca_prepare(const TokenSequence& y, const BcaDirParams& dir, const TimeEmbedCtx& te) {
  Tensor down = matmul(y.tokens, dir.proj.w_down->value);
  Tensor normed = layer_norm(down, dir.ln.gamma->value, dir.ln.beta->value, kLayerNormEps);
  Tensor embedded;
  if (dir.time_embed) {
    Tensor rows = time_interval_embed(frame_intervals(te.frames, te.duration_s), dir.tmlp);
    Tensor per_token = assign_time_embeddings(y.with_tokens(down), rows, dir.tmlp.cls_row->value);
    embedded = add(per_token, normed);
  } else {
    embedded = add_broadcast(normed, dir.embed_table->value);
  }
  return y.with_tokens(embedded);
}

Tensor bca_phi(const TokenSequence& q_prepped, const TokenSequence& kv_prepped,
               const BcaDirParams& dir, ForwardCtx* ctx) {
  TokenSequence mixed = mhca(q_prepped, kv_prepped, dir.xattn, dir.window, ctx, dir.name);
  return matmul(gelu(mixed.tokens), dir.proj.w_up->value);
}

Tensor bca_phi_raw(const TokenSequence& y_q, const TokenSequence& y_kv, const BcaDirParams& dir,
                   const BcaDirParams& mirror, const TimeEmbedCtx& te, ForwardCtx* ctx) {
  TokenSequence qp = bca_prepare(y_q, dir, te);
  TokenSequence kp = bca_prepare(y_kv, mirror, te);
  return bca_phi(qp, kp, dir, ctx);
}

std::pair<TokenSequence, TokenSequence> exchange_two(const TokenSequence& y1,
                                                     const TokenSequence& y2,
                                                     const BcaDirParams& dir_to_1,
                                                     const BcaDirParams& dir_to_2,
                                                     const TimeEmbedCtx& te, ForwardCtx* ctx) {
  TokenSequence p1 = bca_prepare(y1, dir_to_1, te);
  TokenSequence p2 = bca_prepare(y2, dir_to_2, te);
  Tensor b1 = y1.tokens;
  Tensor b2 = y2.tokens;
  if (dir_to_1.enabled) b1 = add(b1, bca_phi(p1, p2, dir_to_1, ctx));
  if (dir_to_2.enabled) b2 = add(b2, bca_phi(p2, p1, dir_to_2, ctx));
  return {y1.with_tokens(b1), y2.with_tokens(b2)};
}

std::array<TokenSequence, 3> exchange_three(const TokenSequence& y1, const TokenSequence& y2,
                                            const TokenSequence& y3,
                                            const ThreeExchangeParams& p, ForwardCtx* ctx) {
  const TokenSequence* ys[3] = {&y1, &y2, &y3};
  // pair p covers experts (a,b): (0,1), (0,2), (1,2)
  constexpr int kPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  Tensor acc[3] = {y1.tokens, y2.tokens, y3.tokens};
  for (int pi = 0; pi < 3; ++pi) {
    const BcaDirParams* into_a = p.dirs[static_cast<size_t>(pi)][0];
    const BcaDirParams* into_b = p.dirs[static_cast<size_t>(pi)][1];
    if (!into_a || !into_b) throw ContractError("exchange_three: missing direction parameters");
    int a = kPairs[pi][0], b = kPairs[pi][1];
    TokenSequence pa = bca_prepare(*ys[a], *into_a, p.te[static_cast<size_t>(pi)]);
    TokenSequence pb = bca_prepare(*ys[b], *into_b, p.te[static_cast<size_t>(pi)]);
    if (into_a->enabled) acc[a] = add(acc[a], bca_phi(pa, pb, *into_a, ctx));
    if (into_b->enabled) acc[b] = add(acc[b], bca_phi(pb, pa, *into_b, ctx));
  }
  return {y1.with_tokens(acc[0]), y2.with_tokens(acc[1]), y3.with_tokens(acc[2])};
}

}  // namespace xavt
