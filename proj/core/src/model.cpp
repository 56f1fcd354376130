#include "xavt/model.hpp"

#include <algorithm>
#include <sstream>

#include "container_io.hpp"

namespace xavt {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kCast: return "CAST";
    case Variant::kCava: return "CAVA";
    case Variant::kCa2st: return "CA2ST";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  std::string n;
  for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (n == "cast") return Variant::kCast;
  if (n == "cava") return Variant::kCava;
  if (n == "ca2st" || n == "ca^2st" || n == "caast") return Variant::kCa2st;
  throw ConfigError("unknown variant: " + name);
}

std::vector<std::string> ModelConfig::expert_names() const {
  switch (variant) {
    case Variant::kCast: return {"spatial", "temporal"};
    case Variant::kCava: return {"spatial", "audio"};
    case Variant::kCa2st: return {"spatial", "temporal", "audio"};
  }
  return {};
}

std::vector<std::string> ModelConfig::direction_names() const {
  switch (variant) {
    case Variant::kCast: return {"t2s", "s2t"};
    case Variant::kCava: return {"a2s", "s2a"};
    case Variant::kCa2st: return {"t2s", "s2t", "a2s", "s2a", "a2t", "t2a"};
  }
  return {};
}

void ModelConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (frames < 2 || frames % 2 != 0) throw ConfigError("frames (2T) must be even and >= 2");
  if (patch <= 0 || height % patch != 0 || width % patch != 0)
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by patch " + std::to_string(patch));
  if (dim % heads != 0) throw ConfigError("dim must be divisible by heads");
  if (d_bca % bca_heads != 0) throw ConfigError("d_bca must be divisible by bca_heads");
  if (d_adapter >= dim) throw ConfigError("adapter bottleneck must be smaller than dim");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (tmlp_hidden < 1) throw ConfigError("tmlp_hidden must be >= 1");
  if (has_audio() && (audio_nt() < 1 || audio_nf() < 1))
    throw ConfigError("spectrogram " + std::to_string(audio_frames) + "x" +
                      std::to_string(audio_bins) + " smaller than one audio patch");
  auto dirs = direction_names();
  for (const auto& [d, w] : window_override) {
    if (std::find(dirs.begin(), dirs.end(), d) == dirs.end())
      throw ConfigError("window override for unknown direction: " + d);
    window_from_name(w);
  }
  for (const auto& d : disabled_dirs)
    if (std::find(dirs.begin(), dirs.end(), d) == dirs.end())
      throw ConfigError("disabled unknown direction: " + d);
}

namespace {

WindowKind default_window(const std::string& dir) {
  if (dir == "t2s") return WindowKind::kTime;
  if (dir == "s2t") return WindowKind::kSpace;
  return WindowKind::kSpaceTime;  // audio-involved directions are global
}

bool direction_uses_time_embed(const std::string& dir) {
  return dir.find('a') != std::string::npos;  // any audio-involved direction
}

}  // namespace

Model::Model(const ModelConfig& cfg) : config_(cfg), params_(cfg.seed, cfg.dtype) {
  config_.validate();
  build();
}

ExpertPath& Model::expert(const std::string& name) {
  auto it = experts_.find(name);
  if (it == experts_.end()) throw ContractError("no expert named " + name);
  return it->second;
}

const ExpertPath& Model::expert(const std::string& name) const {
  auto it = experts_.find(name);
  if (it == experts_.end()) throw ContractError("no expert named " + name);
  return it->second;
}

Model::Pair& Model::pair_between(const std::string& a, const std::string& b) {
  for (Pair& p : pairs_)
    if ((p.expert_a == a && p.expert_b == b) || (p.expert_a == b && p.expert_b == a)) return p;
  throw ContractError("no pair between " + a + " and " + b);
}

void Model::build() {
  const ModelConfig& c = config_;
  int64_t d = c.dim;
  for (const std::string& name : c.expert_names()) {
    ExpertPath path;
    path.name = name;
    int64_t tokens = 0;
    int64_t plen = 0;
    if (name == "spatial") {
      path.layout = Layout::kSpatial;
      plen = static_cast<int64_t>(c.patch) * c.patch * c.channels;
      tokens = c.n_patches() + 1;
    } else if (name == "temporal") {
      path.layout = Layout::kTemporal;
      plen = 2LL * c.patch * c.patch * c.channels;
      tokens = static_cast<int64_t>(c.t()) * c.n_patches();
    } else {
      path.layout = Layout::kAudio;
      plen = static_cast<int64_t>(c.audio_patch) * c.audio_patch;
      tokens = c.m_patches() + 1;
    }
    path.proj.w = params_.create(name + ".patch_proj.w", {plen, d}, Init::uniform(plen), false, 0);
    path.proj.b = params_.create(name + ".patch_proj.b", {d}, Init::uniform(plen), false, 0, true);
    path.pos = params_.create(name + ".pos_embed", {tokens, d}, Init::uniform(d), false, 0);
    if (path.layout != Layout::kTemporal)
      path.cls = params_.create(name + ".cls_token", {d}, Init::uniform(d), false, 0);
    for (int l = 1; l <= c.depth; ++l) {
      std::string b = name + ".block" + std::to_string(l) + ".";
      ExpertLayer layer;
      layer.attn_block.ln1.gamma = params_.create(b + "ln1.gamma", {d}, Init::one(), false, l, true);
      layer.attn_block.ln1.beta = params_.create(b + "ln1.beta", {d}, Init::zero(), false, l, true);
      layer.attn_block.attn.w_q = params_.create(b + "attn.w_q", {d, d}, Init::uniform(d), false, l);
      layer.attn_block.attn.w_k = params_.create(b + "attn.w_k", {d, d}, Init::uniform(d), false, l);
      layer.attn_block.attn.w_v = params_.create(b + "attn.w_v", {d, d}, Init::uniform(d), false, l);
      layer.attn_block.attn.heads = c.heads;
      layer.attn_block.self_window =
          path.layout == Layout::kSpatial ? WindowKind::kSpace : WindowKind::kSpaceTime;
      layer.attn_block.adapter.w_down =
          params_.create(b + "adapter1.w_down", {d, c.d_adapter}, Init::uniform(d), true, l);
      layer.attn_block.adapter.w_up =
          params_.create(b + "adapter1.w_up", {c.d_adapter, d}, Init::zero(), true, l);
      layer.ffn_block.ln2.gamma = params_.create(b + "ln2.gamma", {d}, Init::one(), false, l, true);
      layer.ffn_block.ln2.beta = params_.create(b + "ln2.beta", {d}, Init::zero(), false, l, true);
      int64_t hidden = 4 * d;
      layer.ffn_block.ffn.w1 = params_.create(b + "ffn.w1", {d, hidden}, Init::uniform(d), false, l);
      layer.ffn_block.ffn.b1 = params_.create(b + "ffn.b1", {hidden}, Init::uniform(d), false, l, true);
      layer.ffn_block.ffn.w2 = params_.create(b + "ffn.w2", {hidden, d}, Init::uniform(hidden), false, l);
      layer.ffn_block.ffn.b2 = params_.create(b + "ffn.b2", {d}, Init::uniform(hidden), false, l, true);
      layer.ffn_block.adapter.w_down =
          params_.create(b + "adapter2.w_down", {d, c.d_adapter}, Init::uniform(d), true, l);
      layer.ffn_block.adapter.w_up =
          params_.create(b + "adapter2.w_up", {c.d_adapter, d}, Init::zero(), true, l);
      layer.bca_proj.w_down = params_.create(b + "bca.w_down", {d, c.d_bca}, Init::uniform(d), true, l);
      layer.bca_proj.w_up = params_.create(b + "bca.w_up", {c.d_bca, d}, Init::zero(), true, l);
      path.layers.push_back(layer);
    }
    path.final_ln.gamma =
        params_.create(name + ".final_ln.gamma", {d}, Init::one(), true, c.depth + 1, true);
    path.final_ln.beta =
        params_.create(name + ".final_ln.beta", {d}, Init::zero(), true, c.depth + 1, true);
    path.head_adapter.w_down = params_.create("head.adapter_" + name + ".w_down", {d, c.d_adapter},
                                              Init::uniform(d), true, c.depth + 1);
    path.head_adapter.w_up = params_.create("head.adapter_" + name + ".w_up", {c.d_adapter, d},
                                            Init::zero(), true, c.depth + 1);
    experts_.emplace(name, std::move(path));
  }
  head_w_ = params_.create("head.w", {d, c.num_classes}, Init::uniform(d), true, c.depth + 1);
  head_b_ = params_.create("head.b", {c.num_classes}, Init::zero(), true, c.depth + 1, true);

  auto add_pair = [&](const std::string& a, const std::string& b, const std::string& dir_into_a,
                      const std::string& dir_into_b) {
    Pair pair;
    pair.expert_a = a;
    pair.expert_b = b;
    for (int l = 1; l <= c.depth; ++l) {
      pair.into_a.push_back(make_direction(dir_into_a, a, b, l));
      pair.into_b.push_back(make_direction(dir_into_b, b, a, l));
    }
    pairs_.push_back(std::move(pair));
  };
  switch (c.variant) {
    case Variant::kCast:
      add_pair("spatial", "temporal", "t2s", "s2t");
      break;
    case Variant::kCava:
      add_pair("spatial", "audio", "a2s", "s2a");
      break;
    case Variant::kCa2st:
      // order matches exchange_three over (spatial, temporal, audio)
      add_pair("spatial", "temporal", "t2s", "s2t");
      add_pair("spatial", "audio", "a2s", "s2a");
      add_pair("temporal", "audio", "a2t", "t2a");
      break;
  }
}

BcaDirParams Model::make_direction(const std::string& dir, const std::string& query_expert,
                                   const std::string& key_expert, int layer) {
  (void)key_expert;
  const ModelConfig& c = config_;
  int64_t db = c.d_bca;
  std::string prefix = "bca." + dir + ".block" + std::to_string(layer) + ".";
  BcaDirParams p;
  p.name = dir;
  p.proj = expert(query_expert).layers[static_cast<size_t>(layer - 1)].bca_proj;
  p.ln.gamma = params_.create(prefix + "ln.gamma", {db}, Init::one(), true, layer, true);
  p.ln.beta = params_.create(prefix + "ln.beta", {db}, Init::zero(), true, layer, true);
  p.xattn.w_q = params_.create(prefix + "xattn.w_q", {db, db}, Init::uniform(db), true, layer);
  p.xattn.w_k = params_.create(prefix + "xattn.w_k", {db, db}, Init::uniform(db), true, layer);
  p.xattn.w_v = params_.create(prefix + "xattn.w_v", {db, db}, Init::uniform(db), true, layer);
  p.xattn.heads = c.bca_heads;
  p.time_embed = direction_uses_time_embed(dir);
  if (p.time_embed) {
    int64_t h = c.tmlp_hidden;
    p.tmlp.w1 = params_.create(prefix + "tmlp.w1", {2, h}, Init::uniform(2), true, layer);
    p.tmlp.b1 = params_.create(prefix + "tmlp.b1", {h}, Init::uniform(2), true, layer, true);
    p.tmlp.w2 = params_.create(prefix + "tmlp.w2", {h, db}, Init::uniform(h), true, layer);
    p.tmlp.b2 = params_.create(prefix + "tmlp.b2", {db}, Init::uniform(h), true, layer, true);
    p.tmlp.cls_row = params_.create(prefix + "tmlp.cls", {db}, Init::uniform(db), true, layer);
  } else {
    const ExpertPath& q = expert(query_expert);
    int64_t tokens = q.layout == Layout::kSpatial
                         ? c.n_patches() + 1
                         : static_cast<int64_t>(c.t()) * c.n_patches();
    p.embed_table = params_.create(prefix + "embed", {tokens, db}, Init::uniform(db), true, layer);
  }
  auto ov = c.window_override.find(dir);
  p.window = ov != c.window_override.end() ? window_from_name(ov->second) : default_window(dir);
  p.enabled = !c.disabled_dirs.count(dir);
  return p;
}

int64_t Model::trainable_count() const {
  int64_t n = 0;
  for (Parameter* p : trainable_parameters()) n += p->value.numel();
  return n;
}

TokenSequence Model::tokenize(const std::string& expert_name, const VideoBatch& video,
                              const SpectrogramBatch* audio) const {
  const ExpertPath& e = expert(expert_name);
  switch (e.layout) {
    case Layout::kSpatial:
      return tokenize_spatial(video, config_.patch, e.proj, e.pos, e.cls);
    case Layout::kTemporal:
      return tokenize_temporal(video, config_.patch, e.proj, e.pos);
    case Layout::kAudio:
      if (!audio) throw ContractError("audio expert requires a spectrogram batch");
      return tokenize_audio(*audio, config_.audio_patch, config_.audio_stride, e.proj, e.pos,
                            e.cls);
  }
  throw ContractError("bad layout");
}

namespace {

void check_input_geometry(const ModelConfig& c, const VideoBatch& video,
                          const SpectrogramBatch* audio) {
  video.validate();
  if (video.raw_frames() != c.frames || video.height() != c.height ||
      video.width() != c.width || video.channels() != c.channels)
    throw ContractError("video geometry " + shape_str(video.data.shape()) +
                        " does not match the model configuration");
  if (c.has_audio()) {
    if (!audio) throw ContractError("variant " + std::string(variant_name(c.variant)) +
                                    " requires an audio spectrogram");
    audio->validate();
    if (audio->time_frames() != c.audio_frames || audio->mel_bins() != c.audio_bins)
      throw ContractError("spectrogram geometry " + shape_str(audio->data.shape()) +
                          " does not match the model configuration");
    if (audio->batch() != video.batch())
      throw ContractError("video and audio batch sizes differ");
  }
}

}  // namespace

ForwardResult Model::forward_detailed(const VideoBatch& video, const SpectrogramBatch* audio,
                                      ForwardCtx* ctx) const {
  const ModelConfig& c = config_;
  check_input_geometry(c, video, audio);
  TimeEmbedCtx te{c.t(), video.duration_s()};

  std::vector<std::string> names = c.expert_names();
  std::map<std::string, TokenSequence> x;
  for (const std::string& n : names) x.emplace(n, tokenize(n, video, audio));

  for (int l = 1; l <= c.depth; ++l) {
    if (ctx) ctx->layer = l;
    std::map<std::string, TokenSequence> y;
    for (const std::string& n : names) {
      const ExpertLayer& layer = expert(n).layers[static_cast<size_t>(l - 1)];
      std::string self_dir(1, n[0]);
      self_dir += "2";
      self_dir += n[0];
      y.emplace(n, expert_attn_block(x.at(n), layer.attn_block, ctx, self_dir));
    }
    std::map<std::string, TokenSequence> b;
    if (c.variant == Variant::kCa2st) {
      ThreeExchangeParams tp;
      for (int pi = 0; pi < 3; ++pi) {
        tp.dirs[static_cast<size_t>(pi)][0] = &pairs_[static_cast<size_t>(pi)].into_a[static_cast<size_t>(l - 1)];
        tp.dirs[static_cast<size_t>(pi)][1] = &pairs_[static_cast<size_t>(pi)].into_b[static_cast<size_t>(l - 1)];
        tp.te[static_cast<size_t>(pi)] = te;
      }
      auto out = exchange_three(y.at("spatial"), y.at("temporal"), y.at("audio"), tp, ctx);
      b.emplace("spatial", out[0]);
      b.emplace("temporal", out[1]);
      b.emplace("audio", out[2]);
    } else {
      const Pair& pr = pairs_[0];
      auto out = exchange_two(y.at(pr.expert_a), y.at(pr.expert_b),
                              pr.into_a[static_cast<size_t>(l - 1)],
                              pr.into_b[static_cast<size_t>(l - 1)], te, ctx);
      b.emplace(pr.expert_a, out.first);
      b.emplace(pr.expert_b, out.second);
    }
    std::map<std::string, TokenSequence> next;
    for (const std::string& n : names) {
      const ExpertLayer& layer = expert(n).layers[static_cast<size_t>(l - 1)];
      next.emplace(n, ffn_block(b.at(n), layer.ffn_block, ctx));
    }
    x = std::move(next);
  }

  ForwardResult result;
  Tensor fused;
  for (const std::string& n : names) {
    const ExpertPath& e = expert(n);
    const TokenSequence& seq = x.at(n);
    Tensor summary;
    if (e.layout == Layout::kSpatial) {
      // mean of frame-level class tokens
      Tensor cls = narrow(seq.tokens, 1, 0, 1);  // [B*T, 1, D]
      summary = mean_axis(reshape(cls, {seq.batch, seq.frames, seq.dim()}), 1);
    } else if (e.layout == Layout::kTemporal) {
      summary = mean_axis(seq.tokens, 1);  // global average pool
    } else {
      summary = reshape(narrow(seq.tokens, 1, 0, 1), {seq.batch, seq.dim()});
    }
    summary = layer_norm(summary, e.final_ln.gamma->value, e.final_ln.beta->value, kLayerNormEps);
    Tensor adapted = adapter(summary, e.head_adapter);
    fused = fused.defined() ? add(fused, adapted) : adapted;
    result.path_tokens.emplace(n, seq);
    result.summaries.emplace(n, summary);
  }
  result.fused = fused;
  result.logits = add_broadcast(matmul(fused, head_w_->value), head_b_->value);
  return result;
}

Tensor Model::forward(const VideoBatch& video, const SpectrogramBatch* audio,
                      ForwardCtx* ctx) const {
  return forward_detailed(video, audio, ctx).logits;
}

Model build_model(const ModelConfig& cfg) { return Model(cfg); }

// ---------------------------------------------------------------------------
// checkpoint io

using detail::read_container;
using detail::write_container;
using detail::payload_to_tensor;
using detail::fnv1a;

void save_checkpoint(const Model& m, const std::string& path,
                     const std::function<bool(const Parameter&)>& filter) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  std::map<std::string, bool> trainable;
  for (Parameter* p : m.params().sorted_by_name()) {
    if (filter && !filter(*p)) continue;
    tensors.emplace_back(p->name, &p->value);
    trainable[p->name] = p->trainable;
  }
  write_container(path, "XAVT", tensors, [&](const std::string& n) { return trainable.at(n); });
}

void load_checkpoint_into(Model& m, const std::string& path, bool partial) {
  auto raw = read_container(path, "XAVT");
  std::vector<std::string> problems;
  for (Parameter* p : m.params().sorted_by_name()) {
    auto it = raw.find(p->name);
    if (it == raw.end()) {
      if (!partial) problems.push_back("missing: " + p->name);
      continue;
    }
    if (it->second.shape != p->value.shape()) {
      problems.push_back("shape mismatch: " + p->name + " file " + shape_str(it->second.shape) +
                         " vs model " + shape_str(p->value.shape()));
      continue;
    }
    raw.erase(it);
  }
  for (const auto& [name, r] : raw)
    if (!m.params().find(name)) problems.push_back("unknown tensor in file: " + name);
  if (!problems.empty()) {
    std::ostringstream os;
    os << path << ": checkpoint does not match the model configuration:";
    for (const std::string& p : problems) os << "\n  " << p;
    throw IoError(os.str());
  }
  // second pass applies values (all-or-nothing)
  auto raw2 = read_container(path, "XAVT");
  for (Parameter* p : m.params().sorted_by_name()) {
    auto it = raw2.find(p->name);
    if (it == raw2.end()) continue;
    Tensor v = payload_to_tensor(it->second, p->value.dtype());
    bool rg = p->value.requires_grad();
    p->value = v;
    p->value.set_requires_grad(rg);
  }
}

std::vector<CheckpointEntry> inspect_checkpoint(const std::string& path) {
  auto raw = read_container(path, "XAVT");
  std::vector<CheckpointEntry> out;
  for (const auto& [name, r] : raw) {
    CheckpointEntry e;
    e.name = name;
    e.shape = r.shape;
    e.trainable = r.trainable;
    e.checksum = fnv1a(r.payload);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace xavt
