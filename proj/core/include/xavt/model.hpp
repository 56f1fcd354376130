#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "xavt/bca.hpp"

namespace xavt {

enum class Variant { kCast, kCava, kCa2st };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Architecture descriptor; fully determines parameter names and shapes.
struct ModelConfig {
  Variant variant = Variant::kCast;
  int depth = 2;
  int dim = 64;
  int heads = 4;
  int patch = 8;
  int frames = 8;  // raw frame count 2T
  int height = 32;
  int width = 32;
  int channels = 1;
  int audio_frames = 32;  // spectrogram time frames
  int audio_bins = 32;    // mel bins
  int audio_patch = 16;
  int audio_stride = 10;
  int d_adapter = 16;
  int d_bca = 16;
  int bca_heads = 2;
  int tmlp_hidden = 32;
  int num_classes = 2;
  double drop_path = 0.0;
  uint64_t seed = 0;
  Dtype dtype = Dtype::kF32;
  // per-direction window overrides ("t2s" -> "space-time", ...)
  std::map<std::string, std::string> window_override;
  // directions whose Phi is removed (unidirectional ablations)
  std::set<std::string> disabled_dirs;

  int t() const { return frames / 2; }
  int grid_h() const { return height / patch; }
  int grid_w() const { return width / patch; }
  int n_patches() const { return grid_h() * grid_w(); }
  int audio_nt() const { return static_cast<int>(patch_positions(audio_frames, audio_patch, audio_stride)); }
  int audio_nf() const { return static_cast<int>(patch_positions(audio_bins, audio_patch, audio_stride)); }
  int m_patches() const { return audio_nt() * audio_nf(); }
  bool has_temporal() const { return variant == Variant::kCast || variant == Variant::kCa2st; }
  bool has_audio() const { return variant == Variant::kCava || variant == Variant::kCa2st; }
  std::vector<std::string> expert_names() const;
  std::vector<std::string> direction_names() const;
  void validate() const;
};

struct ExpertLayer {
  AttnBlockParams attn_block;
  FfnBlockParams ffn_block;
  AdapterParams bca_proj;  // w_down/w_up shared by every incoming direction
};

struct ExpertPath {
  std::string name;
  Layout layout = Layout::kSpatial;
  PatchProj proj;
  Parameter* pos = nullptr;
  Parameter* cls = nullptr;
  std::vector<ExpertLayer> layers;
  LayerNormParams final_ln;
  AdapterParams head_adapter;
};

struct ForwardResult {
  // per expert: token sequence after the last block (before the final LN)
  std::map<std::string, TokenSequence> path_tokens;
  // per expert: pooled summary after the trainable final LN
  std::map<std::string, Tensor> summaries;  // [B, D]
  Tensor fused;   // Z [B, D]
  Tensor logits;  // [B, num_classes]
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Pair {
    std::string expert_a, expert_b;
    std::vector<BcaDirParams> into_a;  // per layer, query side = expert_a
    std::vector<BcaDirParams> into_b;
  };

  ExpertPath& expert(const std::string& name);
  const ExpertPath& expert(const std::string& name) const;
  const std::vector<Pair>& pairs() const { return pairs_; }
  Pair& pair_between(const std::string& a, const std::string& b);
  Parameter* head_w() const { return head_w_; }
  Parameter* head_b() const { return head_b_; }

  // Stable creation order; frozen excluded; shared parameters appear once.
  std::vector<Parameter*> trainable_parameters() const { return params_.trainable_params(); }
  int64_t trainable_count() const;

  Tensor forward(const VideoBatch& video, const SpectrogramBatch* audio,
                 ForwardCtx* ctx = nullptr) const;
  ForwardResult forward_detailed(const VideoBatch& video, const SpectrogramBatch* audio,
                                 ForwardCtx* ctx = nullptr) const;

  // Tokenization entry (also used by analyses).
  TokenSequence tokenize(const std::string& expert_name, const VideoBatch& video,
                         const SpectrogramBatch* audio) const;

 private:
  ModelConfig config_;
  ParamStore params_;
  std::map<std::string, ExpertPath> experts_;
  std::vector<Pair> pairs_;
  Parameter* head_w_ = nullptr;
  Parameter* head_b_ = nullptr;

  void build();
  BcaDirParams make_direction(const std::string& dir, const std::string& query_expert,
                              const std::string& key_expert, int layer);
};

// Deterministic construction from (config, seed). Same config and seed give
// bit-identical parameter sets; identically named parameters receive equal
// values across variants sharing substructure.
Model build_model(const ModelConfig& cfg);

// Checkpoint container: magic "XAVT", u32 version, u64 tensor count, then per
// tensor (lexicographic by name): u32 name length, name bytes, u8 trainable,
// u32 rank, rank x u64 extents, row-major f32 little-endian data.
void save_checkpoint(const Model& m, const std::string& path,
                     const std::function<bool(const Parameter&)>& filter = {});
// Full load: every model parameter must be present with matching shape;
// problems are reported together. Partial load: only names present in the
// file are loaded (shape mismatches still fail), everything else keeps its
// built value.
void load_checkpoint_into(Model& m, const std::string& path, bool partial = false);

struct CheckpointEntry {
  std::string name;
  Shape shape;
  bool trainable = false;
  uint64_t checksum = 0;  // FNV-1a over the little-endian payload
};
std::vector<CheckpointEntry> inspect_checkpoint(const std::string& path);

}  // namespace xavt
