#pragma once

#include "xavt/data.hpp"
#include "xavt/tokenizer.hpp"

namespace xavt {

// Label coupling of the two synthetic factors. xor-coupled ties the label to
// (visual + audio) mod K so neither modality alone carries any information.
enum class Coupling { kVisualOnly, kAudioOnly, kXorCoupled };

const char* coupling_name(Coupling c);
Coupling coupling_from_name(const std::string& name);

struct SynthSpec {
  int num_classes = 2;
  int samples_per_class = 16;
  Coupling coupling = Coupling::kXorCoupled;
  int frames = 8;  // 2T
  int height = 32;
  int width = 32;
  int channels = 1;
  int audio_frames = 32;
  int audio_bins = 32;
  double noise = 0.05;
  uint64_t seed = 0;

  void validate() const;
};

// Deterministic dataset: the visual factor is a bright square following one
// of `num_classes` motion templates, the audio factor one of `num_classes`
// mel-band tone patterns with distinct rhythms. Outputs lie in [0,1] (noise
// is clamped). Byte-identical for identical (spec, seed).
std::vector<Sample> generate(const SynthSpec& spec);

// Writes one "XAVC" file per sample plus a "path<TAB>label" index.
void write_dataset(const std::vector<Sample>& samples, const std::string& dir,
                   const std::string& index_name = "index.tsv");

enum class CorruptionKind { kMisalignment, kDropout, kGaussian, kPink };

const char* corruption_name(CorruptionKind k);

struct Corruption {
  CorruptionKind kind = CorruptionKind::kGaussian;
  double shift_s = 0.0;  // misalignment, |shift| <= clip duration
  double rate = 0.2;     // dropout fraction of time frames, in [0,1]
  double sigma = 0.1;    // gaussian / pink noise scale
};

// "kind" or "kind:param" (misalignment:SHIFT, dropout:RATE, gaussian:SIGMA,
// pink:SIGMA).
Corruption corruption_from_string(const std::string& text);

// Deterministic per (corruption, seed); identity parameters (shift 0, rate
// 0, sigma 0) return the input bit-exactly.
SpectrogramBatch corrupt(const SpectrogramBatch& audio, const Corruption& c, uint64_t seed);

// Convenience: corrupts the audio of every sample (per-sample derived seeds).
std::vector<Sample> corrupt_dataset(const std::vector<Sample>& data, const Corruption& c,
                                    uint64_t seed);

}  // namespace xavt
