#include "xavt/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace xavt {

namespace fs = std::filesystem;

const char* coupling_name(Coupling c) {
  switch (c) {
    case Coupling::kVisualOnly: return "visual-only";
    case Coupling::kAudioOnly: return "audio-only";
    case Coupling::kXorCoupled: return "xor-coupled";
  }
  return "?";
}

Coupling coupling_from_name(const std::string& name) {
  if (name == "visual-only" || name == "visual") return Coupling::kVisualOnly;
  if (name == "audio-only" || name == "audio") return Coupling::kAudioOnly;
  if (name == "xor-coupled" || name == "xor") return Coupling::kXorCoupled;
  throw ConfigError("unknown coupling: " + name);
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
  if (frames < 2 || frames % 2 != 0) throw ConfigError("synth: frames must be even and >= 2");
  if (height < 8 || width < 8) throw ConfigError("synth: clip geometry too small");
  if (channels < 1) throw ConfigError("synth: channels must be >= 1");
  if (audio_frames < 4 || audio_bins < 2 * num_classes)
    throw ConfigError("synth: spectrogram too small for the class count");
  if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
  if (coupling == Coupling::kXorCoupled && samples_per_class % num_classes != 0)
    throw ConfigError(
        "synth: xor coupling needs samples_per_class divisible by num_classes so every "
        "(visual, audio) factor pair appears equally often");
}

namespace {

// Motion templates: a bright square sweeping a class-specific path.
void draw_visual(Tensor& video, int v_idx, const SynthSpec& spec) {
  int64_t f2 = spec.frames, h = spec.height, w = spec.width, c = spec.channels;
  int64_t side = std::max<int64_t>(2, std::min(h, w) / 4);
  for (int64_t f = 0; f < f2; ++f) {
    double progress = f2 > 1 ? static_cast<double>(f) / static_cast<double>(f2 - 1) : 0.0;
    int64_t max_y = h - side, max_x = w - side;
    int64_t y = 0, x = 0;
    switch (v_idx % 4) {
      case 0:  // along the top, left to right
        y = 0;
        x = static_cast<int64_t>(std::llround(progress * max_x));
        break;
      case 1:  // along the bottom, right to left
        y = max_y;
        x = static_cast<int64_t>(std::llround((1.0 - progress) * max_x));
        break;
      case 2:  // down the left edge
        y = static_cast<int64_t>(std::llround(progress * max_y));
        x = 0;
        break;
      case 3:  // up the right edge
        y = static_cast<int64_t>(std::llround((1.0 - progress) * max_y));
        x = max_x;
        break;
    }
    double value = 1.0 - 0.1 * (v_idx / 4);  // extra templates dim slightly
    for (int64_t dy = 0; dy < side; ++dy)
      for (int64_t dx = 0; dx < side; ++dx)
        for (int64_t ch = 0; ch < c; ++ch)
          video.set((((f * h + y + dy) * w) + x + dx) * c + ch, value);
  }
}

// Tone templates: disjoint mel bands with class-specific on/off rhythms.
void draw_audio(Tensor& audio, int a_idx, const SynthSpec& spec) {
  int64_t tf = spec.audio_frames, mel = spec.audio_bins;
  int64_t band = mel / (2 * spec.num_classes);
  int64_t lo = a_idx * 2 * band;  // disjoint band per class, gaps between
  int64_t hi = lo + band;
  int64_t period = std::max<int64_t>(2, tf / (2 + a_idx % 3));
  for (int64_t t = 0; t < tf; ++t) {
    bool on = (t / period) % 2 == 0;
    double v = on ? 0.9 : 0.45;
    for (int64_t m = lo; m < hi; ++m) audio.set(t * mel + m, v);
  }
}

}  // namespace

std::vector<Sample> generate(const SynthSpec& spec) {
  spec.validate();
  int k = spec.num_classes;
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(k) * spec.samples_per_class);
  int64_t index = 0;
  for (int label = 0; label < k; ++label) {
    for (int j = 0; j < spec.samples_per_class; ++j, ++index) {
      Rng rng(spec.seed, "sample/" + std::to_string(index));
      int v_idx = 0, a_idx = 0;
      switch (spec.coupling) {
        case Coupling::kVisualOnly:
          v_idx = label;
          a_idx = static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
          break;
        case Coupling::kAudioOnly:
          a_idx = label;
          v_idx = static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
          break;
        case Coupling::kXorCoupled:
          // cycle the visual factor so its marginal given the label is uniform
          v_idx = j % k;
          a_idx = ((label - v_idx) % k + k) % k;
          break;
      }
      Sample s;
      s.video = Tensor::zeros({spec.frames, spec.height, spec.width, spec.channels}, Dtype::kF32);
      s.audio = Tensor::zeros({spec.audio_frames, spec.audio_bins}, Dtype::kF32);
      s.label = label;
      draw_visual(s.video, v_idx, spec);
      draw_audio(s.audio, a_idx, spec);
      if (spec.noise > 0.0) {
        auto add_noise = [&](Tensor& t) {
          for (int64_t i = 0; i < t.numel(); ++i) {
            double v = t.at(i) + spec.noise * rng.normal();
            t.set(i, std::min(1.0, std::max(0.0, v)));
          }
        };
        add_noise(s.video);
        add_noise(s.audio);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void write_dataset(const std::vector<Sample>& samples, const std::string& dir,
                   const std::string& index_name) {
  fs::create_directories(dir);
  std::vector<std::pair<std::string, int64_t>> rows;
  for (size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.xavc", i);
    write_sample_file((fs::path(dir) / name).string(), samples[i]);
    rows.emplace_back(name, samples[i].label);
  }
  write_index((fs::path(dir) / index_name).string(), rows);
}

const char* corruption_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kMisalignment: return "misalignment";
    case CorruptionKind::kDropout: return "dropout";
    case CorruptionKind::kGaussian: return "gaussian";
    case CorruptionKind::kPink: return "pink";
  }
  return "?";
}

Corruption corruption_from_string(const std::string& text) {
  std::string kind = text;
  std::string param;
  size_t colon = text.find(':');
  if (colon != std::string::npos) {
    kind = text.substr(0, colon);
    param = text.substr(colon + 1);
  }
  Corruption c;
  if (kind == "misalignment") {
    c.kind = CorruptionKind::kMisalignment;
    c.shift_s = param.empty() ? 0.5 : std::stod(param);
  } else if (kind == "dropout") {
    c.kind = CorruptionKind::kDropout;
    c.rate = param.empty() ? 0.2 : std::stod(param);
  } else if (kind == "gaussian") {
    c.kind = CorruptionKind::kGaussian;
    c.sigma = param.empty() ? 0.1 : std::stod(param);
  } else if (kind == "pink") {
    c.kind = CorruptionKind::kPink;
    c.sigma = param.empty() ? 0.1 : std::stod(param);
  } else {
    throw ConfigError("unknown corruption kind: " + kind);
  }
  return c;
}

namespace {

Tensor pink_noise_field(int64_t tf, int64_t mel, Rng& rng) {
  // white noise shaped by amplitude ~ 1/sqrt(f) over the 2-d frequency grid
  Tensor field = Tensor::zeros({tf, mel}, Dtype::kF32);
  int64_t kt_max = tf / 2, kf_max = mel / 2;
  std::vector<double> acc(static_cast<size_t>(tf * mel), 0.0);
  for (int64_t kt = 0; kt <= kt_max; ++kt) {
    for (int64_t kf = -kf_max; kf <= kf_max; ++kf) {
      if (kt == 0 && kf <= 0) continue;  // skip DC and conjugate duplicates
      double ft = static_cast<double>(kt) / static_cast<double>(tf);
      double ff = static_cast<double>(kf) / static_cast<double>(mel);
      double f = std::sqrt(ft * ft + ff * ff);
      double amp = 1.0 / std::sqrt(f);
      double phase = 6.283185307179586 * rng.uniform_f64();
      double mag = amp * rng.normal();
      for (int64_t t = 0; t < tf; ++t)
        for (int64_t m = 0; m < mel; ++m) {
          double arg = 6.283185307179586 * (ft * t + ff * m) + phase;
          acc[static_cast<size_t>(t * mel + m)] += mag * std::cos(arg);
        }
    }
  }
  double mean = 0.0;
  for (double v : acc) mean += v;
  mean /= static_cast<double>(acc.size());
  double var = 0.0;
  for (double v : acc) var += (v - mean) * (v - mean);
  var /= static_cast<double>(acc.size());
  double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (int64_t i = 0; i < field.numel(); ++i)
    field.set(i, (acc[static_cast<size_t>(i)] - mean) * inv_std);
  return field;
}

}  // namespace

SpectrogramBatch corrupt(const SpectrogramBatch& audio, const Corruption& c, uint64_t seed) {
  audio.validate();
  int64_t b = audio.batch(), tf = audio.time_frames(), mel = audio.mel_bins();
  switch (c.kind) {
    case CorruptionKind::kMisalignment: {
      if (std::abs(c.shift_s) > audio.duration_s)
        throw ContractError("misalignment shift exceeds the clip duration");
      int64_t shift = static_cast<int64_t>(
          std::llround(c.shift_s * static_cast<double>(tf) / audio.duration_s));
      if (shift % tf == 0) return audio;
      SpectrogramBatch out{zeros_like(audio.data), audio.duration_s};
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t t = 0; t < tf; ++t) {
          int64_t src = ((t - shift) % tf + tf) % tf;  // circular shift of the time axis
          for (int64_t m = 0; m < mel; ++m)
            out.data.set((bi * tf + t) * mel + m, audio.data.at((bi * tf + src) * mel + m));
        }
      return out;
    }
    case CorruptionKind::kDropout: {
      if (c.rate < 0.0 || c.rate > 1.0) throw ContractError("dropout rate must be in [0,1]");
      int64_t drop = static_cast<int64_t>(std::llround(c.rate * static_cast<double>(tf)));
      if (drop == 0) return audio;
      SpectrogramBatch out{audio.data.clone(), audio.duration_s};
      Rng rng(seed, "corrupt/dropout");
      for (int64_t bi = 0; bi < b; ++bi) {
        std::vector<int64_t> frames(static_cast<size_t>(tf));
        for (int64_t t = 0; t < tf; ++t) frames[static_cast<size_t>(t)] = t;
        for (int64_t i = 0; i < drop; ++i) {
          int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(tf - i)));
          std::swap(frames[static_cast<size_t>(i)], frames[static_cast<size_t>(j)]);
          int64_t t = frames[static_cast<size_t>(i)];
          for (int64_t m = 0; m < mel; ++m) out.data.set((bi * tf + t) * mel + m, 0.0);
        }
      }
      return out;
    }
    case CorruptionKind::kGaussian: {
      if (c.sigma == 0.0) return audio;
      SpectrogramBatch out{audio.data.clone(), audio.duration_s};
      Rng rng(seed, "corrupt/gaussian");
      for (int64_t i = 0; i < out.data.numel(); ++i)
        out.data.set(i, out.data.at(i) + c.sigma * rng.normal());
      return out;
    }
    case CorruptionKind::kPink: {
      if (c.sigma == 0.0) return audio;
      SpectrogramBatch out{audio.data.clone(), audio.duration_s};
      Rng rng(seed, "corrupt/pink");
      for (int64_t bi = 0; bi < b; ++bi) {
        Tensor field = pink_noise_field(tf, mel, rng);
        for (int64_t i = 0; i < tf * mel; ++i)
          out.data.set(bi * tf * mel + i, out.data.at(bi * tf * mel + i) + c.sigma * field.at(i));
      }
      return out;
    }
  }
  throw ContractError("bad corruption kind");
}

std::vector<Sample> corrupt_dataset(const std::vector<Sample>& data, const Corruption& c,
                                    uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    Sample s;
    s.video = data[i].video;
    s.label = data[i].label;
    Tensor audio3 = reshape(data[i].audio, {1, data[i].audio.extent(0), data[i].audio.extent(1)});
    SpectrogramBatch sb{audio3, kClipDurationS};
    SpectrogramBatch corrupted = corrupt(sb, c, seed + i);
    s.audio = reshape(corrupted.data, {data[i].audio.extent(0), data[i].audio.extent(1)});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace xavt
