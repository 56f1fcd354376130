#include "xavt/config.hpp"

#include <fstream>
#include <sstream>

namespace xavt {

namespace {

struct KeySpec {
  const char* key;
  const char* default_value;
  const char* doc;
};

// every recognized key with its default
const KeySpec kKeys[] = {
    {"variant", "CAVA", "model variant: CAST | CAVA | CA2ST"},
    {"depth", "2", "transformer blocks per expert"},
    {"dim", "32", "expert embedding dim D"},
    {"heads", "4", "self-attention heads"},
    {"patch", "8", "visual patch size p"},
    {"frames", "4", "raw input frames 2T (even)"},
    {"height", "16", "input height"},
    {"width", "16", "input width"},
    {"channels", "1", "input channels"},
    {"audio_frames", "32", "spectrogram time frames"},
    {"audio_bins", "32", "spectrogram mel bins"},
    {"audio_patch", "16", "audio patch size"},
    {"audio_stride", "10", "audio patch stride (overlap = patch - stride)"},
    {"d_adapter", "8", "adapter bottleneck width"},
    {"d_bca", "8", "cross-attention bottleneck width"},
    {"bca_heads", "2", "cross-attention heads"},
    {"tmlp_hidden", "16", "time-interval MLP hidden width"},
    {"num_classes", "2", "classifier classes"},
    {"drop_path", "0", "stochastic depth rate (training only)"},
    {"seed", "0", "master seed; init/data/dropout streams derive from it"},
    {"dtype", "f32", "numeric mode: f32 | f64"},
    {"window.t2s", "", "window override for t2s (space|time|space-time)"},
    {"window.s2t", "", "window override for s2t"},
    {"window.a2s", "", "window override for a2s"},
    {"window.s2a", "", "window override for s2a"},
    {"window.a2t", "", "window override for a2t"},
    {"window.t2a", "", "window override for t2a"},
    {"disable_dirs", "", "comma-separated directions whose Phi is removed"},
    {"lr", "0.001", "base learning rate"},
    {"beta1", "0.9", "first-moment decay"},
    {"beta2", "0.999", "second-moment decay"},
    {"eps", "1e-8", "optimizer epsilon"},
    {"weight_decay", "0.05", "decoupled weight decay"},
    {"layer_decay", "0.8", "per-layer lr decay factor"},
    {"epochs", "30", "training epochs"},
    {"warmup_epochs", "5", "linear warmup epochs"},
    {"batch_size", "16", "samples per micro-batch"},
    {"update_freq", "1", "micro-batches accumulated per optimizer step"},
    {"views", "1x1", "inference views: temporal x spatial (spatial 1 or 3)"},
    {"synth.classes", "2", "synthetic dataset classes"},
    {"synth.per_class", "16", "synthetic samples per class"},
    {"synth.coupling", "xor", "visual | audio | xor"},
    {"synth.noise", "0.05", "additive noise level (clamped to [0,1])"},
};

bool known_key(const std::string& k) {
  for (const KeySpec& s : kKeys)
    if (k == s.key) return true;
  return false;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const KeySpec& s : kKeys) values_[s.key] = s.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::logic_error&) {
    throw ConfigError("config key " + key + " is not an integer: " + get(key));
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::logic_error&) {
    throw ConfigError("config key " + key + " is not a number: " + get(key));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& pairs) {
  for (const std::string& p : pairs) {
    size_t eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + p);
    set(trim(p.substr(0, eq)), trim(p.substr(eq + 1)));
  }
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
  return os.str();
}

void RunConfig::write_file(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << echo();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig c;
  c.variant = variant_from_name(get("variant"));
  c.depth = static_cast<int>(get_int("depth"));
  c.dim = static_cast<int>(get_int("dim"));
  c.heads = static_cast<int>(get_int("heads"));
  c.patch = static_cast<int>(get_int("patch"));
  c.frames = static_cast<int>(get_int("frames"));
  c.height = static_cast<int>(get_int("height"));
  c.width = static_cast<int>(get_int("width"));
  c.channels = static_cast<int>(get_int("channels"));
  c.audio_frames = static_cast<int>(get_int("audio_frames"));
  c.audio_bins = static_cast<int>(get_int("audio_bins"));
  c.audio_patch = static_cast<int>(get_int("audio_patch"));
  c.audio_stride = static_cast<int>(get_int("audio_stride"));
  c.d_adapter = static_cast<int>(get_int("d_adapter"));
  c.d_bca = static_cast<int>(get_int("d_bca"));
  c.bca_heads = static_cast<int>(get_int("bca_heads"));
  c.tmlp_hidden = static_cast<int>(get_int("tmlp_hidden"));
  c.num_classes = static_cast<int>(get_int("num_classes"));
  c.drop_path = get_double("drop_path");
  c.seed = static_cast<uint64_t>(get_int("seed"));
  std::string dt = get("dtype");
  if (dt == "f32") c.dtype = Dtype::kF32;
  else if (dt == "f64") c.dtype = Dtype::kF64;
  else throw ConfigError("dtype must be f32 or f64, got " + dt);
  for (const char* d : {"t2s", "s2t", "a2s", "s2a", "a2t", "t2a"}) {
    std::string v = get(std::string("window.") + d);
    if (!v.empty()) c.window_override[d] = v;
  }
  std::string disabled = get("disable_dirs");
  std::istringstream ds(disabled);
  std::string item;
  while (std::getline(ds, item, ','))
    if (!trim(item).empty()) c.disabled_dirs.insert(trim(item));
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.optim.base_lr = get_double("lr");
  t.optim.beta1 = get_double("beta1");
  t.optim.beta2 = get_double("beta2");
  t.optim.eps = get_double("eps");
  t.optim.weight_decay = get_double("weight_decay");
  t.optim.layer_decay = get_double("layer_decay");
  t.epochs = static_cast<int>(get_int("epochs"));
  t.warmup_epochs = static_cast<int>(get_int("warmup_epochs"));
  t.batch_size = static_cast<int>(get_int("batch_size"));
  t.update_freq = static_cast<int>(get_int("update_freq"));
  t.seed = static_cast<uint64_t>(get_int("seed"));
  return t;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.num_classes = static_cast<int>(get_int("synth.classes"));
  s.samples_per_class = static_cast<int>(get_int("synth.per_class"));
  s.coupling = coupling_from_name(get("synth.coupling"));
  s.frames = static_cast<int>(get_int("frames"));
  s.height = static_cast<int>(get_int("height"));
  s.width = static_cast<int>(get_int("width"));
  s.channels = static_cast<int>(get_int("channels"));
  s.audio_frames = static_cast<int>(get_int("audio_frames"));
  s.audio_bins = static_cast<int>(get_int("audio_bins"));
  s.noise = get_double("synth.noise");
  s.seed = static_cast<uint64_t>(get_int("seed"));
  return s;
}

ViewSpec RunConfig::view_spec() const { return parse_views(get("views")); }

std::string RunConfig::help_text() {
  std::ostringstream os;
  for (const KeySpec& s : kKeys) {
    os << "  " << s.key;
    if (*s.default_value) os << " (default " << s.default_value << ")";
    os << ": " << s.doc << "\n";
  }
  return os.str();
}

ViewSpec parse_views(const std::string& text) {
  size_t x = text.find('x');
  if (x == std::string::npos) throw ConfigError("views must look like TxS, got " + text);
  ViewSpec v;
  try {
    v.temporal_views = std::stoi(text.substr(0, x));
    v.spatial_crops = std::stoi(text.substr(x + 1));
  } catch (const std::logic_error&) {
    throw ConfigError("views must look like TxS, got " + text);
  }
  if (v.temporal_views < 1 || (v.spatial_crops != 1 && v.spatial_crops != 3))
    throw ConfigError("views: temporal >= 1 and spatial in {1,3}");
  return v;
}

}  // namespace xavt
