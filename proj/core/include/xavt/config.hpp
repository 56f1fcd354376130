#pragma once

#include <map>
#include <string>

#include "xavt/model.hpp"
#include "xavt/synthdata.hpp"
#include "xavt/train.hpp"

namespace xavt {

// Flat key=value run configuration ("# ..." comments allowed). Unknown keys
// are rejected; every key has a documented default. The effective config can
// be echoed back out and re-read to reproduce a run.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;

  void load_file(const std::string& path);
  // merges "key=value" strings (command-line overrides)
  void apply_overrides(const std::vector<std::string>& pairs);
  std::string echo() const;
  void write_file(const std::string& path) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  SynthSpec synth_spec() const;
  ViewSpec view_spec() const;

  static std::string help_text();

 private:
  std::map<std::string, std::string> values_;
};

// Parses "TxS" (e.g. "2x3") into a ViewSpec.
ViewSpec parse_views(const std::string& text);

}  // namespace xavt
