#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccdc/augment.hpp"
#include "ccdc/netspec.hpp"

namespace ccdc {

inline constexpr const char* kVersion = "0.1.0";

struct NetworkConfig {
  std::string preset = "dc-cdn";
  std::string op = "";         // override: operator for single-stream (or both streams)
  std::string custom_taps = "";
  double theta = 0.8;
  std::string fusion = "";     // override: average | concat
  std::string cfim = "";       // override: off | learnable | fixed
  std::array<double, 6> cfim_init = {0, 0, 0, 0, 0, 0};
  int input_size = 256;
  int stem_width = 64;
  std::array<int, 3> block_widths = {128, 196, 128};
  std::array<int, 2> head_widths = {128, 64};
};

struct DataConfig {
  std::uint64_t seed = 7;
  int n_train = 512;
  int n_dev = 128;
  int n_test = 256;
  int n_domains = 3;
  double live_fraction = 0.5;
  double noise = 0.02;
  double lattice_amp = 0.18;
  int lattice_period = 4;
};

struct AugConfig {
  bool hflip = true;
  double jitter = 0.05;
  bool cutout = true;
  double cutout_min = 0.1;
  double cutout_max = 0.3;
  bool pe = true;
  double gamma = 0.5;
  int rho = 2;
  double patch_min = 0.125;
  double patch_max = 0.5;
};

struct TrainerConfig {
  double lr = 1e-4;
  double weight_decay = 5e-5;
  int batch = 8;
  int epochs = 60;
  int halve_at = 40;
  double cdl_weight = 1.0;
};

struct OutputConfig {
  std::string dir = "run";
};

struct RunConfig {
  NetworkConfig network;
  DataConfig data;
  AugConfig aug;
  TrainerConfig trainer;
  OutputConfig output;

  NetworkSpec to_network_spec() const;
  SyntheticSceneConfig scene_config() const;
  PatchExchangeConfig pe_config() const;
  BaselineAugConfig baseline_config() const;
};

// Parses the sectioned key=value format; unknown sections or keys are
// errors naming the offender.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Applies one "section.key=value" override.
void apply_override(RunConfig& cfg, const std::string& spec);

// Throws std::invalid_argument naming the bad field.
void validate_config(const RunConfig& cfg);

std::string config_to_text(const RunConfig& cfg);

}  // namespace ccdc
