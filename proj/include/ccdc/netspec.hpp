#pragma once

#include <array>
#include <string>
#include <vector>

namespace ccdc {

// How a dual-stream network merges its two streams.
enum class Fusion {
  Average,  // one head per stream, predicted depth maps averaged
  Concat,   // stream features concatenated, one shared head
};

Fusion parse_fusion(const std::string& name);
std::string fusion_name(Fusion f);

// A stream's convolution operator: sampling pattern plus theta.
struct StreamOperator {
  std::string op_name = "cdc";
  std::string pattern = "full";
  double theta = 0.8;
};

// Resolves an operator name (vanilla, vanilla-hv, vanilla-dg, cdc, ccdc-hv,
// ccdc-dg, s1, s2, s3, custom) to a pattern + theta. Vanilla operators force
// theta to zero; custom takes an explicit tap list "dy,dx;dy,dx;...".
StreamOperator stream_operator(const std::string& op_name, double theta, const std::string& custom_taps = "");
std::vector<std::string> operator_names();

struct NetworkSpec {
  int input_size = 256;
  int in_channels = 3;
  int stem_width = 64;
  std::array<int, 3> block_widths = {128, 196, 128};
  std::array<int, 2> head_widths = {128, 64};
  bool dual_stream = false;
  StreamOperator op_a;
  StreamOperator op_b;
  Fusion fusion = Fusion::Average;
  bool cfim_enabled = false;
  bool cfim_learnable = true;
  // alpha low/mid/high then beta low/mid/high (pre-sigmoid).
  std::array<double, 6> cfim_init = {0, 0, 0, 0, 0, 0};

  int label_size() const { return input_size / 8; }
};

// Presets: depthnet (vanilla full), cdcn (cdc full), ccdn-hv, ccdn-dg,
// dc-cdn (dual hv+dg with cross feature interaction).
NetworkSpec preset_spec(const std::string& name);
std::vector<std::string> preset_names();

// One conv's structural slot, for counting without building the network.
struct ConvSlot {
  long long cin = 0;
  long long cout = 0;
  long long taps = 0;
  long long out_positions = 0;
  double theta = 0;
};

std::vector<ConvSlot> conv_slots(const NetworkSpec& spec);

// Conv kernel weights only (no bias / batch norm / interaction scalars).
long long count_parameters(const NetworkSpec& spec);
// Multiply-accumulates over sampled taps, positions and channel pairs.
long long count_macs(const NetworkSpec& spec);
// 2 per MAC plus one subtraction per sampled tap when theta > 0.
long long count_flops(const NetworkSpec& spec);

}  // namespace ccdc
