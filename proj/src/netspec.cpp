#include "ccdc/netspec.hpp"

#include <stdexcept>

#include "ccdc/pattern.hpp"

namespace ccdc {

Fusion parse_fusion(const std::string& name) {
  if (name == "average") return Fusion::Average;
  if (name == "concat") return Fusion::Concat;
  throw std::invalid_argument("fusion must be 'average' or 'concat', got '" + name + "'");
}

std::string fusion_name(Fusion f) { return f == Fusion::Average ? "average" : "concat"; }

StreamOperator stream_operator(const std::string& op_name, double theta, const std::string& custom_taps) {
  if (theta < 0.0 || theta > 1.0) {
    throw std::invalid_argument("theta must lie in [0,1], got " + std::to_string(theta));
  }
  StreamOperator op;
  op.op_name = op_name;
  op.theta = theta;
  if (op_name == "vanilla") {
    op.pattern = "full";
    op.theta = 0.0;
  } else if (op_name == "vanilla-hv") {
    op.pattern = "hv";
    op.theta = 0.0;
  } else if (op_name == "vanilla-dg") {
    op.pattern = "dg";
    op.theta = 0.0;
  } else if (op_name == "cdc") {
    op.pattern = "full";
  } else if (op_name == "ccdc-hv") {
    op.pattern = "hv";
  } else if (op_name == "ccdc-dg") {
    op.pattern = "dg";
  } else if (op_name == "s1") {
    op.pattern = "s1";
  } else if (op_name == "s2") {
    op.pattern = "s2";
  } else if (op_name == "s3") {
    op.pattern = "s3";
  } else if (op_name == "custom") {
    if (custom_taps.empty()) throw std::invalid_argument("custom operator needs a tap list 'dy,dx;dy,dx;...'");
    SamplingPattern pat = parse_pattern("custom", custom_taps);
    register_pattern(pat);
    op.pattern = "custom";
  } else {
    throw std::invalid_argument("unknown operator '" + op_name +
                                "' (try vanilla, vanilla-hv, vanilla-dg, cdc, ccdc-hv, ccdc-dg, s1, s2, s3, custom)");
  }
  return op;
}

std::vector<std::string> operator_names() {
  return {"vanilla", "vanilla-hv", "vanilla-dg", "cdc", "ccdc-hv", "ccdc-dg", "s1", "s2", "s3"};
}

NetworkSpec preset_spec(const std::string& name) {
  NetworkSpec spec;
  if (name == "depthnet") {
    spec.op_a = stream_operator("vanilla", 0.0);
  } else if (name == "cdcn") {
    spec.op_a = stream_operator("cdc", 0.8);
  } else if (name == "ccdn-hv") {
    spec.op_a = stream_operator("ccdc-hv", 0.8);
  } else if (name == "ccdn-dg") {
    spec.op_a = stream_operator("ccdc-dg", 0.8);
  } else if (name == "dc-cdn") {
    spec.dual_stream = true;
    spec.op_a = stream_operator("ccdc-hv", 0.8);
    spec.op_b = stream_operator("ccdc-dg", 0.8);
    spec.fusion = Fusion::Average;
    spec.cfim_enabled = true;
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (try depthnet, cdcn, ccdn-hv, ccdn-dg, dc-cdn)");
  }
  return spec;
}

std::vector<std::string> preset_names() { return {"depthnet", "cdcn", "ccdn-hv", "ccdn-dg", "dc-cdn"}; }

namespace {

int halve(int extent) { return (extent - 1) / 2 + 1; }  // 3x3 maxpool, stride 2, pad 1

void stream_slots(const NetworkSpec& spec, const StreamOperator& op, std::vector<ConvSlot>& out) {
  const long long taps = static_cast<long long>(pattern(op.pattern).tap_count());
  auto push = [&](int cin, int cout, int extent) {
    ConvSlot slot;
    slot.cin = cin;
    slot.cout = cout;
    slot.taps = taps;
    slot.out_positions = static_cast<long long>(extent) * extent;
    slot.theta = op.theta;
    out.push_back(slot);
  };
  int extent = spec.input_size;
  push(spec.in_channels, spec.stem_width, extent);  // stem
  int cin = spec.stem_width;
  for (int b = 0; b < 3; ++b) {
    extent = halve(extent);
    for (int w : spec.block_widths) {
      push(cin, w, extent);
      cin = w;
    }
  }
}

void head_slots(const NetworkSpec& spec, const StreamOperator& op, int cin, std::vector<ConvSlot>& out) {
  const long long taps = static_cast<long long>(pattern(op.pattern).tap_count());
  const int extent = spec.label_size();
  auto push = [&](int ci, int co) {
    ConvSlot slot;
    slot.cin = ci;
    slot.cout = co;
    slot.taps = taps;
    slot.out_positions = static_cast<long long>(extent) * extent;
    slot.theta = op.theta;
    out.push_back(slot);
  };
  push(cin, spec.head_widths[0]);
  push(spec.head_widths[0], spec.head_widths[1]);
  push(spec.head_widths[1], 1);
}

}  // namespace

std::vector<ConvSlot> conv_slots(const NetworkSpec& spec) {
  if (spec.input_size < 8 || spec.input_size % 8 != 0) {
    throw std::invalid_argument("input_size must be a positive multiple of 8, got " + std::to_string(spec.input_size));
  }
  std::vector<ConvSlot> slots;
  const int tap_channels = 3 * spec.block_widths[2];  // low+mid+high concat
  if (!spec.dual_stream) {
    stream_slots(spec, spec.op_a, slots);
    head_slots(spec, spec.op_a, tap_channels, slots);
    return slots;
  }
  stream_slots(spec, spec.op_a, slots);
  stream_slots(spec, spec.op_b, slots);
  if (spec.fusion == Fusion::Average) {
    head_slots(spec, spec.op_a, tap_channels, slots);
    head_slots(spec, spec.op_b, tap_channels, slots);
  } else {
    head_slots(spec, spec.op_a, 2 * tap_channels, slots);
  }
  return slots;
}

long long count_parameters(const NetworkSpec& spec) {
  long long total = 0;
  for (const ConvSlot& s : conv_slots(spec)) total += s.cin * s.cout * s.taps;
  return total;
}

long long count_macs(const NetworkSpec& spec) {
  long long total = 0;
  for (const ConvSlot& s : conv_slots(spec)) total += s.cin * s.cout * s.taps * s.out_positions;
  return total;
}

long long count_flops(const NetworkSpec& spec) {
  long long total = 0;
  for (const ConvSlot& s : conv_slots(spec)) {
    const long long macs = s.cin * s.cout * s.taps * s.out_positions;
    total += 2 * macs + (s.theta > 0 ? macs : 0);
  }
  return total;
}

}  // namespace ccdc
