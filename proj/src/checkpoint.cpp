#include "ccdc/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ccdc/config.hpp"
#include "ccdc/pattern.hpp"

namespace ccdc {

namespace {

using nlohmann::json;

json op_to_json(const StreamOperator& op) {
  json j;
  j["op_name"] = op.op_name;
  j["pattern"] = op.pattern;
  j["theta"] = op.theta;
  json taps = json::array();
  for (const auto& [dy, dx] : pattern(op.pattern).taps) taps.push_back({dy, dx});
  j["taps"] = taps;
  return j;
}

StreamOperator op_from_json(const json& j) {
  StreamOperator op;
  op.op_name = j.at("op_name").get<std::string>();
  op.pattern = j.at("pattern").get<std::string>();
  op.theta = j.at("theta").get<double>();
  if (!has_pattern(op.pattern)) {
    SamplingPattern pat;
    pat.name = op.pattern;
    for (const auto& t : j.at("taps")) pat.taps.emplace_back(t.at(0).get<int>(), t.at(1).get<int>());
    register_pattern(pat);
  }
  return op;
}

json spec_to_json(const NetworkSpec& spec) {
  json j;
  j["input_size"] = spec.input_size;
  j["in_channels"] = spec.in_channels;
  j["stem_width"] = spec.stem_width;
  j["block_widths"] = spec.block_widths;
  j["head_widths"] = spec.head_widths;
  j["dual_stream"] = spec.dual_stream;
  j["op_a"] = op_to_json(spec.op_a);
  if (spec.dual_stream) j["op_b"] = op_to_json(spec.op_b);
  j["fusion"] = fusion_name(spec.fusion);
  j["cfim_enabled"] = spec.cfim_enabled;
  j["cfim_learnable"] = spec.cfim_learnable;
  j["cfim_init"] = spec.cfim_init;
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_size = j.at("input_size").get<int>();
  spec.in_channels = j.at("in_channels").get<int>();
  spec.stem_width = j.at("stem_width").get<int>();
  spec.block_widths = j.at("block_widths").get<std::array<int, 3>>();
  spec.head_widths = j.at("head_widths").get<std::array<int, 2>>();
  spec.dual_stream = j.at("dual_stream").get<bool>();
  spec.op_a = op_from_json(j.at("op_a"));
  if (spec.dual_stream) spec.op_b = op_from_json(j.at("op_b"));
  spec.fusion = parse_fusion(j.at("fusion").get<std::string>());
  spec.cfim_enabled = j.at("cfim_enabled").get<bool>();
  spec.cfim_learnable = j.at("cfim_learnable").get<bool>();
  spec.cfim_init = j.at("cfim_init").get<std::array<double, 6>>();
  return spec;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint read: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net) {
  auto tensors = net.state_tensors();
  json manifest;
  manifest["format"] = "CCDC-CP1";
  manifest["version"] = kVersion;
  manifest["spec"] = spec_to_json(net.spec);
  json dir = json::array();
  for (const auto& [name, t] : tensors) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t->shape;
    dir.push_back(entry);
  }
  manifest["tensors"] = dir;
  if (net.spec.dual_stream && net.spec.cfim_enabled) {
    json cf = json::array();
    for (std::size_t k = 0; k < 3; ++k) cf.push_back(net.cfims[k].alpha.data[0]);
    for (std::size_t k = 0; k < 3; ++k) cf.push_back(net.cfims[k].beta.data[0]);
    manifest["cfim_values"] = cf;
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  const std::string text = manifest.dump();
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) save_tensor(os, *t);
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  const std::uint32_t len = read_u32(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint read: truncated manifest");
  json manifest = json::parse(text, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "CCDC-CP1") {
    throw std::runtime_error("checkpoint read: '" + path + "' is not a checkpoint file");
  }

  Network net(spec_from_json(manifest.at("spec")));
  auto tensors = net.state_tensors();
  const json& dir = manifest.at("tensors");
  if (dir.size() != tensors.size()) {
    throw std::runtime_error("checkpoint read: tensor directory lists " + std::to_string(dir.size()) +
                             " entries, network has " + std::to_string(tensors.size()));
  }
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const std::string name = dir[k].at("name").get<std::string>();
    if (name != tensors[k].first) {
      throw std::runtime_error("checkpoint read: tensor '" + name + "' where '" + tensors[k].first + "' expected");
    }
    Tensor t = load_tensor(is);
    if (t.shape != tensors[k].second->shape) {
      throw std::runtime_error("checkpoint read: tensor '" + name + "' has shape " + shape_to_string(t.shape) +
                               ", expected " + shape_to_string(tensors[k].second->shape));
    }
    *tensors[k].second = std::move(t);
  }
  return net;
}

}  // namespace ccdc
