#include "ccdc/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ccdc {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: " + field + " " + why);
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    bad_field(field, "expects a number, got '" + v + "'");
  }
}

int to_int(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return static_cast<int>(d);
  } catch (...) {
    bad_field(field, "expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return static_cast<std::uint64_t>(d);
  } catch (...) {
    bad_field(field, "expects a non-negative integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  bad_field(field, "expects true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& field, const std::string& v, std::size_t count) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_double(field, trim(part)));
  if (out.size() != count) {
    bad_field(field, "expects " + std::to_string(count) + " comma-separated values, got " +
                         std::to_string(out.size()));
  }
  return out;
}

void set_key(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const std::string field = section + "." + key;
  if (section == "network") {
    auto& n = cfg.network;
    if (key == "preset") n.preset = value;
    else if (key == "operator") n.op = value;
    else if (key == "custom_taps") n.custom_taps = value;
    else if (key == "theta") n.theta = to_double(field, value);
    else if (key == "fusion") n.fusion = value;
    else if (key == "cfim") n.cfim = value;
    else if (key == "cfim_init") {
      auto v = to_list(field, value, 6);
      for (std::size_t i = 0; i < 6; ++i) n.cfim_init[i] = v[i];
    } else if (key == "input_size") n.input_size = to_int(field, value);
    else if (key == "stem_width") n.stem_width = to_int(field, value);
    else if (key == "block_widths") {
      auto v = to_list(field, value, 3);
      for (std::size_t i = 0; i < 3; ++i) n.block_widths[i] = static_cast<int>(v[i]);
    } else if (key == "head_widths") {
      auto v = to_list(field, value, 2);
      for (std::size_t i = 0; i < 2; ++i) n.head_widths[i] = static_cast<int>(v[i]);
    } else bad_field(field, "is not a known key");
  } else if (section == "data") {
    auto& d = cfg.data;
    if (key == "seed") d.seed = to_u64(field, value);
    else if (key == "n_train") d.n_train = to_int(field, value);
    else if (key == "n_dev") d.n_dev = to_int(field, value);
    else if (key == "n_test") d.n_test = to_int(field, value);
    else if (key == "n_domains") d.n_domains = to_int(field, value);
    else if (key == "live_fraction") d.live_fraction = to_double(field, value);
    else if (key == "noise") d.noise = to_double(field, value);
    else if (key == "lattice_amp") d.lattice_amp = to_double(field, value);
    else if (key == "lattice_period") d.lattice_period = to_int(field, value);
    else bad_field(field, "is not a known key");
  } else if (section == "aug") {
    auto& a = cfg.aug;
    if (key == "hflip") a.hflip = to_bool(field, value);
    else if (key == "jitter") a.jitter = to_double(field, value);
    else if (key == "cutout") a.cutout = to_bool(field, value);
    else if (key == "cutout_min") a.cutout_min = to_double(field, value);
    else if (key == "cutout_max") a.cutout_max = to_double(field, value);
    else if (key == "pe") a.pe = to_bool(field, value);
    else if (key == "gamma") a.gamma = to_double(field, value);
    else if (key == "rho") a.rho = to_int(field, value);
    else if (key == "patch_min") a.patch_min = to_double(field, value);
    else if (key == "patch_max") a.patch_max = to_double(field, value);
    else bad_field(field, "is not a known key");
  } else if (section == "trainer") {
    auto& t = cfg.trainer;
    if (key == "lr") t.lr = to_double(field, value);
    else if (key == "weight_decay") t.weight_decay = to_double(field, value);
    else if (key == "batch") t.batch = to_int(field, value);
    else if (key == "epochs") t.epochs = to_int(field, value);
    else if (key == "halve_at") t.halve_at = to_int(field, value);
    else if (key == "cdl_weight") t.cdl_weight = to_double(field, value);
    else bad_field(field, "is not a known key");
  } else if (section == "output") {
    if (key == "dir") cfg.output.dir = value;
    else bad_field(field, "is not a known key");
  } else {
    throw std::invalid_argument("config: unknown section [" + section + "]");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config: line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": key outside any [section]");
    }
    set_key(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  const std::size_t dot = spec.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw std::invalid_argument("config: override '" + spec + "' must look like section.key=value");
  }
  set_key(cfg, trim(spec.substr(0, dot)), trim(spec.substr(dot + 1, eq - dot - 1)), trim(spec.substr(eq + 1)));
}

void validate_config(const RunConfig& cfg) {
  const auto& n = cfg.network;
  if (n.input_size < 8 || n.input_size % 8 != 0) bad_field("network.input_size", "must be a positive multiple of 8");
  if (n.theta < 0.0 || n.theta > 1.0) bad_field("network.theta", "must lie in [0,1]");
  if (n.stem_width < 1) bad_field("network.stem_width", "must be >= 1");
  for (int w : n.block_widths)
    if (w < 1) bad_field("network.block_widths", "entries must be >= 1");
  for (int w : n.head_widths)
    if (w < 1) bad_field("network.head_widths", "entries must be >= 1");
  if (!n.cfim.empty() && n.cfim != "off" && n.cfim != "learnable" && n.cfim != "fixed") {
    bad_field("network.cfim", "must be off, learnable or fixed");
  }
  if (!n.fusion.empty() && n.fusion != "average" && n.fusion != "concat") {
    bad_field("network.fusion", "must be average or concat");
  }

  const auto& d = cfg.data;
  if (d.n_train < 1) bad_field("data.n_train", "must be >= 1");
  if (d.n_dev < 2) bad_field("data.n_dev", "must be >= 2");
  if (d.n_test < 2) bad_field("data.n_test", "must be >= 2");
  if (d.n_domains < 1) bad_field("data.n_domains", "must be >= 1");
  if (d.live_fraction < 0 || d.live_fraction > 1) bad_field("data.live_fraction", "must lie in [0,1]");
  if (d.noise < 0) bad_field("data.noise", "must be >= 0");
  if (d.lattice_period < 2) bad_field("data.lattice_period", "must be >= 2");

  const auto& a = cfg.aug;
  if (a.jitter < 0) bad_field("aug.jitter", "must be >= 0");
  if (a.cutout_min < 0 || a.cutout_min > a.cutout_max || a.cutout_max > 1) {
    bad_field("aug.cutout_min/cutout_max", "must satisfy 0 <= min <= max <= 1");
  }
  if (a.gamma < 0 || a.gamma > 1) bad_field("aug.gamma", "must lie in [0,1]");
  if (a.rho < 1) bad_field("aug.rho", "must be >= 1");
  if (!(a.patch_min > 0) || a.patch_min > a.patch_max || a.patch_max > 1) {
    bad_field("aug.patch_min/patch_max", "must satisfy 0 < min <= max <= 1");
  }

  const auto& t = cfg.trainer;
  if (!(t.lr > 0)) bad_field("trainer.lr", "must be > 0");
  if (t.weight_decay < 0) bad_field("trainer.weight_decay", "must be >= 0");
  if (t.batch < 1) bad_field("trainer.batch", "must be >= 1");
  if (t.epochs < 0) bad_field("trainer.epochs", "must be >= 0");
  if (t.halve_at < 0) bad_field("trainer.halve_at", "must be >= 0");
  if (t.cdl_weight < 0) bad_field("trainer.cdl_weight", "must be >= 0");
  if (cfg.output.dir.empty()) bad_field("output.dir", "must not be empty");

  cfg.to_network_spec();  // resolves preset/operator/pattern names, throws on bad ones
}

NetworkSpec RunConfig::to_network_spec() const {
  NetworkSpec spec = preset_spec(network.preset);
  spec.input_size = network.input_size;
  spec.stem_width = network.stem_width;
  spec.block_widths = network.block_widths;
  spec.head_widths = network.head_widths;
  if (!network.op.empty()) {
    spec.op_a = stream_operator(network.op, network.theta, network.custom_taps);
    if (spec.dual_stream) spec.op_b = spec.op_a;
  } else {
    spec.op_a = stream_operator(spec.op_a.op_name, network.theta, network.custom_taps);
    if (spec.dual_stream) spec.op_b = stream_operator(spec.op_b.op_name, network.theta, network.custom_taps);
  }
  if (!network.fusion.empty()) spec.fusion = parse_fusion(network.fusion);
  if (!network.cfim.empty()) {
    if (network.cfim == "off") {
      spec.cfim_enabled = false;
    } else {
      spec.cfim_enabled = true;
      spec.cfim_learnable = network.cfim == "learnable";
    }
  }
  spec.cfim_init = network.cfim_init;
  if (spec.cfim_enabled && !spec.dual_stream) {
    throw std::invalid_argument("config: network.cfim requires a dual-stream preset");
  }
  return spec;
}

SyntheticSceneConfig RunConfig::scene_config() const {
  SyntheticSceneConfig s;
  s.image_size = network.input_size;
  s.n_domains = data.n_domains;
  s.noise = data.noise;
  s.lattice_amp = data.lattice_amp;
  s.lattice_period = data.lattice_period;
  return s;
}

PatchExchangeConfig RunConfig::pe_config() const {
  PatchExchangeConfig p;
  p.gamma = aug.gamma;
  p.rho = aug.rho;
  p.min_frac = aug.patch_min;
  p.max_frac = aug.patch_max;
  return p;
}

BaselineAugConfig RunConfig::baseline_config() const {
  BaselineAugConfig b;
  b.hflip = aug.hflip;
  b.jitter = aug.jitter;
  b.cutout = aug.cutout;
  b.cutout_min = aug.cutout_min;
  b.cutout_max = aug.cutout_max;
  return b;
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  const auto& n = cfg.network;
  os << "[network]\n";
  os << "preset = " << n.preset << "\n";
  if (!n.op.empty()) os << "operator = " << n.op << "\n";
  if (!n.custom_taps.empty()) os << "custom_taps = " << n.custom_taps << "\n";
  os << "theta = " << n.theta << "\n";
  if (!n.fusion.empty()) os << "fusion = " << n.fusion << "\n";
  if (!n.cfim.empty()) os << "cfim = " << n.cfim << "\n";
  os << "cfim_init = ";
  for (std::size_t i = 0; i < 6; ++i) os << (i ? "," : "") << n.cfim_init[i];
  os << "\n";
  os << "input_size = " << n.input_size << "\n";
  os << "stem_width = " << n.stem_width << "\n";
  os << "block_widths = " << n.block_widths[0] << "," << n.block_widths[1] << "," << n.block_widths[2] << "\n";
  os << "head_widths = " << n.head_widths[0] << "," << n.head_widths[1] << "\n";
  const auto& d = cfg.data;
  os << "\n[data]\n";
  os << "seed = " << d.seed << "\n";
  os << "n_train = " << d.n_train << "\n";
  os << "n_dev = " << d.n_dev << "\n";
  os << "n_test = " << d.n_test << "\n";
  os << "n_domains = " << d.n_domains << "\n";
  os << "live_fraction = " << d.live_fraction << "\n";
  os << "noise = " << d.noise << "\n";
  os << "lattice_amp = " << d.lattice_amp << "\n";
  os << "lattice_period = " << d.lattice_period << "\n";
  const auto& a = cfg.aug;
  os << "\n[aug]\n";
  os << "hflip = " << (a.hflip ? "true" : "false") << "\n";
  os << "jitter = " << a.jitter << "\n";
  os << "cutout = " << (a.cutout ? "true" : "false") << "\n";
  os << "cutout_min = " << a.cutout_min << "\n";
  os << "cutout_max = " << a.cutout_max << "\n";
  os << "pe = " << (a.pe ? "true" : "false") << "\n";
  os << "gamma = " << a.gamma << "\n";
  os << "rho = " << a.rho << "\n";
  os << "patch_min = " << a.patch_min << "\n";
  os << "patch_max = " << a.patch_max << "\n";
  const auto& t = cfg.trainer;
  os << "\n[trainer]\n";
  os << "lr = " << t.lr << "\n";
  os << "weight_decay = " << t.weight_decay << "\n";
  os << "batch = " << t.batch << "\n";
  os << "epochs = " << t.epochs << "\n";
  os << "halve_at = " << t.halve_at << "\n";
  os << "cdl_weight = " << t.cdl_weight << "\n";
  os << "\n[output]\n";
  os << "dir = " << cfg.output.dir << "\n";
  return os.str();
}

}  // namespace ccdc
