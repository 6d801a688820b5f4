#include "ccdc/pattern.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ccdc {

namespace {

std::map<std::string, SamplingPattern>& registry() {
  static std::map<std::string, SamplingPattern> reg = {
      {"full",
       {"full",
        {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 0}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}}},
      {"hv", {"hv", {{-1, 0}, {0, -1}, {0, 0}, {0, 1}, {1, 0}}}},
      {"dg", {"dg", {{-1, -1}, {-1, 1}, {0, 0}, {1, -1}, {1, 1}}}},
      {"s1", {"s1", {{-1, -1}, {-1, 0}, {0, 0}, {0, 1}, {1, 1}}}},
      {"s2", {"s2", {{-1, 0}, {0, 0}, {0, 1}}}},
      {"s3", {"s3", {{0, 0}, {1, 1}}}},
  };
  return reg;
}

void validate(const SamplingPattern& p) {
  if (p.taps.empty()) throw std::invalid_argument("pattern '" + p.name + "' has no taps");
  std::set<std::pair<int, int>> seen;
  for (auto [dy, dx] : p.taps) {
    if (dy < -1 || dy > 1 || dx < -1 || dx > 1) {
      throw std::invalid_argument("pattern '" + p.name + "' tap (" + std::to_string(dy) + "," + std::to_string(dx) +
                                  ") is outside the 3x3 envelope");
    }
    if (!seen.insert({dy, dx}).second) {
      throw std::invalid_argument("pattern '" + p.name + "' has duplicate tap (" + std::to_string(dy) + "," +
                                  std::to_string(dx) + ")");
    }
  }
}

}  // namespace

const SamplingPattern& pattern(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) {
    throw std::invalid_argument("unknown sampling pattern '" + name + "'");
  }
  return it->second;
}

bool has_pattern(const std::string& name) { return registry().count(name) != 0; }

void register_pattern(SamplingPattern p) {
  validate(p);
  registry()[p.name] = std::move(p);
}

std::vector<std::string> builtin_pattern_names() { return {"full", "hv", "dg", "s1", "s2", "s3"}; }

SamplingPattern parse_pattern(const std::string& name, const std::string& tap_list) {
  SamplingPattern p{name, {}};
  std::stringstream ss(tap_list);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    std::stringstream pair_ss(item);
    std::string ys, xs;
    if (!std::getline(pair_ss, ys, ',') || !std::getline(pair_ss, xs)) {
      throw std::invalid_argument("pattern tap '" + item + "' is not of the form dy,dx");
    }
    p.taps.emplace_back(std::stoi(ys), std::stoi(xs));
  }
  validate(p);
  return p;
}

}  // namespace ccdc
