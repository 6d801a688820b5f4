#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ccdc {

// Ordered set of (dy, dx) tap offsets inside the 3x3 envelope. Every
// built-in pattern samples the center (0,0).
struct SamplingPattern {
  std::string name;
  std::vector<std::pair<int, int>> taps;

  std::size_t tap_count() const { return taps.size(); }
};

// Built-ins: "full" (the 3x3 region, row-major), "hv" and "dg" (the two
// cross patterns), and the sparse/asymmetric variants "s1", "s2", "s3".
const SamplingPattern& pattern(const std::string& name);
bool has_pattern(const std::string& name);
void register_pattern(SamplingPattern p);
std::vector<std::string> builtin_pattern_names();

// Parses "dy,dx;dy,dx;..." into a pattern, validating uniqueness and the
// 3x3 envelope.
SamplingPattern parse_pattern(const std::string& name, const std::string& tap_list);

}  // namespace ccdc
