#pragma once

#include <string>

#include "ccdc/network.hpp"

namespace ccdc {

// Checkpoint file: little-endian u32 manifest length, JSON manifest (format
// tag, code version, network spec, tensor directory, CFIM scalar values),
// then every state tensor in directory order using the tensor file format.
void save_checkpoint(const std::string& path, Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace ccdc
