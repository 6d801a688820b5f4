#pragma once

#include <string>

#include "ccdc/augment.hpp"

namespace ccdc {

// Binary P6 preview grid: one row per batch item, columns are the original
// image, the augmented image, and the augmented depth label upscaled to
// image size (grayscale).
void write_preview_ppm(const std::string& path, const LabeledBatch& before, const LabeledBatch& after);

}  // namespace ccdc
