#pragma once

#include <cstdint>
#include <vector>

#include "ccdc/tensor.hpp"

namespace ccdc {

struct LabeledBatch {
  Tensor images;  // N x 3 x S x S, values in [0,1]
  Tensor labels;  // N x 1 x S/8 x S/8; live in [0,1] and not all zero, spoof all zero
  std::vector<std::uint8_t> is_live;
  std::vector<int> domain_id;

  std::size_t size() const { return images.ndim() == 4 ? images.n() : 0; }
};

void check_batch(const LabeledBatch& batch);

struct PatchExchangeConfig {
  double gamma = 0.5;      // fraction of the batch that gets augmented
  int rho = 2;             // exchange steps per augmented item
  double min_frac = 0.125; // patch side, fraction of the image side
  double max_frac = 0.5;
};

// Algorithm-1 patch exchange: for each of the first floor(gamma*N) items,
// rho times, draw a rectangle and a donor index j (j == i allowed) and copy
// the donor's pixels and the cell-aligned cover of the rectangle in the
// donor's label. All reads come from an immutable snapshot of the input.
LabeledBatch patch_exchange(const LabeledBatch& batch, const PatchExchangeConfig& cfg, Rng& rng);

// Baseline augmentations (applied in place to one batch item).
void hflip_item(LabeledBatch& batch, std::size_t item);
void color_jitter_item(LabeledBatch& batch, std::size_t item, double strength, Rng& rng);
void cutout_item(LabeledBatch& batch, std::size_t item, double min_frac, double max_frac, Rng& rng);

struct BaselineAugConfig {
  bool hflip = true;
  double jitter = 0.05;
  bool cutout = true;
  double cutout_min = 0.1;
  double cutout_max = 0.3;
};

// Per item: an hflip coin, then jitter, then cutout; draws are skipped
// entirely for disabled augmentations.
void baseline_augment(LabeledBatch& batch, const BaselineAugConfig& cfg, Rng& rng);

struct SyntheticSceneConfig {
  int image_size = 256;
  int n_domains = 3;
  double noise = 0.02;
  double lattice_amp = 0.18;
  int lattice_period = 4;
};

// Deterministic synthetic stand-in data: a smooth radial "face" bump with a
// per-domain color cast; spoof items overlay a high-frequency lattice and
// carry an all-zero depth label, live items get the bump as label.
LabeledBatch generate_batch(const SyntheticSceneConfig& cfg, std::size_t n, double live_fraction, Rng& rng);

}  // namespace ccdc
