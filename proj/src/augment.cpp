#include "ccdc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccdc {

void check_batch(const LabeledBatch& batch) {
  if (batch.images.ndim() != 4 || batch.labels.ndim() != 4) {
    throw std::invalid_argument("batch: images and labels must be NCHW tensors");
  }
  const std::size_t n = batch.images.n();
  if (batch.labels.n() != n || batch.is_live.size() != n || batch.domain_id.size() != n) {
    throw std::invalid_argument("batch: item count mismatch across images/labels/flags");
  }
  if (batch.images.c() != 3 || batch.labels.c() != 1) {
    throw std::invalid_argument("batch: expected 3-channel images and 1-channel labels, got " +
                                shape_to_string(batch.images.shape) + " / " + shape_to_string(batch.labels.shape));
  }
  if (batch.images.h() != 8 * batch.labels.h() || batch.images.w() != 8 * batch.labels.w()) {
    throw std::invalid_argument("batch: label grid must be 1/8 of the image extent");
  }
}

LabeledBatch patch_exchange(const LabeledBatch& batch, const PatchExchangeConfig& cfg, Rng& rng) {
  check_batch(batch);
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) {
    throw std::invalid_argument("patch_exchange: gamma must lie in [0,1], got " + std::to_string(cfg.gamma));
  }
  if (cfg.rho < 1) throw std::invalid_argument("patch_exchange: rho must be >= 1, got " + std::to_string(cfg.rho));
  if (!(cfg.min_frac > 0.0) || cfg.min_frac > cfg.max_frac || cfg.max_frac > 1.0) {
    throw std::invalid_argument("patch_exchange: patch fraction range must satisfy 0 < min <= max <= 1");
  }

  const std::size_t n = batch.size();
  const int S = static_cast<int>(batch.images.h());
  const int L = static_cast<int>(batch.labels.h());
  const int cell = S / L;
  const int side_min = std::max(1, static_cast<int>(std::lround(cfg.min_frac * S)));
  const int side_max = std::min(S, static_cast<int>(std::lround(cfg.max_frac * S)));

  LabeledBatch out = batch;                    // destination
  const LabeledBatch& snap = batch;            // immutable donor snapshot
  const std::size_t n_aug = static_cast<std::size_t>(cfg.gamma * static_cast<double>(n));

  for (std::size_t i = 0; i < n_aug; ++i) {
    for (int r = 0; r < cfg.rho; ++r) {
      const int h = side_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(side_max - side_min + 1)));
      const int w = side_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(side_max - side_min + 1)));
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(S - h + 1)));
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(S - w + 1)));
      const std::size_t j = rng.below(n);

      for (std::size_t c = 0; c < 3; ++c) {
        const float* src = snap.images.plane(j, c);
        float* dst = out.images.plane(i, c);
        for (int y = y0; y < y0 + h; ++y) {
          const std::size_t row = static_cast<std::size_t>(y) * S;
          for (int x = x0; x < x0 + w; ++x) dst[row + x] = src[row + x];
        }
      }
      // Minimal cell-aligned cover of the pixel rectangle on the label grid.
      const int ly0 = y0 / cell, ly1 = (y0 + h + cell - 1) / cell;
      const int lx0 = x0 / cell, lx1 = (x0 + w + cell - 1) / cell;
      const float* lsrc = snap.labels.plane(j, 0);
      float* ldst = out.labels.plane(i, 0);
      for (int y = ly0; y < ly1; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * L;
        for (int x = lx0; x < lx1; ++x) ldst[row + x] = lsrc[row + x];
      }
    }
  }
  return out;
}

void hflip_item(LabeledBatch& batch, std::size_t item) {
  check_batch(batch);
  const std::size_t S = batch.images.h(), L = batch.labels.h();
  for (std::size_t c = 0; c < 3; ++c) {
    float* p = batch.images.plane(item, c);
    for (std::size_t y = 0; y < S; ++y) {
      float* row = p + y * S;
      for (std::size_t x = 0; x < S / 2; ++x) std::swap(row[x], row[S - 1 - x]);
    }
  }
  float* lp = batch.labels.plane(item, 0);
  for (std::size_t y = 0; y < L; ++y) {
    float* row = lp + y * L;
    for (std::size_t x = 0; x < L / 2; ++x) std::swap(row[x], row[L - 1 - x]);
  }
}

void color_jitter_item(LabeledBatch& batch, std::size_t item, double strength, Rng& rng) {
  check_batch(batch);
  if (strength < 0) throw std::invalid_argument("color_jitter: strength must be >= 0");
  const std::size_t hw = batch.images.h() * batch.images.w();
  for (std::size_t c = 0; c < 3; ++c) {
    const double gain = rng.uniform(1.0 - strength, 1.0 + strength);
    const double offset = rng.uniform(-strength, strength);
    float* p = batch.images.plane(item, c);
    for (std::size_t k = 0; k < hw; ++k) {
      p[k] = static_cast<float>(std::clamp(gain * p[k] + offset, 0.0, 1.0));
    }
  }
}

void cutout_item(LabeledBatch& batch, std::size_t item, double min_frac, double max_frac, Rng& rng) {
  check_batch(batch);
  if (min_frac < 0 || min_frac > max_frac || max_frac > 1.0) {
    throw std::invalid_argument("cutout: size range must satisfy 0 <= min <= max <= 1");
  }
  const int S = static_cast<int>(batch.images.h());
  const int side_min = static_cast<int>(std::lround(min_frac * S));
  const int side_max = static_cast<int>(std::lround(max_frac * S));
  const int h = side_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(side_max - side_min + 1)));
  const int w = side_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(side_max - side_min + 1)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(S - h + 1)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(S - w + 1)));
  if (h == 0 || w == 0) return;
  for (std::size_t c = 0; c < 3; ++c) {
    float* p = batch.images.plane(item, c);
    for (int y = y0; y < y0 + h; ++y) {
      float* row = p + static_cast<std::size_t>(y) * S;
      for (int x = x0; x < x0 + w; ++x) row[x] = 0.0f;
    }
  }
}

void baseline_augment(LabeledBatch& batch, const BaselineAugConfig& cfg, Rng& rng) {
  check_batch(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (cfg.hflip && rng.next_double() < 0.5) hflip_item(batch, i);
    if (cfg.jitter > 0) color_jitter_item(batch, i, cfg.jitter, rng);
    if (cfg.cutout) cutout_item(batch, i, cfg.cutout_min, cfg.cutout_max, rng);
  }
}

}  // namespace ccdc
