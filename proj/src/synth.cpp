#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ccdc/augment.hpp"

namespace ccdc {

namespace {

// Fixed per-domain color casts, cycled when n_domains exceeds the table.
const double kCasts[][3] = {
    {1.00, 0.82, 0.70},
    {0.78, 0.95, 0.88},
    {0.88, 0.80, 1.00},
    {0.95, 0.95, 0.75},
    {0.75, 0.88, 1.00},
};
constexpr int kNumCasts = 5;
constexpr double kPi = 3.14159265358979323846;

double bump(double y, double x, double cy, double cx, double r) {
  const double dy = (y - cy) / r, dx = (x - cx) / r;
  const double d2 = dy * dy + dx * dx;
  return d2 >= 1.0 ? 0.0 : 1.0 - d2;
}

}  // namespace

LabeledBatch generate_batch(const SyntheticSceneConfig& cfg, std::size_t n, double live_fraction, Rng& rng) {
  if (n < 1) throw std::invalid_argument("generate_batch: need n >= 1");
  if (cfg.image_size < 8 || cfg.image_size % 8 != 0) {
    throw std::invalid_argument("generate_batch: image_size must be a positive multiple of 8, got " +
                                std::to_string(cfg.image_size));
  }
  if (live_fraction < 0.0 || live_fraction > 1.0) {
    throw std::invalid_argument("generate_batch: live_fraction must lie in [0,1]");
  }
  if (cfg.n_domains < 1) throw std::invalid_argument("generate_batch: need n_domains >= 1");

  const std::size_t S = static_cast<std::size_t>(cfg.image_size);
  const std::size_t L = S / 8;
  LabeledBatch batch;
  batch.images = Tensor({n, 3, S, S});
  batch.labels = Tensor({n, 1, L, L});
  batch.is_live.assign(n, 0);
  batch.domain_id.assign(n, 0);

  // Class flags: floor(live_fraction*n + 1/2) live items, then a
  // Fisher-Yates shuffle so batches drawn sequentially stay mixed.
  const std::size_t n_live = static_cast<std::size_t>(std::lround(live_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n_live; ++i) batch.is_live[i] = 1;
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(batch.is_live[i], batch.is_live[j]);
  }

  const double side = static_cast<double>(S);
  for (std::size_t i = 0; i < n; ++i) {
    const int dom = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_domains)));
    batch.domain_id[i] = dom;
    const double* cast = kCasts[dom % kNumCasts];
    const double cy = rng.uniform(0.38, 0.62) * side;
    const double cx = rng.uniform(0.38, 0.62) * side;
    const double r = rng.uniform(0.30, 0.45) * side;
    const bool live = batch.is_live[i] != 0;

    float* red = batch.images.plane(i, 0);
    float* green = batch.images.plane(i, 1);
    float* blue = batch.images.plane(i, 2);
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const std::size_t at = y * S + x;
        const double b = bump(static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5, cy, cx, r);
        double base = 0.25 + 0.5 * b;
        if (!live) {
          const double ly = std::sin(2.0 * kPi * static_cast<double>(y) / cfg.lattice_period);
          const double lx = std::sin(2.0 * kPi * static_cast<double>(x) / cfg.lattice_period);
          base += cfg.lattice_amp * 0.5 * (ly + lx);
        }
        const double noise = cfg.noise > 0 ? cfg.noise * rng.normal() : 0.0;
        red[at] = static_cast<float>(std::clamp(base * cast[0] + noise, 0.0, 1.0));
        green[at] = static_cast<float>(std::clamp(base * cast[1] + noise, 0.0, 1.0));
        blue[at] = static_cast<float>(std::clamp(base * cast[2] + noise, 0.0, 1.0));
      }
    }

    float* lab = batch.labels.plane(i, 0);
    if (live) {
      for (std::size_t y = 0; y < L; ++y) {
        for (std::size_t x = 0; x < L; ++x) {
          // Label cell centers, in image pixel coordinates.
          const double py = (static_cast<double>(y) + 0.5) * 8.0;
          const double px = (static_cast<double>(x) + 0.5) * 8.0;
          lab[y * L + x] = static_cast<float>(bump(py, px, cy, cx, r));
        }
      }
    }
    // spoof labels stay all zero
  }
  return batch;
}

}  // namespace ccdc
