#include "ccdc/ppm.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ccdc {

namespace {

unsigned char to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(c * 255.0f + 0.5f);
}

}  // namespace

void write_preview_ppm(const std::string& path, const LabeledBatch& before, const LabeledBatch& after) {
  check_batch(before);
  check_batch(after);
  if (before.size() != after.size() || before.images.h() != after.images.h()) {
    throw std::invalid_argument("preview: before/after batches differ in shape");
  }
  const std::size_t n = before.size();
  const std::size_t S = before.images.h();
  const std::size_t L = after.labels.h();
  const std::size_t cell = S / L;
  const std::size_t pad = 2;
  const std::size_t width = 3 * S + 2 * pad;
  const std::size_t height = n * S + (n - 1) * pad;

  std::vector<unsigned char> canvas(width * height * 3, 32);
  auto put = [&](std::size_t y, std::size_t x, unsigned char r, unsigned char g, unsigned char b) {
    const std::size_t at = (y * width + x) * 3;
    canvas[at] = r;
    canvas[at + 1] = g;
    canvas[at + 2] = b;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t oy = i * (S + pad);
    const float* br = before.images.plane(i, 0);
    const float* bg = before.images.plane(i, 1);
    const float* bb = before.images.plane(i, 2);
    const float* ar = after.images.plane(i, 0);
    const float* ag = after.images.plane(i, 1);
    const float* ab = after.images.plane(i, 2);
    const float* lab = after.labels.plane(i, 0);
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const std::size_t at = y * S + x;
        put(oy + y, x, to_byte(br[at]), to_byte(bg[at]), to_byte(bb[at]));
        put(oy + y, S + pad + x, to_byte(ar[at]), to_byte(ag[at]), to_byte(ab[at]));
        const unsigned char g = to_byte(lab[(y / cell) * L + (x / cell)]);
        put(oy + y, 2 * (S + pad) + x, g, g, g);
      }
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("preview: cannot open '" + path + "' for writing");
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  if (!os) throw std::runtime_error("preview: write failed for '" + path + "'");
}

}  // namespace ccdc
