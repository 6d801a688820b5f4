#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace ccdc {

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense row-major tensor. Canonical layouts are N x C x H x W for feature
// maps and Cout x Cin x K_taps for pattern-indexed kernels.
template <typename T>
struct TensorT {
  static_assert(std::is_floating_point_v<T>);

  std::vector<std::size_t> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> shp, T fill = T(0)) : shape(std::move(shp)) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) {
        throw std::invalid_argument("tensor dimensions must be >= 1, got " + shape_to_string(shape));
      }
      n *= d;
    }
    data.assign(n, fill);
  }

  TensorT(std::vector<std::size_t> shp, std::vector<T> values) : shape(std::move(shp)), data(std::move(values)) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) {
        throw std::invalid_argument("tensor dimensions must be >= 1, got " + shape_to_string(shape));
      }
      n *= d;
    }
    if (n != data.size()) {
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_to_string(shape));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  // NCHW accessors; valid only for 4-d tensors.
  std::size_t n() const { return shape[0]; }
  std::size_t c() const { return shape[1]; }
  std::size_t h() const { return shape[2]; }
  std::size_t w() const { return shape[3]; }

  T& at4(std::size_t in, std::size_t ic, std::size_t iy, std::size_t ix) {
    return data[((in * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
  }
  T at4(std::size_t in, std::size_t ic, std::size_t iy, std::size_t ix) const {
    return data[((in * shape[1] + ic) * shape[2] + iy) * shape[3] + ix];
  }

  // Pointer to the start of one H x W plane.
  T* plane(std::size_t in, std::size_t ic) { return data.data() + (in * shape[1] + ic) * shape[2] * shape[3]; }
  const T* plane(std::size_t in, std::size_t ic) const {
    return data.data() + (in * shape[1] + ic) * shape[2] * shape[3];
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(T v) { data.assign(data.size(), v); }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

enum class Elementwise { Add, Sub, Mul };

template <typename T>
TensorT<T> elementwise(const TensorT<T>& a, const TensorT<T>& b, Elementwise op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("elementwise: shape mismatch " + shape_to_string(a.shape) + " vs " +
                                shape_to_string(b.shape));
  }
  TensorT<T> out(a.shape);
  switch (op) {
    case Elementwise::Add:
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
      break;
    case Elementwise::Sub:
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
      break;
    case Elementwise::Mul:
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
      break;
  }
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return elementwise(a, b, Elementwise::Add);
}
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return elementwise(a, b, Elementwise::Sub);
}
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return elementwise(a, b, Elementwise::Mul);
}

// Block-mean downsampling of an NCHW tensor. The target must divide the
// source evenly; target == source is the identity.
template <typename T>
TensorT<T> resize_to(const TensorT<T>& x, std::size_t target_h, std::size_t target_w) {
  if (x.ndim() != 4) {
    throw std::invalid_argument("resize_to expects an NCHW tensor, got " + shape_to_string(x.shape));
  }
  const std::size_t H = x.h(), W = x.w();
  if (target_h == 0 || target_w == 0 || H % target_h != 0 || W % target_w != 0) {
    throw std::invalid_argument("resize_to: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                                " is not an integer divisor of source " + std::to_string(H) + "x" +
                                std::to_string(W));
  }
  const std::size_t fy = H / target_h, fx = W / target_w;
  if (fy == 1 && fx == 1) return x;
  TensorT<T> out({x.n(), x.c(), target_h, target_w});
  const T inv = T(1) / static_cast<T>(fy * fx);
  for (std::size_t in = 0; in < x.n(); ++in) {
    for (std::size_t ic = 0; ic < x.c(); ++ic) {
      const T* src = x.plane(in, ic);
      T* dst = out.plane(in, ic);
      for (std::size_t oy = 0; oy < target_h; ++oy) {
        for (std::size_t ox = 0; ox < target_w; ++ox) {
          T acc = 0;
          for (std::size_t dy = 0; dy < fy; ++dy) {
            const T* row = src + (oy * fy + dy) * W + ox * fx;
            for (std::size_t dx = 0; dx < fx; ++dx) acc += row[dx];
          }
          dst[oy * target_w + ox] = acc * inv;
        }
      }
    }
  }
  return out;
}

// Gradient of resize_to: spreads each output cell's gradient evenly over its
// source block.
template <typename T>
TensorT<T> resize_backward(const TensorT<T>& d_out, std::size_t src_h, std::size_t src_w) {
  const std::size_t th = d_out.h(), tw = d_out.w();
  if (src_h % th != 0 || src_w % tw != 0) {
    throw std::invalid_argument("resize_backward: source is not an integer multiple of the output");
  }
  const std::size_t fy = src_h / th, fx = src_w / tw;
  if (fy == 1 && fx == 1) return d_out;
  TensorT<T> d_in({d_out.n(), d_out.c(), src_h, src_w});
  const T inv = T(1) / static_cast<T>(fy * fx);
  for (std::size_t in = 0; in < d_out.n(); ++in) {
    for (std::size_t ic = 0; ic < d_out.c(); ++ic) {
      const T* src = d_out.plane(in, ic);
      T* dst = d_in.plane(in, ic);
      for (std::size_t oy = 0; oy < th; ++oy) {
        for (std::size_t ox = 0; ox < tw; ++ox) {
          const T g = src[oy * tw + ox] * inv;
          for (std::size_t dy = 0; dy < fy; ++dy) {
            T* row = dst + (oy * fy + dy) * src_w + ox * fx;
            for (std::size_t dx = 0; dx < fx; ++dx) row[dx] = g;
          }
        }
      }
    }
  }
  return d_in;
}

// Counter-based splitmix64 generator. Identical seed gives an identical draw
// sequence; split() derives independent streams without advancing the parent.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via the Marsaglia polar method (one deviate per call;
  // the paired deviate is cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Derived stream: mixes the current seed with a stream tag. The parent is
  // not advanced.
  Rng split(std::uint64_t stream) const {
    Rng mixer(state ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL));
    return Rng(mixer.next_u64());
  }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
TensorT<T> rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("rand_uniform: lo must be < hi");
  TensorT<T> out(std::move(shape));
  for (auto& v : out.data) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <typename T>
TensorT<T> rand_normal(Rng& rng, std::vector<std::size_t> shape, double mean, double std) {
  if (!(std > 0)) throw std::invalid_argument("rand_normal: std must be > 0");
  TensorT<T> out(std::move(shape));
  for (auto& v : out.data) v = static_cast<T>(mean + std * rng.normal());
  return out;
}

// Binary tensor file format: magic "CCDC-T1", u32 LE dim count, u32 LE dims,
// raw f32 LE data. Used for checkpoints and golden fixtures.
void save_tensor(std::ostream& os, const Tensor& t);
Tensor load_tensor(std::istream& is);
void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

}  // namespace ccdc
