#include "ccdc/tensor.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace ccdc {

namespace {

constexpr char kMagic[7] = {'C', 'C', 'D', 'C', '-', 'T', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF), static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("tensor read: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void save_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
  static_assert(sizeof(float) == 4);
  // Floats are written verbatim; the build targets little-endian hosts.
  os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
  if (!os) throw std::runtime_error("tensor write failed");
}

Tensor load_tensor(std::istream& is) {
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("tensor read: bad magic, expected CCDC-T1");
  }
  const std::uint32_t ndim = read_u32(is);
  if (ndim == 0 || ndim > 8) throw std::runtime_error("tensor read: unreasonable dim count " + std::to_string(ndim));
  std::vector<std::size_t> shape(ndim);
  std::size_t total = 1;
  for (auto& d : shape) {
    d = read_u32(is);
    if (d == 0) throw std::runtime_error("tensor read: zero dimension");
    total *= d;
  }
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(total * 4));
  if (!is) throw std::runtime_error("tensor read: truncated data");
  return t;
}

void save_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  save_tensor(f, t);
}

Tensor load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return load_tensor(f);
}

}  // namespace ccdc
