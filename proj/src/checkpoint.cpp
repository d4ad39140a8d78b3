#include "miltext/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace miltext {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw Error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_params(const std::string& path, const ModelParams& params) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("checkpoint: cannot open '" + tmp + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter& p : params) {
      put_u32(os, static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      os.put(p.trainable ? 1 : 0);
      put_u32(os, static_cast<std::uint32_t>(p.tensor.shape.size()));
      for (int d : p.tensor.shape) put_u32(os, static_cast<std::uint32_t>(d));
      for (double v : p.tensor.values) put_f64(os, v);
    }
    if (!os) throw Error("checkpoint: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("checkpoint: cannot rename '" + tmp + "' to '" + path + "'");
}

ModelParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw Error("checkpoint: bad magic in '" + path + "'");
  std::uint32_t version = get_u32(is);
  if (version != kVersion) throw Error("checkpoint: unsupported format version " + std::to_string(version));
  std::uint32_t count = get_u32(is);

  ModelParams params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    int trainable = is.get();
    if (!is || trainable == EOF) throw Error("checkpoint: truncated file");
    std::uint32_t ndim = get_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(get_u32(is));
    Tensor t = shape.empty() ? Tensor::scalar(0.0) : Tensor::zeros(shape);
    for (double& v : t.values) v = get_f64(is);
    params.add(std::move(name), std::move(t), trainable != 0);
  }
  return params;
}

}  // namespace miltext
