#include "nsl/checkpoint.hpp"

#include <fstream>

#include "nsl/error.hpp"

namespace nsl {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'L', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptSampleError(std::string("checkpoint: truncated at ") + what);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const char* what) {
  const auto len = read_pod<std::uint64_t>(in, what);
  if (len > (1ull << 32)) throw CorruptSampleError("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw CorruptSampleError(std::string("checkpoint: truncated at ") + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, ckpt.version);
  write_pod<std::uint64_t>(out, ckpt.step);
  write_pod<std::uint64_t>(out, ckpt.seed);
  write_string(out, ckpt.config_json);
  write_pod<std::uint64_t>(out, ckpt.params.all().size());
  for (const auto& [name, tensor] : ckpt.params.all()) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape().size()));
    for (int d : tensor.shape()) write_pod<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(tensor.value().data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
  }
  if (!out) throw RuntimeFailure("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptSampleError("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CorruptSampleError("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ckpt;
  ckpt.version = read_pod<std::uint32_t>(in, "version");
  if (ckpt.version != 1) throw CorruptSampleError("checkpoint: unsupported version");
  ckpt.step = read_pod<std::uint64_t>(in, "step");
  ckpt.seed = read_pod<std::uint64_t>(in, "seed");
  ckpt.config_json = read_string(in, "config");
  const auto n_params = read_pod<std::uint64_t>(in, "param count");
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = read_string(in, "param name");
    const auto ndim = read_pod<std::uint32_t>(in, "param rank");
    if (ndim > 8) throw CorruptSampleError("checkpoint: implausible tensor rank");
    nn::Shape shape(ndim);
    for (auto& d : shape) {
      d = read_pod<std::int32_t>(in, "param dim");
      if (d <= 0) throw CorruptSampleError("checkpoint: nonpositive dimension");
    }
    nn::Tensor<float> t = ckpt.params.create(name, shape);
    in.read(reinterpret_cast<char*>(t.value().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw CorruptSampleError("checkpoint: truncated tensor data");
    if (!t.all_finite()) throw CorruptSampleError("checkpoint: non-finite weights in " + name);
  }
  return ckpt;
}

std::uint64_t checkpoint_file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptSampleError("checkpoint: cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace nsl
