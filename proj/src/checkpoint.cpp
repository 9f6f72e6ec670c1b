#include <bit>
#include <cstring>
#include <fstream>

#include "varwind/errors.hpp"
#include "varwind/nn.hpp"

namespace varwind::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'W', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  template <class T>
  void pod(T v) { bytes(&v, sizeof(T)); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw IoError("failed writing checkpoint: " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open checkpoint: " + path.string());
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("truncated checkpoint: " + path_.string());
  }
  template <class T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) throw CheckpointError("corrupt string length in " + path_.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.pod(kVersion);
  w.str(checkpoint.config_hash);
  w.pod(checkpoint.epoch);
  w.pod(static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, array] : checkpoint.tensors) {
    w.str(name);
    w.pod(static_cast<std::uint32_t>(array.rank()));
    for (std::size_t d : array.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.bytes(array.data(), array.size() * sizeof(double));
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a checkpoint file: " + path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = r.str();
  ck.epoch = r.pod<std::uint32_t>();
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ck.metadata[k] = r.str();
  }
  const auto n_tensors = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > kMaxRank) throw CheckpointError("corrupt tensor rank for '" + name + "'");
    ad::Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.pod<std::uint64_t>());
    std::vector<double> values(ad::numel(shape));
    r.bytes(values.data(), values.size() * sizeof(double));
    ck.tensors.emplace(std::move(name), Array(std::move(shape), std::move(values)));
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes in checkpoint: " + path.string());
  return ck;
}

}  // namespace varwind::nn
