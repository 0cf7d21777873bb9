#include "ctxrr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctxrr/errors.hpp"

namespace ctxrr {
namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'R', 'R', 'C', 'K', 'P'};

class Writer {
 public:
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(get_le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) throw DataError("checkpoint: bad magic");
    pos_ += sizeof(kMagic);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::add(std::string name, const Tensor& t) {
  if (contains(name)) throw UsageError("checkpoint: duplicate entry '" + name + "'");
  entries.emplace_back(std::move(name), t);
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& [n, _] : entries) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return t;
  }
  throw DataError("checkpoint: missing entry '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, t] : ckpt.entries) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.str();
    ckpt.meta[key] = r.str();
  }
  const std::uint32_t entry_count = r.u32();
  for (std::uint32_t i = 0; i < entry_count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw DataError("checkpoint: entry '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(numel(shape));
    for (double& v : values) v = r.f64();
    ckpt.add(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace ctxrr
