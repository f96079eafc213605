#include "partnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "partnet/errors.hpp"

namespace partnet {
namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated at offset " + std::to_string(pos_) + ", missing " +
                        std::to_string(n - (bytes_.size() - pos_)) + " bytes");
    }
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::blob(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return b.value;
  throw FormatError("checkpoint has no parameter '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return true;
  return false;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out{'P', 'N', 'C', 'K'};
  put<std::uint32_t>(out, kPnckVersion);
  put_string(out, ckpt.kind);
  put_string(out, ckpt.config);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    put_string(out, b.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.value.rank()));
    for (std::size_t d : b.value.shape()) put<std::uint64_t>(out, d);
    for (double v : b.value.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  Reader in(bytes, source);
  in.need(4);
  if (std::memcmp(bytes.data(), "PNCK", 4) != 0) throw FormatError(source + ": bad magic at offset 0");
  in.get<std::uint32_t>();
  const auto version = in.get<std::uint32_t>();
  if (version != kPnckVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.kind = in.get_string();
  ckpt.config = in.get_string();
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor b;
    b.name = in.get_string();
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw FormatError(source + ": implausible rank " + std::to_string(rank) + " for " + b.name);
    Tensor::Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(in.get<std::uint64_t>());
      total *= d;
    }
    in.need(total * 8);
    std::vector<double> values(total);
    for (auto& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>());
    b.value = Tensor(std::move(shape), std::move(values));
    ckpt.blobs.push_back(std::move(b));
  }
  if (!in.done()) throw FormatError(source + ": trailing bytes after offset " + std::to_string(in.pos()));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, path.string());
}

}  // namespace partnet
