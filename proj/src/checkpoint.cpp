#include "spinsight/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spinsight/errors.hpp"

namespace spinsight {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'T', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T x) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(x) >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double x) { put(out, std::bit_cast<std::uint64_t>(x)); }

void put_string(std::string& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t x = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(x);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw IoFailure("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const ag::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, c.step);
  put_string(out, c.config);
  put(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    put_string(out, name);
    put(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put(out, static_cast<std::uint64_t>(d));
    for (double x : t.values()) put_f64(out, x);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoFailure("not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoFailure("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.step = r.get<std::uint64_t>();
  c.config = r.get_string();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 4) throw IoFailure("tensor " + name + " has rank " + std::to_string(rank));
    ag::Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      n *= d;
    }
    r.need(n * 8);
    std::vector<double> data(n);
    for (auto& x : data) x = r.get_f64();
    c.tensors.emplace_back(std::move(name), ag::Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw IoFailure("trailing bytes after checkpoint");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string bytes = encode_checkpoint(c);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoFailure("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoFailure("cannot rename " + tmp.string() + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

void append_parameters(Checkpoint& c, const std::string& prefix,
                       const ag::Parameters& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.emplace_back(prefix + params.name(i), params[i]);
  }
}

void load_parameters(const Checkpoint& c, const std::string& prefix,
                     ag::Parameters& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ag::Tensor* t = c.find(prefix + params.name(i));
    if (!t) throw IoFailure("checkpoint lacks tensor " + prefix + params.name(i));
    if (t->shape() != params[i].shape()) {
      throw IoFailure("checkpoint tensor " + prefix + params.name(i) + " has shape " +
                      ag::shape_string(t->shape()) + ", expected " +
                      ag::shape_string(params[i].shape()));
    }
    params[i] = *t;
  }
}

}  // namespace spinsight
