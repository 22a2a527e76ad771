#include "kws/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "kws/error.hpp"

namespace kws {
namespace {

constexpr char kMagic[8] = {'K', 'W', 'S', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw TruncatedError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(c.arch);
  w.u32(c.epoch);
  w.f64(c.validation_accuracy);
  w.f64(c.learning_rate);
  w.u64(c.steps);
  w.str(c.rng_state);
  w.u32(static_cast<std::uint32_t>(c.history.size()));
  for (const auto& m : c.history) {
    w.u32(m.epoch);
    w.f64(m.train_loss);
    w.f64(m.train_accuracy);
    w.f64(m.validation_accuracy);
    w.f64(m.learning_rate);
    w.u64(m.steps);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.tensor.data()) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(c.cache.size()));
  for (const auto& [key, tag] : c.cache) {
    w.u64(key);
    w.u32(tag);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint file (bad magic bytes)");
  }
  Reader r(bytes);
  r.skip(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.arch = r.str();
  c.epoch = r.u32();
  c.validation_accuracy = r.f64();
  c.learning_rate = r.f64();
  c.steps = r.u64();
  c.rng_state = r.str();
  const std::uint32_t n_history = r.u32();
  for (std::uint32_t i = 0; i < n_history; ++i) {
    EpochMetrics m;
    m.epoch = r.u32();
    m.train_loss = r.f64();
    m.train_accuracy = r.f64();
    m.validation_accuracy = r.f64();
    m.learning_rate = r.f64();
    m.steps = r.u64();
    c.history.push_back(m);
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("tensor '" + t.name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      count *= d;
      if (count > r.remaining()) r.need(r.remaining() + 1);
    }
    r.need(count * 4);
    std::vector<float> data(count);
    for (auto& v : data) v = r.f32();
    t.tensor = Tensor(std::move(shape), std::move(data));
    c.tensors.push_back(std::move(t));
  }
  const std::uint32_t n_cache = r.u32();
  r.need(static_cast<std::size_t>(n_cache) * 12);
  for (std::uint32_t i = 0; i < n_cache; ++i) {
    const std::uint64_t key = r.u64();
    c.cache.emplace_back(key, r.u32());
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void capture_model(Network& network, const std::vector<std::vector<float>>* velocity, Checkpoint& out) {
  out.arch = network.spec().name;
  out.tensors.clear();
  auto params = network.parameters();
  for (const auto& p : params) {
    out.tensors.push_back({p.name, Tensor(p.tensor->shape(), std::vector<float>(p.tensor->data().begin(),
                                                                                 p.tensor->data().end()))});
  }
  for (const auto& bn : network.batch_norms()) {
    out.tensors.push_back({bn.name + ".running_mean", Tensor({bn.state->channels()}, bn.state->running_mean)});
    out.tensors.push_back({bn.name + ".running_var", Tensor({bn.state->channels()}, bn.state->running_var)});
  }
  if (velocity) {
    for (std::size_t i = 0; i < params.size() && i < velocity->size(); ++i) {
      std::vector<float> v = (*velocity)[i];
      v.resize(params[i].tensor->numel(), 0.0f);
      out.tensors.push_back({params[i].name + ".velocity", Tensor(params[i].tensor->shape(), std::move(v))});
    }
  }
}

namespace {

const Tensor& require_tensor(const Checkpoint& c, const std::string& name, const Shape& shape) {
  const Tensor* t = c.find(name);
  if (!t) throw MismatchError("checkpoint for '" + c.arch + "' has no tensor '" + name + "'");
  if (t->shape() != shape) {
    throw MismatchError("checkpoint tensor '" + name + "' has shape " + shape_string(t->shape()) + ", model expects " +
                        shape_string(shape));
  }
  return *t;
}

}  // namespace

void apply_model(const Checkpoint& checkpoint, Network& network) {
  if (checkpoint.arch != network.spec().name) {
    throw MismatchError("checkpoint holds architecture '" + checkpoint.arch + "', requested '" +
                        network.spec().name + "'");
  }
  // Validate everything before mutating the network.
  auto params = network.parameters();
  auto norms = network.batch_norms();
  for (const auto& p : params) require_tensor(checkpoint, p.name, p.tensor->shape());
  for (const auto& bn : norms) {
    require_tensor(checkpoint, bn.name + ".running_mean", {bn.state->channels()});
    require_tensor(checkpoint, bn.name + ".running_var", {bn.state->channels()});
  }
  for (const auto& p : params) {
    const auto src = require_tensor(checkpoint, p.name, p.tensor->shape()).data();
    std::copy(src.begin(), src.end(), p.tensor->data().begin());
  }
  for (const auto& bn : norms) {
    const auto mean = require_tensor(checkpoint, bn.name + ".running_mean", {bn.state->channels()}).data();
    const auto var = require_tensor(checkpoint, bn.name + ".running_var", {bn.state->channels()}).data();
    bn.state->running_mean.assign(mean.begin(), mean.end());
    bn.state->running_var.assign(var.begin(), var.end());
  }
}

}  // namespace kws
