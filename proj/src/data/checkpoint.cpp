#include "zseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace zseg {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

std::uint64_t Checkpoint::counter(const std::string& name) const {
  for (const auto& [key, value] : counters) {
    if (key == name) return value;
  }
  throw CheckpointError(CheckpointFault::names, "checkpoint has no counter '" + name + "'");
}

void Checkpoint::set_counter(const std::string& name, std::uint64_t value) {
  for (auto& [key, v] : counters) {
    if (key == name) {
      v = value;
      return;
    }
  }
  counters.emplace_back(name, value);
}

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'E', 'G'};

class Writer {
public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  Reader(const std::vector<std::uint8_t>& in, std::string source) : in_(in), source_(std::move(source)) {}
  void raw(void* p, std::size_t n) {
    if (n > in_.size() - pos_) {
      throw CheckpointError(CheckpointFault::truncated, source_ + ": checkpoint is truncated");
    }
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > in_.size() - pos_) {
      throw CheckpointError(CheckpointFault::truncated, source_ + ": checkpoint is truncated");
    }
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

private:
  const std::vector<std::uint8_t>& in_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(c.version);
  w.str(c.architecture);
  w.u32(c.base_width);
  w.u32(c.levels);
  w.u32(c.discriminator_levels);
  w.u64(c.epoch);
  w.str(c.rng_state);
  w.u32(static_cast<std::uint32_t>(c.counters.size()));
  for (const auto& [name, value] : c.counters) {
    w.str(name);
    w.u64(value);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    const Shape s = t.value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    w.raw(t.value.ptr(), t.value.numel() * sizeof(float));
  }
  return w.take();
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointFault::bad_magic, source + ": not a checkpoint (bad magic)");
  }
  Reader r(bytes, source);
  char magic[4];
  r.raw(magic, 4);
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw CheckpointError(CheckpointFault::version,
                          source + ": checkpoint version " + std::to_string(c.version) +
                              ", expected " + std::to_string(kCheckpointVersion));
  }
  c.architecture = r.str();
  c.base_width = r.u32();
  c.levels = r.u32();
  c.discriminator_levels = r.u32();
  c.epoch = r.u64();
  c.rng_state = r.str();
  const std::uint32_t counters = r.u32();
  for (std::uint32_t i = 0; i < counters; ++i) {
    std::string name = r.str();
    c.counters.emplace_back(std::move(name), r.u64());
  }
  const std::uint32_t tensors = r.u32();
  for (std::uint32_t i = 0; i < tensors; ++i) {
    NamedTensor t;
    t.name = r.str();
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    const std::size_t bytes_needed = s.numel() * sizeof(float);
    if (bytes_needed > r.remaining()) {
      throw CheckpointError(CheckpointFault::truncated, source + ": checkpoint is truncated");
    }
    t.value = Tensor(s);
    r.raw(t.value.ptr(), bytes_needed);
    c.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(CheckpointFault::truncated,
                          source + ": trailing bytes after the tensor table");
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = serialize(checkpoint);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointFault::io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointFault::io, "cannot move checkpoint into " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointFault::io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, path.string());
}

namespace {

const char* const kSlots[] = {"/velocity", "/moment1", "/moment2"};

}  // namespace

void capture(const BasicParameterSet<float>& params, const std::string& prefix, StateScope scope,
             Checkpoint& checkpoint) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    checkpoint.tensors.push_back({prefix + p.name, p.value.value()});
    if (scope == StateScope::training) {
      checkpoint.tensors.push_back({prefix + p.name + kSlots[0], p.velocity});
      checkpoint.tensors.push_back({prefix + p.name + kSlots[1], p.moment1});
      checkpoint.tensors.push_back({prefix + p.name + kSlots[2], p.moment2});
    }
  }
  for (std::size_t i = 0; i < params.buffer_count(); ++i) {
    const auto& b = params.buffer(i);
    checkpoint.tensors.push_back({prefix + b.name, b.value});
  }
}

void restore(BasicParameterSet<float>& params, const std::string& prefix, StateScope scope,
             const Checkpoint& checkpoint) {
  std::vector<std::pair<Tensor*, std::string>> targets;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const std::string name = prefix + p.name;
    targets.emplace_back(&p.value.mutable_value(), name);
    if (scope == StateScope::training) {
      targets.emplace_back(&p.velocity, name + kSlots[0]);
      targets.emplace_back(&p.moment1, name + kSlots[1]);
      targets.emplace_back(&p.moment2, name + kSlots[2]);
    }
  }
  for (std::size_t i = 0; i < params.buffer_count(); ++i) {
    targets.emplace_back(&params.buffer(i).value, prefix + params.buffer(i).name);
  }

  std::set<std::string> known;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = prefix + params[i].name;
    known.insert(name);
    for (const char* slot : kSlots) known.insert(name + slot);
  }
  for (std::size_t i = 0; i < params.buffer_count(); ++i) known.insert(prefix + params.buffer(i).name);
  for (const auto& t : checkpoint.tensors) {
    if (t.name.rfind(prefix, 0) == 0 && known.count(t.name) == 0) {
      throw CheckpointError(CheckpointFault::names,
                            "checkpoint tensor '" + t.name + "' does not belong to this model");
    }
  }
  // Validate everything first so a failed restore leaves the model untouched.
  std::vector<const Tensor*> sources;
  for (const auto& [dst, name] : targets) {
    const Tensor* src = checkpoint.find(name);
    if (src == nullptr) {
      throw CheckpointError(CheckpointFault::names, "checkpoint is missing tensor '" + name + "'");
    }
    if (!(src->shape() == dst->shape())) {
      throw CheckpointError(CheckpointFault::shape, "tensor '" + name + "' has shape " +
                                                        src->shape().str() + ", model expects " +
                                                        dst->shape().str());
    }
    sources.push_back(src);
  }
  for (std::size_t i = 0; i < targets.size(); ++i) *targets[i].first = *sources[i];
}

}  // namespace zseg
