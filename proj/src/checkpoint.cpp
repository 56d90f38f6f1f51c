#include "ganblend/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>

#include "ganblend/manifest.hpp"

namespace ganblend {

void validate_manifest(const GeneratorConfig& config, const ParamMap& params) {
  const auto specs = manifest(config);
  for (const auto& spec : specs) {
    const auto it = params.find(spec.name);
    if (it == params.end()) {
      throw Error(ErrorKind::Manifest, "missing parameter '" + spec.name + "'");
    }
    if (it->second.dims() != spec.shape) {
      throw Error(ErrorKind::Manifest, "parameter '" + spec.name + "' has shape " +
                                           shape_to_string(it->second.dims()) +
                                           ", expected " + shape_to_string(spec.shape));
    }
  }
  if (params.size() != specs.size()) {
    for (const auto& [name, tensor] : params) {
      const bool known = std::any_of(specs.begin(), specs.end(),
                                     [&](const ParamSpec& s) { return s.name == name; });
      if (!known) throw Error(ErrorKind::Manifest, "unexpected parameter '" + name + "'");
    }
  }
}

Checkpoint::Checkpoint(GeneratorConfig meta, ParamMap params)
    : meta_(std::move(meta)), params_(std::move(params)) {
  try {
    meta_.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Manifest, std::string("invalid checkpoint meta: ") + e.what());
  }
  validate_manifest(meta_, params_);
}

const Tensor& Checkpoint::param(std::string_view name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) {
    throw Error(ErrorKind::NotFound, "no parameter named '" + std::string(name) + "'");
  }
  return it->second;
}

bool bit_equal(const Checkpoint& a, const Checkpoint& b) noexcept {
  if (!(a.meta() == b.meta()) || a.size() != b.size()) return false;
  auto ib = b.params().begin();
  for (const auto& [name, tensor] : a.params()) {
    if (name != ib->first || !bit_equal(tensor, ib->second)) return false;
    ++ib;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(u & 0xff));
      u = static_cast<U>(u >> 8);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> bytes(std::size_t n) {
    if (n > in_.size() - pos_) {
      throw Error(ErrorKind::Truncated, "file truncated at byte " + std::to_string(pos_) +
                                            " (needed " + std::to_string(n) + " more)");
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    const auto s = bytes(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | s[i]);
    return static_cast<T>(u);
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_entry_header(Writer& w, std::string_view name, std::uint8_t dtype,
                        const Shape& dims, std::uint64_t payload_len) {
  w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.le<std::uint8_t>(dtype);
  w.le<std::uint8_t>(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
  w.le<std::uint64_t>(payload_len);
}

}  // namespace

std::vector<std::uint8_t> encode_gwtc(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kGwtcMagic.data(), kGwtcMagic.size());
  w.le<std::uint32_t>(kGwtcVersion);
  w.le<std::uint64_t>(ckpt.size() + 1);

  const std::string meta = config_to_json(ckpt.meta());
  bool meta_written = false;
  auto write_meta = [&] {
    write_entry_header(w, kMetaEntryName, 1, {}, meta.size());
    w.bytes(meta.data(), meta.size());
    meta_written = true;
  };

  for (const auto& [name, tensor] : ckpt.params()) {
    if (!meta_written && std::string_view(name) > kMetaEntryName) write_meta();
    write_entry_header(w, name, 0, tensor.dims(), tensor.size() * sizeof(float));
    for (float v : tensor.values()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  }
  if (!meta_written) write_meta();
  return w.take();
}

Checkpoint decode_gwtc(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kGwtcMagic.data(), 4) != 0) {
    throw Error(ErrorKind::BadMagic, "bad magic: not a GWTC checkpoint");
  }
  const auto version = r.le<std::uint32_t>();
  if (version != kGwtcVersion) {
    throw Error(ErrorKind::UnsupportedVersion,
                "unsupported GWTC version " + std::to_string(version));
  }
  const auto count = r.le<std::uint64_t>();

  ParamMap params;
  std::optional<GeneratorConfig> meta;
  std::string previous;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = r.le<std::uint32_t>();
    const auto name_bytes = r.bytes(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    if (e > 0 && !(previous < name)) {
      throw Error(ErrorKind::Format, "entry '" + name + "' out of order or duplicated");
    }
    const auto dtype = r.le<std::uint8_t>();
    const auto rank = r.le<std::uint8_t>();
    Shape dims(rank);
    for (auto& d : dims) d = r.le<std::uint32_t>();
    const auto payload_len = r.le<std::uint64_t>();

    if (name == kMetaEntryName) {
      if (dtype != 1 || rank != 0) {
        throw Error(ErrorKind::Format, "__meta__ entry must be raw bytes of rank 0");
      }
      const auto payload = r.bytes(payload_len);
      try {
        meta = config_from_json(
            std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()));
      } catch (const Error& err) {
        throw Error(ErrorKind::Format, std::string("invalid __meta__: ") + err.what());
      }
    } else {
      if (dtype != 0) {
        throw Error(ErrorKind::Format, "entry '" + name + "' has unsupported dtype " +
                                           std::to_string(dtype));
      }
      if (rank == 0 || std::find(dims.begin(), dims.end(), 0u) != dims.end()) {
        throw Error(ErrorKind::Format, "entry '" + name + "' has invalid dims");
      }
      const std::size_t volume = shape_volume(dims);
      if (payload_len != volume * sizeof(float)) {
        throw Error(ErrorKind::Format, "entry '" + name + "' payload length " +
                                           std::to_string(payload_len) + " != dims " +
                                           shape_to_string(dims));
      }
      const auto payload = r.bytes(payload_len);
      std::vector<float> data(volume);
      for (std::size_t i = 0; i < volume; ++i) {
        std::uint32_t u = 0;
        for (int b = 3; b >= 0; --b) u = (u << 8) | payload[i * 4 + b];
        data[i] = std::bit_cast<float>(u);
      }
      params.emplace(name, Tensor(std::move(dims), std::move(data)));
    }
    previous = std::move(name);
  }
  if (!r.done()) {
    throw Error(ErrorKind::Format, "trailing bytes after entry " + std::to_string(count));
  }
  if (!meta) throw Error(ErrorKind::Format, "checkpoint has no __meta__ entry");
  return Checkpoint(std::move(*meta), std::move(params));
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_gwtc(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  return decode_gwtc(bytes);
}

// ---------------------------------------------------------------------------

std::string Registry::put(Checkpoint ckpt, std::string name) {
  auto shared = std::make_shared<const Checkpoint>(std::move(ckpt));
  std::unique_lock lock(mutex_);
  std::string id = "m" + std::to_string(next_id_++);
  if (name.empty()) name = id;
  entries_.push_back({id, std::move(name), std::move(shared)});
  return id;
}

Registry::Entry Registry::entry(std::string_view id) const {
  std::shared_lock lock(mutex_);
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.id == id; });
  if (it == entries_.end()) {
    throw Error(ErrorKind::NotFound, "unknown model id '" + std::string(id) + "'");
  }
  return *it;
}

std::shared_ptr<const Checkpoint> Registry::get(std::string_view id) const {
  return entry(id).checkpoint;
}

std::vector<Registry::Entry> Registry::list() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

}  // namespace ganblend
