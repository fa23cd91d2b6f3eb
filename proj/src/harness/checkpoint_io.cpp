#include "bnas/harness/checkpoint_io.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <string>

#include "bnas/data/dataset.hpp"
#include "bnas/error.hpp"
#include "bnas/harness/fileio.hpp"
#include "json_util.hpp"

namespace bnas::harness {
namespace {

constexpr char kMagic[8] = {'B', 'N', 'A', 'S', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, bytes_.size());
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16(const char* what) {
    auto s = take(2, what);
    return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
           (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string meta_json(const arch::CheckpointMeta& meta) {
  detail::Json j;
  j["template"] = meta.template_name;
  j["code"] = detail::code_to_json(meta.code);
  j["seed"] = meta.seed;
  return j.dump();
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const arch::Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  if (ckpt.entries.size() > std::numeric_limits<std::uint32_t>::max())
    throw InputError("too many checkpoint entries");
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, tensor] : ckpt.entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw InputError("checkpoint entry name longer than 65535 bytes");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.dims()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw InputError("dimension exceeds 32 bits in " + name);
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (float v : tensor.data()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  const std::string meta = meta_json(ckpt.meta);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  return w.take();
}

arch::Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("bad checkpoint magic", 0);
  r.take(sizeof kMagic, "magic");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32("entry count");

  arch::Checkpoint ckpt;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = r.u16("entry name length");
    auto name_bytes = r.take(name_len, "entry name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0) throw FormatError("entry '" + name + "' has rank 0", rank_at);
    Shape dims;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::size_t dim_at = r.offset();
      const std::uint32_t d = r.u32("dims");
      if (d == 0) throw FormatError("entry '" + name + "' has a zero dimension", dim_at);
      dims.push_back(d);
      if (numel > r.remaining() / d) throw FormatError("truncated payload of '" + name + "'", bytes.size());
      numel *= d;
    }
    if (r.remaining() / 4 < numel) throw FormatError("truncated payload of '" + name + "'", bytes.size());
    auto payload = r.take(numel * 4, "payload");
    std::vector<float> values(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      const std::uint8_t* b = payload.data() + 4 * i;
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      values[i] = std::bit_cast<float>(bits);
    }
    ckpt.entries.emplace_back(std::move(name), Tensor(std::move(dims), values));
  }

  const std::uint32_t meta_len = r.u32("metadata length");
  const std::size_t meta_at = r.offset();
  auto meta_bytes = r.take(meta_len, "metadata");
  if (r.remaining() != 0) throw FormatError("trailing bytes after metadata", r.offset());
  try {
    const detail::Json j = detail::Json::parse(meta_bytes.begin(), meta_bytes.end());
    if (!j.is_object() || j.size() != 3 || !j.contains("template") || !j.contains("code") || !j.contains("seed"))
      throw FormatError("metadata must hold exactly template, code and seed", meta_at);
    ckpt.meta.template_name = j.at("template").get<std::string>();
    ckpt.meta.code = detail::code_from_json(j.at("code"), "metadata code");
    ckpt.meta.seed = j.at("seed").get<std::uint64_t>();
  } catch (const detail::Json::exception& ex) {
    throw FormatError(std::string("bad metadata: ") + ex.what(), meta_at);
  } catch (const InputError& ex) {
    throw FormatError(ex.what(), meta_at);
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const arch::Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

arch::Checkpoint read_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(data::read_file(path)); }

}  // namespace bnas::harness
