#include "vqa/checkpoint.hpp"

#include "vqa/binary_io.hpp"

namespace vqa {

namespace {
constexpr std::string_view kMagic = "VQAC";
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  io::ByteWriter out;
  out.bytes(kMagic);
  out.u32(kCheckpointVersion);
  out.u64(checkpoint.config_text.size());
  out.bytes(checkpoint.config_text);
  out.u32(static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const std::string& name : checkpoint.params.names()) {
    const Tensor& t = checkpoint.params.get(name);
    out.u32(static_cast<std::uint32_t>(name.size()));
    out.bytes(name);
    out.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t extent : t.shape()) out.u64(extent);
    for (double v : t.data()) out.f64(v);
  }
  return out.take();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  io::ByteReader in(bytes, source);
  if (in.remaining() < kMagic.size() || in.bytes(kMagic.size()) != kMagic) {
    throw FormatError(FormatFault::kBadMagic, source + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatFault::kUnsupportedVersion, source + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint out;
  const std::uint64_t config_size = in.u64();
  out.config_text = std::string(in.bytes(config_size));
  const std::uint32_t count = in.u32();
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t name_size = in.u32();
    std::string name(in.bytes(name_size));
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& extent : shape) extent = in.u64();
    const std::size_t n = element_count(shape);
    if (n > in.remaining() / 8) {
      throw FormatError(FormatFault::kTruncated, source + ": parameter " + name + " runs past end of file");
    }
    std::vector<double> values(n);
    for (double& v : values) v = in.f64();
    out.params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatFault::kMalformedRecord, source + ": " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace vqa
