#include "toolmeta/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>

#include "toolmeta/errors.hpp"

namespace toolmeta::ad {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[6] = {'T', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(0, "truncated checkpoint");
  return v;
}

std::string get_string(std::istream& is, std::uint64_t n) {
  if (n > (1u << 30)) throw FormatError(0, "implausible string length in checkpoint");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw FormatError(0, "truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, checkpoint.header.size());
  os.write(checkpoint.header.data(), static_cast<std::streamsize>(checkpoint.header.size()));
  const auto& segs = checkpoint.params.segments();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(segs.size()));
  for (const auto& s : segs) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.name.size()));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put<std::uint64_t>(os, s.offset);
    put<std::uint64_t>(os, s.length);
  }
  const auto data = checkpoint.params.data();
  put<std::uint64_t>(os, data.size());
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
    throw FormatError(0, "not a checkpoint file: " + path.string());
  if (const auto v = get<std::uint32_t>(is); v != kVersion)
    throw FormatError(0, "unsupported checkpoint version " + std::to_string(v));

  Checkpoint out;
  out.header = get_string(is, get<std::uint64_t>(is));
  const auto nseg = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nseg; ++i) {
    auto name = get_string(is, get<std::uint32_t>(is));
    const auto offset = get<std::uint64_t>(is);
    const auto length = get<std::uint64_t>(is);
    if (offset != out.params.size())
      throw FormatError(i + 1, "segment '" + name + "' is not contiguous");
    out.params.add_segment(std::move(name), length);
  }
  const auto count = get<std::uint64_t>(is);
  if (count != out.params.size())
    throw FormatError(0, "value count does not match segment table");
  auto data = out.params.data();
  if (count && !is.read(reinterpret_cast<char*>(data.data()),
                        static_cast<std::streamsize>(count * sizeof(double))))
    throw FormatError(0, "truncated checkpoint payload");
  return out;
}

}  // namespace toolmeta::ad
