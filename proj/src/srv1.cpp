#include "ssr/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace ssr::detail {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'V', '1'};
constexpr std::size_t kHeaderBytes = 4 + 3 * 4 + 3 * 4;

// This code assumes a little-endian host, which matches the on-disk format;
// raw reads/writes below are byte-exact.
static_assert(std::endian::native == std::endian::little,
              "SRV1 I/O requires a little-endian host");

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated SRV1 header");
  return value;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

Srv1Data srv1_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not an SRV1 file: '" + path + "'");

  Srv1Data raw;
  for (auto& d : raw.dims) d = read_pod<std::uint32_t>(in);
  for (auto& s : raw.spacing) s = read_pod<float>(in);

  const std::uint64_t count =
      std::uint64_t(raw.dims[0]) * std::uint64_t(raw.dims[1]) * std::uint64_t(raw.dims[2]);
  if (raw.dims[0] == 0 || raw.dims[1] == 0 || raw.dims[2] == 0)
    throw std::runtime_error("SRV1 dims must be positive");
  if (count > std::uint64_t(std::numeric_limits<Index>::max()) / sizeof(float))
    throw std::runtime_error("SRV1 dims overflow");
  if (file_size != kHeaderBytes + count * sizeof(float))
    throw std::runtime_error(file_size < kHeaderBytes + count * sizeof(float)
                                 ? "truncated SRV1 payload"
                                 : "SRV1 payload size mismatch");

  raw.values.resize(count);
  in.read(reinterpret_cast<char*>(raw.values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("truncated SRV1 payload");
  return raw;
}

void srv1_write(const std::string& path, const Srv1Data& raw) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(kMagic, 4);
  for (const auto d : raw.dims) write_pod(out, d);
  for (const auto s : raw.spacing) write_pod(out, s);
  out.write(reinterpret_cast<const char*>(raw.values.data()),
            static_cast<std::streamsize>(raw.values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace ssr::detail
