#include "binio.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace polnet::binio {

std::uint32_t crc32(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
  return static_cast<std::uint32_t>(crc);
}

void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::uint32_t version, const std::vector<Section>& sections) {
  Writer w;
  std::string header(magic);
  header.resize(8, '\0');
  std::string out = header;
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    w.u32(s.tag);
    w.u64(s.payload.size());
    out += w.take();
    out += s.payload;
    w.u32(crc32(s.payload));
  }
  out += w.take();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::kIo, "cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(Errc::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIo, "rename failed: " + ec.message());
}

std::vector<Section> read_container(const std::filesystem::path& path, std::string_view magic,
                                    std::uint32_t version) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIo, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(data);
  std::string expected(magic);
  expected.resize(8, '\0');
  if (r.remaining() < 8) throw Error(Errc::kTruncated, "file shorter than header");
  if (r.take(8) != expected) throw Error(Errc::kFormat, "bad magic in " + path.string());
  const std::uint32_t found = r.u32();
  if (found != version)
    throw Error(Errc::kVersionMismatch, "format version " + std::to_string(found) +
                                            ", expected " + std::to_string(version));
  const std::uint32_t n = r.u32();
  std::vector<Section> sections;
  for (std::uint32_t i = 0; i < n; ++i) {
    Section s;
    s.tag = r.u32();
    const std::uint64_t len = r.u64();
    s.payload = std::string(r.take(len));
    if (r.u32() != crc32(s.payload))
      throw Error(Errc::kChecksum, "checksum mismatch in section " + std::to_string(s.tag));
    sections.push_back(std::move(s));
  }
  if (!r.done()) throw Error(Errc::kFormat, "trailing bytes after last section");
  return sections;
}

}  // namespace polnet::binio
