// Copyright 2026 The Spreadcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <cstring>

#include <zlib.h>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"

namespace spreadcast::gkg {
namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

std::uint32_t rd32(const std::string& s, std::size_t pos) {
  if (pos + 4 > s.size()) throw Error(ErrorKind::kIo, "truncated zip archive");
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

std::uint16_t rd16(const std::string& s, std::size_t pos) {
  if (pos + 2 > s.size()) throw Error(ErrorKind::kIo, "truncated zip archive");
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void wr16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

std::string inflate_raw(const char* data, std::size_t size, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(ErrorKind::kIo, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw Error(ErrorKind::kIo, "corrupt deflate stream in zip archive");
  }
  return out;
}

std::string read_zip_first_entry(const std::string& zip) {
  if (zip.size() < 22) throw Error(ErrorKind::kIo, "file too small to be a zip archive");
  std::size_t end = std::string::npos;
  const std::size_t lowest = zip.size() > 22 + 65535 ? zip.size() - 22 - 65535 : 0;
  for (std::size_t pos = zip.size() - 22 + 1; pos-- > lowest;) {
    if (rd32(zip, pos) == kEndSig) {
      end = pos;
      break;
    }
  }
  if (end == std::string::npos) throw Error(ErrorKind::kIo, "zip end-of-central-directory not found");
  if (rd16(zip, end + 10) == 0) throw Error(ErrorKind::kIo, "zip archive has no entries");
  const std::size_t central = rd32(zip, end + 16);
  if (rd32(zip, central) != kCentralSig) throw Error(ErrorKind::kIo, "bad zip central directory");
  const std::uint16_t method = rd16(zip, central + 10);
  const std::uint32_t crc = rd32(zip, central + 16);
  const std::uint32_t comp_size = rd32(zip, central + 20);
  const std::uint32_t raw_size = rd32(zip, central + 24);
  const std::size_t local = rd32(zip, central + 42);
  if (rd32(zip, local) != kLocalHeaderSig) throw Error(ErrorKind::kIo, "bad zip local header");
  const std::size_t data = local + 30 + rd16(zip, local + 26) + rd16(zip, local + 28);
  if (data + comp_size > zip.size()) throw Error(ErrorKind::kIo, "truncated zip entry");

  std::string out;
  if (method == 0) {
    out.assign(zip.data() + data, comp_size);
  } else if (method == 8) {
    out = inflate_raw(zip.data() + data, comp_size, raw_size);
  } else {
    throw Error(ErrorKind::kIo, "unsupported zip compression method " + std::to_string(method));
  }
  const auto actual = static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
  if (actual != crc) throw Error(ErrorKind::kIo, "zip entry CRC mismatch");
  return out;
}

}  // namespace

std::string read_gkg_archive(const std::filesystem::path& path) {
  std::string bytes = csv::read_file(path);
  if (path.extension() == ".zip") {
    try {
      return read_zip_first_entry(bytes);
    } catch (const Error& e) {
      throw Error(ErrorKind::kIo, path.string() + ": " + e.what());
    }
  }
  return bytes;
}

void write_zip(const std::filesystem::path& path, std::string_view entry_name,
               std::string_view contents) {
  std::string deflated(compressBound(static_cast<uLong>(contents.size())) + 64, '\0');
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorKind::kIo, "deflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(contents.data()));
  zs.avail_in = static_cast<uInt>(contents.size());
  zs.next_out = reinterpret_cast<Bytef*>(deflated.data());
  zs.avail_out = static_cast<uInt>(deflated.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflated.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorKind::kIo, "deflate failed");

  const auto crc = static_cast<std::uint32_t>(::crc32(
      0L, reinterpret_cast<const Bytef*>(contents.data()), static_cast<uInt>(contents.size())));
  const auto name_len = static_cast<std::uint16_t>(entry_name.size());
  const std::uint16_t dos_time = 0;
  const std::uint16_t dos_date = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

  std::string z;
  wr32(z, kLocalHeaderSig);
  wr16(z, 20);
  wr16(z, 0);
  wr16(z, 8);
  wr16(z, dos_time);
  wr16(z, dos_date);
  wr32(z, crc);
  wr32(z, static_cast<std::uint32_t>(deflated.size()));
  wr32(z, static_cast<std::uint32_t>(contents.size()));
  wr16(z, name_len);
  wr16(z, 0);
  z += entry_name;
  z += deflated;

  const auto central_offset = static_cast<std::uint32_t>(z.size());
  wr32(z, kCentralSig);
  wr16(z, 20);
  wr16(z, 20);
  wr16(z, 0);
  wr16(z, 8);
  wr16(z, dos_time);
  wr16(z, dos_date);
  wr32(z, crc);
  wr32(z, static_cast<std::uint32_t>(deflated.size()));
  wr32(z, static_cast<std::uint32_t>(contents.size()));
  wr16(z, name_len);
  wr16(z, 0);
  wr16(z, 0);
  wr16(z, 0);
  wr16(z, 0);
  wr32(z, 0);
  wr32(z, 0);
  z += entry_name;
  const auto central_size = static_cast<std::uint32_t>(z.size() - central_offset);

  wr32(z, kEndSig);
  wr16(z, 0);
  wr16(z, 0);
  wr16(z, 1);
  wr16(z, 1);
  wr32(z, central_size);
  wr32(z, central_offset);
  wr16(z, 0);
  csv::write_file(path, z);
}

}  // namespace spreadcast::gkg
