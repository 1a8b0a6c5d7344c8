#include "magdmc/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

namespace magdmc {

void BinaryWriter::write_file(const std::string& path) const {
  const std::uint64_t sum = fnv1a(buf_.data(), buf_.size());
  // Write to a sibling temp file and rename, so a crash never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    out.write(reinterpret_cast<const char*>(&sum), sizeof sum);
    if (!out) throw FormatError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

BinaryReader BinaryReader::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + path + "'");
  BinaryReader r;
  r.buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (r.buf_.size() < sizeof(std::uint64_t)) throw FormatError("'" + path + "' is too short");
  std::uint64_t stored;
  std::memcpy(&stored, r.buf_.data() + r.buf_.size() - sizeof stored, sizeof stored);
  r.buf_.resize(r.buf_.size() - sizeof stored);
  if (fnv1a(r.buf_.data(), r.buf_.size()) != stored) throw FormatError("checksum mismatch in '" + path + "'");
  return r;
}

}  // namespace magdmc
