#include "kondo/idx.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace kondo {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw IdxTruncatedError(path.string() + ": header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto magic = be32(bytes, 0, path);
  if (magic != kIdxImagesMagic)
    throw IdxMagicError(path.string() + ": expected image magic 0x00000803, found " + hex(magic));
  IdxImages img;
  img.count = be32(bytes, 4, path);
  img.rows = be32(bytes, 8, path);
  img.cols = be32(bytes, 12, path);
  if (img.rows == 0 || img.cols == 0) throw IdxDimensionError(path.string() + ": zero image extent");
  const std::size_t need = img.count * img.rows * img.cols;
  if (bytes.size() < 16 + need) throw IdxTruncatedError(path.string() + ": pixel data truncated");
  if (bytes.size() > 16 + need) throw IdxDimensionError(path.string() + ": file longer than its header declares");
  img.pixels.assign(bytes.begin() + 16, bytes.end());
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto magic = be32(bytes, 0, path);
  if (magic != kIdxLabelsMagic)
    throw IdxMagicError(path.string() + ": expected label magic 0x00000801, found " + hex(magic));
  const std::size_t count = be32(bytes, 4, path);
  if (bytes.size() < 8 + count) throw IdxTruncatedError(path.string() + ": label data truncated");
  if (bytes.size() > 8 + count) throw IdxDimensionError(path.string() + ": file longer than its header declares");
  return {bytes.begin() + 8, bytes.end()};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols)
    throw IdxDimensionError("write_idx_images: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace kondo
