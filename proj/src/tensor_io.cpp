#include "sparse_shield/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "sparse_shield/error.hpp"

namespace sparse_shield {
namespace {

constexpr char kMagic[4] = {'C', 'L', 'N', 'T'};

void put_le(std::vector<char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::span<const char> in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= std::uint64_t{static_cast<unsigned char>(in[offset + i])} << (8 * i);
  return v;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "short write to " + path.string());
}

// Minimal PNM header reader: magic, width, height, maxval, one whitespace.
class PnmHeader {
 public:
  explicit PnmHeader(std::span<const char> bytes) : bytes_(bytes) {}

  std::string magic() {
    if (bytes_.size() < 2) throw Error(Errc::truncated, "image header truncated");
    pos_ = 2;
    return {bytes_.data(), 2};
  }

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (std::size_t{1} << 32))
        throw Error(Errc::unsupported_format, "image dimension too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) {
      if (pos_ >= bytes_.size())
        throw Error(Errc::truncated, "image header truncated");
      throw Error(Errc::unsupported_format, "malformed image header");
    }
    return value;
  }

  std::size_t end_of_header() {
    if (pos_ >= bytes_.size()) throw Error(Errc::truncated, "image header truncated");
    if (!std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw Error(Errc::unsupported_format, "malformed image header");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode_tensor(const Tensor& t) {
  std::vector<char> out;
  out.reserve(8 + 8 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le(out, t.rank(), 4);
  for (const std::size_t e : t.shape()) put_le(out, e, 8);
  for (const float v : t.data()) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

Tensor decode_tensor(std::span<const char> bytes) {
  if (bytes.size() < 4) throw Error(Errc::truncated, "CLNT header truncated");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error(Errc::bad_magic, "not a CLNT tensor");
  if (bytes.size() < 8) throw Error(Errc::truncated, "CLNT header truncated");
  const std::uint64_t rank = get_le(bytes, 4, 4);
  if (bytes.size() - 8 < rank * 8)
    throw Error(Errc::truncated, "CLNT extents truncated");

  std::vector<std::size_t> shape(rank);
  std::size_t offset = 8;
  const std::size_t payload_bytes = bytes.size() - 8 - rank * 8;
  std::uint64_t count = 1;
  bool overflow = false;
  for (auto& e : shape) {
    e = get_le(bytes, offset, 8);
    offset += 8;
    if (e != 0 && count > std::numeric_limits<std::uint64_t>::max() / 4 / e)
      overflow = true;
    count *= e;
  }
  if (overflow || count * 4 > payload_bytes)
    throw Error(Errc::truncated, "CLNT payload shorter than its shape");
  if (count * 4 < payload_bytes)
    throw Error(Errc::shape_mismatch, "CLNT payload longer than its shape");

  std::vector<float> data(count);
  for (auto& v : data) {
    v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4)));
    offset += 4;
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_tensor(bytes);
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file(path, encode_tensor(t));
}

ImageU8 load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  PnmHeader header(bytes);
  const std::string magic = header.magic();
  ImageU8 img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw Error(Errc::unsupported_format,
                path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
  }
  img.width = header.number();
  img.height = header.number();
  const std::size_t maxval = header.number();
  if (maxval != 255)
    throw Error(Errc::unsupported_format,
                path.string() + ": maxval " + std::to_string(maxval) + " (need 255)");
  const std::size_t start = header.end_of_header();
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - start < n)
    throw Error(Errc::truncated, path.string() + ": pixel data truncated");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + n));
  return img;
}

void save_image(const ImageU8& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    throw Error(Errc::invalid_argument, "images have 1 or 3 channels");
  if (img.pixels.size() != img.width * img.height * img.channels)
    throw Error(Errc::shape_mismatch, "pixel count does not match image size");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") +
                             "\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  write_file(path, out);
}

Tensor image_to_tensor(const ImageU8& img) {
  const std::size_t c = img.channels, h = img.height, w = img.width;
  std::vector<float> data(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        data[(ch * h + y) * w + x] =
            static_cast<float>(img.pixels[(y * w + x) * c + ch] / 255.0);
  return Tensor({c, h, w}, std::move(data));
}

ImageU8 tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || (t.extent(0) != 1 && t.extent(0) != 3))
    throw Error(Errc::shape_mismatch, "expected a [1|3, H, W] tensor");
  ImageU8 img;
  img.channels = t.extent(0);
  img.height = t.extent(1);
  img.width = t.extent(2);
  img.pixels.resize(t.size());
  const auto data = t.data();
  for (std::size_t ch = 0; ch < img.channels; ++ch)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = std::clamp<double>(
            data[(ch * img.height + y) * img.width + x], 0.0, 1.0);
        img.pixels[(y * img.width + x) * img.channels + ch] =
            static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
      }
  return img;
}

}  // namespace sparse_shield
