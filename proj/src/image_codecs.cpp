#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cbpfa/image.hpp"

namespace cbpfa {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open file for writing: " + path);
  f.write(reinterpret_cast<const char*>(b.data()),
          static_cast<std::streamsize>(b.size()));
  if (!f) throw ImageError("short write: " + path);
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

struct RgbImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = gray, 3 = rgb
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

// ---------------------------------------------------------------- PNG

constexpr std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data,
                                       std::size_t len,
                                       std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  int rc = uncompress(out.data(), &out_len, data,
                      static_cast<uLong>(len));
  if (rc != Z_OK || out_len != expected)
    throw ImageError("PNG inflate failed");
  return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data,
                                       std::size_t len) {
  uLongf bound = compressBound(static_cast<uLong>(len));
  std::vector<std::uint8_t> out(bound);
  int rc = compress2(out.data(), &bound, data, static_cast<uLong>(len), 6);
  if (rc != Z_OK) throw ImageError("PNG deflate failed");
  out.resize(bound);
  return out;
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes,
                    const std::string& path) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw ImageError("not a PNG file: " + path);

  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<std::uint8_t> idat;
  std::vector<std::uint8_t> palette;

  std::size_t pos = 8;
  bool seen_ihdr = false, seen_iend = false;
  while (pos + 8 <= bytes.size() && !seen_iend) {
    std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size())
      throw ImageError("truncated PNG chunk: " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* payload = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw ImageError("bad IHDR: " + path);
      width = be32(payload);
      height = be32(payload + 4);
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      seen_ihdr = true;
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      palette.assign(payload, payload + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || width == 0 || height == 0)
    throw ImageError("invalid PNG header: " + path);
  if (bit_depth != 8)
    throw ImageError("unsupported PNG bit depth " +
                     std::to_string(bit_depth) + " (need 8): " + path);
  if (interlace != 0)
    throw ImageError("interlaced PNG not supported: " + path);

  int channels;
  switch (color_type) {
    case 0: channels = 1; break;  // gray
    case 2: channels = 3; break;  // rgb
    case 3: channels = 1; break;  // palette, expanded below
    case 4: channels = 2; break;  // gray + alpha (alpha dropped)
    case 6: channels = 4; break;  // rgba (alpha dropped)
    default:
      throw ImageError("unsupported PNG color type: " + path);
  }

  std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw =
      zlib_inflate(idat.data(), idat.size(), (stride + 1) * height);

  // Undo per-row filters in place.
  std::vector<std::uint8_t> img(stride * height);
  int bpp = channels;
  for (std::uint32_t r = 0; r < height; ++r) {
    std::uint8_t filter = raw[r * (stride + 1)];
    const std::uint8_t* src = &raw[r * (stride + 1) + 1];
    std::uint8_t* dst = &img[r * stride];
    const std::uint8_t* up = r > 0 ? &img[(r - 1) * stride] : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      int b = up ? up[i] : 0;
      int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int x = src[i];
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += paeth(a, b, c); break;
        default:
          throw ImageError("bad PNG filter type: " + path);
      }
      dst[i] = static_cast<std::uint8_t>(x);
    }
  }

  RgbImage out;
  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  std::size_t n = static_cast<std::size_t>(width) * height;
  if (color_type == 3) {
    if (palette.empty()) throw ImageError("palette PNG without PLTE: " + path);
    out.channels = 3;
    out.pixels.resize(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t idx = static_cast<std::size_t>(img[i]) * 3;
      if (idx + 2 >= palette.size())
        throw ImageError("palette index out of range: " + path);
      out.pixels[i * 3 + 0] = palette[idx + 0];
      out.pixels[i * 3 + 1] = palette[idx + 1];
      out.pixels[i * 3 + 2] = palette[idx + 2];
    }
  } else if (channels == 1) {
    out.channels = 1;
    out.pixels = std::move(img);
  } else if (channels == 2) {
    out.channels = 1;
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = img[i * 2];
  } else if (channels == 3) {
    out.channels = 3;
    out.pixels = std::move(img);
  } else {  // rgba
    out.channels = 3;
    out.pixels.resize(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      out.pixels[i * 3 + 0] = img[i * 4 + 0];
      out.pixels[i * 3 + 1] = img[i * 4 + 1];
      out.pixels[i * 3 + 2] = img[i * 4 + 2];
    }
  }
  return out;
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uLong crc = crc32(0L, &out[crc_start],
                    static_cast<uInt>(4 + payload.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

void encode_png(const std::string& path, const RgbImage& img) {
  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);            // gray or rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);

  std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int r = 0; r < img.height; ++r) {
    raw[r * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[r * (stride + 1) + 1], &img.pixels[r * stride], stride);
  }
  append_chunk(out, "IDAT", zlib_deflate(raw.data(), raw.size()));
  append_chunk(out, "IEND", {});
  write_file(path, out);
}

// ---------------------------------------------------------------- PGM

RgbImage decode_pgm(const std::vector<std::uint8_t>& bytes,
                    const std::string& path) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]))
      tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };

  if (next_token() != "P5") throw ImageError("not a binary PGM: " + path);
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0) throw ImageError("bad PGM dimensions: " + path);
  if (maxval != 255)
    throw ImageError("unsupported PGM bit depth (maxval " +
                     std::to_string(maxval) + ", need 255): " + path);
  ++pos;  // single whitespace after maxval
  std::size_t n = static_cast<std::size_t>(w) * h;
  if (pos + n > bytes.size()) throw ImageError("truncated PGM: " + path);

  RgbImage out;
  out.width = w;
  out.height = h;
  out.channels = 1;
  out.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + n);
  return out;
}

void encode_pgm(const std::string& path, const ImagePlane& plane) {
  std::string header = "P5\n" + std::to_string(plane.width) + " " +
                       std::to_string(plane.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + plane.size());
  for (double v : plane.data) out.push_back(quantize_pixel(v));
  write_file(path, out);
}

// ---------------------------------------------------------------- BMP

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

RgbImage decode_bmp(const std::vector<std::uint8_t>& bytes,
                    const std::string& path) {
  if (bytes.size() < 54 || bytes[0] != 'B' || bytes[1] != 'M')
    throw ImageError("not a BMP file: " + path);
  std::uint32_t data_offset = le32(&bytes[10]);
  std::uint32_t header_size = le32(&bytes[14]);
  if (header_size < 40) throw ImageError("unsupported BMP header: " + path);
  std::int32_t w = static_cast<std::int32_t>(le32(&bytes[18]));
  std::int32_t h = static_cast<std::int32_t>(le32(&bytes[22]));
  std::uint16_t bpp = le16(&bytes[28]);
  std::uint32_t compression = le32(&bytes[30]);
  if (bpp != 24)
    throw ImageError("unsupported BMP bit depth " + std::to_string(bpp) +
                     " (need 24): " + path);
  if (compression != 0)
    throw ImageError("compressed BMP not supported: " + path);

  bool top_down = h < 0;
  std::int32_t height = top_down ? -h : h;
  if (w <= 0 || height <= 0) throw ImageError("bad BMP dimensions: " + path);
  std::size_t row_bytes = (static_cast<std::size_t>(w) * 3 + 3) & ~3ULL;
  if (data_offset + row_bytes * height > bytes.size())
    throw ImageError("truncated BMP: " + path);

  RgbImage out;
  out.width = w;
  out.height = height;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(w) * height * 3);
  for (std::int32_t r = 0; r < height; ++r) {
    std::int32_t src_row = top_down ? r : height - 1 - r;
    const std::uint8_t* src = &bytes[data_offset + src_row * row_bytes];
    for (std::int32_t c = 0; c < w; ++c) {
      // BMP stores BGR
      out.pixels[(r * w + c) * 3 + 0] = src[c * 3 + 2];
      out.pixels[(r * w + c) * 3 + 1] = src[c * 3 + 1];
      out.pixels[(r * w + c) * 3 + 2] = src[c * 3 + 0];
    }
  }
  return out;
}

void encode_bmp(const std::string& path, const RgbImage& img) {
  std::size_t row_bytes = (static_cast<std::size_t>(img.width) * 3 + 3) & ~3ULL;
  std::uint32_t data_size = static_cast<std::uint32_t>(row_bytes * img.height);

  std::vector<std::uint8_t> out;
  out.push_back('B');
  out.push_back('M');
  put_le32(out, 54 + data_size);
  put_le32(out, 0);
  put_le32(out, 54);
  put_le32(out, 40);
  put_le32(out, static_cast<std::uint32_t>(img.width));
  put_le32(out, static_cast<std::uint32_t>(img.height));
  put_le16(out, 1);
  put_le16(out, 24);
  put_le32(out, 0);
  put_le32(out, data_size);
  put_le32(out, 2835);
  put_le32(out, 2835);
  put_le32(out, 0);
  put_le32(out, 0);

  std::vector<std::uint8_t> row(row_bytes, 0);
  for (int r = img.height - 1; r >= 0; --r) {
    for (int c = 0; c < img.width; ++c) {
      std::size_t i = (static_cast<std::size_t>(r) * img.width + c) * 3;
      row[c * 3 + 0] = img.pixels[i + 2];
      row[c * 3 + 1] = img.pixels[i + 1];
      row[c * 3 + 2] = img.pixels[i + 0];
    }
    out.insert(out.end(), row.begin(), row.end());
  }
  write_file(path, out);
}

// ------------------------------------------------------------ dispatch

std::string lower_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

YCbCrImage from_rgb(const RgbImage& img) {
  YCbCrImage out;
  out.y = ImagePlane(img.width, img.height);
  out.cb = ImagePlane(img.width, img.height);
  out.cr = ImagePlane(img.width, img.height);
  std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      out.y.data[i] = img.pixels[i];
      out.cb.data[i] = 128.0;
      out.cr.data[i] = 128.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      rgb_to_ycbcr(img.pixels[i * 3], img.pixels[i * 3 + 1],
                   img.pixels[i * 3 + 2], out.y.data[i], out.cb.data[i],
                   out.cr.data[i]);
    }
  }
  return out;
}

RgbImage to_rgb(const YCbCrImage& img) {
  RgbImage out;
  out.width = img.width();
  out.height = img.height();
  out.channels = 3;
  std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  out.pixels.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    double r, g, b;
    ycbcr_to_rgb(img.y.data[i], img.cb.data[i], img.cr.data[i], r, g, b);
    out.pixels[i * 3 + 0] = quantize_pixel(r);
    out.pixels[i * 3 + 1] = quantize_pixel(g);
    out.pixels[i * 3 + 2] = quantize_pixel(b);
  }
  return out;
}

}  // namespace

YCbCrImage load_image(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  std::string ext = lower_extension(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return from_rgb(decode_png(bytes, path));
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
    return from_rgb(decode_pgm(bytes, path));
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M')
    return from_rgb(decode_bmp(bytes, path));
  throw ImageError("unrecognized image format (need PNG, PGM, or BMP): " +
                   path);
}

void save_image(const std::string& path, const YCbCrImage& img) {
  std::string ext = lower_extension(path);
  if (ext == "png") {
    encode_png(path, to_rgb(img));
  } else if (ext == "pgm") {
    encode_pgm(path, img.y);
  } else if (ext == "bmp") {
    encode_bmp(path, to_rgb(img));
  } else {
    throw ImageError("unsupported output extension (.png/.pgm/.bmp): " + path);
  }
}

void save_plane(const std::string& path, const ImagePlane& plane) {
  std::string ext = lower_extension(path);
  if (ext == "pgm") {
    encode_pgm(path, plane);
    return;
  }
  RgbImage img;
  img.width = plane.width;
  img.height = plane.height;
  img.channels = 1;
  img.pixels.resize(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i)
    img.pixels[i] = quantize_pixel(plane.data[i]);
  if (ext == "png") {
    encode_png(path, img);
  } else if (ext == "bmp") {
    RgbImage rgb;
    rgb.width = img.width;
    rgb.height = img.height;
    rgb.channels = 3;
    rgb.pixels.resize(img.pixels.size() * 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      rgb.pixels[i * 3] = rgb.pixels[i * 3 + 1] = rgb.pixels[i * 3 + 2] =
          img.pixels[i];
    }
    encode_bmp(path, rgb);
  } else {
    throw ImageError("unsupported output extension (.png/.pgm/.bmp): " + path);
  }
}

}  // namespace cbpfa
