#include "cin/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace cin {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  f.seekg(0, std::ios::end);
  const std::streamoff n = f.tellg();
  f.seekg(0);
  std::vector<std::uint8_t> buf(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(buf.data()), n);
  if (!f) throw IoError("short read on '" + path + "'");
  return buf;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v >> 24);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

ImageU8 decode_png(const std::vector<std::uint8_t>& buf,
                   const std::string& path) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    throw IoError("'" + path + "': not a PNG file");

  std::uint32_t w = 0, h = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<std::uint8_t> idat;

  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= buf.size() && !saw_iend) {
    const std::uint32_t len = be32(&buf[pos]);
    if (pos + 12 + len > buf.size())
      throw IoError("'" + path + "': truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
    const std::uint8_t* data = &buf[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("'" + path + "': bad IHDR");
      w = be32(data);
      h = be32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || w == 0 || h == 0) throw IoError("'" + path + "': missing IHDR");
  if (bit_depth != 8)
    throw IoError("'" + path + "': unsupported PNG bit depth " +
                  std::to_string(bit_depth));
  if (interlace != 0) throw IoError("'" + path + "': interlaced PNG unsupported");
  int channels;
  switch (color_type) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default:
      throw IoError("'" + path + "': unsupported PNG color type " +
                    std::to_string(color_type));
  }

  const size_t stride = static_cast<size_t>(w) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * h);
  uLongf raw_len = raw.size();
  if (uncompress(raw.data(), &raw_len, idat.data(), idat.size()) != Z_OK ||
      raw_len != raw.size())
    throw IoError("'" + path + "': PNG inflate failed");

  // Undo per-scanline filters.
  std::vector<std::uint8_t> img(stride * h);
  for (std::uint32_t y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* dst = &img[y * stride];
    const std::uint8_t* up = y > 0 ? &img[(y - 1) * stride] : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<size_t>(channels) ? dst[x - channels] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<size_t>(channels)) ? up[x - channels] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          throw IoError("'" + path + "': bad PNG filter type " +
                        std::to_string(filter));
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  ImageU8 out;
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  out.rgb.resize(static_cast<size_t>(h) * w * 3);
  for (size_t p = 0; p < static_cast<size_t>(h) * w; ++p) {
    const std::uint8_t* s = &img[p * channels];
    std::uint8_t r, g, b;
    if (channels <= 2) {
      r = g = b = s[0];
    } else {
      r = s[0];
      g = s[1];
      b = s[2];
    }
    out.rgb[p * 3] = r;
    out.rgb[p * 3 + 1] = g;
    out.rgb[p * 3 + 2] = b;
  }
  return out;
}

ImageU8 decode_pnm(const std::vector<std::uint8_t>& buf,
                   const std::string& path) {
  // P5 (gray) / P6 (rgb), 8-bit binary.
  size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < buf.size()) {
      if (std::isspace(buf[pos])) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
      v = v * 10 + (buf[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw IoError("'" + path + "': malformed PNM header");
    return v;
  };
  const bool rgb = buf[1] == '6';
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw IoError("'" + path + "': only 8-bit PNM supported");
  ++pos;  // single whitespace after header
  const size_t need = static_cast<size_t>(w) * h * (rgb ? 3 : 1);
  if (buf.size() < pos + need) throw IoError("'" + path + "': truncated PNM");
  ImageU8 out;
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  out.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (long p = 0; p < w * h; ++p) {
    if (rgb) {
      out.rgb[p * 3] = buf[pos + p * 3];
      out.rgb[p * 3 + 1] = buf[pos + p * 3 + 1];
      out.rgb[p * 3 + 2] = buf[pos + p * 3 + 2];
    } else {
      out.rgb[p * 3] = out.rgb[p * 3 + 1] = out.rgb[p * 3 + 2] = buf[pos + p];
    }
  }
  return out;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
  const auto buf = read_file(path);
  if (buf.size() >= 8 && buf[0] == 0x89 && buf[1] == 'P') return decode_png(buf, path);
  if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '6'))
    return decode_pnm(buf, path);
  throw IoError("'" + path + "': unrecognized image format (PNG/PPM supported)");
}

void write_png(const std::string& path, const ImageU8& img) {
  require(img.height > 0 && img.width > 0 &&
              img.rgb.size() == static_cast<size_t>(img.height) * img.width * 3,
          "write_png: inconsistent image buffer");
  const size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[y * (stride + 1) + 1], &img.rgb[y * stride], stride);
  }
  uLongf bound = compressBound(raw.size());
  std::vector<std::uint8_t> z(bound);
  if (compress2(z.data(), &bound, raw.data(), raw.size(), 6) != Z_OK)
    throw IoError("write_png: deflate failed");
  z.resize(bound);

  std::vector<std::uint8_t> out;
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);

  auto chunk = [&](const char* type, const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc =
        crc32(0, &out[start], static_cast<uInt>(4 + data.size()));
    put_be32(out, crc);
  };

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  chunk("IHDR", ihdr);
  chunk("IDAT", z);
  chunk("IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_png: cannot open '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), out.size());
  if (!f) throw IoError("write_png: short write on '" + path + "'");
}

TensorF image_to_tensor(const ImageU8& img) {
  const Index H = img.height, W = img.width;
  ArrayX<float> a(3 * H * W);
  for (Index i = 0; i < H * W; ++i)
    for (Index c = 0; c < 3; ++c)
      a[c * H * W + i] = static_cast<float>(img.rgb[i * 3 + c]) / 255.0f;
  return TensorF::from_array({1, 3, H, W}, std::move(a), false);
}

ImageU8 tensor_to_image(const TensorF& t, Index batch_index) {
  require_shape(t.rank() == 4 && t.dim(1) == 3 && batch_index < t.dim(0),
                "tensor_to_image: expected [B,3,H,W] and a valid batch index");
  const Index H = t.dim(2), W = t.dim(3);
  ImageU8 img;
  img.height = static_cast<int>(H);
  img.width = static_cast<int>(W);
  img.rgb.resize(static_cast<size_t>(H) * W * 3);
  const float* base = t.data() + batch_index * 3 * H * W;
  for (Index i = 0; i < H * W; ++i) {
    for (Index c = 0; c < 3; ++c) {
      float v = base[c * H * W + i];
      v = v < 0 ? 0 : (v > 1 ? 1 : v);
      img.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return img;
}

}  // namespace cin
