#include "beaconmap/imageio.hpp"

#include <png.h>
#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace beaconmap {

namespace {

class PnmReader {
 public:
  explicit PnmReader(const std::string& bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw IoError("pnm: malformed header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 1'000'000'000) throw IoError("pnm: header value out of range");
    }
    return static_cast<int>(value);
  }

  // Binary payload starts after exactly one whitespace byte.
  std::size_t payload_start() { return pos_ + 1; }
  const std::string& bytes() const { return bytes_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 2;
};

GrayImage decode_pnm(const std::string& bytes) {
  const char kind = bytes[1];
  PnmReader reader(bytes);
  const int w = reader.next_int();
  const int h = reader.next_int();
  if (w <= 0 || h <= 0) throw DimensionError("pnm: empty image");
  const int maxval = (kind == '1' || kind == '4') ? 1 : reader.next_int();
  if (maxval <= 0 || maxval > 65535) throw IoError("pnm: bad maxval");
  GrayImage img(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto scale = [maxval](int v) { return static_cast<std::uint8_t>(std::lround(255.0 * v / maxval)); };

  switch (kind) {
    case '1':
    case '2':
    case '3': {
      const int channels = kind == '3' ? 3 : 1;
      for (std::size_t i = 0; i < n; ++i) {
        int v[3] = {0, 0, 0};
        for (int c = 0; c < channels; ++c) v[c] = reader.next_int();
        if (kind == '1') {
          img.pixels()[i] = v[0] ? 0 : 255;  // PBM: 1 is black
        } else if (kind == '2') {
          img.pixels()[i] = scale(v[0]);
        } else {
          img.pixels()[i] = luminance(scale(v[0]), scale(v[1]), scale(v[2]));
        }
      }
      break;
    }
    case '4': {
      const std::size_t start = reader.payload_start();
      const std::size_t row_bytes = (static_cast<std::size_t>(w) + 7) / 8;
      if (bytes.size() < start + row_bytes * h) throw IoError("pnm: truncated payload");
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const auto byte = static_cast<unsigned char>(bytes[start + y * row_bytes + x / 8]);
          img.at(x, y) = (byte >> (7 - x % 8)) & 1 ? 0 : 255;
        }
      }
      break;
    }
    case '5':
    case '6': {
      const int channels = kind == '6' ? 3 : 1;
      const int sample_bytes = maxval > 255 ? 2 : 1;
      const std::size_t start = reader.payload_start();
      if (bytes.size() < start + n * channels * sample_bytes) throw IoError("pnm: truncated payload");
      auto sample = [&](std::size_t k) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start + k * sample_bytes);
        return sample_bytes == 2 ? (p[0] << 8) | p[1] : p[0];
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (channels == 1) {
          img.pixels()[i] = scale(sample(i));
        } else {
          img.pixels()[i] =
              luminance(scale(sample(3 * i)), scale(sample(3 * i + 1)), scale(sample(3 * i + 2)));
        }
      }
      break;
    }
    default:
      throw IoError("pnm: unsupported variant");
  }
  return img;
}

std::uint32_t be32(const std::string& b, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

// Pixels per metre to dots per inch, rounded to 0.1 so common resolutions survive the
// integer chunk field.
double ppm_to_dpi(std::uint32_t ppm) { return std::round(ppm * 0.0254 * 10.0) / 10.0; }

// The simplified libpng API ignores pHYs, so the chunk is read and written by hand.
void read_phys(const std::string& bytes, GrayImage& img) {
  for (std::size_t at = 8; at + 12 <= bytes.size();) {
    const std::uint32_t len = be32(bytes, at);
    const std::string type = bytes.substr(at + 4, 4);
    if (type == "IDAT" || type == "IEND" || at + 12 + len > bytes.size()) return;
    if (type == "pHYs" && len == 9 && bytes[at + 16] == 1) {
      img.dpi_x = ppm_to_dpi(be32(bytes, at + 8));
      img.dpi_y = ppm_to_dpi(be32(bytes, at + 12));
      return;
    }
    at += 12 + len;
  }
}

std::string phys_chunk(double dpi_x, double dpi_y) {
  std::string body = "pHYs";
  put32(body, static_cast<std::uint32_t>(std::lround(dpi_x / 0.0254)));
  put32(body, static_cast<std::uint32_t>(std::lround(dpi_y / 0.0254)));
  body.push_back(1);
  std::string out;
  put32(out, 9);
  out += body;
  put32(out, static_cast<std::uint32_t>(::crc32(0, reinterpret_cast<const Bytef*>(body.data()), body.size())));
  return out;
}

GrayImage decode_png(const std::string& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("png: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(std::string("png: ") + image.message);
  }
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.pixels()[i] = luminance(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  }
  read_phys(bytes, img);
  return img;
}

std::string encode_png(int w, int h, const std::uint8_t* data, int format, double dpi_x, double dpi_y) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = static_cast<png_uint_32>(format);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw IoError(std::string("png write: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw IoError(std::string("png write: ") + image.message);
  }
  out.resize(size);
  // IHDR is always first: 8 signature bytes plus a 25-byte chunk.
  if (dpi_x > 0.0 && dpi_y > 0.0) out.insert(33, phys_chunk(dpi_x, dpi_y));
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

RgbImage::RgbImage(const GrayImage& gray) : RgbImage(gray.width(), gray.height()) {
  for (std::size_t i = 0; i < gray.size(); ++i) {
    data[3 * i] = data[3 * i + 1] = data[3 * i + 2] = gray.pixels()[i];
  }
}

GrayImage decode_image(const std::string& bytes) {
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 3 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '6') {
    return decode_pnm(bytes);
  }
  throw IoError("unrecognised image format");
}

GrayImage load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels().data()), img.pixels().size());
  return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) { write_file(path, encode_pgm(img)); }

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img.width(), img.height(), img.pixels().data(), PNG_FORMAT_GRAY, img.dpi_x, img.dpi_y));
}

void save_png(const RgbImage& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img.width, img.height, img.data.data(), PNG_FORMAT_RGB, 0.0, 0.0));
}

}  // namespace beaconmap
