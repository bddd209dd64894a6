#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include <nlohmann/json.hpp>

#include "stereorisk/costvol.hpp"
#include "stereorisk/distribution.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/image.hpp"

namespace stereorisk {

namespace detail {

[[noreturn]] inline void io_fail(const std::filesystem::path& path,
                                 std::streamoff offset,
                                 const std::string& what) {
  throw IoError(path.string() + " (byte " + std::to_string(offset) + "): " +
                what);
}

// Netpbm token reader: skips whitespace and '#' comment lines.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#') {
        tok.push_back(static_cast<char>(in.get()));
      }
      return tok;
    }
  }
  return tok;
}

inline long pnm_int(std::istream& in, const std::filesystem::path& path,
                    const char* field) {
  const std::string tok = pnm_token(in);
  if (tok.empty()) {
    io_fail(path, in.tellg(), std::string("truncated header, missing ") + field);
  }
  try {
    return std::stol(tok);
  } catch (const std::exception&) {
    io_fail(path, in.tellg(), std::string("bad ") + field + " '" + tok + "'");
  }
}

inline GrayImage read_pgm(std::ifstream& in, const std::filesystem::path& path,
                          bool binary) {
  const long w = pnm_int(in, path, "width");
  const long h = pnm_int(in, path, "height");
  const long maxval = pnm_int(in, path, "maxval");
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    io_fail(path, in.tellg(), "invalid PGM dimensions or maxval");
  }
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = img.pixels.size();
  if (binary) {
    in.get();  // single whitespace byte after maxval
    if (maxval < 256) {
      std::vector<std::uint8_t> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(n));
      if (static_cast<std::size_t>(in.gcount()) != n) {
        io_fail(path, in.tellg(), "truncated pixel data");
      }
      for (std::size_t i = 0; i < n; ++i) {
        img.pixels[i] = raw[i] / static_cast<double>(maxval);
      }
    } else {
      std::vector<std::uint8_t> raw(n * 2);
      in.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(n * 2));
      if (static_cast<std::size_t>(in.gcount()) != n * 2) {
        io_fail(path, in.tellg(), "truncated pixel data");
      }
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
        img.pixels[i] = v / static_cast<double>(maxval);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const long v = pnm_int(in, path, "pixel value");
      if (v < 0 || v > maxval) {
        io_fail(path, in.tellg(), "pixel value out of range");
      }
      img.pixels[i] = v / static_cast<double>(maxval);
    }
  }
  for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline GrayImage read_png_file(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) {
    throw IoError(path.string() + ": cannot open");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path.string() + ": libpng initialization failed");
  }
  std::vector<std::uint8_t> data;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path.string() + ": corrupt or truncated PNG");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) {
    rows[r] = data.data() + stride * r;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  if (channels != 1 && channels != 3) {
    throw IoError(path.string() + ": unsupported PNG channel layout");
  }
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (png_uint_32 r = 0; r < h; ++r) {
    const std::uint8_t* row = data.data() + stride * r;
    for (png_uint_32 c = 0; c < w; ++c) {
      double v;
      if (channels == 1) {
        v = row[c] / 255.0;
      } else {
        const std::uint8_t* px = row + 3 * c;
        v = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
      }
      img.at(static_cast<int>(r), static_cast<int>(c)) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFF000000u) >> 24) | ((v & 0x00FF0000u) >> 8) |
         ((v & 0x0000FF00u) << 8) | ((v & 0x000000FFu) << 24);
}

}  // namespace detail

/// Reads a grayscale image from PGM (P2/P5) or PNG (grayscale or RGB, RGB
/// converted by 0.299 R + 0.587 G + 0.114 B). Intensities scale to [0, 1].
inline GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(path.string() + ": cannot open");
  }
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2) {
    detail::io_fail(path, 0, "file too short");
  }
  if (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5')) {
    return detail::read_pgm(in, path, magic[1] == '5');
  }
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
    in.close();
    return detail::read_png_file(path);
  }
  detail::io_fail(path, 0, "unknown image format (expect PGM or PNG)");
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError(path.string() + ": cannot open for writing");
  }
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raw[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) {
    throw IoError(path.string() + ": write failed");
  }
}

/// Writes a disparity map as grayscale PFM ("Pf"): negative scale marks a
/// little-endian payload, rows are stored bottom-up, invalid pixels become
/// +infinity.
inline void write_pfm(const std::filesystem::path& path,
                      const DisparityMap& map) {
  if (map.width <= 0 || map.height <= 0 ||
      map.values.size() != static_cast<std::size_t>(map.width) * map.height ||
      map.values.size() != map.valid.size()) {
    throw InputError("write_pfm: malformed disparity map");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError(path.string() + ": cannot open for writing");
  }
  out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(map.width));
  for (int r = map.height - 1; r >= 0; --r) {
    for (int c = 0; c < map.width; ++c) {
      const std::size_t i = map.index(r, c);
      row[static_cast<std::size_t>(c)] =
          map.valid[i] ? static_cast<float>(map.values[i])
                       : std::numeric_limits<float>::infinity();
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (float& v : row) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = detail::byteswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) {
    throw IoError(path.string() + ": write failed");
  }
}

inline DisparityMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(path.string() + ": cannot open");
  }
  const std::string magic = detail::pnm_token(in);
  if (magic == "PF") {
    throw IoError(path.string() + ": color PFM unsupported");
  }
  if (magic != "Pf") {
    detail::io_fail(path, 0, "not a PFM file");
  }
  const long w = detail::pnm_int(in, path, "width");
  const long h = detail::pnm_int(in, path, "height");
  const std::string scale_tok = detail::pnm_token(in);
  if (w <= 0 || h <= 0 || scale_tok.empty()) {
    detail::io_fail(path, in.tellg(), "malformed PFM header");
  }
  double scale;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    detail::io_fail(path, in.tellg(), "bad scale '" + scale_tok + "'");
  }
  if (scale == 0.0) {
    detail::io_fail(path, in.tellg(), "zero PFM scale");
  }
  in.get();  // single whitespace byte terminating the header

  DisparityMap map(static_cast<int>(w), static_cast<int>(h));
  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;
  std::vector<float> row(static_cast<std::size_t>(w));
  for (long r = h - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * 4));
    if (static_cast<std::size_t>(in.gcount()) != row.size() * 4) {
      detail::io_fail(path, in.tellg(), "truncated PFM payload");
    }
    for (long c = 0; c < w; ++c) {
      float v = row[static_cast<std::size_t>(c)];
      if (file_little != host_little) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = detail::byteswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
      const std::size_t i = map.index(static_cast<int>(r), static_cast<int>(c));
      if (std::isfinite(v)) {
        map.values[i] = v;
        map.valid[i] = 1;
      } else {
        map.values[i] = 0.0;
        map.valid[i] = 0;
      }
    }
  }
  return map;
}

struct PmfFile {
  DisparityPmf pmf;
  std::optional<double> sigma;
  std::optional<KernelType> kernel;
};

inline KernelType kernel_from_string(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (name == "laplacian") return KernelType::Laplacian;
  if (name == "gaussian") return KernelType::Gaussian;
  throw InputError("unknown kernel '" + name + "'");
}

/// Parses the textual pmf format:
///   {"d": [...], "p": [...], "sigma": 1.1, "kernel": "laplacian"}
/// sigma and kernel are optional.
inline PmfFile parse_pmf_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("pmf json: ") + e.what());
  }
  if (!j.contains("d") || !j.contains("p")) {
    throw IoError("pmf json: requires arrays 'd' and 'p'");
  }
  std::vector<double> d, p;
  try {
    d = j.at("d").get<std::vector<double>>();
    p = j.at("p").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("pmf json: ") + e.what());
  }
  PmfFile out{DisparityPmf(std::move(d), std::move(p)), std::nullopt,
              std::nullopt};
  if (j.contains("sigma")) {
    out.sigma = j.at("sigma").get<double>();
  }
  if (j.contains("kernel")) {
    out.kernel = kernel_from_string(j.at("kernel").get<std::string>());
  }
  return out;
}

inline PmfFile read_pmf_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError(path.string() + ": cannot open");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pmf_json(buf.str());
}

}  // namespace stereorisk
