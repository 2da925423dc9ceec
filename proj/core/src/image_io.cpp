#include "shiftcam/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "shiftcam/error.hpp"

namespace shiftcam {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::uint8_t to_byte(double v) {
  const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  // std::round rounds half away from zero.
  return static_cast<std::uint8_t>(std::round(clamped * 255.0));
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  // exactly one whitespace byte after maxval has been consumed here
  return tok;
}

std::size_t parse_header_number(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
    fail(ErrorKind::Format, "malformed PGM header in " + path.string());
  return std::stoul(tok);
}

ImagePlane load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5") fail(ErrorKind::Format, path.string() + ": not a binary grayscale PGM (P5)");
  const std::size_t cols = parse_header_number(pgm_token(in), path);
  const std::size_t rows = parse_header_number(pgm_token(in), path);
  const std::size_t maxval = parse_header_number(pgm_token(in), path);
  if (maxval != 255)
    fail(ErrorKind::Format, path.string() + ": unsupported PGM maxval " + std::to_string(maxval) + " (need 255)");
  if (rows == 0 || cols == 0) fail(ErrorKind::Format, path.string() + ": empty image");
  std::vector<unsigned char> bytes(rows * cols);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    fail(ErrorKind::Format, path.string() + ": truncated pixel data");
  ImagePlane img(rows, cols);
  std::transform(bytes.begin(), bytes.end(), img.storage().begin(),
                 [](unsigned char b) { return static_cast<double>(b) / 255.0; });
  return img;
}

void save_pgm(const ImagePlane& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.storage().begin(), img.storage().end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw Error(ErrorKind::Format, std::string("libpng: ") + msg);
}
void png_warning_handler(png_structp, png_const_charp) {}

ImagePlane load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorKind::Io, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY)
    fail(ErrorKind::Format, path.string() + ": PNG is not single-channel grayscale");
  if (depth != 8)
    fail(ErrorKind::Format, path.string() + ": unsupported PNG bit depth " + std::to_string(depth));
  if (png_get_valid(png, info, PNG_INFO_tRNS))
    fail(ErrorKind::Format, path.string() + ": PNG transparency is not supported");

  ImagePlane img(height, width);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  std::vector<png_byte> all(static_cast<std::size_t>(width) * height);
  std::vector<png_bytep> rows(height);
  for (std::size_t r = 0; r < height; ++r) rows[r] = all.data() + r * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  std::transform(all.begin(), all.end(), img.storage().begin(),
                 [](png_byte b) { return static_cast<double>(b) / 255.0; });
  return img;
}

void save_png(const ImagePlane& img, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorKind::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler, png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols()), static_cast<png_uint_32>(img.rows()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(img.cols());
  for (std::size_t r = 0; r < img.rows(); ++r) {
    auto src = img.row(r);
    std::transform(src.begin(), src.end(), row.begin(), to_byte);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

ImagePlane load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::Io, "no such file: " + path.string());
  std::ifstream probe(path, std::ios::binary);
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
  if (sig[0] == 'P') return load_pgm(path);
  fail(ErrorKind::Format, path.string() + ": neither PGM nor PNG");
}

void save_image(const ImagePlane& img, const std::filesystem::path& path) {
  require(!img.empty(), "save_image: empty image");
  if (lower_extension(path) == ".png")
    save_png(img, path);
  else
    save_pgm(img, path);
}

ImagePlane block_average(const ImagePlane& img, std::size_t factor) {
  require(factor > 0, "block_average: factor must be positive");
  if (img.rows() % factor != 0 || img.cols() % factor != 0)
    fail(ErrorKind::InvalidArgument, "block_average: factor " + std::to_string(factor) + " does not divide " +
                                         std::to_string(img.rows()) + "x" + std::to_string(img.cols()));
  const std::size_t rows = img.rows() / factor;
  const std::size_t cols = img.cols() / factor;
  ImagePlane out(rows, cols);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < factor; ++i)
        for (std::size_t j = 0; j < factor; ++j) acc += img(r * factor + i, c * factor + j);
      out(r, c) = acc * inv;
    }
  return out;
}

ImagePlane upsample_replicate(const ImagePlane& img, std::size_t factor) {
  require(factor > 0, "upsample_replicate: factor must be positive");
  ImagePlane out(img.rows() * factor, img.cols() * factor);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = img(r / factor, c / factor);
  return out;
}

PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "flat") return PhantomKind::Flat;
  if (name == "quadrants") return PhantomKind::Quadrants;
  if (name == "disk") return PhantomKind::Disk;
  fail(ErrorKind::InvalidArgument, "unknown phantom '" + std::string(name) + "' (flat|quadrants|disk)");
}

std::string_view to_string(PhantomKind kind) noexcept {
  switch (kind) {
    case PhantomKind::Flat: return "flat";
    case PhantomKind::Quadrants: return "quadrants";
    case PhantomKind::Disk: return "disk";
  }
  return "?";
}

ImagePlane make_phantom(PhantomKind kind, std::size_t m, std::size_t n) {
  require(m >= 8 && n >= 8, "make_phantom: dimensions must be at least 8x8");
  ImagePlane img(m, n);
  switch (kind) {
    case PhantomKind::Flat:
      std::fill(img.storage().begin(), img.storage().end(), 0.5);
      break;
    case PhantomKind::Quadrants: {
      const std::size_t split_r = 3 * m / 7;
      const std::size_t split_c = 3 * n / 7;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          const int q = (r >= split_r ? 2 : 0) + (c >= split_c ? 1 : 0);
          img(r, c) = static_cast<double>(q) / 3.0;
        }
      break;
    }
    case PhantomKind::Disk: {
      const double radius = static_cast<double>(std::min(m, n)) / 4.0;
      const double cr = static_cast<double>(m) / 2.0;
      const double cc = static_cast<double>(n) / 2.0;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          const double dr = static_cast<double>(r) + 0.5 - cr;
          const double dc = static_cast<double>(c) + 0.5 - cc;
          img(r, c) = (dr * dr + dc * dc <= radius * radius) ? 1.0 : 0.0;
        }
      break;
    }
  }
  return img;
}

double sum(const RealGrid& g) noexcept { return std::accumulate(g.storage().begin(), g.storage().end(), 0.0); }

}  // namespace shiftcam
