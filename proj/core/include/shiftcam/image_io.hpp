#pragma once

#include <filesystem>
#include <string_view>

#include "shiftcam/grid.hpp"

namespace shiftcam {

/// Loads an 8-bit grayscale PGM (P5, maxval 255) or PNG; values are byte/255.
/// Anything else (16-bit, color, palette, alpha) is rejected, never converted.
ImagePlane load_image(const std::filesystem::path& path);

/// Clamps to [0, 1], scales by 255, rounds half away from zero, writes 8-bit
/// grayscale. Format follows the extension: `.png`, otherwise PGM.
void save_image(const ImagePlane& img, const std::filesystem::path& path);

/// Mean over disjoint factor x factor blocks.
ImagePlane block_average(const ImagePlane& img, std::size_t factor);

/// Pixel replication; the inverse layout of block_average.
ImagePlane upsample_replicate(const ImagePlane& img, std::size_t factor);

enum class PhantomKind { Flat, Quadrants, Disk };

PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind) noexcept;

/// Piecewise-constant test targets.
///  - Flat: 0.5 everywhere.
///  - Quadrants: rows split at floor(3m/7), cols at floor(3n/7); values
///    0, 1/3, 2/3, 1 (top-left, top-right, bottom-left, bottom-right). The
///    split is deliberately off the 2^k grid so block averaging never
///    reproduces the edges exactly.
///  - Disk: 1 where the pixel center lies within min(m,n)/4 of the image
///    center, else 0.
ImagePlane make_phantom(PhantomKind kind, std::size_t m, std::size_t n);

double sum(const RealGrid& g) noexcept;

}  // namespace shiftcam
