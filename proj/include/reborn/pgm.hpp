#ifndef REBORN_PGM_HPP_
#define REBORN_PGM_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reborn/tensor.hpp"

namespace reborn {

/// 8-bit gray image as stored in a binary PGM (P5) file.
struct GrayImage {
	Index width = 0, height = 0;
	int maxval = 255;
	std::vector<std::uint8_t> pixels;   // row-major, height * width
};

/// Writes `P5\n<w> <h>\n255\n` followed by the raw bytes.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Reads a binary PGM with maxval <= 255; comments in the header are skipped.
GrayImage read_pgm(const std::filesystem::path& path);

/**
 * Renders one feature map with zero as white and larger magnitudes darker:
 * gray = 255 - round(255 * |v| / max|v|). An all-zero map is all white.
 */
template<typename Scalar>
GrayImage feature_map_to_gray(const Scalar* values, Index height, Index width);

} // namespace reborn

#endif // REBORN_PGM_HPP_
