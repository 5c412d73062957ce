#include "reborn/pgm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "reborn/tensor_io.hpp"

namespace reborn {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
	std::string tok;
	for (;;) {
		int ch = is.get();
		if (ch == EOF) throw FormatError("truncated PGM header");
		if (ch == '#') {
			while (ch != '\n' && ch != EOF) ch = is.get();
			continue;
		}
		if (std::isspace(ch)) {
			if (!tok.empty()) return tok;
			continue;
		}
		tok.push_back(static_cast<char>(ch));
	}
}

long header_number(std::istream& is, const char* what) {
	const std::string tok = header_token(is);
	try {
		std::size_t used = 0;
		const long v = std::stol(tok, &used);
		if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
		return v;
	} catch (const std::exception&) {
		throw FormatError(std::string("bad PGM ") + what + ": '" + tok + "'");
	}
}

} // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
	if (Index(image.pixels.size()) != image.width * image.height)
		throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
	std::ofstream os(path, std::ios::binary);
	if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
	os << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
	os.write(reinterpret_cast<const char*>(image.pixels.data()), std::streamsize(image.pixels.size()));
}

GrayImage read_pgm(const std::filesystem::path& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw std::runtime_error("cannot open " + path.string());
	if (header_token(is) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
	GrayImage img;
	img.width = header_number(is, "width");
	img.height = header_number(is, "height");
	img.maxval = static_cast<int>(header_number(is, "maxval"));
	if (img.maxval > 255) throw FormatError(path.string() + ": 16-bit PGM not supported");
	img.pixels.resize(std::size_t(img.width * img.height));
	is.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
	if (is.gcount() != std::streamsize(img.pixels.size())) throw FormatError(path.string() + ": truncated PGM data");
	return img;
}

template<typename Scalar>
GrayImage feature_map_to_gray(const Scalar* values, Index height, Index width) {
	GrayImage img;
	img.width = width;
	img.height = height;
	img.pixels.assign(std::size_t(width * height), 255);
	double peak = 0;
	for (Index i = 0; i < width * height; ++i) peak = std::max(peak, std::abs(double(values[i])));
	if (peak == 0) return img;
	for (Index i = 0; i < width * height; ++i)
		img.pixels[std::size_t(i)] =
				static_cast<std::uint8_t>(255 - std::lround(255.0 * std::abs(double(values[i])) / peak));
	return img;
}

template GrayImage feature_map_to_gray<float>(const float*, Index, Index);
template GrayImage feature_map_to_gray<double>(const double*, Index, Index);

} // namespace reborn
