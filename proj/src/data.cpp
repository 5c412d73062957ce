#include "reborn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace reborn {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw DataError(DataError::Code::io, "cannot open " + path.string());
	return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
	if (offset + 4 > bytes.size())
		throw DataError(DataError::Code::truncated, path.string() + ": truncated IDX header");
	return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
			(std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void put_be32(std::ofstream& os, std::uint32_t v) {
	const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
	os.write(b, 4);
}

void check_label(int label, int num_classes, const std::string& where) {
	if (label < 0 || label >= num_classes)
		throw DataError(DataError::Code::label_out_of_range,
				where + ": label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) + ")");
}

} // namespace

Dataset Dataset::head(Index count) const {
	const Index n = std::min(count, size());
	if (n < 1) throw DataError(DataError::Code::empty, "dataset subset would be empty");
	const Shape& s = images.shape();
	const Index per = s.c() * s.h() * s.w();
	Dataset out;
	out.images = Tensor<float>(Shape{n, s.c(), s.h(), s.w()});
	std::memcpy(out.images.data(), images.data(), static_cast<std::size_t>(n * per) * sizeof(float));
	out.labels.assign(labels.begin(), labels.begin() + n);
	out.num_classes = num_classes;
	out.name = name;
	return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
		int num_classes, const std::string& name) {
	const auto img = read_file(images_path);
	const auto lab = read_file(labels_path);

	if (read_be32(img, 0, images_path) != kIdxImagesMagic)
		throw DataError(DataError::Code::bad_magic, images_path.string() + ": not an IDX image file (bad magic)");
	if (read_be32(lab, 0, labels_path) != kIdxLabelsMagic)
		throw DataError(DataError::Code::bad_magic, labels_path.string() + ": not an IDX label file (bad magic)");

	const std::uint32_t n = read_be32(img, 4, images_path);
	const std::uint32_t rows = read_be32(img, 8, images_path);
	const std::uint32_t cols = read_be32(img, 12, images_path);
	const std::uint32_t n_labels = read_be32(lab, 4, labels_path);
	if (n != n_labels)
		throw DataError(DataError::Code::count_mismatch, "IDX count mismatch: " + std::to_string(n) + " images vs " +
				std::to_string(n_labels) + " labels");
	if (n == 0 || rows == 0 || cols == 0) throw DataError(DataError::Code::empty, images_path.string() + ": empty IDX file");

	const std::size_t pixels = std::size_t(n) * rows * cols;
	if (img.size() < 16 + pixels)
		throw DataError(DataError::Code::truncated, images_path.string() + ": truncated pixel data");
	if (lab.size() < 8 + std::size_t(n))
		throw DataError(DataError::Code::truncated, labels_path.string() + ": truncated label data");

	Dataset d;
	d.name = name;
	d.num_classes = num_classes;
	d.images = Tensor<float>(Shape{Index(n), 1, Index(rows), Index(cols)});
	for (std::size_t i = 0; i < pixels; ++i) d.images[Index(i)] = static_cast<float>(img[16 + i]) / 255.0f;
	d.labels.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		d.labels[i] = lab[8 + i];
		check_label(d.labels[i], num_classes, labels_path.string());
	}
	return d;
}

void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, const Dataset& data) {
	const Shape& s = data.images.shape();
	require_rank4(s, "write_idx");
	if (s.c() != 1) throw ShapeError("write_idx: IDX images are single-channel, got " + s.str());
	std::ofstream img(images_path, std::ios::binary);
	std::ofstream lab(labels_path, std::ios::binary);
	if (!img || !lab) throw DataError(DataError::Code::io, "cannot open IDX output files");
	put_be32(img, kIdxImagesMagic);
	put_be32(img, std::uint32_t(s.n()));
	put_be32(img, std::uint32_t(s.h()));
	put_be32(img, std::uint32_t(s.w()));
	for (float v : data.images.values()) {
		const long b = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
		img.put(static_cast<char>(b));
	}
	put_be32(lab, kIdxLabelsMagic);
	put_be32(lab, std::uint32_t(data.labels.size()));
	for (int l : data.labels) lab.put(static_cast<char>(l));
}

Dataset load_cifar10(std::span<const std::filesystem::path> batch_files, const std::string& name) {
	std::vector<std::vector<std::uint8_t>> blobs;
	Index total = 0;
	for (const auto& path : batch_files) {
		auto bytes = read_file(path);
		if (bytes.empty()) throw DataError(DataError::Code::empty, path.string() + ": empty CIFAR-10 batch");
		if (bytes.size() % std::size_t(kCifarRecordBytes) != 0)
			throw DataError(DataError::Code::bad_length, path.string() + ": length " + std::to_string(bytes.size()) +
					" is not a multiple of " + std::to_string(kCifarRecordBytes));
		total += Index(bytes.size()) / kCifarRecordBytes;
		blobs.push_back(std::move(bytes));
	}
	if (total == 0) throw DataError(DataError::Code::empty, "no CIFAR-10 batch files given");

	Dataset d;
	d.name = name;
	d.num_classes = 10;
	d.images = Tensor<float>(Shape{total, 3, 32, 32});
	d.labels.reserve(std::size_t(total));
	Index n = 0;
	for (std::size_t f = 0; f < blobs.size(); ++f) {
		const auto& bytes = blobs[f];
		for (std::size_t off = 0; off < bytes.size(); off += std::size_t(kCifarRecordBytes), ++n) {
			d.labels.push_back(bytes[off]);
			check_label(d.labels.back(), 10, batch_files[f].string());
			float* dst = d.images.data() + n * (kCifarRecordBytes - 1);
			for (Index i = 0; i < kCifarRecordBytes - 1; ++i) dst[i] = static_cast<float>(bytes[off + 1 + std::size_t(i)]) / 255.0f;
		}
	}
	return d;
}

Dataset make_synthetic(Index count, std::uint64_t seed, Index channels, Index size) {
	if (count < 1) throw DataError(DataError::Code::empty, "synthetic dataset needs count >= 1");
	if (size < 16) throw std::invalid_argument("synthetic dataset needs size >= 16");
	Rng rng = Rng(seed).derive("synthetic");
	Dataset d;
	d.name = "synthetic";
	d.num_classes = 10;
	d.images = Tensor<float>(Shape{count, channels, size, size});
	d.labels.resize(std::size_t(count));
	const Index block = 6;
	const Index row_step = (size - block) / 1;
	for (Index n = 0; n < count; ++n) {
		const int label = static_cast<int>(n % 10);
		d.labels[std::size_t(n)] = label;
		const Index top = (label / 5) * (row_step / 2) + 1;
		const Index left = (label % 5) * ((size - block) / 4);
		for (Index c = 0; c < channels; ++c)
			for (Index h = 0; h < size; ++h)
				for (Index w = 0; w < size; ++w) {
					const bool lit = h >= top && h < top + block && w >= left && w < left + block;
					const double noise = rng.uniform(0.0, 0.3);
					d.images(n, c, h, w) = static_cast<float>(lit ? 1.0 - noise : noise);
				}
	}
	return d;
}

template<typename Scalar>
void crop_flip_image(const Scalar* src, Scalar* dst, Index channels, Index height, Index width, Index pad,
		Index offset_h, Index offset_w, bool flip) {
	for (Index c = 0; c < channels; ++c)
		for (Index h = 0; h < height; ++h) {
			const Index sh = h + offset_h - pad;
			Scalar* row = dst + (c * height + h) * width;
			for (Index w = 0; w < width; ++w) {
				const Index sw = w + offset_w - pad;
				const Scalar v = (sh >= 0 && sh < height && sw >= 0 && sw < width) ? src[(c * height + sh) * width + sw]
						: Scalar(0);
				row[flip ? width - 1 - w : w] = v;
			}
		}
}

template<typename Scalar>
Tensor<Scalar> augment(const Tensor<Scalar>& batch, const AugmentPolicy& policy, Rng& rng) {
	if (!policy.enabled) return batch;
	const Shape& s = batch.shape();
	require_rank4(s, "augment");
	Tensor<Scalar> out(s);
	const Index per = s.c() * s.h() * s.w();
	for (Index n = 0; n < s.n(); ++n) {
		const Index oh = Index(rng.below(std::uint64_t(2 * policy.pad + 1)));
		const Index ow = Index(rng.below(std::uint64_t(2 * policy.pad + 1)));
		const bool flip = rng.bernoulli(policy.hflip_prob);
		crop_flip_image(batch.data() + n * per, out.data() + n * per, s.c(), s.h(), s.w(), policy.pad, oh, ow, flip);
	}
	return out;
}

std::vector<std::vector<Index>> batches(Index count, Index batch_size, std::uint64_t shuffle_seed, int epoch) {
	if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
	std::vector<Index> order(static_cast<std::size_t>(count));
	std::iota(order.begin(), order.end(), Index(0));
	Rng rng = Rng(shuffle_seed).derive(std::uint64_t(epoch));
	for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
	std::vector<std::vector<Index>> out;
	for (std::size_t start = 0; start < order.size(); start += std::size_t(batch_size)) {
		const std::size_t end = std::min(order.size(), start + std::size_t(batch_size));
		out.emplace_back(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
	}
	return out;
}

std::vector<std::vector<Index>> sequential_batches(Index count, Index batch_size) {
	if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
	std::vector<std::vector<Index>> out;
	for (Index start = 0; start < count; start += batch_size) {
		std::vector<Index> b;
		for (Index i = start; i < std::min(count, start + batch_size); ++i) b.push_back(i);
		out.push_back(std::move(b));
	}
	return out;
}

template<typename Scalar>
Batch<Scalar> gather(const Dataset& data, std::span<const Index> indices) {
	const Shape& s = data.images.shape();
	const Index per = s.c() * s.h() * s.w();
	Batch<Scalar> b{Tensor<Scalar>(Shape{Index(indices.size()), s.c(), s.h(), s.w()}), {}};
	b.labels.reserve(indices.size());
	for (std::size_t i = 0; i < indices.size(); ++i) {
		const float* src = data.images.data() + indices[i] * per;
		Scalar* dst = b.images.data() + Index(i) * per;
		for (Index j = 0; j < per; ++j) dst[j] = static_cast<Scalar>(src[j]);
		b.labels.push_back(data.labels[std::size_t(indices[i])]);
	}
	return b;
}

#define REBORN_INSTANTIATE(T) \
	template void crop_flip_image<T>(const T*, T*, Index, Index, Index, Index, Index, Index, bool); \
	template Tensor<T> augment<T>(const Tensor<T>&, const AugmentPolicy&, Rng&); \
	template Batch<T> gather<T>(const Dataset&, std::span<const Index>);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
