#ifndef REBORN_DATA_HPP_
#define REBORN_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reborn/rng.hpp"
#include "reborn/tensor.hpp"

namespace reborn {

/// Loader failure, with the cause kept machine-readable.
class DataError : public std::runtime_error {
public:
	enum class Code { io, bad_magic, truncated, count_mismatch, label_out_of_range, bad_length, empty };

	DataError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
	Code code() const { return code_; }

private:
	Code code_;
};

/// Images (N, C, H, W) with pixels in [0, 1] and one label per image.
struct Dataset {
	Tensor<float> images;
	std::vector<int> labels;
	int num_classes = 10;
	std::string name;

	Index size() const { return static_cast<Index>(labels.size()); }
	/// First `count` samples (or all, if fewer).
	Dataset head(Index count) const;
};

/// IDX image file (magic 0x00000803) plus IDX label file (magic 0x00000801).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
		int num_classes = 10, const std::string& name = "idx");

/// Writes `images` (values in [0,1], rounded to bytes) and labels as IDX files.
void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
		const Dataset& data);

inline constexpr Index kCifarRecordBytes = 1 + 3 * 32 * 32;

/// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes (R, G, B planes).
Dataset load_cifar10(std::span<const std::filesystem::path> batch_files, const std::string& name = "cifar10");

/**
 * Ten-class synthetic set: each class lights a distinct 6x6 block on a noisy
 * background. Deterministic in `seed`.
 */
Dataset make_synthetic(Index count, std::uint64_t seed, Index channels = 1, Index size = 28);

/// Zero-pad, random crop back to size, random horizontal flip.
struct AugmentPolicy {
	Index pad = 4;
	double hflip_prob = 0.5;
	bool enabled = true;
};

/**
 * Shifts one image so that output(h, w) = padded(h + offset_h, w + offset_w),
 * where `padded` is the image with `pad` zeros on each side, then mirrors
 * horizontally when `flip` is set. offset (pad, pad) without flip is the identity.
 */
template<typename Scalar>
void crop_flip_image(const Scalar* src, Scalar* dst, Index channels, Index height, Index width, Index pad,
		Index offset_h, Index offset_w, bool flip);

/// Applies `policy` to every image of a rank-4 batch, drawing offsets and flips from `rng`.
template<typename Scalar>
Tensor<Scalar> augment(const Tensor<Scalar>& batch, const AugmentPolicy& policy, Rng& rng);

/**
 * Minibatch index lists for one epoch. The permutation is a Fisher-Yates
 * shuffle driven by Rng(shuffle_seed).derive(epoch); the final partial batch
 * is kept.
 */
std::vector<std::vector<Index>> batches(Index count, Index batch_size, std::uint64_t shuffle_seed, int epoch);

/// Sequential (unshuffled) batches, used for evaluation.
std::vector<std::vector<Index>> sequential_batches(Index count, Index batch_size);

template<typename Scalar>
struct Batch {
	Tensor<Scalar> images;
	std::vector<int> labels;
};

template<typename Scalar>
Batch<Scalar> gather(const Dataset& data, std::span<const Index> indices);

} // namespace reborn

#endif // REBORN_DATA_HPP_
