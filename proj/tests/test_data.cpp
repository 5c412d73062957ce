#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "reborn/data.hpp"

using namespace reborn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
	const fs::path dir = fs::temp_directory_path() / "reborn_test_data";
	fs::create_directories(dir);
	return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
	std::ofstream os(p, std::ios::binary);
	os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

DataError::Code idx_error(const std::vector<unsigned char>& images, const std::vector<unsigned char>& labels) {
	write_bytes(scratch("e-images"), images);
	write_bytes(scratch("e-labels"), labels);
	try {
		load_idx(scratch("e-images"), scratch("e-labels"));
	} catch (const DataError& e) {
		return e.code();
	}
	FAIL("no error raised");
	return DataError::Code::io;
}

const std::vector<unsigned char> kImages = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 1, 2, 3, 255, 128, 64, 32};
const std::vector<unsigned char> kLabels = {0, 0, 8, 1, 0, 0, 0, 2, 3, 9};

} // namespace

TEST_CASE("idx loader") {
	write_bytes(scratch("images"), kImages);
	write_bytes(scratch("labels"), kLabels);
	const Dataset d = load_idx(scratch("images"), scratch("labels"));
	CHECK(d.images.shape() == Shape({2, 1, 2, 2}));
	CHECK(d.images[0] == 0.0f);
	CHECK(d.images[1] == 1.0f / 255.0f);
	CHECK(d.images[3] == 3.0f / 255.0f);
	CHECK(d.images[4] == 1.0f);
	CHECK(d.labels == std::vector<int>{3, 9});

	SUBCASE("write and read back") {
		write_idx(scratch("rt-images"), scratch("rt-labels"), d);
		const Dataset back = load_idx(scratch("rt-images"), scratch("rt-labels"));
		CHECK(back.images.vec() == d.images.vec());
		CHECK(back.labels == d.labels);
	}
	SUBCASE("errors") {
		auto bad_label = kLabels;
		bad_label[9] = 10;
		CHECK(idx_error(kImages, bad_label) == DataError::Code::label_out_of_range);
		auto bad_magic = kImages;
		bad_magic[3] = 1;
		CHECK(idx_error(bad_magic, kLabels) == DataError::Code::bad_magic);
		CHECK(idx_error({kImages.begin(), kImages.end() - 1}, kLabels) == DataError::Code::truncated);
		auto three = kLabels;
		three[7] = 3;
		three.push_back(1);
		CHECK(idx_error(kImages, three) == DataError::Code::count_mismatch);
		CHECK_THROWS_AS(load_idx(scratch("missing"), scratch("labels")), DataError);
	}
}

TEST_CASE("cifar loader") {
	std::vector<unsigned char> record(static_cast<std::size_t>(kCifarRecordBytes));
	record[0] = 7;
	for (std::size_t i = 1; i < record.size(); ++i) record[i] = static_cast<unsigned char>((i * 7) % 256);
	write_bytes(scratch("one.bin"), record);
	const fs::path one = scratch("one.bin");
	const Dataset d = load_cifar10(std::span(&one, 1));
	CHECK(d.images.shape() == Shape({1, 3, 32, 32}));
	CHECK(d.labels == std::vector<int>{7});
	// green plane starts at byte 1 + 1024
	CHECK(d.images(0, 1, 0, 0) == float((1025 * 7) % 256) / 255.0f);
	CHECK(d.images(0, 2, 31, 31) == float((3072 * 7) % 256) / 255.0f);

	auto code_of = [](const std::vector<unsigned char>& bytes) {
		write_bytes(scratch("bad.bin"), bytes);
		const fs::path p = scratch("bad.bin");
		try {
			load_cifar10(std::span(&p, 1));
		} catch (const DataError& e) {
			return e.code();
		}
		return DataError::Code::io;
	};
	CHECK(code_of({}) == DataError::Code::empty);
	CHECK(code_of(std::vector<unsigned char>(3000)) == DataError::Code::bad_length);
	record[0] = 10;
	CHECK(code_of(record) == DataError::Code::label_out_of_range);
}

TEST_CASE("real dataset sizes") {
	const char* env = std::getenv("REBORN_DATA_DIR");
	if (!env) {
		MESSAGE("REBORN_DATA_DIR unset; skipping full-size checks");
		return;
	}
	const fs::path mnist = fs::path(env) / "mnist";
	if (fs::exists(mnist / "train-images-idx3-ubyte")) {
		CHECK(load_idx(mnist / "train-images-idx3-ubyte", mnist / "train-labels-idx1-ubyte").size() == 60000);
		CHECK(load_idx(mnist / "t10k-images-idx3-ubyte", mnist / "t10k-labels-idx1-ubyte").size() == 10000);
	}
	const fs::path test_batch = fs::path(env) / "cifar10" / "test_batch.bin";
	if (fs::exists(test_batch)) CHECK(load_cifar10(std::span(&test_batch, 1)).size() == 10000);
}

TEST_CASE("augmentation") {
	Rng rng(1);
	Tensor<float> x(Shape{2, 3, 8, 8});
	for (Index i = 0; i < x.size(); ++i) x[i] = float(rng.uniform());
	Tensor<float> y(Shape{1, 3, 8, 8}), z(Shape{1, 3, 8, 8});

	crop_flip_image(x.data(), y.data(), 3, 8, 8, 4, 4, 4, false);
	CHECK(std::equal(y.data(), y.data() + y.size(), x.data()));

	crop_flip_image(x.data(), y.data(), 3, 8, 8, 4, 4, 4, true);
	crop_flip_image(y.data(), z.data(), 3, 8, 8, 4, 4, 4, true);
	CHECK(std::equal(z.data(), z.data() + z.size(), x.data()));
	CHECK(y(0, 0, 0, 0) == x(0, 0, 0, 7));

	// shift by one row: the top row comes from the zero pad
	crop_flip_image(x.data(), y.data(), 3, 8, 8, 4, 3, 4, false);
	CHECK(y(0, 0, 0, 3) == 0.0f);
	CHECK(y(0, 0, 1, 3) == x(0, 0, 0, 3));

	AugmentPolicy policy;
	Rng a(42), b(42);
	CHECK(augment(x, policy, a).vec() == augment(x, policy, b).vec());
	policy.enabled = false;
	CHECK(augment(x, policy, a).vec() == x.vec());
}

TEST_CASE("minibatches") {
	const auto b = batches(10, 4, 7, 0);
	REQUIRE(b.size() == 3);
	CHECK(b[0].size() == 4);
	CHECK(b[1].size() == 4);
	CHECK(b[2].size() == 2);
	std::multiset<Index> seen;
	for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
	std::vector<Index> all(10);
	std::iota(all.begin(), all.end(), Index(0));
	CHECK(std::equal(seen.begin(), seen.end(), all.begin(), all.end()));

	CHECK(batches(10, 4, 7, 0) == b);
	CHECK(batches(100, 100, 7, 1) != batches(100, 100, 7, 2));
	CHECK(sequential_batches(5, 2).back() == std::vector<Index>{4});
}

TEST_CASE("synthetic data") {
	const Dataset a = make_synthetic(50, 3), b = make_synthetic(50, 3);
	CHECK(a.images.vec() == b.images.vec());
	CHECK(a.images.shape() == Shape({50, 1, 28, 28}));
	for (Index i = 0; i < 50; ++i) CHECK(a.labels[std::size_t(i)] == i % 10);
	CHECK(make_synthetic(4, 1, 3, 32).images.shape() == Shape({4, 3, 32, 32}));

	const auto batch = gather<double>(a, std::vector<Index>{3, 1});
	CHECK(batch.labels == std::vector<int>{3, 1});
	CHECK(batch.images[0] == double(a.images(3, 0, 0, 0)));
}
