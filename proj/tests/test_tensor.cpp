#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "reborn/tensor.hpp"
#include "reborn/tensor_io.hpp"

using namespace reborn;

TEST_CASE("elementwise ops") {
	const Tensor<double> a(Shape{3}, {1, -2, 0});
	const Tensor<double> n = negate(a);
	CHECK(n[0] == -1);
	CHECK(n[1] == 2);
	CHECK(n[2] == 0);

	const Tensor<double> r = max_with_zero(Tensor<double>(Shape{3}, {-1.5, 0, 2}));
	CHECK(r[0] == 0);
	CHECK(r[1] == 0);
	CHECK(r[2] == 2);

	const Tensor<double> s = add(Tensor<double>(Shape{2}, {1, 2}), Tensor<double>(Shape{2}, {3, 4}));
	CHECK(s[0] == 4);
	CHECK(s[1] == 6);

	CHECK_THROWS_AS(add(Tensor<double>(Shape{2}), Tensor<double>(Shape{3})), ShapeError);
}

TEST_CASE("shape validation") {
	CHECK_THROWS_AS(Shape({1, 0, 2, 2}), ShapeError);
	CHECK_THROWS_AS(Shape({1, 1, 1, 1, 1}), ShapeError);
	CHECK(Shape({1, 4, 8, 8}).str() == "(1,4,8,8)");
	CHECK_THROWS_AS(Tensor<float>(Shape{2}, {1.f, 2.f, 3.f}), ShapeError);
}

TEST_CASE("concat and slice channels") {
	Rng rng(1);
	const auto a = oracle::random_tensor<double>(Shape{1, 4, 8, 8}, rng);
	const auto b = oracle::random_tensor<double>(Shape{1, 4, 8, 8}, rng);
	const auto ab = concat_channels<double>({a, b});
	CHECK(ab.shape() == Shape({1, 8, 8, 8}));

	const auto back = slice_channels(ab, 0, 4);
	CHECK(back.shape() == a.shape());
	CHECK(back.vec() == a.vec());
	CHECK(slice_channels(ab, 4, 8).vec() == b.vec());

	const auto single = concat_channels<double>({a});
	CHECK(single.vec() == a.vec());

	// batch > 1: each sample's slabs stay together
	const auto x = oracle::random_tensor<double>(Shape{2, 1, 2, 2}, rng);
	const auto y = oracle::random_tensor<double>(Shape{2, 3, 2, 2}, rng);
	const auto xy = concat_channels<double>({x, y});
	CHECK(xy(1, 0, 1, 0) == x(1, 0, 1, 0));
	CHECK(xy(1, 3, 0, 1) == y(1, 2, 0, 1));

	CHECK_THROWS_AS(concat_channels<double>({x, Tensor<double>(Shape{1, 1, 2, 2})}), ShapeError);
}

TEST_CASE("channel statistics") {
	const Tensor<double> seven(Shape{2, 3, 2, 2}, 7.0);
	const auto m = channel_mean(seven);
	const auto v = channel_var(seven);
	for (Index c = 0; c < 3; ++c) {
		CHECK(m[c] == doctest::Approx(7.0));
		CHECK(v[c] == doctest::Approx(0.0));
	}

	const Tensor<double> x(Shape{2, 1, 1, 1}, {1, 3});
	CHECK(channel_mean(x)[0] == 2.0);
	CHECK(channel_var(x)[0] == 1.0);    // biased: ((1-2)^2 + (3-2)^2) / 2
}

TEST_CASE("tensor text round trip") {
	Rng rng(7);
	const auto t = oracle::random_tensor<double>(Shape{2, 3, 4, 5}, rng, -1e3, 1e3);
	std::stringstream ss;
	write_tensor(ss, t);
	const auto back = read_tensor<double>(ss);
	CHECK(back.shape() == t.shape());
	CHECK(back.vec() == t.vec());

	std::stringstream bad("2\n3 4\n1\n2\n");
	CHECK_THROWS_AS(read_tensor<double>(bad), FormatError);
}
