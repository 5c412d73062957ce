#include <doctest.h>

#include <cmath>

#include "reborn/optim.hpp"

using namespace reborn;

namespace {

struct Scalar1 {
	Tensor<double> w{Shape{1}}, g{Shape{1}};
	ParamList<double> params(ParamKind kind = ParamKind::conv_weight) { return {{"w", &w, &g, kind}}; }
};

} // namespace

TEST_CASE("xavier uniform") {
	CHECK(xavier_bound(288, 576) == doctest::Approx(std::sqrt(6.0 / 864.0)));
	CHECK(xavier_bound(288, 576) == doctest::Approx(0.08333).epsilon(1e-4));

	Rng rng(1);
	const Index n = 20000;
	const auto t = xavier_uniform<double>(Shape{n}, 288, 576, rng);
	const double a = xavier_bound(288, 576);
	double mean = 0;
	for (Index i = 0; i < n; ++i) {
		CHECK(std::abs(t[i]) <= a);
		mean += t[i] / double(n);
	}
	CHECK(std::abs(mean) < 3 * a / std::sqrt(3.0 * double(n)));

	Rng r1(9), r2(9);
	Tensor<float> w1(Shape{8, 4, 3, 3}), w2(Shape{8, 4, 3, 3});
	xavier_conv_(w1, r1);
	xavier_conv_(w2, r2);
	CHECK(w1.vec() == w2.vec());
	// conv (Co,Ci,k,k): fan_in Ci*9, fan_out Co*9
	for (Index i = 0; i < w1.size(); ++i) CHECK(std::abs(w1[i]) <= float(xavier_bound(36, 72)));
}

TEST_CASE("sgd closed forms") {
	SUBCASE("first step") {
		Scalar1 p;
		p.w[0] = 1;
		p.g[0] = 0.5;
		Sgd<double> sgd(p.params(), {0.1, 0.9, 0.0, true});
		sgd.step();
		CHECK(p.w[0] == doctest::Approx(0.95));
		CHECK(sgd.state()[0].second[0] == doctest::Approx(0.5));
		CHECK(sgd.state()[0].first == "velocity.w");
		CHECK(p.g[0] == 0);    // gradients are cleared after the step
	}
	SUBCASE("decay only") {
		Scalar1 p;
		p.w[0] = 2;
		Sgd<double> sgd(p.params(), {0.1, 0.9, 0.0005, true});
		sgd.step();
		CHECK(p.w[0] == doctest::Approx(2 - 0.1 * 0.0005 * 2));
	}
	SUBCASE("two steps accumulate") {
		Scalar1 p;
		p.w[0] = 1;
		Sgd<double> sgd(p.params(), {0.1, 0.9, 0.0, true});
		p.g[0] = 0.5;
		sgd.step();
		p.g[0] = 0.5;
		sgd.step();
		CHECK(p.w[0] == doctest::Approx(1 - 0.1 * (0.5 + 1.9 * 0.5)));
	}
	SUBCASE("norm parameters can be exempt from decay") {
		Scalar1 p;
		p.w[0] = 2;
		Sgd<double> sgd(p.params(ParamKind::norm_affine), {0.1, 0.9, 0.5, false});
		sgd.step();
		CHECK(p.w[0] == 2);
	}
	SUBCASE("state round trip") {
		Scalar1 p;
		p.g[0] = 1;
		Sgd<double> a(p.params(), {0.1, 0.9, 0.0, true});
		a.step();
		Sgd<double> b(p.params(), {0.1, 0.9, 0.0, true});
		b.load_state(a.state());
		CHECK(b.state()[0].second[0] == a.state()[0].second[0]);
	}
}

TEST_CASE("learning rate schedule") {
	const LrSchedule s160{0.001, 0.0001, 160};
	CHECK(s160.lr_at_epoch(0) == 0.001);
	CHECK(s160.lr_at_epoch(79) == 0.001);
	CHECK(s160.lr_at_epoch(80) == 0.0001);
	CHECK(s160.lr_at_epoch(159) == 0.0001);
	CHECK_THROWS_AS(s160.lr_at_epoch(160), std::out_of_range);

	const LrSchedule s80{0.001, 0.0001, 80};
	CHECK(s80.lr_at_epoch(39) == 0.001);
	CHECK(s80.lr_at_epoch(40) == 0.0001);

	const LrSchedule s2{0.001, 0.0001, 2};
	CHECK(s2.lr_at_epoch(0) == 0.001);
	CHECK(s2.lr_at_epoch(1) == 0.0001);
}
