#include "reborn/tensor.hpp"

#include <cstring>

namespace reborn {

Shape::Shape(std::initializer_list<Index> extents)
	: Shape(std::span<const Index>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const Index> extents) {
	if (extents.empty() || extents.size() > 4)
		throw ShapeError("tensor rank must be between 1 and 4, got " + std::to_string(extents.size()));
	for (std::size_t i = 0; i < extents.size(); ++i) {
		if (extents[i] < 1)
			throw ShapeError("tensor extents must be >= 1, got " + std::to_string(extents[i]) +
					" on axis " + std::to_string(i));
		extents_[i] = extents[i];
	}
	rank_ = static_cast<int>(extents.size());
}

Index Shape::size() const {
	if (rank_ == 0) return 0;
	Index n = 1;
	for (int i = 0; i < rank_; ++i) n *= extents_[static_cast<std::size_t>(i)];
	return n;
}

std::string Shape::str() const {
	std::string s = "(";
	for (int i = 0; i < rank_; ++i) {
		if (i) s += ",";
		s += std::to_string(extents_[static_cast<std::size_t>(i)]);
	}
	return s + ")";
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
	if (!(a == b))
		throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

void require_rank4(const Shape& s, const char* op) {
	if (s.rank() != 4)
		throw ShapeError(std::string(op) + ": expected a rank-4 (N,C,H,W) tensor, got " + s.str());
}

template<typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> parts) {
	if (parts.empty()) throw ShapeError("concat_channels: no parts");
	const Shape& first = parts.front().shape();
	require_rank4(first, "concat_channels");
	Index channels = 0;
	for (const auto& p : parts) {
		require_rank4(p.shape(), "concat_channels");
		if (p.shape().n() != first.n() || p.shape().h() != first.h() || p.shape().w() != first.w())
			throw ShapeError("concat_channels: N/H/W mismatch " + first.str() + " vs " + p.shape().str());
		channels += p.shape().c();
	}
	Tensor<Scalar> out(Shape{first.n(), channels, first.h(), first.w()});
	const Index plane = first.h() * first.w();
	for (Index n = 0; n < first.n(); ++n) {
		Scalar* dst = out.data() + n * channels * plane;
		for (const auto& p : parts) {
			const Index slab = p.shape().c() * plane;
			std::memcpy(dst, p.data() + n * slab, static_cast<std::size_t>(slab) * sizeof(Scalar));
			dst += slab;
		}
	}
	return out;
}

template<typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index begin, Index end) {
	require_rank4(x.shape(), "slice_channels");
	const Shape& s = x.shape();
	if (begin < 0 || end > s.c() || begin >= end)
		throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
				") invalid for " + s.str());
	Tensor<Scalar> out(Shape{s.n(), end - begin, s.h(), s.w()});
	const Index plane = s.h() * s.w();
	const Index slab = (end - begin) * plane;
	for (Index n = 0; n < s.n(); ++n)
		std::memcpy(out.data() + n * slab, x.data() + (n * s.c() + begin) * plane,
				static_cast<std::size_t>(slab) * sizeof(Scalar));
	return out;
}

template<typename Scalar>
Scalar sum(const Tensor<Scalar>& x) {
	Scalar acc = 0;
	for (Scalar v : x.values()) acc += v;
	return acc;
}

template<typename Scalar>
Scalar mean(const Tensor<Scalar>& x) {
	if (x.size() == 0) throw ShapeError("mean of an empty tensor");
	return sum(x) / static_cast<Scalar>(x.size());
}

template<typename Scalar>
Tensor<Scalar> channel_mean(const Tensor<Scalar>& x) {
	require_rank4(x.shape(), "channel_mean");
	const Shape& s = x.shape();
	const Index plane = s.h() * s.w();
	Tensor<Scalar> out(Shape{s.c()});
	for (Index c = 0; c < s.c(); ++c) {
		Scalar acc = 0;
		for (Index n = 0; n < s.n(); ++n) {
			const Scalar* p = x.data() + (n * s.c() + c) * plane;
			for (Index i = 0; i < plane; ++i) acc += p[i];
		}
		out[c] = acc / static_cast<Scalar>(s.n() * plane);
	}
	return out;
}

template<typename Scalar>
Tensor<Scalar> channel_var(const Tensor<Scalar>& x) {
	const Tensor<Scalar> mu = channel_mean(x);
	const Shape& s = x.shape();
	const Index plane = s.h() * s.w();
	Tensor<Scalar> out(Shape{s.c()});
	for (Index c = 0; c < s.c(); ++c) {
		Scalar acc = 0;
		for (Index n = 0; n < s.n(); ++n) {
			const Scalar* p = x.data() + (n * s.c() + c) * plane;
			for (Index i = 0; i < plane; ++i) {
				const Scalar d = p[i] - mu[c];
				acc += d * d;
			}
		}
		out[c] = acc / static_cast<Scalar>(s.n() * plane);
	}
	return out;
}

template<typename Scalar>
std::vector<Index> argmax_rows(const Tensor<Scalar>& x) {
	if (x.shape().rank() != 2) throw ShapeError("argmax_rows: expected rank 2, got " + x.shape().str());
	const Index rows = x.shape()[0], cols = x.shape()[1];
	std::vector<Index> out(static_cast<std::size_t>(rows));
	for (Index r = 0; r < rows; ++r) {
		Index best = 0;
		for (Index c = 1; c < cols; ++c)
			if (x(r, c) > x(r, best)) best = c;
		out[static_cast<std::size_t>(r)] = best;
	}
	return out;
}

template<typename Scalar>
Scalar dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
	require_same_shape(a.shape(), b.shape(), "dot");
	Scalar acc = 0;
	for (Index i = 0; i < a.size(); ++i) acc += a[i] * b[i];
	return acc;
}

#define REBORN_INSTANTIATE(T) \
	template class Tensor<T>; \
	template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>); \
	template Tensor<T> slice_channels<T>(const Tensor<T>&, Index, Index); \
	template T sum<T>(const Tensor<T>&); \
	template T mean<T>(const Tensor<T>&); \
	template Tensor<T> channel_mean<T>(const Tensor<T>&); \
	template Tensor<T> channel_var<T>(const Tensor<T>&); \
	template std::vector<Index> argmax_rows<T>(const Tensor<T>&); \
	template T dot<T>(const Tensor<T>&, const Tensor<T>&);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
