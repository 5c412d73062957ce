#ifndef REBORN_TENSOR_HPP_
#define REBORN_TENSOR_HPP_

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

namespace reborn {

using Index = Eigen::Index;

/// Raised whenever tensor extents do not line up for an operation.
class ShapeError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/**
 * Extents of a dense tensor of rank 1 to 4. Rank-4 shapes are read as
 * (N, C, H, W). A default-constructed shape has rank 0 and denotes "no tensor".
 */
class Shape {
public:
	Shape() = default;
	Shape(std::initializer_list<Index> extents);
	explicit Shape(std::span<const Index> extents);

	int rank() const { return rank_; }
	Index operator[](int axis) const { return extents_[static_cast<std::size_t>(axis)]; }
	Index size() const;

	Index n() const { return extents_[0]; }
	Index c() const { return extents_[1]; }
	Index h() const { return extents_[2]; }
	Index w() const { return extents_[3]; }

	std::span<const Index> extents() const { return {extents_.data(), static_cast<std::size_t>(rank_)}; }
	std::string str() const;

	friend bool operator==(const Shape& a, const Shape& b) {
		return a.rank_ == b.rank_ && a.extents_ == b.extents_;
	}

private:
	std::array<Index, 4> extents_{};
	int rank_ = 0;
};

/// Throws ShapeError unless `a == b`, naming the operation and both shapes.
void require_same_shape(const Shape& a, const Shape& b, const char* op);
/// Throws ShapeError unless `s` has rank 4.
void require_rank4(const Shape& s, const char* op);

/**
 * Dense row-major tensor. Storage is an Eigen column vector so whole-tensor
 * arithmetic can be written as Eigen array expressions, and images can be
 * viewed in place as (C, H*W) row-major matrices for GEMM-based kernels.
 */
template<typename Scalar>
class Tensor {
	static_assert(std::is_floating_point_v<Scalar>, "non floating-point scalar type");
public:
	using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
	using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
	using MatrixMap = Eigen::Map<RowMatrix>;
	using ConstMatrixMap = Eigen::Map<const RowMatrix>;

	Tensor() = default;
	explicit Tensor(const Shape& shape, Scalar fill = Scalar(0))
		: shape_(shape), data_(Vector::Constant(shape.size(), fill)) {}
	Tensor(const Shape& shape, Vector data) : shape_(shape), data_(std::move(data)) {
		if (data_.size() != shape_.size())
			throw ShapeError("tensor buffer of length " + std::to_string(data_.size()) +
					" does not match shape " + shape_.str());
	}
	Tensor(const Shape& shape, std::initializer_list<Scalar> values) : shape_(shape), data_(shape.size()) {
		if (static_cast<Index>(values.size()) != shape_.size())
			throw ShapeError("initializer of length " + std::to_string(values.size()) +
					" does not match shape " + shape_.str());
		Index i = 0;
		for (Scalar v : values) data_[i++] = v;
	}

	const Shape& shape() const { return shape_; }
	Index size() const { return data_.size(); }
	bool empty() const { return shape_.rank() == 0; }

	Scalar* data() { return data_.data(); }
	const Scalar* data() const { return data_.data(); }
	Vector& vec() { return data_; }
	const Vector& vec() const { return data_; }
	std::span<Scalar> values() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
	std::span<const Scalar> values() const { return {data_.data(), static_cast<std::size_t>(data_.size())}; }

	Scalar& operator[](Index i) { return data_[i]; }
	Scalar operator[](Index i) const { return data_[i]; }

	Index offset(Index n, Index c, Index h, Index w) const {
		return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
	}
	std::array<Index, 4> unravel(Index offset) const {
		std::array<Index, 4> idx{};
		for (int axis = 3; axis >= 0; --axis) {
			idx[static_cast<std::size_t>(axis)] = offset % shape_[axis];
			offset /= shape_[axis];
		}
		return idx;
	}
	Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
	Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }
	Scalar& operator()(Index row, Index col) { return data_[row * shape_[1] + col]; }
	Scalar operator()(Index row, Index col) const { return data_[row * shape_[1] + col]; }

	/// Whole buffer viewed as a row-major (rows, cols) matrix.
	MatrixMap matrix(Index rows, Index cols) {
		check_view(rows, cols);
		return MatrixMap(data_.data(), rows, cols);
	}
	ConstMatrixMap matrix(Index rows, Index cols) const {
		check_view(rows, cols);
		return ConstMatrixMap(data_.data(), rows, cols);
	}
	/// Sample `n` of a rank-4 tensor viewed as a (C, H*W) matrix.
	MatrixMap image(Index n) {
		const Index plane = shape_[1] * shape_[2] * shape_[3];
		return MatrixMap(data_.data() + n * plane, shape_[1], shape_[2] * shape_[3]);
	}
	ConstMatrixMap image(Index n) const {
		const Index plane = shape_[1] * shape_[2] * shape_[3];
		return ConstMatrixMap(data_.data() + n * plane, shape_[1], shape_[2] * shape_[3]);
	}

	Tensor reshaped(const Shape& shape) const {
		if (shape.size() != size())
			throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
		return Tensor(shape, data_);
	}
	template<typename Other>
	Tensor<Other> cast() const {
		return Tensor<Other>(shape_, data_.template cast<Other>());
	}
	void fill(Scalar v) { data_.setConstant(v); }

private:
	void check_view(Index rows, Index cols) const {
		if (rows * cols != size())
			throw ShapeError("cannot view " + shape_.str() + " as a " + std::to_string(rows) + "x" +
					std::to_string(cols) + " matrix");
	}

	Shape shape_;
	Vector data_;
};

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary forms require equal shapes.

template<typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
	require_same_shape(a.shape(), b.shape(), "add");
	return Tensor<Scalar>(a.shape(), a.vec() + b.vec());
}

template<typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
	require_same_shape(a.shape(), b.shape(), "sub");
	return Tensor<Scalar>(a.shape(), a.vec() - b.vec());
}

template<typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
	require_same_shape(a.shape(), b.shape(), "mul");
	return Tensor<Scalar>(a.shape(), a.vec().cwiseProduct(b.vec()));
}

template<typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, Scalar b) {
	return Tensor<Scalar>(a.shape(), (a.vec().array() + b).matrix());
}

template<typename Scalar>
Tensor<Scalar> negate(const Tensor<Scalar>& a) {
	return Tensor<Scalar>(a.shape(), -a.vec());
}

template<typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
	return Tensor<Scalar>(a.shape(), a.vec() * factor);
}

/// max(x, 0) positionwise.
template<typename Scalar>
Tensor<Scalar> max_with_zero(const Tensor<Scalar>& a) {
	return Tensor<Scalar>(a.shape(), a.vec().cwiseMax(Scalar(0)));
}

/// min(x, 0) positionwise.
template<typename Scalar>
Tensor<Scalar> min_with_zero(const Tensor<Scalar>& a) {
	return Tensor<Scalar>(a.shape(), a.vec().cwiseMin(Scalar(0)));
}

/// dst += src; used for gradient accumulation.
template<typename Scalar>
void accumulate(Tensor<Scalar>& dst, const Tensor<Scalar>& src) {
	require_same_shape(dst.shape(), src.shape(), "accumulate");
	dst.vec() += src.vec();
}

// ---------------------------------------------------------------------------
// Channel slabs

/**
 * Stacks rank-4 tensors along the channel axis. Part i occupies channels
 * [sum of earlier C, + C_i) of the result.
 */
template<typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> parts);

template<typename Scalar>
Tensor<Scalar> concat_channels(std::initializer_list<Tensor<Scalar>> parts) {
	return concat_channels<Scalar>(std::span<const Tensor<Scalar>>(parts.begin(), parts.size()));
}

/// Channels [begin, end) of a rank-4 tensor as a new tensor.
template<typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index begin, Index end);

// ---------------------------------------------------------------------------
// Reductions. Every accumulation runs in increasing offset order.

template<typename Scalar>
Scalar sum(const Tensor<Scalar>& x);

template<typename Scalar>
Scalar mean(const Tensor<Scalar>& x);

/// Per-channel mean over (N, H, W); result has shape (C).
template<typename Scalar>
Tensor<Scalar> channel_mean(const Tensor<Scalar>& x);

/// Per-channel biased variance over (N, H, W); result has shape (C).
template<typename Scalar>
Tensor<Scalar> channel_var(const Tensor<Scalar>& x);

/// Row-wise argmax of a rank-2 (N, K) tensor. Ties resolve to the lowest index.
template<typename Scalar>
std::vector<Index> argmax_rows(const Tensor<Scalar>& x);

/// Inner product over all elements, accumulated in offset order.
template<typename Scalar>
Scalar dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

} // namespace reborn

#endif // REBORN_TENSOR_HPP_
