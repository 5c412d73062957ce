#include "reborn/layers.hpp"

#include <cmath>
#include <string>

namespace reborn {
namespace {

template<typename Scalar>
using RowMatrix = typename Tensor<Scalar>::RowMatrix;

struct Geometry {
	Index channels, height, width;   // padded-conv input plane
	Index kernel, stride, padding;
	Index out_height, out_width;     // conv output grid
};

// Unfolds one (C, H, W) image into rows (c, ki, kj) x columns (oh, ow) of a
// row-major matrix with leading dimension `ld`.
template<typename Scalar>
void im2col(const Scalar* img, const Geometry& g, Scalar* cols, Index ld) {
	for (Index c = 0; c < g.channels; ++c)
		for (Index ki = 0; ki < g.kernel; ++ki)
			for (Index kj = 0; kj < g.kernel; ++kj) {
				Scalar* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ld;
				for (Index oh = 0; oh < g.out_height; ++oh) {
					const Index ih = oh * g.stride - g.padding + ki;
					Scalar* dst = row + oh * g.out_width;
					if (ih < 0 || ih >= g.height) {
						for (Index ow = 0; ow < g.out_width; ++ow) dst[ow] = Scalar(0);
						continue;
					}
					const Scalar* src = img + (c * g.height + ih) * g.width;
					for (Index ow = 0; ow < g.out_width; ++ow) {
						const Index iw = ow * g.stride - g.padding + kj;
						dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : Scalar(0);
					}
				}
			}
}

// Adjoint of im2col: scatters-and-adds columns back into the image.
template<typename Scalar>
void col2im(const Scalar* cols, Index ld, const Geometry& g, Scalar* img) {
	for (Index c = 0; c < g.channels; ++c)
		for (Index ki = 0; ki < g.kernel; ++ki)
			for (Index kj = 0; kj < g.kernel; ++kj) {
				const Scalar* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * ld;
				for (Index oh = 0; oh < g.out_height; ++oh) {
					const Index ih = oh * g.stride - g.padding + ki;
					if (ih < 0 || ih >= g.height) continue;
					const Scalar* src = row + oh * g.out_width;
					Scalar* dst = img + (c * g.height + ih) * g.width;
					for (Index ow = 0; ow < g.out_width; ++ow) {
						const Index iw = ow * g.stride - g.padding + kj;
						if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
					}
				}
			}
}

template<typename Scalar>
RowMatrix<Scalar> unfold_batch(const Tensor<Scalar>& x, const Geometry& g) {
	const Index n_images = x.shape().n();
	const Index plane = g.out_height * g.out_width;
	RowMatrix<Scalar> cols(g.channels * g.kernel * g.kernel, n_images * plane);
	const Index image_size = g.channels * g.height * g.width;
	for (Index n = 0; n < n_images; ++n)
		im2col(x.data() + n * image_size, g, cols.data() + n * plane, cols.cols());
	return cols;
}

template<typename Scalar>
void fold_batch(const RowMatrix<Scalar>& cols, const Geometry& g, Tensor<Scalar>& out) {
	const Index plane = g.out_height * g.out_width;
	const Index image_size = g.channels * g.height * g.width;
	for (Index n = 0; n < out.shape().n(); ++n)
		col2im(cols.data() + n * plane, cols.cols(), g, out.data() + n * image_size);
}

// (N, C, H, W) -> (C, N*H*W), sample-major within each channel row.
template<typename Scalar>
RowMatrix<Scalar> channels_by_samples(const Tensor<Scalar>& t) {
	const Shape& s = t.shape();
	const Index plane = s.h() * s.w();
	RowMatrix<Scalar> m(s.c(), s.n() * plane);
	for (Index n = 0; n < s.n(); ++n) m.middleCols(n * plane, plane) = t.image(n);
	return m;
}

template<typename Scalar>
Tensor<Scalar> samples_by_channels(const RowMatrix<Scalar>& m, Index n_images, Index h, Index w) {
	Tensor<Scalar> t(Shape{n_images, m.rows(), h, w});
	const Index plane = h * w;
	for (Index n = 0; n < n_images; ++n) t.image(n) = m.middleCols(n * plane, plane);
	return t;
}

void check_conv_input(const Shape& in, Index channels, const char* op) {
	require_rank4(in, op);
	if (in.c() != channels)
		throw ShapeError(std::string(op) + ": expected " + std::to_string(channels) + " input channels, got " +
				in.str());
}

void check_hyper(Index in, Index out, Index kernel, Index stride, Index padding, const char* op) {
	if (in < 1 || out < 1 || kernel < 1 || stride < 1 || padding < 0)
		throw std::invalid_argument(std::string(op) + ": invalid hyperparameters");
}

} // namespace

Index conv_out_extent(Index in, Index kernel, Index stride, Index padding) {
	const Index span = in + 2 * padding - kernel;
	if (span < 0)
		throw ShapeError("convolution output extent < 1 (in=" + std::to_string(in) + ", kernel=" +
				std::to_string(kernel) + ", pad=" + std::to_string(padding) + ")");
	return span / stride + 1;
}

Index conv_transpose_out_extent(Index in, Index kernel, Index stride, Index padding) {
	const Index out = (in - 1) * stride - 2 * padding + kernel;
	if (out < 1)
		throw ShapeError("transposed convolution output extent < 1 (in=" + std::to_string(in) + ")");
	return out;
}

template<typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, Index stride, Index padding) {
	const Index c_out = weight.shape()[0], c_in = weight.shape()[1], k = weight.shape()[2];
	check_conv_input(x.shape(), c_in, "conv2d");
	const Shape& s = x.shape();
	const Geometry g{c_in, s.h(), s.w(), k, stride, padding, conv_out_extent(s.h(), k, stride, padding),
			conv_out_extent(s.w(), k, stride, padding)};
	const RowMatrix<Scalar> cols = unfold_batch(x, g);
	const RowMatrix<Scalar> y = weight.matrix(c_out, c_in * k * k) * cols;
	return samples_by_channels<Scalar>(y, s.n(), g.out_height, g.out_width);
}

template<typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, Index stride,
		Index padding) {
	const Index c_in = weight.shape()[0], c_out = weight.shape()[1], k = weight.shape()[2];
	check_conv_input(x.shape(), c_in, "conv_transpose2d");
	const Shape& s = x.shape();
	const Index ho = conv_transpose_out_extent(s.h(), k, stride, padding);
	const Index wo = conv_transpose_out_extent(s.w(), k, stride, padding);
	const Geometry g{c_out, ho, wo, k, stride, padding, s.h(), s.w()};
	const RowMatrix<Scalar> cols = weight.matrix(c_in, c_out * k * k).transpose() * channels_by_samples(x);
	Tensor<Scalar> out(Shape{s.n(), c_out, ho, wo});
	fold_batch(cols, g, out);
	return out;
}

// ---------------------------------------------------------------------------

template<typename Scalar>
Conv2d<Scalar>::Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
		bool with_bias)
	: weight(Shape{out_channels, in_channels, kernel, kernel}),
	  grad_weight(Shape{out_channels, in_channels, kernel, kernel}),
	  stride_(stride),
	  padding_(padding) {
	check_hyper(in_channels, out_channels, kernel, stride, padding, "Conv2d");
	if (with_bias) {
		bias = Tensor<Scalar>(Shape{out_channels});
		grad_bias = Tensor<Scalar>(Shape{out_channels});
	}
}

template<typename Scalar>
Shape Conv2d<Scalar>::output_shape(const Shape& in) const {
	check_conv_input(in, in_channels(), "conv2d");
	return Shape{in.n(), out_channels(), conv_out_extent(in.h(), kernel(), stride_, padding_),
			conv_out_extent(in.w(), kernel(), stride_, padding_)};
}

template<typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	Tensor<Scalar> out = conv2d(x, weight, stride_, padding_);
	if (has_bias())
		for (Index n = 0; n < out.shape().n(); ++n) out.image(n).colwise() += bias.vec();
	input_ = x;
	return out;
}

template<typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("conv2d backward called before forward");
	const Shape expected = output_shape(input_.shape());
	require_same_shape(grad_out.shape(), expected, "conv2d backward");
	const Shape& s = input_.shape();
	const Index k = kernel();
	const Geometry g{in_channels(), s.h(), s.w(), k, stride_, padding_, expected.h(), expected.w()};

	const RowMatrix<Scalar> cols = unfold_batch(input_, g);
	const RowMatrix<Scalar> dy = channels_by_samples(grad_out);
	auto w = weight.matrix(out_channels(), in_channels() * k * k);
	grad_weight.matrix(out_channels(), in_channels() * k * k).noalias() += dy * cols.transpose();
	if (has_bias()) grad_bias.vec() += dy.rowwise().sum();

	const RowMatrix<Scalar> dcols = w.transpose() * dy;
	Tensor<Scalar> grad_in(s);
	fold_batch(dcols, g, grad_in);
	return grad_in;
}

template<typename Scalar>
void Conv2d<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	out.push_back({join_name(prefix, "weight"), &weight, &grad_weight, ParamKind::conv_weight});
	if (has_bias()) out.push_back({join_name(prefix, "bias"), &bias, &grad_bias, ParamKind::bias});
}

// ---------------------------------------------------------------------------

template<typename Scalar>
ConvTranspose2d<Scalar>::ConvTranspose2d(Index in_channels, Index out_channels, Index kernel, Index stride,
		Index padding, bool with_bias)
	: weight(Shape{in_channels, out_channels, kernel, kernel}),
	  grad_weight(Shape{in_channels, out_channels, kernel, kernel}),
	  stride_(stride),
	  padding_(padding) {
	check_hyper(in_channels, out_channels, kernel, stride, padding, "ConvTranspose2d");
	if (with_bias) {
		bias = Tensor<Scalar>(Shape{out_channels});
		grad_bias = Tensor<Scalar>(Shape{out_channels});
	}
}

template<typename Scalar>
Shape ConvTranspose2d<Scalar>::output_shape(const Shape& in) const {
	check_conv_input(in, in_channels(), "conv_transpose2d");
	return Shape{in.n(), out_channels(), conv_transpose_out_extent(in.h(), kernel(), stride_, padding_),
			conv_transpose_out_extent(in.w(), kernel(), stride_, padding_)};
}

template<typename Scalar>
Tensor<Scalar> ConvTranspose2d<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	Tensor<Scalar> out = conv_transpose2d(x, weight, stride_, padding_);
	if (!bias.empty())
		for (Index n = 0; n < out.shape().n(); ++n) out.image(n).colwise() += bias.vec();
	input_ = x;
	return out;
}

template<typename Scalar>
Tensor<Scalar> ConvTranspose2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("conv_transpose2d backward called before forward");
	const Shape expected = output_shape(input_.shape());
	require_same_shape(grad_out.shape(), expected, "conv_transpose2d backward");
	const Shape& s = input_.shape();
	const Index k = kernel();
	const Geometry g{out_channels(), expected.h(), expected.w(), k, stride_, padding_, s.h(), s.w()};

	const RowMatrix<Scalar> dcols = unfold_batch(grad_out, g);
	const RowMatrix<Scalar> x = channels_by_samples(input_);
	auto w = weight.matrix(in_channels(), out_channels() * k * k);
	grad_weight.matrix(in_channels(), out_channels() * k * k).noalias() += x * dcols.transpose();
	if (!bias.empty()) grad_bias.vec() += channels_by_samples(grad_out).rowwise().sum();

	const RowMatrix<Scalar> dx = w * dcols;
	return samples_by_channels<Scalar>(dx, s.n(), s.h(), s.w());
}

template<typename Scalar>
void ConvTranspose2d<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	out.push_back({join_name(prefix, "weight"), &weight, &grad_weight, ParamKind::conv_weight});
	if (!bias.empty()) out.push_back({join_name(prefix, "bias"), &bias, &grad_bias, ParamKind::bias});
}

// ---------------------------------------------------------------------------

template<typename Scalar>
BatchNorm2d<Scalar>::BatchNorm2d(Index channels, Scalar eps, Scalar stat_momentum)
	: gamma(Shape{channels}, Scalar(1)),
	  beta(Shape{channels}),
	  running_mean(Shape{channels}),
	  running_var(Shape{channels}, Scalar(1)),
	  grad_gamma(Shape{channels}),
	  grad_beta(Shape{channels}),
	  eps(eps),
	  stat_momentum(stat_momentum) {
	if (!(eps > 0)) throw std::invalid_argument("BatchNorm2d: eps must be positive");
	if (!(stat_momentum > 0 && stat_momentum < 1))
		throw std::invalid_argument("BatchNorm2d: stat_momentum must lie in (0, 1)");
}

template<typename Scalar>
Shape BatchNorm2d<Scalar>::output_shape(const Shape& in) const {
	check_conv_input(in, channels(), "batch_norm2d");
	return in;
}

template<typename Scalar>
Tensor<Scalar> BatchNorm2d<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
	check_conv_input(x.shape(), channels(), "batch_norm2d");
	const Shape& s = x.shape();
	const Index plane = s.h() * s.w();
	const Index count = s.n() * plane;
	const Index c_total = channels();

	Tensor<Scalar> mu, var;
	if (mode == Mode::train) {
		if (count < 2)
			throw ShapeError("batch_norm2d: train mode needs N*H*W >= 2 per channel, got " + s.str());
		mu = channel_mean(x);
		var = channel_var(x);
		for (Index c = 0; c < c_total; ++c) {
			running_mean[c] = (1 - stat_momentum) * running_mean[c] + stat_momentum * mu[c];
			running_var[c] = (1 - stat_momentum) * running_var[c] + stat_momentum * var[c];
		}
	} else {
		mu = running_mean;
		var = running_var;
	}

	inv_std_.assign(static_cast<std::size_t>(c_total), Scalar(0));
	for (Index c = 0; c < c_total; ++c)
		inv_std_[static_cast<std::size_t>(c)] = Scalar(1) / std::sqrt(var[c] + eps);

	normalized_ = Tensor<Scalar>(s);
	Tensor<Scalar> out(s);
	for (Index n = 0; n < s.n(); ++n)
		for (Index c = 0; c < c_total; ++c) {
			const Index base = (n * c_total + c) * plane;
			const Scalar m = mu[c], is = inv_std_[static_cast<std::size_t>(c)], g = gamma[c], b = beta[c];
			for (Index i = 0; i < plane; ++i) {
				const Scalar xh = (x[base + i] - m) * is;
				normalized_[base + i] = xh;
				out[base + i] = g * xh + b;
			}
		}
	mode_ = mode;
	return out;
}

template<typename Scalar>
Tensor<Scalar> BatchNorm2d<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (normalized_.empty()) throw StateError("batch_norm2d backward called before forward");
	require_same_shape(grad_out.shape(), normalized_.shape(), "batch_norm2d backward");
	const Shape& s = grad_out.shape();
	const Index plane = s.h() * s.w();
	const Index c_total = channels();
	const Scalar count = static_cast<Scalar>(s.n() * plane);

	Tensor<Scalar> grad_in(s);
	for (Index c = 0; c < c_total; ++c) {
		Scalar sum_dy = 0, sum_dy_xh = 0;
		for (Index n = 0; n < s.n(); ++n) {
			const Index base = (n * c_total + c) * plane;
			for (Index i = 0; i < plane; ++i) {
				sum_dy += grad_out[base + i];
				sum_dy_xh += grad_out[base + i] * normalized_[base + i];
			}
		}
		grad_beta[c] += sum_dy;
		grad_gamma[c] += sum_dy_xh;

		const Scalar scale = gamma[c] * inv_std_[static_cast<std::size_t>(c)];
		for (Index n = 0; n < s.n(); ++n) {
			const Index base = (n * c_total + c) * plane;
			for (Index i = 0; i < plane; ++i) {
				if (mode_ == Mode::train)
					grad_in[base + i] =
							scale * (grad_out[base + i] - sum_dy / count - normalized_[base + i] * sum_dy_xh / count);
				else
					grad_in[base + i] = scale * grad_out[base + i];
			}
		}
	}
	return grad_in;
}

template<typename Scalar>
void BatchNorm2d<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	out.push_back({join_name(prefix, "gamma"), &gamma, &grad_gamma, ParamKind::norm_affine});
	out.push_back({join_name(prefix, "beta"), &beta, &grad_beta, ParamKind::norm_affine});
	out.push_back({join_name(prefix, "running_mean"), &running_mean, nullptr, ParamKind::buffer});
	out.push_back({join_name(prefix, "running_var"), &running_var, nullptr, ParamKind::buffer});
}

// ---------------------------------------------------------------------------

template<typename Scalar>
Linear<Scalar>::Linear(Index in_features, Index out_features)
	: weight(Shape{out_features, in_features}),
	  bias(Shape{out_features}),
	  grad_weight(Shape{out_features, in_features}),
	  grad_bias(Shape{out_features}) {}

template<typename Scalar>
Shape Linear<Scalar>::output_shape(const Shape& in) const {
	if (in.rank() != 2 || in[1] != in_features())
		throw ShapeError("linear: expected (N, " + std::to_string(in_features()) + "), got " + in.str());
	return Shape{in[0], out_features()};
}

template<typename Scalar>
Tensor<Scalar> Linear<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	const Shape out_shape = output_shape(x.shape());
	const Index n = x.shape()[0];
	Tensor<Scalar> out(out_shape);
	auto y = out.matrix(n, out_features());
	y.noalias() = x.matrix(n, in_features()) * weight.matrix(out_features(), in_features()).transpose();
	y.rowwise() += bias.vec().transpose();
	input_ = x;
	return out;
}

template<typename Scalar>
Tensor<Scalar> Linear<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("linear backward called before forward");
	require_same_shape(grad_out.shape(), output_shape(input_.shape()), "linear backward");
	const Index n = input_.shape()[0];
	const auto dy = grad_out.matrix(n, out_features());
	grad_weight.matrix(out_features(), in_features()).noalias() += dy.transpose() * input_.matrix(n, in_features());
	grad_bias.vec() += dy.colwise().sum().transpose();
	Tensor<Scalar> grad_in(input_.shape());
	grad_in.matrix(n, in_features()).noalias() = dy * weight.matrix(out_features(), in_features());
	return grad_in;
}

template<typename Scalar>
void Linear<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	out.push_back({join_name(prefix, "weight"), &weight, &grad_weight, ParamKind::linear_weight});
	out.push_back({join_name(prefix, "bias"), &bias, &grad_bias, ParamKind::bias});
}

// ---------------------------------------------------------------------------

template<typename Scalar>
Shape GlobalAvgPool<Scalar>::output_shape(const Shape& in) const {
	require_rank4(in, "global_avg_pool");
	return Shape{in.n(), in.c()};
}

template<typename Scalar>
Tensor<Scalar> GlobalAvgPool<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	const Shape& s = x.shape();
	Tensor<Scalar> out(output_shape(s));
	const Index plane = s.h() * s.w();
	for (Index i = 0; i < s.n() * s.c(); ++i) {
		Scalar acc = 0;
		for (Index j = 0; j < plane; ++j) acc += x[i * plane + j];
		out[i] = acc / static_cast<Scalar>(plane);
	}
	input_shape_ = s;
	return out;
}

template<typename Scalar>
Tensor<Scalar> GlobalAvgPool<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_shape_.rank() == 0) throw StateError("global_avg_pool backward called before forward");
	require_same_shape(grad_out.shape(), output_shape(input_shape_), "global_avg_pool backward");
	const Index plane = input_shape_.h() * input_shape_.w();
	Tensor<Scalar> grad_in(input_shape_);
	for (Index i = 0; i < grad_out.size(); ++i) {
		const Scalar g = grad_out[i] / static_cast<Scalar>(plane);
		for (Index j = 0; j < plane; ++j) grad_in[i * plane + j] = g;
	}
	return grad_in;
}

template<typename Scalar>
Shape Flatten<Scalar>::output_shape(const Shape& in) const {
	if (in.rank() < 2) throw ShapeError("flatten: expected rank >= 2, got " + in.str());
	return Shape{in[0], in.size() / in[0]};
}

template<typename Scalar>
Tensor<Scalar> Flatten<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	input_shape_ = x.shape();
	return x.reshaped(output_shape(x.shape()));
}

template<typename Scalar>
Tensor<Scalar> Flatten<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_shape_.rank() == 0) throw StateError("flatten backward called before forward");
	return grad_out.reshaped(input_shape_);
}

// ---------------------------------------------------------------------------

template<typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
	if (logits.shape().rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be (N, K)");
	const Index n = logits.shape()[0], k = logits.shape()[1];
	if (static_cast<Index>(labels.size()) != n)
		throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
				std::to_string(n) + " rows");
	LossResult<Scalar> r{Scalar(0), Tensor<Scalar>(logits.shape())};
	for (Index i = 0; i < n; ++i) {
		const int label = labels[static_cast<std::size_t>(i)];
		if (label < 0 || label >= k)
			throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
					std::to_string(k) + ")");
		Scalar top = logits(i, 0);
		for (Index j = 1; j < k; ++j) top = std::max(top, logits(i, j));
		Scalar z = 0;
		for (Index j = 0; j < k; ++j) z += std::exp(logits(i, j) - top);
		const Scalar log_z = std::log(z) + top;
		r.loss += log_z - logits(i, label);
		for (Index j = 0; j < k; ++j)
			r.grad_logits(i, j) = (std::exp(logits(i, j) - log_z) - (j == label ? Scalar(1) : Scalar(0))) /
					static_cast<Scalar>(n);
	}
	r.loss /= static_cast<Scalar>(n);
	return r;
}

#define REBORN_INSTANTIATE(T) \
	template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, Index, Index); \
	template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const Tensor<T>&, Index, Index); \
	template class Conv2d<T>; \
	template class ConvTranspose2d<T>; \
	template class BatchNorm2d<T>; \
	template class Linear<T>; \
	template class GlobalAvgPool<T>; \
	template class Flatten<T>; \
	template LossResult<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const int>);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
