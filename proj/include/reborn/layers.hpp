#ifndef REBORN_LAYERS_HPP_
#define REBORN_LAYERS_HPP_

#include <vector>

#include "reborn/module.hpp"
#include "reborn/tensor.hpp"

namespace reborn {

/// floor((in + 2 pad - kernel) / stride) + 1; throws ShapeError when < 1.
Index conv_out_extent(Index in, Index kernel, Index stride, Index padding);
/// (in - 1) stride - 2 pad + kernel; throws ShapeError when < 1.
Index conv_transpose_out_extent(Index in, Index kernel, Index stride, Index padding);

/**
 * Cross-correlation of x (N, C_in, H, W) with weight (C_out, C_in, k, k),
 * zero padding. No kernel flip.
 */
template<typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, Index stride, Index padding);

/**
 * Transposed convolution of x (N, C_in, H, W) with weight (C_in, C_out, k, k).
 * This is the linear adjoint of conv2d with the same weight, stride and padding
 * (with the weight's first two axes read as (conv C_out, conv C_in)).
 */
template<typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, Index stride,
		Index padding);

template<typename Scalar>
class Conv2d : public Module<Scalar> {
public:
	Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding, bool with_bias);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "conv2d"; }

	Index in_channels() const { return weight.shape()[1]; }
	Index out_channels() const { return weight.shape()[0]; }
	Index kernel() const { return weight.shape()[2]; }
	Index stride() const { return stride_; }
	Index padding() const { return padding_; }
	bool has_bias() const { return !bias.empty(); }

	Tensor<Scalar> weight, bias;
	Tensor<Scalar> grad_weight, grad_bias;

private:
	Index stride_, padding_;
	Tensor<Scalar> input_;
};

template<typename Scalar>
class ConvTranspose2d : public Module<Scalar> {
public:
	ConvTranspose2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
			bool with_bias);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "conv_transpose2d"; }

	Index in_channels() const { return weight.shape()[0]; }
	Index out_channels() const { return weight.shape()[1]; }
	Index kernel() const { return weight.shape()[2]; }
	Index stride() const { return stride_; }
	Index padding() const { return padding_; }

	Tensor<Scalar> weight, bias;
	Tensor<Scalar> grad_weight, grad_bias;

private:
	Index stride_, padding_;
	Tensor<Scalar> input_;
};

/**
 * Per-channel batch normalization over (N, H, W).
 *
 * Train mode normalizes with the biased batch variance and folds the batch
 * statistics into the running estimates with weight `stat_momentum`. Eval
 * mode uses the running estimates only.
 */
template<typename Scalar>
class BatchNorm2d : public Module<Scalar> {
public:
	explicit BatchNorm2d(Index channels, Scalar eps = Scalar(1e-5), Scalar stat_momentum = Scalar(0.1));

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "batch_norm2d"; }

	Index channels() const { return gamma.size(); }

	Tensor<Scalar> gamma, beta, running_mean, running_var;
	Tensor<Scalar> grad_gamma, grad_beta;
	Scalar eps, stat_momentum;

private:
	Mode mode_ = Mode::train;
	Tensor<Scalar> normalized_;          // x-hat from the last forward
	std::vector<Scalar> inv_std_;        // per channel, from the last forward
};

template<typename Scalar>
class Linear : public Module<Scalar> {
public:
	Linear(Index in_features, Index out_features);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "linear"; }

	Index in_features() const { return weight.shape()[1]; }
	Index out_features() const { return weight.shape()[0]; }

	Tensor<Scalar> weight, bias;
	Tensor<Scalar> grad_weight, grad_bias;

private:
	Tensor<Scalar> input_;
};

/// (N, C, H, W) -> (N, C) by spatial averaging.
template<typename Scalar>
class GlobalAvgPool : public Module<Scalar> {
public:
	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "global_avg_pool"; }

private:
	Shape input_shape_;
};

/// (N, ...) -> (N, product of the rest).
template<typename Scalar>
class Flatten : public Module<Scalar> {
public:
	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "flatten"; }

private:
	Shape input_shape_;
};

template<typename Scalar>
struct LossResult {
	Scalar loss;
	Tensor<Scalar> grad_logits;  ///< (softmax - onehot) / N
};

/**
 * Mean over the batch of -log softmax(logits)[label]. Labels must lie in
 * [0, num_classes).
 */
template<typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels);

} // namespace reborn

#endif // REBORN_LAYERS_HPP_
