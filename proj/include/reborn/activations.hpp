#ifndef REBORN_ACTIVATIONS_HPP_
#define REBORN_ACTIVATIONS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "reborn/layers.hpp"
#include "reborn/module.hpp"
#include "reborn/rng.hpp"
#include "reborn/tensor.hpp"

namespace reborn {

// ---------------------------------------------------------------------------
// Phase split

/// Positive phase, max(x, 0).
template<typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
	return max_with_zero(x);
}

/// Negative phase with its sign kept, -relu(-x) == min(x, 0).
template<typename Scalar>
Tensor<Scalar> negative_part(const Tensor<Scalar>& x) {
	return min_with_zero(x);
}

// ---------------------------------------------------------------------------
// Specs

struct RebornConfig {
	Index deconv_kernel = 3;
	Index deconv_stride = 1;
	Index deconv_padding = 1;
	int decay_ratio = 2;      ///< concatenated channels / compressed channels
	bool compress = true;     ///< false: drop the 1x1 conv and emit 2C channels

	/// Throws std::invalid_argument unless the deconv preserves spatial extent.
	void validate() const;
};

namespace act {
struct Relu {};
struct LeakyRelu { double slope = 0.01; };
struct PRelu { double init = 0.25; };
struct RRelu { double lower = 1.0 / 8.0; double upper = 1.0 / 3.0; };
struct Elu { double alpha = 1.0; };
struct Selu {};
struct Celu { double alpha = 1.0; };
struct CRelu {};
struct Reborn { RebornConfig config; };
} // namespace act

/**
 * Tagged choice of activation mechanism. The textual form used on the command
 * line is `relu`, `leaky:0.01`, `prelu`, `rrelu:0.125:0.333`, `elu:1.0`,
 * `selu`, `celu:1.0`, `crelu`, `reborn` or `reborn-nc`.
 */
struct ActivationSpec {
	using Variant = std::variant<act::Relu, act::LeakyRelu, act::PRelu, act::RRelu, act::Elu, act::Selu, act::Celu,
			act::CRelu, act::Reborn>;
	Variant kind = act::Relu{};

	static ActivationSpec parse(std::string_view text);
	std::string str() const;
	void validate() const;

	/// Channels emitted for `channels` inputs: 2C for CReLU and uncompressed reborn, C otherwise.
	Index output_channels(Index channels) const;
	bool is_reborn() const { return std::holds_alternative<act::Reborn>(kind); }
};

// ---------------------------------------------------------------------------
// Modules

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

/// Stateless pointwise activations: ReLU, LeakyReLU, ELU, SELU, CELU.
template<typename Scalar>
class PointwiseActivation : public Module<Scalar> {
public:
	enum class Kind { relu, leaky_relu, elu, selu, celu };

	explicit PointwiseActivation(Kind kind, Scalar param = Scalar(0));

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	Shape output_shape(const Shape& in) const override { return in; }
	std::string kind() const override;

	Scalar value(Scalar x) const;
	Scalar derivative(Scalar x) const;

private:
	Kind kind_;
	Scalar param_;    // slope for LeakyReLU, alpha for ELU / CELU
	Tensor<Scalar> input_;
};

/// ReLU with one learned negative slope per channel (rank-4 inputs).
template<typename Scalar>
class PRelu : public Module<Scalar> {
public:
	PRelu(Index channels, Scalar init);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "prelu"; }

	Tensor<Scalar> slope, grad_slope;

private:
	Tensor<Scalar> input_;
};

/**
 * Randomized leaky ReLU. Train mode draws one slope per element uniformly in
 * [lower, upper] from the module's stream; eval mode uses (lower + upper) / 2.
 */
template<typename Scalar>
class RRelu : public Module<Scalar> {
public:
	RRelu(Scalar lower, Scalar upper, Rng rng);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	Shape output_shape(const Shape& in) const override { return in; }
	std::string kind() const override { return "rrelu"; }

	void reseed(Rng rng) { rng_ = rng; }

private:
	Scalar lower_, upper_;
	Rng rng_;
	Tensor<Scalar> slopes_;   // per element, from the last forward
};

/// concat(relu(x), relu(-x)) along channels.
template<typename Scalar>
class CRelu : public Module<Scalar> {
public:
	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return "crelu"; }

private:
	Tensor<Scalar> input_;
};

/**
 * The reborn activation block.
 *
 *     X1  = relu(X)
 *     X2  = bn(deconv(min(X, 0)))
 *     out = compress(concat(X1, X2))     or concat(X1, X2) without compression
 *
 * `deconv` maps C -> C channels and preserves H, W; `compress` is a 1x1
 * convolution with bias mapping 2C -> C. Nothing nonlinear follows the
 * compression.
 */
template<typename Scalar>
class RebornBlock : public Module<Scalar> {
public:
	RebornBlock(Index channels, const RebornConfig& config = {});

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override;
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override;
	void collect(const std::string& prefix, ParamList<Scalar>& out) override;
	Shape output_shape(const Shape& in) const override;
	std::string kind() const override { return config_.compress ? "reborn" : "reborn-nc"; }

	Index channels() const { return deconv.in_channels(); }
	const RebornConfig& config() const { return config_; }

	ConvTranspose2d<Scalar> deconv;
	BatchNorm2d<Scalar> bn;
	std::optional<Conv2d<Scalar>> compress;

private:
	RebornConfig config_;
	Tensor<Scalar> input_;
};

template<typename Scalar>
struct ActivationInstance {
	ModulePtr<Scalar> module;
	Index out_channels;
};

/**
 * Builds an activation for `channels` input channels. Deconv and compression
 * kernels get Xavier-uniform weights drawn from `rng`; PReLU slopes start at
 * the ActivationSpec's init value. RReLU samples from rng.derive("rrelu").derive(stream_key)
 * and leaves `rng` untouched.
 */
template<typename Scalar>
ActivationInstance<Scalar> make_activation(const ActivationSpec& spec, Index channels, Rng& rng,
		std::uint64_t stream_key = 0);

} // namespace reborn

#endif // REBORN_ACTIVATIONS_HPP_
