#ifndef REBORN_MODELS_HPP_
#define REBORN_MODELS_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "reborn/activations.hpp"
#include "reborn/module.hpp"
#include "reborn/rng.hpp"

namespace reborn {

enum class Arch { convnet8, viznet5, convnet8_extended };

Arch parse_arch(std::string_view text);
std::string arch_name(Arch arch);

struct ModelConfig {
	Arch arch = Arch::convnet8;
	ActivationSpec activation;
	double width_mult = 1.0;
	int num_classes = 10;
	Index input_channels = 3;
	Index input_size = 32;
	bool batch_norm = true;     ///< batch norm after every backbone conv

	/// One-line `key=value` form used as the checkpoint header.
	std::string header() const;
	static ModelConfig from_header(std::string_view line);
};

/// floor(base * width_mult), at least 1.
Index scaled_width(Index base, double width_mult);

/// Role of a stage in the chain; used for audits, feature taps and accounting.
enum class StageRole { conv, extension_conv, norm, activation, head_activation, flatten, pool, linear };

template<typename Scalar>
struct Stage {
	std::string name;
	StageRole role;
	int block = 0;              ///< 1-based backbone conv index the stage belongs to; 0 for the head
	ModulePtr<Scalar> module;
};

/**
 * A static chain of named stages. forward runs them in order and backward in
 * reverse, using the caches each module kept from the last forward.
 */
template<typename Scalar>
class Model {
public:
	explicit Model(ModelConfig config) : config_(std::move(config)) {}

	void add(std::string name, StageRole role, int block, ModulePtr<Scalar> module);

	Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode);
	/// Populates every gradient buffer; returns the gradient w.r.t. the input.
	Tensor<Scalar> backward(const Tensor<Scalar>& grad_logits);

	/// Runs the chain up to and including the activation of backbone conv `block` (1-based).
	Tensor<Scalar> forward_to_activation(const Tensor<Scalar>& x, int block, Mode mode);

	/// Every named tensor: learned parameters and batch-norm running statistics.
	ParamList<Scalar> tensors();
	ParamList<Scalar> parameters();
	void zero_grad();

	/// Shapes after each stage for an input of `in`; throws ShapeError on the first mismatch.
	std::vector<Shape> trace_shapes(const Shape& in) const;

	const std::vector<Stage<Scalar>>& stages() const { return stages_; }
	std::vector<Stage<Scalar>>& stages() { return stages_; }
	const ModelConfig& config() const { return config_; }

	/// Number of top-level Conv2d stages (backbone and extension convs).
	int conv_layer_count() const;
	/// Output channels of each backbone conv, in order.
	std::vector<Index> conv_widths() const;

private:
	ModelConfig config_;
	std::vector<Stage<Scalar>> stages_;
};

/**
 * ConvNet-8: eight 3x3 convs (32, 32, 64, 64, 128, 128, 256, 256 at width 1),
 * stride 2 at convs 3, 5 and 7, each followed by batch norm and the
 * activation; then FC 512 -> FC 128 -> classifier with plain ReLU between
 * the FC layers. Input size must be 28 or 32.
 */
template<typename Scalar>
Model<Scalar> build_convnet8(const ModelConfig& config, Rng& rng);

/// Five convs with 2^(n+4) channels (32 ... 512), stride 1 then 2; global average pooling; linear classifier.
template<typename Scalar>
Model<Scalar> build_viznet5(const ModelConfig& config, Rng& rng);

/// ConvNet-8 with an extra same-width 3x3 conv after every activation and no nonlinearity after it.
template<typename Scalar>
Model<Scalar> build_convnet8_extended(const ModelConfig& config, Rng& rng);

/// Dispatches on config.arch.
template<typename Scalar>
Model<Scalar> build_model(const ModelConfig& config, Rng& rng);

enum class ParamFilter {
	all,              ///< every learned scalar
	conv_weights      ///< conv and transposed-conv kernels only (no biases, BN, FC)
};

template<typename Scalar>
Index count_params(Model<Scalar>& model, ParamFilter filter);

} // namespace reborn

#endif // REBORN_MODELS_HPP_
