#ifndef REBORN_MODULE_HPP_
#define REBORN_MODULE_HPP_

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "reborn/tensor.hpp"

namespace reborn {

enum class Mode { train, eval };

/// What a registered tensor is; drives weight decay and parameter accounting.
enum class ParamKind {
	conv_weight,    ///< Conv2d / ConvTranspose2d kernels
	linear_weight,
	bias,
	norm_affine,    ///< batch-norm gamma / beta
	slope,          ///< PReLU slopes
	buffer          ///< batch-norm running statistics; not learned
};

/**
 * Non-owning handle to a named tensor inside a module. Learned parameters
 * carry a gradient buffer of identical shape; buffers do not.
 */
template<typename Scalar>
struct ParamRef {
	std::string name;
	Tensor<Scalar>* value = nullptr;
	Tensor<Scalar>* grad = nullptr;
	ParamKind kind = ParamKind::buffer;

	bool learnable() const { return grad != nullptr; }
};

template<typename Scalar>
using ParamList = std::vector<ParamRef<Scalar>>;

/// Raised when backward is called without a matching forward.
class StateError : public std::logic_error {
public:
	using std::logic_error::logic_error;
};

/**
 * A differentiable stage of a static chain. forward caches whatever backward
 * needs; backward returns the input gradient and accumulates parameter
 * gradients into the module's buffers.
 */
template<typename Scalar>
class Module {
public:
	virtual ~Module() = default;

	virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) = 0;
	virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) = 0;

	/// Appends this module's tensors, named `<prefix>.<local>`.
	virtual void collect(const std::string& prefix, ParamList<Scalar>& out) {
		(void)prefix;
		(void)out;
	}

	/// Output shape for a given input shape; throws ShapeError on mismatch.
	virtual Shape output_shape(const Shape& in) const = 0;

	virtual std::string kind() const = 0;

	void zero_grad() {
		ParamList<Scalar> params;
		collect("", params);
		for (auto& p : params)
			if (p.grad) p.grad->fill(Scalar(0));
	}
};

template<typename Scalar>
using ModulePtr = std::unique_ptr<Module<Scalar>>;

inline std::string join_name(const std::string& prefix, const std::string& local) {
	return prefix.empty() ? local : prefix + "." + local;
}

} // namespace reborn

#endif // REBORN_MODULE_HPP_
