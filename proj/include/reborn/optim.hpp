#ifndef REBORN_OPTIM_HPP_
#define REBORN_OPTIM_HPP_

#include <vector>

#include "reborn/module.hpp"
#include "reborn/rng.hpp"
#include "reborn/tensor.hpp"
#include "reborn/tensor_io.hpp"

namespace reborn {

/// sqrt(6 / (fan_in + fan_out)).
double xavier_bound(Index fan_in, Index fan_out);

/// Tensor of `shape` with entries uniform in [-a, a], a = xavier_bound(fan_in, fan_out).
template<typename Scalar>
Tensor<Scalar> xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, Rng& rng);

/**
 * Xavier-uniform fill of a kernel in place, with fans read from its layout:
 *   conv   (C_out, C_in, k, k): fan_in = C_in k^2, fan_out = C_out k^2
 *   deconv (C_in, C_out, k, k): fan_in = C_in k^2, fan_out = C_out k^2
 *   linear (out, in):           fan_in = in,       fan_out = out
 */
template<typename Scalar>
void xavier_conv_(Tensor<Scalar>& weight, Rng& rng);
template<typename Scalar>
void xavier_deconv_(Tensor<Scalar>& weight, Rng& rng);
template<typename Scalar>
void xavier_linear_(Tensor<Scalar>& weight, Rng& rng);

struct SgdOptions {
	double lr = 0.001;
	double momentum = 0.9;
	double weight_decay = 0.0005;
	bool decay_norm_params = true;   ///< also decay batch-norm gamma / beta
};

/**
 * SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
 *
 *     g' = g + weight_decay * w
 *     v  = momentum * v + g'
 *     w  = w - lr * v
 *
 * Gradient buffers are zeroed after every step.
 */
template<typename Scalar>
class Sgd {
public:
	Sgd(ParamList<Scalar> params, SgdOptions options);

	void step();
	void zero_grad();

	void set_lr(double lr) { options_.lr = lr; }
	double lr() const { return options_.lr; }
	const SgdOptions& options() const { return options_; }

	/// Velocities as `velocity.<param name>`.
	NamedTensors<Scalar> state() const;
	void load_state(const NamedTensors<Scalar>& state);

	const ParamList<Scalar>& params() const { return params_; }

private:
	ParamList<Scalar> params_;          // learnable entries only
	std::vector<Tensor<Scalar>> velocity_;
	SgdOptions options_;
};

/// lr(e) = base_lr for e < ceil(total_epochs / 2), drop_lr afterwards.
struct LrSchedule {
	double base_lr = 0.001;
	double drop_lr = 0.0001;
	int total_epochs = 1;

	double lr_at_epoch(int epoch) const;
	int drop_epoch() const { return (total_epochs + 1) / 2; }
};

} // namespace reborn

#endif // REBORN_OPTIM_HPP_
