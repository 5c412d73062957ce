#ifndef REBORN_GRADCHECK_HPP_
#define REBORN_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "reborn/models.hpp"
#include "reborn/module.hpp"
#include "reborn/rng.hpp"

namespace reborn {

/**
 * Central finite-difference checking in 64-bit.
 *
 * For a module f and a random projection y, the scalar loss is <y, f(x)>.
 * Every input element and every learned parameter element is compared:
 *
 *     numeric = (L(t + h) - L(t - h)) / 2h
 *     rel     = |analytic - numeric| / max(|analytic|, |numeric|, denom_floor)
 *
 * The floor keeps entries whose true derivative is ~0 from dividing roundoff
 * by roundoff.
 */
struct GradcheckOptions {
	double step = 1e-5;
	double tolerance = 1e-4;
	double denom_floor = 1e-6;
	int trials = 5;
	double min_abs_input = 1e-3;   ///< inputs are kept at least this far from 0 (the ReLU kink)
	std::uint64_t seed = 2024;
};

struct ComponentResult {
	std::string name;
	double worst_rel_error = 0;
	std::string worst_location;    ///< e.g. "input[17]" or "weight[3]"
	long checks = 0;
	int trials = 0;
	bool passed = false;
};

struct GradcheckReport {
	std::vector<ComponentResult> components;
	bool passed() const;
	void print(std::ostream& os) const;
};

/// Describes one component under test.
struct GradcheckCase {
	std::string name;
	Shape input_shape;
	Mode mode = Mode::train;
	/// Fresh module with randomized parameters.
	std::function<ModulePtr<double>(Rng&)> make;
	/// Called before every forward; used to pin RReLU's random slopes.
	std::function<void(Module<double>&)> before_forward;
};

ComponentResult check_component(const GradcheckCase& test, const GradcheckOptions& options);

/// Softmax cross-entropy gradient against finite differences of the loss.
ComponentResult check_softmax_cross_entropy(const GradcheckOptions& options);

/**
 * Whole-model check: loss = softmax cross-entropy of the model's logits;
 * compares `num_params` randomly chosen learned scalars.
 */
ComponentResult check_model(const std::string& name, Model<double>& model, const Tensor<double>& input,
		const std::vector<int>& labels, Mode mode, int num_params, const GradcheckOptions& options);

/// Every layer and activation kind, reborn under both batch-norm modes.
std::vector<GradcheckCase> standard_gradcheck_cases();

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options = {});

} // namespace reborn

#endif // REBORN_GRADCHECK_HPP_
