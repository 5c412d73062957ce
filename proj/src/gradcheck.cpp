#include "reborn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "reborn/activations.hpp"
#include "reborn/layers.hpp"

namespace reborn {
namespace {

Tensor<double> random_normal(const Shape& shape, Rng& rng, double scale = 1.0) {
	Tensor<double> t(shape);
	for (double& v : t.values()) v = scale * rng.normal();
	return t;
}

Tensor<double> random_input(const Shape& shape, Rng& rng, double min_abs) {
	Tensor<double> t = random_normal(shape, rng);
	const double gap = 10 * min_abs;
	for (double& v : t.values())
		if (std::abs(v) < gap) v = std::copysign(gap + std::abs(v), v);
	return t;
}

void randomize(Tensor<double>& t, Rng& rng, double scale) {
	for (double& v : t.values()) v = scale * rng.normal();
}

struct Tracker {
	const GradcheckOptions& opt;
	ComponentResult& result;

	void compare(double analytic, double numeric, const std::string& where) {
		const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.denom_floor});
		const double rel = std::abs(analytic - numeric) / denom;
		++result.checks;
		if (!(rel <= result.worst_rel_error)) {    // also catches NaN
			result.worst_rel_error = std::isnan(rel) ? INFINITY : rel;
			result.worst_location = where;
		}
	}
};

} // namespace

bool GradcheckReport::passed() const {
	return std::all_of(components.begin(), components.end(), [](const ComponentResult& c) { return c.passed; });
}

void GradcheckReport::print(std::ostream& os) const {
	os << std::left << std::setw(28) << "component" << std::setw(14) << "worst_rel" << std::setw(10) << "checks"
	   << "result\n";
	for (const auto& c : components) {
		os << std::left << std::setw(28) << c.name << std::setw(14) << std::scientific << std::setprecision(3)
		   << c.worst_rel_error << std::defaultfloat << std::setw(10) << c.checks << (c.passed ? "PASS" : "FAIL");
		if (!c.passed && !c.worst_location.empty()) os << "  (worst at " << c.worst_location << ")";
		os << '\n';
	}
	os << (passed() ? "all components passed" : "gradient check FAILED") << '\n';
}

ComponentResult check_component(const GradcheckCase& test, const GradcheckOptions& opt) {
	ComponentResult result;
	result.name = test.name;
	Tracker track{opt, result};
	const double h = opt.step;
	for (int trial = 0; trial < opt.trials; ++trial) {
		Rng rng = Rng(opt.seed).derive(test.name).derive(std::uint64_t(trial));
		ModulePtr<double> module = test.make(rng);
		Tensor<double> x = random_input(test.input_shape, rng, opt.min_abs_input);
		const Tensor<double> y = random_normal(module->output_shape(x.shape()), rng);

		auto loss = [&]() {
			if (test.before_forward) test.before_forward(*module);
			return dot(y, module->forward(x, test.mode));
		};

		module->zero_grad();
		loss();
		const Tensor<double> grad_in = module->backward(y);

		ParamList<double> params;
		module->collect("", params);
		std::vector<Tensor<double>> analytic;
		for (const auto& p : params)
			if (p.learnable()) analytic.push_back(*p.grad);

		for (Index i = 0; i < x.size(); ++i) {
			const double saved = x[i];
			x[i] = saved + h;
			const double lp = loss();
			x[i] = saved - h;
			const double lm = loss();
			x[i] = saved;
			track.compare(grad_in[i], (lp - lm) / (2 * h), "input[" + std::to_string(i) + "]");
		}
		std::size_t k = 0;
		for (const auto& p : params) {
			if (!p.learnable()) continue;
			Tensor<double>& w = *p.value;
			for (Index i = 0; i < w.size(); ++i) {
				const double saved = w[i];
				w[i] = saved + h;
				const double lp = loss();
				w[i] = saved - h;
				const double lm = loss();
				w[i] = saved;
				track.compare(analytic[k][i], (lp - lm) / (2 * h), p.name + "[" + std::to_string(i) + "]");
			}
			++k;
		}
		++result.trials;
	}
	result.passed = result.trials >= 1 && result.worst_rel_error < opt.tolerance;
	return result;
}

ComponentResult check_softmax_cross_entropy(const GradcheckOptions& opt) {
	ComponentResult result;
	result.name = "softmax_cross_entropy";
	Tracker track{opt, result};
	const double h = opt.step;
	for (int trial = 0; trial < opt.trials; ++trial) {
		Rng rng = Rng(opt.seed).derive(result.name).derive(std::uint64_t(trial));
		Tensor<double> logits = random_normal(Shape{4, 7}, rng, 2.0);
		std::vector<int> labels(4);
		for (int& l : labels) l = static_cast<int>(rng.below(7));
		const auto analytic = softmax_cross_entropy(logits, labels);
		for (Index i = 0; i < logits.size(); ++i) {
			const double saved = logits[i];
			logits[i] = saved + h;
			const double lp = softmax_cross_entropy(logits, labels).loss;
			logits[i] = saved - h;
			const double lm = softmax_cross_entropy(logits, labels).loss;
			logits[i] = saved;
			track.compare(analytic.grad_logits[i], (lp - lm) / (2 * h), "logits[" + std::to_string(i) + "]");
		}
		++result.trials;
	}
	result.passed = result.worst_rel_error < opt.tolerance;
	return result;
}

ComponentResult check_model(const std::string& name, Model<double>& model, const Tensor<double>& input,
		const std::vector<int>& labels, Mode mode, int num_params, const GradcheckOptions& opt) {
	ComponentResult result;
	result.name = name;
	Tracker track{opt, result};
	const double h = opt.step;
	auto loss = [&]() { return softmax_cross_entropy(model.forward(input, mode), labels).loss; };

	model.zero_grad();
	const auto fwd = softmax_cross_entropy(model.forward(input, mode), labels);
	model.backward(fwd.grad_logits);

	auto params = model.parameters();
	Rng rng = Rng(opt.seed).derive(name);
	for (int j = 0; j < num_params; ++j) {
		auto& p = params[rng.below(params.size())];
		const Index i = Index(rng.below(std::uint64_t(p.value->size())));
		const double analytic = (*p.grad)[i];
		const double saved = (*p.value)[i];
		(*p.value)[i] = saved + h;
		const double lp = loss();
		(*p.value)[i] = saved - h;
		const double lm = loss();
		(*p.value)[i] = saved;
		track.compare(analytic, (lp - lm) / (2 * h), p.name + "[" + std::to_string(i) + "]");
	}
	result.trials = 1;
	result.passed = result.worst_rel_error < opt.tolerance;
	return result;
}

std::vector<GradcheckCase> standard_gradcheck_cases() {
	using M = ModulePtr<double>;
	std::vector<GradcheckCase> cases;

	struct ConvCfg {
		Index kernel, stride, padding;
		bool bias;
	};
	for (const ConvCfg c : {ConvCfg{3, 1, 1, true}, ConvCfg{3, 2, 1, true}, ConvCfg{1, 1, 0, true}, ConvCfg{3, 2, 0, false}}) {
		const std::string tag = "k" + std::to_string(c.kernel) + "s" + std::to_string(c.stride) + "p" + std::to_string(c.padding);
		cases.push_back({"conv2d_" + tag, Shape{2, 3, 5, 5}, Mode::train, [c](Rng& rng) -> M {
			auto m = std::make_unique<Conv2d<double>>(3, 4, c.kernel, c.stride, c.padding, c.bias);
			randomize(m->weight, rng, 0.5);
			if (c.bias) randomize(m->bias, rng, 0.5);
			return m;
		}, {}});
		cases.push_back({"conv_transpose2d_" + tag, Shape{2, 3, 4, 4}, Mode::train, [c](Rng& rng) -> M {
			auto m = std::make_unique<ConvTranspose2d<double>>(3, 4, c.kernel, c.stride, c.padding, c.bias);
			randomize(m->weight, rng, 0.5);
			if (c.bias) randomize(m->bias, rng, 0.5);
			return m;
		}, {}});
	}

	auto make_bn = [](bool eval) {
		return [eval](Rng& rng) -> M {
			auto m = std::make_unique<BatchNorm2d<double>>(4);
			for (double& v : m->gamma.values()) v = rng.uniform(0.5, 1.5);
			randomize(m->beta, rng, 0.5);
			if (eval) {
				randomize(m->running_mean, rng, 0.5);
				for (double& v : m->running_var.values()) v = rng.uniform(0.5, 2.0);
			}
			return m;
		};
	};
	cases.push_back({"batch_norm2d_train", Shape{3, 4, 3, 3}, Mode::train, make_bn(false), {}});
	cases.push_back({"batch_norm2d_eval", Shape{3, 4, 3, 3}, Mode::eval, make_bn(true), {}});

	cases.push_back({"linear", Shape{3, 7}, Mode::train, [](Rng& rng) -> M {
		auto m = std::make_unique<Linear<double>>(7, 5);
		randomize(m->weight, rng, 0.5);
		randomize(m->bias, rng, 0.5);
		return m;
	}, {}});
	cases.push_back({"global_avg_pool", Shape{2, 3, 4, 4}, Mode::train,
			[](Rng&) -> M { return std::make_unique<GlobalAvgPool<double>>(); }, {}});
	cases.push_back({"flatten", Shape{2, 3, 2, 2}, Mode::train,
			[](Rng&) -> M { return std::make_unique<Flatten<double>>(); }, {}});

	const Shape act_shape{2, 3, 4, 4};
	for (const char* spec : {"relu", "leaky:0.01", "prelu", "elu:1.0", "selu", "celu:1.0", "crelu"}) {
		const ActivationSpec parsed = ActivationSpec::parse(spec);
		cases.push_back({"act_" + parsed.str(), act_shape, Mode::train, [parsed](Rng& rng) -> M {
			auto inst = make_activation<double>(parsed, 3, rng);
			if (auto* p = dynamic_cast<PRelu<double>*>(inst.module.get())) randomize(p->slope, rng, 0.3);
			return std::move(inst.module);
		}, {}});
	}
	const ActivationSpec rrelu = ActivationSpec::parse("rrelu");
	auto make_rrelu = [rrelu](Rng& rng) -> M { return make_activation<double>(rrelu, 3, rng).module; };
	cases.push_back({"act_rrelu_eval", act_shape, Mode::eval, make_rrelu, {}});
	cases.push_back({"act_rrelu_train", act_shape, Mode::train, make_rrelu,
			[](Module<double>& m) { static_cast<RRelu<double>&>(m).reseed(Rng(99)); }});

	auto make_reborn = [](bool compress, bool eval) {
		return [compress, eval](Rng& rng) -> M {
			RebornConfig cfg;
			cfg.compress = compress;
			auto block = std::make_unique<RebornBlock<double>>(4, cfg);
			randomize(block->deconv.weight, rng, 0.4);
			for (double& v : block->bn.gamma.values()) v = rng.uniform(0.5, 1.5);
			randomize(block->bn.beta, rng, 0.5);
			if (eval) {
				randomize(block->bn.running_mean, rng, 0.5);
				for (double& v : block->bn.running_var.values()) v = rng.uniform(0.5, 2.0);
			}
			if (block->compress) {
				randomize(block->compress->weight, rng, 0.5);
				randomize(block->compress->bias, rng, 0.5);
			}
			return block;
		};
	};
	cases.push_back({"reborn_bn_train", Shape{2, 4, 5, 5}, Mode::train, make_reborn(true, false), {}});
	cases.push_back({"reborn_bn_eval", Shape{2, 4, 5, 5}, Mode::eval, make_reborn(true, true), {}});
	cases.push_back({"reborn_nc_bn_train", Shape{2, 4, 5, 5}, Mode::train, make_reborn(false, false), {}});
	cases.push_back({"reborn_nc_bn_eval", Shape{2, 4, 5, 5}, Mode::eval, make_reborn(false, true), {}});
	return cases;
}

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options) {
	GradcheckReport report;
	for (const auto& c : standard_gradcheck_cases()) report.components.push_back(check_component(c, options));
	report.components.push_back(check_softmax_cross_entropy(options));
	return report;
}

} // namespace reborn
