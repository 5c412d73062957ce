#include "reborn/activations.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "reborn/optim.hpp"

namespace reborn {
namespace {

template<class... Ts>
struct overloaded : Ts... {
	using Ts::operator()...;
};
template<class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string_view> split(std::string_view s, char sep) {
	std::vector<std::string_view> parts;
	std::size_t start = 0;
	for (;;) {
		const std::size_t pos = s.find(sep, start);
		parts.push_back(s.substr(start, pos - start));
		if (pos == std::string_view::npos) break;
		start = pos + 1;
	}
	return parts;
}

double parse_param(std::string_view text, std::string_view spec) {
	double v{};
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
	if (ec != std::errc() || ptr != text.data() + text.size())
		throw std::invalid_argument("activation '" + std::string(spec) + "': bad parameter '" + std::string(text) + "'");
	return v;
}

std::string fmt(double v) {
	std::ostringstream os;
	os << v;
	return os.str();
}

} // namespace

void RebornConfig::validate() const {
	if (deconv_kernel < 1 || deconv_stride < 1 || deconv_padding < 0)
		throw std::invalid_argument("reborn: invalid deconv hyperparameters");
	// (H - 1) s - 2p + k == H for every H needs s == 1 and k == 2p + 1.
	if (deconv_stride != 1 || deconv_kernel != 2 * deconv_padding + 1)
		throw std::invalid_argument("reborn: deconv must preserve spatial extent (stride 1, kernel == 2*padding+1)");
	if (decay_ratio != 2)
		throw std::invalid_argument("reborn: decay ratio must be 2 (two concatenated slabs compressed back to C)");
}

ActivationSpec ActivationSpec::parse(std::string_view text) {
	const auto parts = split(text, ':');
	const std::string_view name = parts.front();
	const std::size_t nparams = parts.size() - 1;
	auto param = [&](std::size_t i, double fallback) {
		return i < nparams ? parse_param(parts[i + 1], text) : fallback;
	};
	auto max_params = [&](std::size_t n) {
		if (nparams > n)
			throw std::invalid_argument("activation '" + std::string(text) + "': too many parameters");
	};

	ActivationSpec spec;
	if (name == "relu") {
		max_params(0);
		spec.kind = act::Relu{};
	} else if (name == "leaky" || name == "leaky_relu") {
		max_params(1);
		spec.kind = act::LeakyRelu{param(0, 0.01)};
	} else if (name == "prelu") {
		max_params(1);
		spec.kind = act::PRelu{param(0, 0.25)};
	} else if (name == "rrelu") {
		max_params(2);
		spec.kind = act::RRelu{param(0, 1.0 / 8.0), param(1, 1.0 / 3.0)};
	} else if (name == "elu") {
		max_params(1);
		spec.kind = act::Elu{param(0, 1.0)};
	} else if (name == "selu") {
		max_params(0);
		spec.kind = act::Selu{};
	} else if (name == "celu") {
		max_params(1);
		spec.kind = act::Celu{param(0, 1.0)};
	} else if (name == "crelu") {
		max_params(0);
		spec.kind = act::CRelu{};
	} else if (name == "reborn" || name == "reborn-nc") {
		max_params(0);
		RebornConfig cfg;
		cfg.compress = name == "reborn";
		spec.kind = act::Reborn{cfg};
	} else {
		throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
	}
	spec.validate();
	return spec;
}

std::string ActivationSpec::str() const {
	return std::visit(overloaded{
			[](const act::Relu&) -> std::string { return "relu"; },
			[](const act::LeakyRelu& a) -> std::string { return "leaky:" + fmt(a.slope); },
			[](const act::PRelu& a) -> std::string { return a.init == 0.25 ? "prelu" : "prelu:" + fmt(a.init); },
			[](const act::RRelu& a) -> std::string { return "rrelu:" + fmt(a.lower) + ":" + fmt(a.upper); },
			[](const act::Elu& a) -> std::string { return "elu:" + fmt(a.alpha); },
			[](const act::Selu&) -> std::string { return "selu"; },
			[](const act::Celu& a) -> std::string { return "celu:" + fmt(a.alpha); },
			[](const act::CRelu&) -> std::string { return "crelu"; },
			[](const act::Reborn& a) -> std::string { return a.config.compress ? "reborn" : "reborn-nc"; },
	}, kind);
}

void ActivationSpec::validate() const {
	std::visit(overloaded{
			[](const act::RRelu& a) {
				if (!(0 <= a.lower && a.lower < a.upper && a.upper < 1))
					throw std::invalid_argument("rrelu: bounds must satisfy 0 <= lower < upper < 1");
			},
			[](const act::Elu& a) {
				if (!(a.alpha > 0)) throw std::invalid_argument("elu: alpha must be positive");
			},
			[](const act::Celu& a) {
				if (!(a.alpha > 0)) throw std::invalid_argument("celu: alpha must be positive");
			},
			[](const act::Reborn& a) { a.config.validate(); },
			[](const auto&) {},
	}, kind);
}

Index ActivationSpec::output_channels(Index channels) const {
	if (std::holds_alternative<act::CRelu>(kind)) return 2 * channels;
	if (const auto* r = std::get_if<act::Reborn>(&kind); r && !r->config.compress) return 2 * channels;
	return channels;
}

// ---------------------------------------------------------------------------

template<typename Scalar>
PointwiseActivation<Scalar>::PointwiseActivation(Kind kind, Scalar param) : kind_(kind), param_(param) {}

template<typename Scalar>
std::string PointwiseActivation<Scalar>::kind() const {
	switch (kind_) {
	case Kind::relu: return "relu";
	case Kind::leaky_relu: return "leaky_relu";
	case Kind::elu: return "elu";
	case Kind::selu: return "selu";
	case Kind::celu: return "celu";
	}
	return "?";
}

template<typename Scalar>
Scalar PointwiseActivation<Scalar>::value(Scalar x) const {
	switch (kind_) {
	case Kind::relu: return x > 0 ? x : Scalar(0);
	case Kind::leaky_relu: return x > 0 ? x : param_ * x;
	case Kind::elu: return x > 0 ? x : param_ * std::expm1(x);
	case Kind::selu:
		return static_cast<Scalar>(kSeluLambda) * (x > 0 ? x : static_cast<Scalar>(kSeluAlpha) * std::expm1(x));
	case Kind::celu: return std::max(Scalar(0), x) + std::min(Scalar(0), param_ * std::expm1(x / param_));
	}
	return x;
}

template<typename Scalar>
Scalar PointwiseActivation<Scalar>::derivative(Scalar x) const {
	switch (kind_) {
	case Kind::relu: return x > 0 ? Scalar(1) : Scalar(0);
	case Kind::leaky_relu: return x > 0 ? Scalar(1) : param_;
	case Kind::elu: return x > 0 ? Scalar(1) : param_ * std::exp(x);
	case Kind::selu:
		return static_cast<Scalar>(kSeluLambda) * (x > 0 ? Scalar(1) : static_cast<Scalar>(kSeluAlpha) * std::exp(x));
	case Kind::celu: return x > 0 ? Scalar(1) : std::exp(x / param_);
	}
	return Scalar(1);
}

template<typename Scalar>
Tensor<Scalar> PointwiseActivation<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	input_ = x;
	if (kind_ == Kind::relu) return relu(x);
	Tensor<Scalar> out(x.shape());
	for (Index i = 0; i < x.size(); ++i) out[i] = value(x[i]);
	return out;
}

template<typename Scalar>
Tensor<Scalar> PointwiseActivation<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError(kind() + " backward called before forward");
	require_same_shape(grad_out.shape(), input_.shape(), "activation backward");
	Tensor<Scalar> grad_in(grad_out.shape());
	for (Index i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * derivative(input_[i]);
	return grad_in;
}

// ---------------------------------------------------------------------------

template<typename Scalar>
PRelu<Scalar>::PRelu(Index channels, Scalar init) : slope(Shape{channels}, init), grad_slope(Shape{channels}) {}

template<typename Scalar>
Shape PRelu<Scalar>::output_shape(const Shape& in) const {
	require_rank4(in, "prelu");
	if (in.c() != slope.size())
		throw ShapeError("prelu: expected " + std::to_string(slope.size()) + " channels, got " + in.str());
	return in;
}

template<typename Scalar>
Tensor<Scalar> PRelu<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	const Shape& s = output_shape(x.shape());
	const Index plane = s.h() * s.w();
	Tensor<Scalar> out(s);
	for (Index n = 0; n < s.n(); ++n)
		for (Index c = 0; c < s.c(); ++c) {
			const Index base = (n * s.c() + c) * plane;
			for (Index i = 0; i < plane; ++i) {
				const Scalar v = x[base + i];
				out[base + i] = v > 0 ? v : slope[c] * v;
			}
		}
	input_ = x;
	return out;
}

template<typename Scalar>
Tensor<Scalar> PRelu<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("prelu backward called before forward");
	require_same_shape(grad_out.shape(), input_.shape(), "prelu backward");
	const Shape& s = input_.shape();
	const Index plane = s.h() * s.w();
	Tensor<Scalar> grad_in(s);
	for (Index c = 0; c < s.c(); ++c) {
		Scalar acc = 0;
		for (Index n = 0; n < s.n(); ++n) {
			const Index base = (n * s.c() + c) * plane;
			for (Index i = 0; i < plane; ++i) {
				const Scalar v = input_[base + i];
				const Scalar g = grad_out[base + i];
				if (v > 0) {
					grad_in[base + i] = g;
				} else {
					grad_in[base + i] = slope[c] * g;
					acc += g * v;
				}
			}
		}
		grad_slope[c] += acc;
	}
	return grad_in;
}

template<typename Scalar>
void PRelu<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	out.push_back({join_name(prefix, "slope"), &slope, &grad_slope, ParamKind::slope});
}

// ---------------------------------------------------------------------------

template<typename Scalar>
RRelu<Scalar>::RRelu(Scalar lower, Scalar upper, Rng rng) : lower_(lower), upper_(upper), rng_(rng) {
	if (!(0 <= lower && lower < upper && upper < 1))
		throw std::invalid_argument("rrelu: bounds must satisfy 0 <= lower < upper < 1");
}

template<typename Scalar>
Tensor<Scalar> RRelu<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
	slopes_ = Tensor<Scalar>(x.shape());
	Tensor<Scalar> out(x.shape());
	const Scalar fixed = (lower_ + upper_) / 2;
	for (Index i = 0; i < x.size(); ++i) {
		// One draw per element in train mode, negative or not, so the stream
		// position depends on the tensor size only.
		const Scalar a = mode == Mode::train ? static_cast<Scalar>(rng_.uniform(lower_, upper_)) : fixed;
		slopes_[i] = x[i] > 0 ? Scalar(1) : a;
		out[i] = slopes_[i] * x[i];
	}
	return out;
}

template<typename Scalar>
Tensor<Scalar> RRelu<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (slopes_.empty()) throw StateError("rrelu backward called before forward");
	return mul(grad_out, slopes_);
}

// ---------------------------------------------------------------------------

template<typename Scalar>
Shape CRelu<Scalar>::output_shape(const Shape& in) const {
	require_rank4(in, "crelu");
	return Shape{in.n(), 2 * in.c(), in.h(), in.w()};
}

template<typename Scalar>
Tensor<Scalar> CRelu<Scalar>::forward(const Tensor<Scalar>& x, Mode) {
	require_rank4(x.shape(), "crelu");
	input_ = x;
	return concat_channels<Scalar>({relu(x), relu(negate(x))});
}

template<typename Scalar>
Tensor<Scalar> CRelu<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("crelu backward called before forward");
	require_same_shape(grad_out.shape(), output_shape(input_.shape()), "crelu backward");
	const Index c = input_.shape().c();
	const Tensor<Scalar> g_pos = slice_channels(grad_out, 0, c);
	const Tensor<Scalar> g_neg = slice_channels(grad_out, c, 2 * c);
	Tensor<Scalar> grad_in(input_.shape());
	for (Index i = 0; i < grad_in.size(); ++i) {
		const Scalar v = input_[i];
		grad_in[i] = v > 0 ? g_pos[i] : (v < 0 ? -g_neg[i] : Scalar(0));
	}
	return grad_in;
}

// ---------------------------------------------------------------------------

template<typename Scalar>
RebornBlock<Scalar>::RebornBlock(Index channels, const RebornConfig& config)
	: deconv(channels, channels, config.deconv_kernel, config.deconv_stride, config.deconv_padding, false),
	  bn(channels),
	  config_(config) {
	config.validate();
	if (config.compress) compress.emplace(config.decay_ratio * channels, channels, 1, 1, 0, true);
}

template<typename Scalar>
Shape RebornBlock<Scalar>::output_shape(const Shape& in) const {
	require_rank4(in, "reborn");
	if (in.c() != channels())
		throw ShapeError("reborn: block built for " + std::to_string(channels()) + " channels, got " + in.str());
	return Shape{in.n(), config_.compress ? in.c() : 2 * in.c(), in.h(), in.w()};
}

template<typename Scalar>
Tensor<Scalar> RebornBlock<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
	output_shape(x.shape());
	input_ = x;
	Tensor<Scalar> positive = relu(x);
	Tensor<Scalar> reborn = bn.forward(deconv.forward(negative_part(x), mode), mode);
	Tensor<Scalar> joined = concat_channels<Scalar>({std::move(positive), std::move(reborn)});
	return compress ? compress->forward(joined, mode) : joined;
}

template<typename Scalar>
Tensor<Scalar> RebornBlock<Scalar>::backward(const Tensor<Scalar>& grad_out) {
	if (input_.empty()) throw StateError("reborn backward called before forward");
	require_same_shape(grad_out.shape(), output_shape(input_.shape()), "reborn backward");
	const Tensor<Scalar> grad_joined = compress ? compress->backward(grad_out) : grad_out;
	const Index c = channels();
	const Tensor<Scalar> g_pos = slice_channels(grad_joined, 0, c);
	const Tensor<Scalar> g_neg = deconv.backward(bn.backward(slice_channels(grad_joined, c, 2 * c)));
	// d relu / dx = [x > 0], d min(x, 0) / dx = [x < 0].
	Tensor<Scalar> grad_in(input_.shape());
	for (Index i = 0; i < grad_in.size(); ++i) {
		const Scalar v = input_[i];
		grad_in[i] = v > 0 ? g_pos[i] : (v < 0 ? g_neg[i] : Scalar(0));
	}
	return grad_in;
}

template<typename Scalar>
void RebornBlock<Scalar>::collect(const std::string& prefix, ParamList<Scalar>& out) {
	deconv.collect(join_name(prefix, "deconv"), out);
	bn.collect(join_name(prefix, "bn"), out);
	if (compress) compress->collect(join_name(prefix, "compress"), out);
}

// ---------------------------------------------------------------------------

template<typename Scalar>
ActivationInstance<Scalar> make_activation(const ActivationSpec& spec, Index channels, Rng& rng,
		std::uint64_t stream_key) {
	if (channels < 1) throw std::invalid_argument("make_activation: channels must be >= 1");
	spec.validate();
	using PA = PointwiseActivation<Scalar>;
	ModulePtr<Scalar> module = std::visit(overloaded{
			[](const act::Relu&) -> ModulePtr<Scalar> { return std::make_unique<PA>(PA::Kind::relu); },
			[](const act::LeakyRelu& a) -> ModulePtr<Scalar> {
				return std::make_unique<PA>(PA::Kind::leaky_relu, static_cast<Scalar>(a.slope));
			},
			[&](const act::PRelu& a) -> ModulePtr<Scalar> {
				return std::make_unique<PRelu<Scalar>>(channels, static_cast<Scalar>(a.init));
			},
			[&](const act::RRelu& a) -> ModulePtr<Scalar> {
				return std::make_unique<RRelu<Scalar>>(static_cast<Scalar>(a.lower), static_cast<Scalar>(a.upper),
						rng.derive("rrelu").derive(stream_key));
			},
			[](const act::Elu& a) -> ModulePtr<Scalar> {
				return std::make_unique<PA>(PA::Kind::elu, static_cast<Scalar>(a.alpha));
			},
			[](const act::Selu&) -> ModulePtr<Scalar> { return std::make_unique<PA>(PA::Kind::selu); },
			[](const act::Celu& a) -> ModulePtr<Scalar> {
				return std::make_unique<PA>(PA::Kind::celu, static_cast<Scalar>(a.alpha));
			},
			[](const act::CRelu&) -> ModulePtr<Scalar> { return std::make_unique<CRelu<Scalar>>(); },
			[&](const act::Reborn& a) -> ModulePtr<Scalar> {
				auto block = std::make_unique<RebornBlock<Scalar>>(channels, a.config);
				xavier_deconv_(block->deconv.weight, rng);
				if (block->compress) xavier_conv_(block->compress->weight, rng);
				return block;
			},
	}, spec.kind);
	return {std::move(module), spec.output_channels(channels)};
}

#define REBORN_INSTANTIATE(T) \
	template class PointwiseActivation<T>; \
	template class PRelu<T>; \
	template class RRelu<T>; \
	template class CRelu<T>; \
	template class RebornBlock<T>; \
	template ActivationInstance<T> make_activation<T>(const ActivationSpec&, Index, Rng&, std::uint64_t);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
