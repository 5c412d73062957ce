#include "reborn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace reborn {

double xavier_bound(Index fan_in, Index fan_out) {
	if (fan_in < 1 || fan_out < 1)
		throw std::invalid_argument("xavier: fans must be >= 1, got " + std::to_string(fan_in) + ", " +
				std::to_string(fan_out));
	return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template<typename Scalar>
Tensor<Scalar> xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, Rng& rng) {
	const double a = xavier_bound(fan_in, fan_out);
	Tensor<Scalar> t(shape);
	for (Scalar& v : t.values()) v = static_cast<Scalar>(rng.uniform(-a, a));
	return t;
}

template<typename Scalar>
void xavier_conv_(Tensor<Scalar>& weight, Rng& rng) {
	const Shape& s = weight.shape();
	require_rank4(s, "xavier_conv_");
	const Index area = s[2] * s[3];
	weight = xavier_uniform<Scalar>(s, s[1] * area, s[0] * area, rng);
}

template<typename Scalar>
void xavier_deconv_(Tensor<Scalar>& weight, Rng& rng) {
	const Shape& s = weight.shape();
	require_rank4(s, "xavier_deconv_");
	const Index area = s[2] * s[3];
	weight = xavier_uniform<Scalar>(s, s[0] * area, s[1] * area, rng);
}

template<typename Scalar>
void xavier_linear_(Tensor<Scalar>& weight, Rng& rng) {
	const Shape& s = weight.shape();
	if (s.rank() != 2) throw ShapeError("xavier_linear_: expected rank 2, got " + s.str());
	weight = xavier_uniform<Scalar>(s, s[1], s[0], rng);
}

template<typename Scalar>
Sgd<Scalar>::Sgd(ParamList<Scalar> params, SgdOptions options) : options_(options) {
	if (!(options.lr > 0)) throw std::invalid_argument("sgd: lr must be positive");
	if (options.momentum < 0 || options.momentum >= 1) throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
	if (options.weight_decay < 0) throw std::invalid_argument("sgd: weight_decay must be >= 0");
	for (auto& p : params) {
		if (!p.learnable()) continue;
		require_same_shape(p.value->shape(), p.grad->shape(), "sgd parameter/gradient");
		velocity_.emplace_back(p.value->shape());
		params_.push_back(p);
	}
}

template<typename Scalar>
void Sgd<Scalar>::step() {
	const Scalar lr = static_cast<Scalar>(options_.lr);
	const Scalar mu = static_cast<Scalar>(options_.momentum);
	for (std::size_t i = 0; i < params_.size(); ++i) {
		auto& p = params_[i];
		require_same_shape(p.value->shape(), p.grad->shape(), "sgd step");
		const bool decay = p.kind != ParamKind::norm_affine || options_.decay_norm_params;
		const Scalar wd = decay ? static_cast<Scalar>(options_.weight_decay) : Scalar(0);
		auto& v = velocity_[i].vec();
		v = mu * v + p.grad->vec() + wd * p.value->vec();
		p.value->vec() -= lr * v;
		p.grad->fill(Scalar(0));
	}
}

template<typename Scalar>
void Sgd<Scalar>::zero_grad() {
	for (auto& p : params_) p.grad->fill(Scalar(0));
}

template<typename Scalar>
NamedTensors<Scalar> Sgd<Scalar>::state() const {
	NamedTensors<Scalar> out;
	for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back("velocity." + params_[i].name, velocity_[i]);
	return out;
}

template<typename Scalar>
void Sgd<Scalar>::load_state(const NamedTensors<Scalar>& state) {
	std::unordered_map<std::string, const Tensor<Scalar>*> by_name;
	for (const auto& [name, t] : state) by_name[name] = &t;
	for (std::size_t i = 0; i < params_.size(); ++i) {
		const auto it = by_name.find("velocity." + params_[i].name);
		if (it == by_name.end()) throw std::runtime_error("sgd state lacks velocity for " + params_[i].name);
		require_same_shape(it->second->shape(), velocity_[i].shape(), "sgd velocity");
		velocity_[i] = *it->second;
	}
}

double LrSchedule::lr_at_epoch(int epoch) const {
	if (total_epochs < 1) throw std::invalid_argument("lr schedule: total_epochs must be >= 1");
	if (epoch < 0 || epoch >= total_epochs)
		throw std::out_of_range("lr schedule: epoch " + std::to_string(epoch) + " outside [0, " +
				std::to_string(total_epochs) + ")");
	return epoch < drop_epoch() ? base_lr : drop_lr;
}

#define REBORN_INSTANTIATE(T) \
	template Tensor<T> xavier_uniform<T>(const Shape&, Index, Index, Rng&); \
	template void xavier_conv_<T>(Tensor<T>&, Rng&); \
	template void xavier_deconv_<T>(Tensor<T>&, Rng&); \
	template void xavier_linear_<T>(Tensor<T>&, Rng&); \
	template class Sgd<T>;

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
