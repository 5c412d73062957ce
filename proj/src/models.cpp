#include "reborn/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "reborn/layers.hpp"
#include "reborn/optim.hpp"

namespace reborn {
namespace {

constexpr Index kConvNet8Widths[8] = {32, 32, 64, 64, 128, 128, 256, 256};
constexpr Index kConvNet8Strides[8] = {1, 1, 2, 1, 2, 1, 2, 1};
constexpr Index kFcWidths[2] = {512, 128};

std::string activation_stage_name(const ActivationSpec& spec, int block) {
	std::string kind = spec.str();
	kind = kind.substr(0, kind.find(':'));
	if (kind == "reborn-nc") kind = "reborn";
	return kind + std::to_string(block);
}

template<typename Scalar>
std::unique_ptr<Conv2d<Scalar>> make_conv(Index in, Index out, Index stride, bool bias, Rng& rng) {
	auto conv = std::make_unique<Conv2d<Scalar>>(in, out, 3, stride, 1, bias);
	xavier_conv_(conv->weight, rng);
	return conv;
}

template<typename Scalar>
std::unique_ptr<Linear<Scalar>> make_linear(Index in, Index out, Rng& rng) {
	auto fc = std::make_unique<Linear<Scalar>>(in, out);
	xavier_linear_(fc->weight, rng);
	return fc;
}

// conv -> [bn] -> activation [-> extension conv]; returns the channel count fed onward.
template<typename Scalar>
Index add_conv_block(Model<Scalar>& m, const ModelConfig& cfg, int block, Index in, Index width, Index stride,
		bool extended, Rng& rng) {
	const std::string id = std::to_string(block);
	m.add("conv" + id, StageRole::conv, block, make_conv<Scalar>(in, width, stride, !cfg.batch_norm, rng));
	if (cfg.batch_norm) m.add("bn" + id, StageRole::norm, block, std::make_unique<BatchNorm2d<Scalar>>(width));
	auto act = make_activation<Scalar>(cfg.activation, width, rng, std::uint64_t(block));
	m.add(activation_stage_name(cfg.activation, block), StageRole::activation, block, std::move(act.module));
	if (!extended) return act.out_channels;
	m.add("ext" + id, StageRole::extension_conv, block, make_conv<Scalar>(act.out_channels, width, 1, true, rng));
	return width;
}

template<typename Scalar>
Model<Scalar> build_convnet8_impl(const ModelConfig& cfg, Rng& rng, bool extended) {
	if (cfg.input_size != 28 && cfg.input_size != 32)
		throw std::invalid_argument("convnet8: input size must be 28 or 32, got " + std::to_string(cfg.input_size));
	if (cfg.num_classes < 1 || cfg.input_channels < 1) throw std::invalid_argument("convnet8: invalid class/channel count");
	Model<Scalar> m(cfg);
	Index channels = cfg.input_channels;
	Index spatial = cfg.input_size;
	for (int i = 0; i < 8; ++i) {
		const Index width = scaled_width(kConvNet8Widths[i], cfg.width_mult);
		channels = add_conv_block(m, cfg, i + 1, channels, width, kConvNet8Strides[i], extended, rng);
		spatial = conv_out_extent(spatial, 3, kConvNet8Strides[i], 1);
	}
	m.add("flatten", StageRole::flatten, 0, std::make_unique<Flatten<Scalar>>());
	Index features = channels * spatial * spatial;
	for (int i = 0; i < 2; ++i) {
		const std::string id = std::to_string(i + 1);
		m.add("fc" + id, StageRole::linear, 0, make_linear<Scalar>(features, kFcWidths[i], rng));
		m.add("fc_relu" + id, StageRole::head_activation, 0,
				std::make_unique<PointwiseActivation<Scalar>>(PointwiseActivation<Scalar>::Kind::relu));
		features = kFcWidths[i];
	}
	m.add("fc3", StageRole::linear, 0, make_linear<Scalar>(features, cfg.num_classes, rng));
	return m;
}

std::string format_double(double v) {
	std::ostringstream os;
	os << v;
	return os.str();
}

} // namespace

Arch parse_arch(std::string_view text) {
	if (text == "convnet8") return Arch::convnet8;
	if (text == "viznet5") return Arch::viznet5;
	if (text == "convnet8-extended") return Arch::convnet8_extended;
	throw std::invalid_argument("unknown architecture '" + std::string(text) + "'");
}

std::string arch_name(Arch arch) {
	switch (arch) {
	case Arch::convnet8: return "convnet8";
	case Arch::viznet5: return "viznet5";
	case Arch::convnet8_extended: return "convnet8-extended";
	}
	return "?";
}

std::string ModelConfig::header() const {
	return "arch=" + arch_name(arch) + " activation=" + activation.str() + " width=" + format_double(width_mult) +
			" num_classes=" + std::to_string(num_classes) + " input_channels=" + std::to_string(input_channels) +
			" input_size=" + std::to_string(input_size) + " bn=" + (batch_norm ? "1" : "0");
}

ModelConfig ModelConfig::from_header(std::string_view line) {
	ModelConfig cfg;
	std::istringstream is{std::string(line)};
	std::string item;
	auto to_int = [](const std::string& key, const std::string& v) {
		long long out{};
		const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
		if (ec != std::errc() || ptr != v.data() + v.size())
			throw std::invalid_argument("model header: bad integer for " + key + ": '" + v + "'");
		return out;
	};
	bool saw_arch = false;
	while (is >> item) {
		const auto eq = item.find('=');
		if (eq == std::string::npos) throw std::invalid_argument("model header: expected key=value, got '" + item + "'");
		const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
		if (key == "arch") {
			cfg.arch = parse_arch(value);
			saw_arch = true;
		} else if (key == "activation") {
			cfg.activation = ActivationSpec::parse(value);
		} else if (key == "width") {
			double w{};
			const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), w);
			if (ec != std::errc() || ptr != value.data() + value.size())
				throw std::invalid_argument("model header: bad width '" + value + "'");
			cfg.width_mult = w;
		} else if (key == "num_classes") {
			cfg.num_classes = static_cast<int>(to_int(key, value));
		} else if (key == "input_channels") {
			cfg.input_channels = to_int(key, value);
		} else if (key == "input_size") {
			cfg.input_size = to_int(key, value);
		} else if (key == "bn") {
			cfg.batch_norm = to_int(key, value) != 0;
		}
		// Unknown keys are ignored so headers can grow.
	}
	if (!saw_arch) throw std::invalid_argument("model header lacks arch=");
	return cfg;
}

Index scaled_width(Index base, double width_mult) {
	if (!(width_mult > 0)) throw std::invalid_argument("width multiplier must be positive");
	return std::max<Index>(1, static_cast<Index>(std::floor(static_cast<double>(base) * width_mult)));
}

template<typename Scalar>
void Model<Scalar>::add(std::string name, StageRole role, int block, ModulePtr<Scalar> module) {
	for (const auto& s : stages_)
		if (s.name == name) throw std::invalid_argument("duplicate stage name '" + name + "'");
	stages_.push_back({std::move(name), role, block, std::move(module)});
}

template<typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& x, Mode mode) {
	Tensor<Scalar> h = x;
	for (auto& s : stages_) h = s.module->forward(h, mode);
	return h;
}

template<typename Scalar>
Tensor<Scalar> Model<Scalar>::backward(const Tensor<Scalar>& grad_logits) {
	Tensor<Scalar> g = grad_logits;
	for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) g = it->module->backward(g);
	return g;
}

template<typename Scalar>
Tensor<Scalar> Model<Scalar>::forward_to_activation(const Tensor<Scalar>& x, int block, Mode mode) {
	Tensor<Scalar> h = x;
	for (auto& s : stages_) {
		h = s.module->forward(h, mode);
		if (s.role == StageRole::activation && s.block == block) return h;
	}
	throw std::out_of_range("model has no activation for conv block " + std::to_string(block));
}

template<typename Scalar>
ParamList<Scalar> Model<Scalar>::tensors() {
	ParamList<Scalar> out;
	for (auto& s : stages_) s.module->collect(s.name, out);
	return out;
}

template<typename Scalar>
ParamList<Scalar> Model<Scalar>::parameters() {
	ParamList<Scalar> all = tensors();
	ParamList<Scalar> out;
	for (auto& p : all)
		if (p.learnable()) out.push_back(p);
	return out;
}

template<typename Scalar>
void Model<Scalar>::zero_grad() {
	for (auto& s : stages_) s.module->zero_grad();
}

template<typename Scalar>
std::vector<Shape> Model<Scalar>::trace_shapes(const Shape& in) const {
	std::vector<Shape> out;
	Shape s = in;
	for (const auto& st : stages_) {
		try {
			s = st.module->output_shape(s);
		} catch (const ShapeError& e) {
			throw ShapeError("stage '" + st.name + "': " + e.what());
		}
		out.push_back(s);
	}
	return out;
}

template<typename Scalar>
int Model<Scalar>::conv_layer_count() const {
	return static_cast<int>(std::count_if(stages_.begin(), stages_.end(), [](const Stage<Scalar>& s) {
		return s.role == StageRole::conv || s.role == StageRole::extension_conv;
	}));
}

template<typename Scalar>
std::vector<Index> Model<Scalar>::conv_widths() const {
	std::vector<Index> out;
	for (const auto& s : stages_)
		if (s.role == StageRole::conv) out.push_back(static_cast<const Conv2d<Scalar>&>(*s.module).out_channels());
	return out;
}

template<typename Scalar>
Model<Scalar> build_convnet8(const ModelConfig& config, Rng& rng) {
	return build_convnet8_impl<Scalar>(config, rng, false);
}

template<typename Scalar>
Model<Scalar> build_convnet8_extended(const ModelConfig& config, Rng& rng) {
	return build_convnet8_impl<Scalar>(config, rng, true);
}

template<typename Scalar>
Model<Scalar> build_viznet5(const ModelConfig& cfg, Rng& rng) {
	if (cfg.input_size < 16) throw std::invalid_argument("viznet5: input size must be >= 16");
	Model<Scalar> m(cfg);
	Index channels = cfg.input_channels;
	for (int n = 1; n <= 5; ++n) {
		const Index width = scaled_width(Index(1) << (n + 4), cfg.width_mult);
		channels = add_conv_block(m, cfg, n, channels, width, n == 1 ? 1 : 2, false, rng);
	}
	m.add("pool", StageRole::pool, 0, std::make_unique<GlobalAvgPool<Scalar>>());
	m.add("fc", StageRole::linear, 0, make_linear<Scalar>(channels, cfg.num_classes, rng));
	return m;
}

template<typename Scalar>
Model<Scalar> build_model(const ModelConfig& config, Rng& rng) {
	switch (config.arch) {
	case Arch::convnet8: return build_convnet8<Scalar>(config, rng);
	case Arch::viznet5: return build_viznet5<Scalar>(config, rng);
	case Arch::convnet8_extended: return build_convnet8_extended<Scalar>(config, rng);
	}
	throw std::invalid_argument("unknown architecture");
}

template<typename Scalar>
Index count_params(Model<Scalar>& model, ParamFilter filter) {
	Index total = 0;
	for (const auto& p : model.parameters())
		if (filter == ParamFilter::all || p.kind == ParamKind::conv_weight) total += p.value->size();
	return total;
}

#define REBORN_INSTANTIATE(T) \
	template class Model<T>; \
	template Model<T> build_convnet8<T>(const ModelConfig&, Rng&); \
	template Model<T> build_viznet5<T>(const ModelConfig&, Rng&); \
	template Model<T> build_convnet8_extended<T>(const ModelConfig&, Rng&); \
	template Model<T> build_model<T>(const ModelConfig&, Rng&); \
	template Index count_params<T>(Model<T>&, ParamFilter);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
