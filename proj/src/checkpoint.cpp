#include "reborn/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace reborn {
namespace {
constexpr const char* kMagic = "reborn-checkpoint 1";
}

template<typename Scalar>
void write_checkpoint(std::ostream& os, Model<Scalar>& model) {
	os << kMagic << '\n' << model.config().header() << '\n';
	NamedTensors<Scalar> named;
	for (const auto& p : model.tensors()) named.emplace_back(p.name, *p.value);
	write_named(os, named);
}

template<typename Scalar>
void save_checkpoint(const std::filesystem::path& path, Model<Scalar>& model) {
	std::ofstream os(path);
	if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
	write_checkpoint(os, model);
	if (!os) throw std::runtime_error("failed writing " + path.string());
}

template<typename Scalar, typename Stored>
void assign_tensors(Model<Scalar>& model, const NamedTensors<Stored>& tensors) {
	std::unordered_map<std::string, const Tensor<Stored>*> by_name;
	for (const auto& [name, t] : tensors) by_name[name] = &t;
	const auto targets = model.tensors();
	if (targets.size() != tensors.size())
		throw FormatError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
				std::to_string(targets.size()));
	for (const auto& p : targets) {
		const auto it = by_name.find(p.name);
		if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + p.name + "'");
		if (!(it->second->shape() == p.value->shape()))
			throw FormatError("tensor '" + p.name + "' has shape " + it->second->shape().str() + ", model expects " +
					p.value->shape().str());
		*p.value = it->second->template cast<Scalar>();
	}
}

template<typename Scalar>
Model<Scalar> read_checkpoint(std::istream& is) {
	std::string line;
	if (!std::getline(is, line) || line != kMagic) throw FormatError("not a reborn checkpoint");
	if (!std::getline(is, line)) throw FormatError("checkpoint lacks a model header");
	const ModelConfig cfg = ModelConfig::from_header(line);
	Rng rng(0);
	Model<Scalar> model = build_model<Scalar>(cfg, rng);
	assign_tensors(model, read_named<Scalar>(is));
	return model;
}

template<typename Scalar>
Model<Scalar> load_checkpoint(const std::filesystem::path& path) {
	std::ifstream is(path);
	if (!is) throw std::runtime_error("cannot open " + path.string());
	return read_checkpoint<Scalar>(is);
}

#define REBORN_INSTANTIATE(T) \
	template void write_checkpoint<T>(std::ostream&, Model<T>&); \
	template void save_checkpoint<T>(const std::filesystem::path&, Model<T>&); \
	template Model<T> read_checkpoint<T>(std::istream&); \
	template Model<T> load_checkpoint<T>(const std::filesystem::path&); \
	template void assign_tensors<T, float>(Model<T>&, const NamedTensors<float>&); \
	template void assign_tensors<T, double>(Model<T>&, const NamedTensors<double>&);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
