#include "reborn/tensor_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace reborn {
namespace {

template<typename T>
T parse_number(const std::string& token, const char* what) {
	T value{};
	const char* first = token.data();
	const char* last = first + token.size();
	if (!token.empty() && *first == '+') ++first;
	const auto [ptr, ec] = std::from_chars(first, last, value);
	if (ec != std::errc() || ptr != last)
		throw FormatError(std::string("malformed ") + what + ": '" + token + "'");
	return value;
}

std::string next_token(std::istream& is, const char* what) {
	std::string tok;
	if (!(is >> tok)) throw FormatError(std::string("unexpected end of input reading ") + what);
	return tok;
}

} // namespace

template<typename Scalar>
void write_tensor(std::ostream& os, const Tensor<Scalar>& t) {
	const Shape& s = t.shape();
	os << s.rank() << '\n';
	for (int i = 0; i < s.rank(); ++i) os << (i ? " " : "") << s[i];
	os << '\n';
	char buf[64];
	for (Scalar v : t.values()) {
		const auto res = std::to_chars(buf, buf + sizeof buf, v);
		os.write(buf, res.ptr - buf);
		os.put('\n');
	}
}

template<typename Scalar>
Tensor<Scalar> read_tensor(std::istream& is) {
	const int rank = parse_number<int>(next_token(is, "rank"), "rank");
	if (rank < 1 || rank > 4) throw FormatError("tensor rank out of range: " + std::to_string(rank));
	std::vector<Index> extents(static_cast<std::size_t>(rank));
	for (auto& e : extents) e = parse_number<Index>(next_token(is, "extent"), "extent");
	Shape shape;
	try {
		shape = Shape(std::span<const Index>(extents));
	} catch (const ShapeError& e) {
		throw FormatError(e.what());
	}
	Tensor<Scalar> t(shape);
	for (Scalar& v : t.values()) v = parse_number<Scalar>(next_token(is, "value"), "value");
	return t;
}

template<typename Scalar>
void save_tensor(const std::filesystem::path& path, const Tensor<Scalar>& t) {
	std::ofstream os(path);
	if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
	write_tensor(os, t);
}

template<typename Scalar>
Tensor<Scalar> load_tensor(const std::filesystem::path& path) {
	std::ifstream is(path);
	if (!is) throw std::runtime_error("cannot open " + path.string());
	return read_tensor<Scalar>(is);
}

template<typename Scalar>
void write_named(std::ostream& os, const NamedTensors<Scalar>& tensors) {
	os << "index";
	for (const auto& [name, t] : tensors) os << ' ' << name;
	os << '\n';
	for (const auto& [name, t] : tensors) write_tensor(os, t);
}

template<typename Scalar>
NamedTensors<Scalar> read_named(std::istream& is) {
	std::string line;
	if (!std::getline(is, line)) throw FormatError("missing index line");
	std::istringstream header(line);
	std::string word;
	header >> word;
	if (word != "index") throw FormatError("expected 'index' line, got '" + line + "'");
	NamedTensors<Scalar> out;
	while (header >> word) out.emplace_back(word, Tensor<Scalar>());
	for (auto& [name, t] : out) {
		try {
			t = read_tensor<Scalar>(is);
		} catch (const FormatError& e) {
			throw FormatError("tensor '" + name + "': " + e.what());
		}
	}
	return out;
}

#define REBORN_INSTANTIATE(T) \
	template void write_tensor<T>(std::ostream&, const Tensor<T>&); \
	template Tensor<T> read_tensor<T>(std::istream&); \
	template void save_tensor<T>(const std::filesystem::path&, const Tensor<T>&); \
	template Tensor<T> load_tensor<T>(const std::filesystem::path&); \
	template void write_named<T>(std::ostream&, const NamedTensors<T>&); \
	template NamedTensors<T> read_named<T>(std::istream&);

REBORN_INSTANTIATE(float)
REBORN_INSTANTIATE(double)

} // namespace reborn
