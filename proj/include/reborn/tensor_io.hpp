#ifndef REBORN_TENSOR_IO_HPP_
#define REBORN_TENSOR_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "reborn/tensor.hpp"

namespace reborn {

class FormatError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/*
 * Tensor fixture text format:
 *
 *   <rank>
 *   <extent_0> ... <extent_{rank-1}>
 *   <value>            one per line, row-major
 *
 * Values are written in shortest round-trip form, so write/read is bit-exact
 * for the element type written.
 */
template<typename Scalar>
void write_tensor(std::ostream& os, const Tensor<Scalar>& t);

template<typename Scalar>
Tensor<Scalar> read_tensor(std::istream& is);

template<typename Scalar>
void save_tensor(const std::filesystem::path& path, const Tensor<Scalar>& t);

template<typename Scalar>
Tensor<Scalar> load_tensor(const std::filesystem::path& path);

/// Ordered list of (name, tensor) pairs; the unit of checkpoint storage.
template<typename Scalar>
using NamedTensors = std::vector<std::pair<std::string, Tensor<Scalar>>>;

/*
 * Named-tensor container:
 *
 *   index <name_0> <name_1> ...
 *   <fixture for name_0>
 *   <fixture for name_1>
 *   ...
 */
template<typename Scalar>
void write_named(std::ostream& os, const NamedTensors<Scalar>& tensors);

template<typename Scalar>
NamedTensors<Scalar> read_named(std::istream& is);

} // namespace reborn

#endif // REBORN_TENSOR_IO_HPP_
