#ifndef REBORN_CHECKPOINT_HPP_
#define REBORN_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>

#include "reborn/models.hpp"
#include "reborn/tensor_io.hpp"

namespace reborn {

/*
 * Checkpoint file:
 *
 *   reborn-checkpoint 1
 *   arch=convnet8 activation=reborn width=1 ...      (ModelConfig::header)
 *   index conv1.weight bn1.gamma ...
 *   <tensor fixtures in index order>
 *
 * Every named tensor of the model is stored, batch-norm running statistics
 * included, so a reloaded model evaluates bit-identically.
 */
template<typename Scalar>
void write_checkpoint(std::ostream& os, Model<Scalar>& model);

template<typename Scalar>
void save_checkpoint(const std::filesystem::path& path, Model<Scalar>& model);

template<typename Scalar>
Model<Scalar> read_checkpoint(std::istream& is);

template<typename Scalar>
Model<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into the model by name; names and shapes must match exactly.
template<typename Scalar, typename Stored>
void assign_tensors(Model<Scalar>& model, const NamedTensors<Stored>& tensors);

} // namespace reborn

#endif // REBORN_CHECKPOINT_HPP_
