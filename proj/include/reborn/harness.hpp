#ifndef REBORN_HARNESS_HPP_
#define REBORN_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reborn/data.hpp"
#include "reborn/models.hpp"

namespace reborn {

/// Raised when a training loss turns NaN or infinite.
class DivergenceError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

struct TrainConfig {
	ModelConfig model;
	std::string dataset = "synthetic";      ///< mnist, kmnist, fmnist, cifar10 or synthetic
	std::filesystem::path data_dir;
	int epochs = 1;
	Index batch_size = 64;
	double lr = 0.001;                      ///< first-half rate; the second half uses lr / 10
	double momentum = 0.9;
	double weight_decay = 0.0005;
	bool decay_norm_params = true;
	std::uint64_t seed = 0;
	std::filesystem::path out_dir = "run";
	bool augment = true;                    ///< only honoured for cifar10 and fmnist
	bool f64 = false;
	Index train_limit = 0;                  ///< 0 keeps the whole split
	Index test_limit = 0;
	Index synthetic_train = 512;
	Index synthetic_test = 256;
	bool wall_clock = false;                ///< write measured seconds into metrics.csv
	std::ostream* log = nullptr;
};

struct MetricsRecord {
	int epoch = 0;
	double lr = 0;
	double train_loss = 0;
	double train_acc = 0;
	double test_acc = 0;
	double wall_seconds = 0;
};

inline constexpr const char* kMetricsHeader = "epoch,lr,train_loss,train_acc,test_acc,wall_seconds";

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

struct DataSplits {
	Dataset train, test;
	AugmentPolicy augment;
};

/// Loads the configured dataset, applies limits and picks the augmentation policy.
DataSplits load_data(const TrainConfig& config);

/// Fills the model's input channels, size and class count from a dataset.
void adapt_model_to(ModelConfig& model, const Dataset& data);

struct TrainResult {
	std::vector<MetricsRecord> metrics;
	Index params = 0;
	std::filesystem::path metrics_path, checkpoint_path;
};

/**
 * The training loop: per epoch, shuffle, augment, forward in train mode,
 * softmax cross-entropy, backward, SGD step; then evaluate the test split in
 * eval mode. Writes metrics.csv and final.ckpt into out_dir. Deterministic in
 * config.seed.
 */
TrainResult run_train(TrainConfig config);
/// Same, on already-loaded data.
TrainResult run_train(TrainConfig config, const DataSplits& data);

/// Fraction of argmax-correct predictions, eval mode, fixed batch order.
template<typename Scalar>
double evaluate(Model<Scalar>& model, const Dataset& data, Index batch_size = 256);

/// Loads a checkpoint (f32, or f64 when requested) and evaluates it.
double run_eval(const std::filesystem::path& checkpoint, const Dataset& data, bool f64 = false);

struct CompareEntry {
	std::string label;         ///< as written, e.g. "relu@0.5"
	ActivationSpec activation;
	double width_mult = 1.0;

	/// `spec` or `spec@width`; the width defaults to `default_width`.
	static CompareEntry parse(const std::string& text, double default_width);
};

struct CompareRow {
	std::string label;
	double final_test_acc = 0;
	double best_test_acc = 0;
	Index params = 0;
};

inline constexpr const char* kSummaryHeader = "activation,final_test_acc,best_test_acc,params";

/**
 * Trains one model per entry under identical settings. Entry i runs in
 * out_dir/<label> and the table goes to out_dir/summary.csv.
 */
std::vector<CompareRow> run_compare(const TrainConfig& base, const std::vector<CompareEntry>& entries);

struct FeaturesConfig {
	std::optional<std::filesystem::path> checkpoint;   ///< otherwise a fresh model from `fresh`
	ModelConfig fresh;                                  ///< input size/channels taken from the image
	std::uint64_t seed = 0;
	std::filesystem::path input;                        ///< .pgm, or a tensor fixture (C,H,W) / (1,C,H,W)
	int layer = 1;
	std::filesystem::path out_dir = "features";
};

/// Writes one PGM per channel of the chosen activation's output; returns the paths in channel order.
std::vector<std::filesystem::path> run_features(const FeaturesConfig& config);

} // namespace reborn

#endif // REBORN_HARNESS_HPP_
