#include "reborn/harness.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "reborn/checkpoint.hpp"
#include "reborn/layers.hpp"
#include "reborn/optim.hpp"
#include "reborn/pgm.hpp"
#include "reborn/tensor_io.hpp"

namespace reborn {
namespace {

std::string shortest(double v) {
	char buf[64];
	const auto r = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, r.ptr);
}

std::string fixed_lr(double v) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.10g", v);
	return buf;
}

double parse_double(const std::string& s) {
	double v{};
	const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("bad number in CSV: '" + s + "'");
	return v;
}

std::filesystem::path dataset_dir(const TrainConfig& cfg, std::initializer_list<const char*> subdirs) {
	std::filesystem::path root = cfg.data_dir;
	if (root.empty())
		if (const char* env = std::getenv("REBORN_DATA_DIR")) root = env;
	if (root.empty()) throw DataError(DataError::Code::io, "no data directory: pass --data-dir or set REBORN_DATA_DIR");
	for (const char* sub : subdirs)
		if (std::filesystem::is_directory(root / sub)) return root / sub;
	return root;
}

std::string sanitize(const std::string& label) {
	std::string out;
	for (char ch : label) out.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' ? ch : '_');
	return out;
}

template<typename Scalar>
TrainResult train_impl(const TrainConfig& cfg, const DataSplits& data) {
	ModelConfig mcfg = cfg.model;
	adapt_model_to(mcfg, data.train);
	const Rng master(cfg.seed);
	Rng init_rng = master.derive("init");
	Rng augment_rng = master.derive("augment");
	const std::uint64_t shuffle_seed = master.derive("shuffle").seed();

	Model<Scalar> model = build_model<Scalar>(mcfg, init_rng);
	model.trace_shapes(Shape{1, mcfg.input_channels, mcfg.input_size, mcfg.input_size});

	SgdOptions opts;
	opts.lr = cfg.lr;
	opts.momentum = cfg.momentum;
	opts.weight_decay = cfg.weight_decay;
	opts.decay_norm_params = cfg.decay_norm_params;
	Sgd<Scalar> sgd(model.parameters(), opts);
	const LrSchedule schedule{cfg.lr, cfg.lr * 0.1, cfg.epochs};

	std::filesystem::create_directories(cfg.out_dir);
	TrainResult result;
	result.params = count_params(model, ParamFilter::all);
	result.metrics_path = cfg.out_dir / "metrics.csv";
	result.checkpoint_path = cfg.out_dir / "final.ckpt";
	std::ofstream timing(cfg.out_dir / "timing.csv");
	timing << "epoch,wall_seconds\n";

	for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
		const auto start = std::chrono::steady_clock::now();
		MetricsRecord rec;
		rec.epoch = epoch;
		rec.lr = schedule.lr_at_epoch(epoch);
		sgd.set_lr(rec.lr);

		double loss_sum = 0;
		Index correct = 0, seen = 0;
		Rng epoch_augment = augment_rng.derive(std::uint64_t(epoch));
		const auto order = batches(data.train.size(), cfg.batch_size, shuffle_seed, epoch);
		for (std::size_t b = 0; b < order.size(); ++b) {
			Batch<Scalar> batch = gather<Scalar>(data.train, order[b]);
			const Tensor<Scalar> images = augment(batch.images, data.augment, epoch_augment);
			const Tensor<Scalar> logits = model.forward(images, Mode::train);
			const LossResult<Scalar> loss = softmax_cross_entropy(logits, batch.labels);
			if (!std::isfinite(static_cast<double>(loss.loss)))
				throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
						std::to_string(b) + " (" + mcfg.header() + ")");
			const Index n = Index(batch.labels.size());
			loss_sum += static_cast<double>(loss.loss) * static_cast<double>(n);
			const auto pred = argmax_rows(logits);
			for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
			seen += n;
			model.backward(loss.grad_logits);
			sgd.step();
		}
		rec.train_loss = loss_sum / static_cast<double>(seen);
		rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
		rec.test_acc = evaluate(model, data.test);
		const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
		rec.wall_seconds = cfg.wall_clock ? seconds : 0.0;
		timing << epoch << ',' << seconds << '\n';
		result.metrics.push_back(rec);
		write_metrics_csv(result.metrics_path, result.metrics);
		if (cfg.log)
			*cfg.log << "epoch " << epoch + 1 << "/" << cfg.epochs << "  lr=" << fixed_lr(rec.lr)
					 << "  loss=" << rec.train_loss << "  train_acc=" << rec.train_acc << "  test_acc=" << rec.test_acc
					 << "  (" << seconds << "s)" << std::endl;
	}
	save_checkpoint(result.checkpoint_path, model);
	return result;
}

template<typename Scalar>
Tensor<Scalar> load_feature_input(const std::filesystem::path& path) {
	if (path.extension() == ".pgm") {
		const GrayImage img = read_pgm(path);
		Tensor<Scalar> t(Shape{1, 1, img.height, img.width});
		for (std::size_t i = 0; i < img.pixels.size(); ++i)
			t[Index(i)] = static_cast<Scalar>(img.pixels[i]) / static_cast<Scalar>(img.maxval);
		return t;
	}
	Tensor<Scalar> t = load_tensor<Scalar>(path);
	if (t.shape().rank() == 3) t = t.reshaped(Shape{1, t.shape()[0], t.shape()[1], t.shape()[2]});
	if (t.shape().rank() != 4 || t.shape().n() != 1)
		throw ShapeError("feature input must be (C,H,W) or (1,C,H,W), got " + t.shape().str());
	return t;
}

} // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
	std::ofstream os(path);
	if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
	os << kMetricsHeader << '\n';
	for (const auto& r : records)
		os << r.epoch << ',' << fixed_lr(r.lr) << ',' << shortest(r.train_loss) << ',' << shortest(r.train_acc) << ','
		   << shortest(r.test_acc) << ',' << shortest(r.wall_seconds) << '\n';
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
	std::ifstream is(path);
	if (!is) throw std::runtime_error("cannot open " + path.string());
	std::string line;
	if (!std::getline(is, line) || line != kMetricsHeader) throw FormatError(path.string() + ": unexpected metrics header");
	std::vector<MetricsRecord> out;
	while (std::getline(is, line)) {
		if (line.empty()) continue;
		std::vector<std::string> cells;
		std::stringstream ss(line);
		for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
		if (cells.size() != 6) throw FormatError(path.string() + ": expected 6 columns in '" + line + "'");
		MetricsRecord r;
		r.epoch = static_cast<int>(parse_double(cells[0]));
		r.lr = parse_double(cells[1]);
		r.train_loss = parse_double(cells[2]);
		r.train_acc = parse_double(cells[3]);
		r.test_acc = parse_double(cells[4]);
		r.wall_seconds = parse_double(cells[5]);
		out.push_back(r);
	}
	return out;
}

void adapt_model_to(ModelConfig& model, const Dataset& data) {
	model.input_channels = data.images.shape().c();
	model.input_size = data.images.shape().h();
	model.num_classes = data.num_classes;
}

DataSplits load_data(const TrainConfig& cfg) {
	DataSplits d;
	const std::string& name = cfg.dataset;
	if (name == "mnist" || name == "kmnist" || name == "fmnist") {
		const auto dir = dataset_dir(cfg, {name.c_str()});
		d.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", 10, name);
		d.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", 10, name);
	} else if (name == "cifar10") {
		const auto dir = dataset_dir(cfg, {"cifar10", "cifar-10-batches-bin"});
		std::vector<std::filesystem::path> train_files;
		for (int i = 1; i <= 5; ++i) train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
		const std::filesystem::path test_file = dir / "test_batch.bin";
		d.train = load_cifar10(train_files, name);
		d.test = load_cifar10(std::span(&test_file, 1), name);
	} else if (name == "synthetic") {
		d.train = make_synthetic(cfg.synthetic_train, 0x5EED0001);
		d.test = make_synthetic(cfg.synthetic_test, 0x5EED0002);
	} else {
		throw std::invalid_argument("unknown dataset '" + name + "'");
	}
	if (cfg.train_limit > 0) d.train = d.train.head(cfg.train_limit);
	if (cfg.test_limit > 0) d.test = d.test.head(cfg.test_limit);
	d.augment.enabled = cfg.augment && (name == "cifar10" || name == "fmnist");
	return d;
}

TrainResult run_train(TrainConfig config) {
	return run_train(config, load_data(config));
}

TrainResult run_train(TrainConfig config, const DataSplits& data) {
	if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
	if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
	return config.f64 ? train_impl<double>(config, data) : train_impl<float>(config, data);
}

template<typename Scalar>
double evaluate(Model<Scalar>& model, const Dataset& data, Index batch_size) {
	Index correct = 0;
	for (const auto& idx : sequential_batches(data.size(), batch_size)) {
		const Batch<Scalar> batch = gather<Scalar>(data, idx);
		const auto pred = argmax_rows(model.forward(batch.images, Mode::eval));
		for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
	}
	return static_cast<double>(correct) / static_cast<double>(data.size());
}

double run_eval(const std::filesystem::path& checkpoint, const Dataset& data, bool f64) {
	if (f64) {
		Model<double> m = load_checkpoint<double>(checkpoint);
		return evaluate(m, data);
	}
	Model<float> m = load_checkpoint<float>(checkpoint);
	return evaluate(m, data);
}

CompareEntry CompareEntry::parse(const std::string& text, double default_width) {
	CompareEntry e;
	e.label = text;
	const auto at = text.find('@');
	e.activation = ActivationSpec::parse(text.substr(0, at));
	e.width_mult = at == std::string::npos ? default_width : parse_double(text.substr(at + 1));
	if (!(e.width_mult > 0)) throw std::invalid_argument("compare entry '" + text + "': width must be positive");
	return e;
}

std::vector<CompareRow> run_compare(const TrainConfig& base, const std::vector<CompareEntry>& entries) {
	for (std::size_t i = 0; i < entries.size(); ++i)
		for (std::size_t j = 0; j < i; ++j)
			if (entries[i].label == entries[j].label)
				throw std::invalid_argument("duplicate compare entry '" + entries[i].label + "'");
	const DataSplits data = load_data(base);
	std::filesystem::create_directories(base.out_dir);
	std::vector<CompareRow> rows;
	for (const auto& e : entries) {
		TrainConfig cfg = base;
		cfg.model.activation = e.activation;
		cfg.model.width_mult = e.width_mult;
		cfg.out_dir = base.out_dir / sanitize(e.label);
		if (cfg.log) *cfg.log << "== " << e.label << std::endl;
		const TrainResult r = run_train(cfg, data);
		CompareRow row;
		row.label = e.label;
		row.params = r.params;
		row.final_test_acc = r.metrics.back().test_acc;
		for (const auto& m : r.metrics) row.best_test_acc = std::max(row.best_test_acc, m.test_acc);
		rows.push_back(row);
	}
	std::ofstream os(base.out_dir / "summary.csv");
	os << kSummaryHeader << '\n';
	for (const auto& r : rows)
		os << r.label << ',' << shortest(r.final_test_acc) << ',' << shortest(r.best_test_acc) << ',' << r.params << '\n';
	return rows;
}

std::vector<std::filesystem::path> run_features(const FeaturesConfig& cfg) {
	Tensor<float> input = load_feature_input<float>(cfg.input);
	std::optional<Model<float>> model;
	if (cfg.checkpoint) {
		model.emplace(load_checkpoint<float>(*cfg.checkpoint));
	} else {
		ModelConfig mcfg = cfg.fresh;
		mcfg.input_channels = input.shape().c();
		mcfg.input_size = input.shape().h();
		Rng rng = Rng(cfg.seed).derive("init");
		model.emplace(build_model<float>(mcfg, rng));
	}
	const ModelConfig& mc = model->config();
	if (input.shape().c() == 1 && mc.input_channels > 1) {
		std::vector<Tensor<float>> copies(std::size_t(mc.input_channels), input);
		input = concat_channels<float>(std::span<const Tensor<float>>(copies));
	}
	if (input.shape().c() != mc.input_channels || input.shape().h() != mc.input_size ||
			input.shape().w() != mc.input_size)
		throw ShapeError("feature input " + input.shape().str() + " does not match the model input (1," +
				std::to_string(mc.input_channels) + "," + std::to_string(mc.input_size) + "," +
				std::to_string(mc.input_size) + ")");

	const Tensor<float> maps = model->forward_to_activation(input, cfg.layer, Mode::eval);
	std::filesystem::create_directories(cfg.out_dir);
	const Index h = maps.shape().h(), w = maps.shape().w();
	std::vector<std::filesystem::path> paths;
	for (Index c = 0; c < maps.shape().c(); ++c) {
		char name[64];
		std::snprintf(name, sizeof name, "layer%d_ch%03ld.pgm", cfg.layer, static_cast<long>(c));
		const auto path = cfg.out_dir / name;
		write_pgm(path, feature_map_to_gray(maps.data() + c * h * w, h, w));
		paths.push_back(path);
	}
	return paths;
}

template double evaluate<float>(Model<float>&, const Dataset&, Index);
template double evaluate<double>(Model<double>&, const Dataset&, Index);

} // namespace reborn
