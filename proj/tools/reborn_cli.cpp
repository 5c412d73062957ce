// reborn: train, evaluate and inspect the small CNN stack from the command line.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "reborn/checkpoint.hpp"
#include "reborn/gradcheck.hpp"
#include "reborn/harness.hpp"

using namespace reborn;

namespace {

struct ModelFlags {
	std::string arch = "convnet8";
	std::string activation = "relu";
	double width_mult = 1.0;
	bool no_bn = false;

	void add_to(CLI::App* app) {
		app->add_option("--arch", arch, "convnet8, convnet8-extended or viznet5")->capture_default_str();
		app->add_option("--activation", activation, "relu, leaky[:s], prelu, rrelu[:lo:hi], elu[:a], selu, celu[:a], crelu, reborn, reborn-nc")
				->capture_default_str();
		app->add_option("--width-mult", width_mult, "channel width multiplier")->capture_default_str();
		app->add_flag("--no-bn", no_bn, "drop batch norm after the convolutions");
	}

	ModelConfig config() const {
		ModelConfig m;
		m.arch = parse_arch(arch);
		m.activation = ActivationSpec::parse(activation);
		m.width_mult = width_mult;
		m.batch_norm = !no_bn;
		return m;
	}
};

struct TrainFlags {
	TrainConfig cfg;
	std::string data_dir;
	std::string out = "run";
	bool no_augment = false;
	bool no_decay_bn = false;

	void add_to(CLI::App* app) {
		if (const char* env = std::getenv("REBORN_DATA_DIR")) data_dir = env;
		app->add_option("--dataset", cfg.dataset, "mnist, kmnist, fmnist, cifar10 or synthetic")
				->check(CLI::IsMember({"mnist", "kmnist", "fmnist", "cifar10", "synthetic"}))
				->capture_default_str();
		app->add_option("--data-dir", data_dir, "dataset root (default: $REBORN_DATA_DIR)");
		app->add_option("--epochs", cfg.epochs)->capture_default_str();
		app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
		app->add_option("--lr", cfg.lr, "base learning rate; divided by 10 for the second half")->capture_default_str();
		app->add_option("--momentum", cfg.momentum)->capture_default_str();
		app->add_option("--weight-decay", cfg.weight_decay)->capture_default_str();
		app->add_option("--seed", cfg.seed)->capture_default_str();
		app->add_option("--out", out, "output directory")->capture_default_str();
		app->add_flag("--no-augment", no_augment, "disable pad-4 crop and horizontal flip");
		app->add_flag("--no-decay-bn", no_decay_bn, "exempt batch-norm gamma/beta from weight decay");
		app->add_flag("--f64", cfg.f64, "train in double precision");
		app->add_flag("--wall-clock", cfg.wall_clock, "record measured seconds in metrics.csv (breaks byte-identical reruns)");
		app->add_option("--train-limit", cfg.train_limit, "use only the first N training images");
		app->add_option("--test-limit", cfg.test_limit, "use only the first N test images");
		app->add_option("--synthetic-train", cfg.synthetic_train)->capture_default_str();
		app->add_option("--synthetic-test", cfg.synthetic_test)->capture_default_str();
	}

	TrainConfig config(const ModelFlags& model) {
		TrainConfig c = cfg;
		c.model = model.config();
		c.data_dir = data_dir;
		c.out_dir = out;
		c.augment = !no_augment;
		c.decay_norm_params = !no_decay_bn;
		c.log = &std::cout;
		return c;
	}
};

std::vector<std::string> split_list(const std::string& text) {
	std::vector<std::string> out;
	std::string cur;
	for (char ch : text) {
		if (ch == ',') {
			if (!cur.empty()) out.push_back(cur);
			cur.clear();
		} else {
			cur.push_back(ch);
		}
	}
	if (!cur.empty()) out.push_back(cur);
	return out;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Small CNN stack with the reborn activation block"};
	app.require_subcommand(1);

	ModelFlags model;
	TrainFlags train;

	auto* train_cmd = app.add_subcommand("train", "train a model; writes metrics.csv and final.ckpt");
	model.add_to(train_cmd);
	train.add_to(train_cmd);

	std::string eval_ckpt;
	bool eval_train_split = false;
	auto* eval_cmd = app.add_subcommand("eval", "test accuracy of a checkpoint");
	eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
	eval_cmd->add_flag("--train-split", eval_train_split, "evaluate on the training split instead");
	train.add_to(eval_cmd);

	std::string compare_list = "relu,reborn";
	auto* compare_cmd = app.add_subcommand("compare", "train one model per activation; writes summary.csv");
	model.add_to(compare_cmd);
	train.add_to(compare_cmd);
	compare_cmd->add_option("--activations", compare_list, "comma list of spec[@width], e.g. relu@0.5,reborn@0.5")
			->capture_default_str();

	FeaturesConfig feat;
	std::string feat_ckpt, feat_input, feat_out = "features";
	auto* features_cmd = app.add_subcommand("features", "dump one activation's channels as PGM images");
	features_cmd->add_option("--checkpoint", feat_ckpt, "trained model; a fresh one is built when omitted");
	features_cmd->add_option("--input", feat_input, "PGM image or tensor fixture")->required();
	features_cmd->add_option("--layer", feat.layer, "conv block whose activation is dumped")->capture_default_str();
	features_cmd->add_option("--seed", feat.seed)->capture_default_str();
	features_cmd->add_option("--out", feat_out)->capture_default_str();
	ModelFlags feat_model;
	feat_model.arch = "viznet5";
	feat_model.add_to(features_cmd);

	GradcheckOptions gc;
	auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of every layer and activation");
	gradcheck_cmd->add_option("--trials", gc.trials)->capture_default_str();
	gradcheck_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
	gradcheck_cmd->add_option("--seed", gc.seed)->capture_default_str();

	CLI11_PARSE(app, argc, argv);

	try {
		if (*train_cmd) {
			const TrainResult r = run_train(train.config(model));
			std::cout << "params " << r.params << "\nwrote " << r.metrics_path.string() << " and "
					  << r.checkpoint_path.string() << '\n';
		} else if (*eval_cmd) {
			TrainConfig cfg = train.config(model);
			const DataSplits data = load_data(cfg);
			const double acc = run_eval(eval_ckpt, eval_train_split ? data.train : data.test, cfg.f64);
			std::cout << "accuracy " << acc << '\n';
		} else if (*compare_cmd) {
			TrainConfig cfg = train.config(model);
			std::vector<CompareEntry> entries;
			for (const auto& item : split_list(compare_list)) entries.push_back(CompareEntry::parse(item, model.width_mult));
			if (entries.empty()) throw std::invalid_argument("--activations is empty");
			for (const auto& row : run_compare(cfg, entries))
				std::cout << row.label << "  final=" << row.final_test_acc << "  best=" << row.best_test_acc
						  << "  params=" << row.params << '\n';
			std::cout << "wrote " << (cfg.out_dir / "summary.csv").string() << '\n';
		} else if (*features_cmd) {
			if (!feat_ckpt.empty()) feat.checkpoint = feat_ckpt;
			feat.fresh = feat_model.config();
			feat.input = feat_input;
			feat.out_dir = feat_out;
			const auto paths = run_features(feat);
			std::cout << "wrote " << paths.size() << " images to " << feat.out_dir.string() << '\n';
		} else if (*gradcheck_cmd) {
			const GradcheckReport report = run_gradcheck_suite(gc);
			report.print(std::cout);
			return report.passed() ? 0 : 1;
		}
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 2;
	}
	return 0;
}
