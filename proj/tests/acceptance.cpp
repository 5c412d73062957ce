// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "reborn/checkpoint.hpp"
#include "reborn/gradcheck.hpp"
#include "reborn/harness.hpp"
#include "reborn/layers.hpp"
#include "reborn/pgm.hpp"
#include "reborn_setup.hpp"

using namespace reborn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
	bool pass = false;
	std::string detail;
};

std::string fmt(const char* f, double v) {
	char buf[64];
	std::snprintf(buf, sizeof buf, f, v);
	return buf;
}

fs::path workdir(const std::string& name) {
	const fs::path dir = fs::temp_directory_path() / "reborn_acceptance" / name;
	fs::remove_all(dir);
	fs::create_directories(dir);
	return dir;
}

std::string slurp(const fs::path& p) {
	std::ifstream is(p, std::ios::binary);
	std::stringstream ss;
	ss << is.rdbuf();
	return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_suite() {
	const auto t0 = std::chrono::steady_clock::now();
	GradcheckOptions opts;   // 64-bit, central differences, tol 1e-4, 5 trials
	const auto report = run_gradcheck_suite(opts);
	const double secs = seconds_since(t0);
	double worst = 0;
	std::string worst_name, failed;
	bool trials_ok = true;
	for (const auto& c : report.components) {
		if (c.worst_rel_error > worst) {
			worst = c.worst_rel_error;
			worst_name = c.name;
		}
		if (!c.passed) failed += " " + c.name;
		trials_ok = trials_ok && c.trials >= 5;
	}
	bool has_both_reborn = false, has_train = false;
	for (const auto& c : report.components) {
		has_train |= c.name == "reborn_bn_train";
		has_both_reborn |= c.name == "reborn_bn_eval";
	}
	has_both_reborn = has_both_reborn && has_train;
	const bool pass = report.passed() && worst < 1e-4 && trials_ok && has_both_reborn && secs < 120;
	return {pass, std::to_string(report.components.size()) + " components, worst rel " + fmt("%.2e", worst) + " (" +
			worst_name + ") < 1e-4, " + fmt("%.1f", secs) + " s < 120 s" + (failed.empty() ? "" : "; failing:" + failed)};
}

Outcome adjoint_suite() {
	const auto t0 = std::chrono::steady_clock::now();
	Rng rng(31);
	double worst = 0;
	int configs = 0;
	for (Index k : {1, 3})
		for (Index s : {1, 2})
			for (Index p : {0, 1})
				for (int trial = 0; trial < 3; ++trial) {
					const auto x = oracle::random_tensor<double>(Shape{2, 3, 7, 7}, rng);
					const auto w = oracle::random_tensor<double>(Shape{4, 3, k, k}, rng);
					const auto y = oracle::random_tensor<double>(conv2d(x, w, s, p).shape(), rng);
					const auto up = conv_transpose2d(y, w, s, p);
					if (!(up.shape() == x.shape())) return {false, "transposed conv shape mismatch"};
					const double lhs = oracle::dot(conv2d(x, w, s, p), y), rhs = oracle::dot(x, up);
					worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
					++configs;
				}
	const double secs = seconds_since(t0);
	return {worst < 1e-10 && secs < 10, std::to_string(configs) + " cases over k{1,3} s{1,2} p{0,1}, worst rel " +
			fmt("%.2e", worst) + " < 1e-10, " + fmt("%.2f", secs) + " s < 10 s"};
}

Outcome reborn_reductions() {
	const auto t0 = std::chrono::steady_clock::now();
	Rng rng(41);
	double worst_id = 0, worst_relu = 0;
	for (int trial = 0; trial < 10; ++trial) {
		const Index c = 1 + Index(rng.below(8));
		const auto x = oracle::random_tensor<double>(Shape{2, c, 9, 9}, rng, -1, 1);
		auto id = oracle::configured_reborn<double>(c, true);
		auto rl = oracle::configured_reborn<double>(c, false);
		worst_id = std::max(worst_id, oracle::max_abs_diff(id.forward(x, Mode::eval), x));
		worst_relu = std::max(worst_relu, oracle::max_abs_diff(rl.forward(x, Mode::eval), relu(x)));
	}
	const double secs = seconds_since(t0);
	// eval BN with running_var 1 scales by 1/sqrt(1 + eps): error eps/2 * |x| on the negative path
	const double eps_bound = 1.0 - 1.0 / std::sqrt(1.0 + 1e-5);
	return {worst_id < 1e-5 && worst_relu < 1e-5 && secs < 5,
			"X ~ U[-1,1]; identity max|f(X)-X| " + fmt("%.2e", worst_id) + " (eps bound " + fmt("%.2e", eps_bound) + "), relu max|f(X)-relu(X)| " + fmt("%.2e", worst_relu) +
					" (< 1e-5), " + fmt("%.2f", secs) + " s < 5 s"};
}

Outcome phase_decomposition() {
	Rng rng(51);
	long bad_sum = 0, bad_support = 0;
	for (int t = 0; t < 10000; ++t) {
		const Shape shape{1 + Index(rng.below(2)), 1 + Index(rng.below(3)), 1 + Index(rng.below(4)), 1 + Index(rng.below(4))};
		// mix of magnitudes, exact zeros and signed zeros
		Tensor<double> x(shape);
		for (Index i = 0; i < x.size(); ++i) {
			const double u = rng.uniform();
			x[i] = u < 0.05 ? 0.0 : u < 0.1 ? -0.0 : rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
		}
		const auto pos = relu(x), neg = negative_part(x);
		for (Index i = 0; i < x.size(); ++i) {
			bad_sum += pos[i] + neg[i] != x[i];
			bad_support += pos[i] != 0 && neg[i] != 0;
		}
	}
	return {bad_sum == 0 && bad_support == 0, "10000 tensors: " + std::to_string(bad_sum) + " sum mismatches, " +
			std::to_string(bad_support) + " overlapping supports"};
}

Outcome channel_compensation() {
	Rng rng(61);
	ModelConfig full, half;
	half.width_mult = 0.5;
	auto m1 = build_convnet8<float>(full, rng);
	auto m2 = build_convnet8<float>(half, rng);
	const Index a = count_params(m1, ParamFilter::conv_weights), b = count_params(m2, ParamFilter::conv_weights);
	const long long oa = oracle::convnet8_conv_weights(1.0, 3), ob = oracle::convnet8_conv_weights(0.5, 3);
	const double ratio = double(a) / double(b);
	return {a == 1171296 && b == 293040 && a == oa && b == ob && ratio >= 3.9 && ratio <= 4.0,
			"width 1.0: " + std::to_string(a) + " (oracle " + std::to_string(oa) + "), width 0.5: " + std::to_string(b) +
					" (oracle " + std::to_string(ob) + "), ratio " + fmt("%.4f", ratio)};
}

fs::path data_root() {
	if (const char* env = std::getenv("REBORN_DATA_DIR"); env && *env) return env;
	return {};
}

Outcome mnist_training() {
	const fs::path root = data_root();
	if (root.empty()) return {false, "REBORN_DATA_DIR is not set; MNIST IDX files are required"};
	std::string detail;
	bool pass = true;
	const auto t_all = std::chrono::steady_clock::now();
	for (const char* act : {"relu", "reborn"}) {
		TrainConfig cfg;
		cfg.dataset = "mnist";
		cfg.data_dir = root;
		cfg.model.width_mult = 0.25;
		cfg.model.activation = ActivationSpec::parse(act);
		cfg.epochs = 5;
		cfg.batch_size = 64;
		cfg.train_limit = 10000;
		cfg.seed = 1;
		cfg.out_dir = workdir(std::string("mnist_") + act);
		const auto t0 = std::chrono::steady_clock::now();
		try {
			const auto r = run_train(cfg);
			const double acc = r.metrics.back().test_acc;
			const bool ok = acc >= 0.95;
			pass = pass && ok;
			detail += std::string(act) + " test_acc " + fmt("%.4f", acc) + " (" + fmt("%.0f", seconds_since(t0)) + " s); ";
		} catch (const std::exception& e) {
			pass = false;
			detail += std::string(act) + " failed: " + e.what() + "; ";
		}
	}
	return {pass, detail + "threshold 0.95 on 10000 test images, total " + fmt("%.0f", seconds_since(t_all)) + " s"};
}

TrainConfig synthetic_config(const fs::path& out) {
	TrainConfig cfg;
	cfg.model.width_mult = 0.125;
	cfg.model.activation = ActivationSpec::parse("reborn");
	cfg.synthetic_train = 128;
	cfg.synthetic_test = 64;
	cfg.epochs = 2;
	cfg.seed = 7;
	cfg.out_dir = out;
	return cfg;
}

Outcome determinism() {
	const auto a = run_train(synthetic_config(workdir("det_a")));
	const auto b = run_train(synthetic_config(workdir("det_b")));
	const bool same = slurp(a.metrics_path) == slurp(b.metrics_path);
	const DataSplits data = load_data(synthetic_config({}));
	const double reloaded = run_eval(a.checkpoint_path, data.test);
	const bool exact = reloaded == a.metrics.back().test_acc;
	return {same && exact, std::string("metrics.csv ") + (same ? "byte-identical" : "DIFFERS") +
			"; reloaded checkpoint accuracy " + fmt("%.6f", reloaded) + " vs trained " +
			fmt("%.6f", a.metrics.back().test_acc)};
}

Outcome lr_schedule() {
	std::string detail;
	bool pass = true;
	for (int total : {160, 80}) {
		TrainConfig cfg;
		cfg.model.width_mult = 0.125;
		cfg.synthetic_train = 8;
		cfg.synthetic_test = 8;
		cfg.batch_size = 8;
		cfg.epochs = total;
		cfg.out_dir = workdir("lr_" + std::to_string(total));
		run_train(cfg);
		const auto rows = read_metrics_csv(cfg.out_dir / "metrics.csv");
		int mismatches = rows.size() == std::size_t(total) ? 0 : 1;
		for (std::size_t e = 0; e < rows.size(); ++e) {
			const double want = int(e) < total / 2 ? 0.001 : 0.0001;
			mismatches += rows[e].lr != want || rows[e].epoch != int(e);
		}
		pass = pass && mismatches == 0;
		detail += std::to_string(total) + " epochs: rows 0-" + std::to_string(total / 2 - 1) + " at 0.001, " +
				std::to_string(total / 2) + "-" + std::to_string(total - 1) + " at 0.0001, " +
				std::to_string(mismatches) + " mismatches; ";
	}
	return {pass, detail};
}

Outcome feature_dump() {
	const fs::path dir = workdir("features");
	ModelConfig mc;
	mc.arch = Arch::viznet5;
	mc.input_channels = 1;
	Rng rng(71);
	auto model = build_model<float>(mc, rng);
	save_checkpoint(dir / "viz.ckpt", model);

	GrayImage img{32, 32, 255, std::vector<std::uint8_t>(32 * 32)};
	for (Index h = 0; h < 32; ++h)
		for (Index w = 0; w < 32; ++w) img.pixels[std::size_t(h * 32 + w)] = std::uint8_t((h * 8 + w * 5) % 256);
	write_pgm(dir / "input.pgm", img);

	FeaturesConfig cfg;
	cfg.checkpoint = dir / "viz.ckpt";
	cfg.input = dir / "input.pgm";
	cfg.layer = 1;
	cfg.out_dir = dir / "out";
	const auto paths = run_features(cfg);

	Tensor<float> x(Shape{1, 1, 32, 32});
	for (Index i = 0; i < x.size(); ++i) x[i] = float(img.pixels[std::size_t(i)]) / 255.0f;
	const auto maps = model.forward_to_activation(x, 1, Mode::eval);

	std::size_t files = 0;
	long zero_pixels = 0, zero_not_white = 0, nonzero_white = 0, parsed = 0;
	for (const auto& entry : fs::directory_iterator(cfg.out_dir)) files += entry.path().extension() == ".pgm";
	for (std::size_t c = 0; c < paths.size(); ++c) {
		GrayImage g;
		try {
			g = read_pgm(paths[c]);
			++parsed;
		} catch (const std::exception&) {
			continue;
		}
		if (g.width != 32 || g.height != 32 || g.maxval != 255) continue;
		for (Index i = 0; i < 32 * 32; ++i) {
			const float v = maps[Index(c) * 32 * 32 + i];
			const auto p = g.pixels[std::size_t(i)];
			if (v == 0) {
				++zero_pixels;
				zero_not_white += p != 255;
			} else {
				nonzero_white += p == 255 && std::abs(v) > 0.01f * maps.vec().cwiseAbs().maxCoeff();
			}
		}
	}
	const bool pass = paths.size() == 32 && files == 32 && parsed == 32 && zero_pixels > 0 && zero_not_white == 0 &&
			nonzero_white == 0;
	return {pass, std::to_string(files) + " PGM files, " + std::to_string(parsed) + " reparsed as 32x32 P5; " +
			std::to_string(zero_pixels) + " zero activations, " + std::to_string(zero_not_white) + " not white"};
}

Outcome extended_control() {
	TrainConfig cfg = synthetic_config(workdir("extended"));
	cfg.model.arch = Arch::convnet8_extended;
	cfg.epochs = 1;
	ModelConfig mc = cfg.model;
	const DataSplits data = load_data(cfg);
	adapt_model_to(mc, data.train);
	Rng rng(0);
	const int convs = build_model<float>(mc, rng).conv_layer_count();
	try {
		const auto r = run_train(cfg, data);
		const double acc = r.metrics.back().test_acc;
		return {convs == 16 && acc >= 0 && acc <= 1,
				std::to_string(convs) + " conv layers; 1 synthetic epoch, test_acc " + fmt("%.4f", acc)};
	} catch (const std::exception& e) {
		return {false, std::to_string(convs) + " conv layers; training failed: " + e.what()};
	}
}

} // namespace

int main(int argc, char** argv) {
	const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
			{"gradient suite", gradient_suite},
			{"adjoint suite", adjoint_suite},
			{"reborn reductions", reborn_reductions},
			{"phase decomposition", phase_decomposition},
			{"channel-compensation arithmetic", channel_compensation},
			{"MNIST desk-scale training", mnist_training},
			{"determinism", determinism},
			{"lr schedule", lr_schedule},
			{"feature dump", feature_dump},
			{"extended-conv control", extended_control},
	};
	std::set<int> only;
	for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

	int failed = 0;
	for (std::size_t i = 0; i < criteria.size(); ++i) {
		const int id = int(i) + 1;
		if (!only.empty() && !only.count(id)) continue;
		Outcome o;
		try {
			o = criteria[i].second();
		} catch (const std::exception& e) {
			o = {false, std::string("exception: ") + e.what()};
		}
		failed += !o.pass;
		std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail
				  << std::endl;
	}
	std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
	return failed ? 1 : 0;
}
