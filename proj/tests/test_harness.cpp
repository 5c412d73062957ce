#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "reborn/gradcheck.hpp"
#include "reborn/harness.hpp"
#include "reborn/layers.hpp"
#include "reborn/pgm.hpp"
#include "reborn/tensor_io.hpp"

using namespace reborn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
	const fs::path dir = fs::temp_directory_path() / "reborn_test_harness" / name;
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

TrainConfig tiny(const fs::path& out, const char* act = "relu") {
	TrainConfig cfg;
	cfg.model.width_mult = 0.125;
	cfg.model.activation = ActivationSpec::parse(act);
	cfg.synthetic_train = 64;
	cfg.synthetic_test = 40;
	cfg.out_dir = out;
	cfg.seed = 3;
	return cfg;
}

// ReLU whose backward is off by 1%.
class BrokenRelu : public PointwiseActivation<double> {
public:
	BrokenRelu() : PointwiseActivation<double>(Kind::relu) {}
	Tensor<double> backward(const Tensor<double>& g) override {
		return scale(PointwiseActivation<double>::backward(g), 1.01);
	}
};

} // namespace

TEST_CASE("metrics csv") {
	const fs::path dir = scratch("csv");
	std::vector<MetricsRecord> rows{{0, 0.001, 2.5, 0.25, 0.5, 0}, {1, 0.0001, 1.0 / 3.0, 0.75, 0.8125, 0}};
	write_metrics_csv(dir / "m.csv", rows);
	std::ifstream is(dir / "m.csv");
	std::string header;
	std::getline(is, header);
	CHECK(header == "epoch,lr,train_loss,train_acc,test_acc,wall_seconds");
	const auto back = read_metrics_csv(dir / "m.csv");
	REQUIRE(back.size() == 2);
	CHECK(back[1].lr == 0.0001);
	CHECK(back[1].train_loss == 1.0 / 3.0);
	CHECK(back[0].test_acc == 0.5);
}

TEST_CASE("train smoke and determinism") {
	const auto a = run_train(tiny(scratch("det_a")));
	const auto b = run_train(tiny(scratch("det_b")));
	REQUIRE(a.metrics.size() == 1);
	CHECK(a.metrics[0].test_acc >= 0);
	CHECK(a.metrics[0].test_acc <= 1);
	CHECK(slurp(a.metrics_path) == slurp(b.metrics_path));
	CHECK(fs::exists(a.checkpoint_path));
	CHECK(fs::exists(a.checkpoint_path.parent_path() / "timing.csv"));

	auto other = tiny(scratch("det_c"));
	other.seed = 4;
	CHECK(slurp(run_train(other).metrics_path) != slurp(a.metrics_path));
}

TEST_CASE("eval") {
	TrainConfig cfg = tiny(scratch("memorize"));
	cfg.model.width_mult = 0.25;
	cfg.synthetic_train = 10;
	cfg.epochs = 80;   // enough steps for the running statistics to forget their init
	cfg.lr = 0.01;
	cfg.batch_size = 10;
	const auto data = load_data(cfg);
	const auto r = run_train(cfg, data);
	CHECK(run_eval(r.checkpoint_path, data.train) == 1.0);
	CHECK(run_eval(r.checkpoint_path, data.test) == run_eval(r.checkpoint_path, data.test));

	ModelConfig mc = cfg.model;
	adapt_model_to(mc, data.train);
	Rng rng(77);
	auto fresh = build_model<float>(mc, rng);
	TrainConfig big = cfg;
	big.synthetic_test = 1000;
	const double chance = evaluate(fresh, load_data(big).test);
	CHECK(chance >= 0.05);
	CHECK(chance <= 0.15);
}

TEST_CASE("compare") {
	TrainConfig base = tiny(scratch("compare"));
	const std::vector<CompareEntry> entries{CompareEntry::parse("relu", 0.125), CompareEntry::parse("reborn", 0.125)};
	const auto rows = run_compare(base, entries);
	REQUIRE(rows.size() == 2);
	CHECK(rows[0].label == "relu");
	CHECK(rows[1].label == "reborn");
	CHECK(rows[1].params > rows[0].params);
	CHECK(fs::exists(base.out_dir / "summary.csv"));

	// one entry == a plain train run with the same settings
	const auto solo = run_train(tiny(scratch("compare_solo")));
	CHECK(slurp(base.out_dir / "relu" / "metrics.csv") == slurp(solo.metrics_path));

	CHECK_THROWS_AS(run_compare(base, {entries[0], entries[0]}), std::invalid_argument);
	const auto half = CompareEntry::parse("crelu@0.5", 1.0);
	CHECK(half.width_mult == 0.5);
	CHECK(half.activation.str() == "crelu");
}

TEST_CASE("divergence is reported") {
	TrainConfig cfg = tiny(scratch("nan"));
	cfg.lr = 1e30;
	cfg.epochs = 2;
	CHECK_THROWS_AS(run_train(cfg), DivergenceError);
}

TEST_CASE("pgm") {
	const fs::path dir = scratch("pgm");
	const std::vector<double> zeros(12, 0.0);
	const GrayImage white = feature_map_to_gray(zeros.data(), 3, 4);
	CHECK(std::all_of(white.pixels.begin(), white.pixels.end(), [](auto p) { return p == 255; }));

	const std::vector<double> ramp{0, 1, 2, 4};
	const GrayImage g = feature_map_to_gray(ramp.data(), 2, 2);
	CHECK(g.pixels == std::vector<std::uint8_t>{255, 191, 127, 0});

	write_pgm(dir / "g.pgm", g);
	CHECK(slurp(dir / "g.pgm").substr(0, 11) == "P5\n2 2\n255\n");
	const GrayImage back = read_pgm(dir / "g.pgm");
	CHECK(back.width == 2);
	CHECK(back.height == 2);
	CHECK(back.pixels == g.pixels);

	std::ofstream(dir / "bad.pgm") << "P2\n2 2\n255\n0 0 0 0\n";
	CHECK_THROWS_AS(read_pgm(dir / "bad.pgm"), FormatError);
}

TEST_CASE("feature dump") {
	const fs::path dir = scratch("features");
	GrayImage img{32, 32, 255, std::vector<std::uint8_t>(32 * 32)};
	for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = std::uint8_t((i * 13) % 256);
	write_pgm(dir / "in.pgm", img);

	FeaturesConfig cfg;
	cfg.fresh.arch = Arch::viznet5;
	cfg.input = dir / "in.pgm";
	cfg.out_dir = dir / "out";
	const auto paths = run_features(cfg);
	CHECK(paths.size() == 32);
	for (const auto& p : paths) {
		const auto g = read_pgm(p);
		CHECK(g.width == 32);
		CHECK(g.height == 32);
	}

	// tensor fixture of the wrong size
	save_tensor(dir / "small.txt", Tensor<float>(Shape{3, 8, 8}, 0.5f));
	cfg.input = dir / "small.txt";
	cfg.checkpoint = std::nullopt;
	cfg.fresh.arch = Arch::convnet8;
	CHECK_THROWS(run_features(cfg));
}

TEST_CASE("gradcheck report") {
	const auto report = run_gradcheck_suite();
	CHECK(report.passed());
	std::vector<std::string> names;
	for (const auto& c : report.components) names.push_back(c.name);
	for (const char* want : {"conv2d_k3s1p1", "batch_norm2d_train", "act_prelu", "reborn_bn_train", "reborn_bn_eval"})
		CHECK(std::find(names.begin(), names.end(), want) != names.end());

	GradcheckCase broken{"broken_relu", Shape{1, 2, 3, 3}, Mode::train,
			[](Rng&) -> ModulePtr<double> { return std::make_unique<BrokenRelu>(); }, {}};
	const auto r = check_component(broken, GradcheckOptions{});
	CHECK_FALSE(r.passed);
	CHECK(r.name == "broken_relu");
	GradcheckReport with_broken{{r}};
	std::ostringstream os;
	with_broken.print(os);
	CHECK(os.str().find("broken_relu") != std::string::npos);
	CHECK(os.str().find("FAIL") != std::string::npos);
}
