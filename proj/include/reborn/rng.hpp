#ifndef REBORN_RNG_HPP_
#define REBORN_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace reborn {

/**
 * Counter-based pseudo-random generator.
 *
 * Draw k (k = 0, 1, ...) of a stream with seed s is
 *
 *     z = s + (k + 1) * 0x9E3779B97F4A7C15            (mod 2^64)
 *     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *     draw = z ^ (z >> 31)
 *
 * which is exactly SplitMix64. Uniform reals take the top 53 bits,
 * u = (draw >> 11) * 2^-53 in [0, 1). Normals use Box-Muller on two
 * consecutive uniforms: sqrt(-2 ln(1 - u1)) * cos(2 pi u2). No platform
 * facilities are involved, so streams are identical everywhere.
 */
class Rng {
public:
	explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

	std::uint64_t seed() const { return seed_; }
	std::uint64_t counter() const { return counter_; }

	std::uint64_t next_u64() {
		++counter_;
		return mix(seed_ + counter_ * kGolden);
	}

	/// Uniform in [0, 1).
	double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

	/// Uniform in [lo, hi).
	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Uniform integer in [0, n). Uses rejection so every value is equally likely.
	std::uint64_t below(std::uint64_t n) {
		const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
		std::uint64_t x;
		do {
			x = next_u64();
		} while (x >= limit);
		return x % n;
	}

	double normal() {
		const double u1 = uniform();
		const double u2 = uniform();
		return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
	}

	bool bernoulli(double p) { return uniform() < p; }

	/// Independent stream keyed by a label, e.g. derive("init") or derive("shuffle").
	Rng derive(std::string_view label) const { return Rng(mix(seed_ ^ fnv1a(label))); }
	Rng derive(std::uint64_t key) const { return Rng(mix(seed_ ^ mix(key + kGolden))); }

	static std::uint64_t mix(std::uint64_t z) {
		z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
		z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
		return z ^ (z >> 31);
	}

	static std::uint64_t fnv1a(std::string_view s) {
		std::uint64_t h = 0xCBF29CE484222325ULL;
		for (unsigned char ch : s) {
			h ^= ch;
			h *= 0x100000001B3ULL;
		}
		return h;
	}

private:
	static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

	std::uint64_t seed_;
	std::uint64_t counter_ = 0;
};

} // namespace reborn

#endif // REBORN_RNG_HPP_
