#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace illusion {

/// splitmix64 finalizer; derives independent child seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
	std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
	return z ^ (z >> 31);
}

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t stable_hash(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
	std::uint64_t h = basis;
	for (const char c : text) {
		h ^= static_cast<std::uint8_t>(c);
		h *= 0x100000001b3ULL;
	}
	return h;
}

/// Seeded generator whose draws are bit-identical on every standard library.
///
/// std::uniform_*_distribution is implementation-defined, so the helpers map
/// raw mt19937_64 output themselves.
class Rng {
public:
	explicit Rng(std::uint64_t seed) : engine_(seed) {}

	std::uint64_t next() { return engine_(); }

	/// Uniform in [0, 1).
	double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

	/// Uniform in [lo, hi).
	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

	/// Uniform integer in [lo, hi].
	std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
		const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
		if (span == 0) {
			return static_cast<std::int64_t>(engine_());
		}
		// Rejection keeps the draw exactly uniform.
		const std::uint64_t limit = (~std::uint64_t{0} / span) * span;
		std::uint64_t x = engine_();
		while (x >= limit) {
			x = engine_();
		}
		return lo + static_cast<std::int64_t>(x % span);
	}

	bool bernoulli(double p) { return uniform01() < p; }

	template <typename T>
	void shuffle(std::span<T> items) {
		for (std::size_t i = items.size(); i > 1; --i) {
			const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
			std::swap(items[i - 1], items[j]);
		}
	}

private:
	std::mt19937_64 engine_;
};

} // namespace illusion
