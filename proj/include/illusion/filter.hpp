#pragma once

#include "illusion/color.hpp"
#include "illusion/image.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace illusion::filter {

enum class ColorBucket { Red, Yellow, Green, Blue };

inline constexpr std::array<ColorBucket, 4> kAllBuckets{ColorBucket::Red, ColorBucket::Yellow, ColorBucket::Green,
                                                        ColorBucket::Blue};

std::string_view to_string(ColorBucket b);
ColorBucket parse_bucket(std::string_view text);

/// Named hue buckets: red [345,15], yellow [40,70], green [90,150], blue [200,260]; s >= 0.3, v >= 0.2.
HueRange bucket_range(ColorBucket b);

/// Scene complexity class of a filter source image.
enum class SceneClass { SingleObject, MultiObject, ComplexScene };
std::string_view to_string(SceneClass c);
SceneClass parse_scene_class(std::string_view text);

struct FilterSpec {
	ColorBucket target{ColorBucket::Red};
	double filter_hue_shift{40.0}; ///< degrees moved toward the complement of the target
	double saturation_blend{0.15}; ///< s' = s + blend * s * (1 - s)
	double value_blend{0.1};       ///< v' = v * (1 - blend)
	std::uint64_t seed{0};

	void validate() const;
};

/// Draws a spec with shift in [35, 60], saturation blend in [0, 0.3], value blend in [0, 0.2].
FilterSpec sample_filter_spec(std::uint64_t seed, ColorBucket target);

struct DominanceReport {
	std::array<double, 4> fractions{}; ///< indexed like kAllBuckets
	std::optional<ColorBucket> dominant;

	[[nodiscard]] double fraction(ColorBucket b) const { return fractions[static_cast<std::size_t>(b)]; }
};

inline constexpr double kDominanceThreshold = 0.25;

/// Throws ValidationError on an empty image.
DominanceReport dominant_color(const Image& image, double threshold = kDominanceThreshold);

/// Single filter pass with an explicit hue shift; no verification.
Image apply_filter_pass(const Image& image, const FilterSpec& spec, double hue_shift);

struct SuppressionResult {
	Image image;
	double applied_shift{0.0};
	int iterations{0};
};

inline constexpr double kShiftStep = 10.0;
inline constexpr int kMaxIterations = 12;

/// Filters, verifies, and widens the shift until no pixel matches the target bucket.
/// Throws ValidationError if that never happens within kMaxIterations passes.
SuppressionResult suppress(const Image& image, const FilterSpec& spec);
Image apply_suppression_filter(const Image& image, const FilterSpec& spec);

std::size_t verify_suppression(const Image& image, const HueRange& target);

/// A filtered image together with the object region that originally carried the target color.
struct FilterIllusion {
	Image filtered;
	Mask object;
	FilterSpec spec;
	double applied_shift{0.0};
	std::size_t violations{0};
	std::string human_answer; ///< the suppressed color
	std::string pixel_answer; ///< color name of the filtered object region mean
};

/// Throws ValidationError when the source has no pixel in the target bucket.
FilterIllusion make_filter_illusion(const Image& source, const FilterSpec& spec);

} // namespace illusion::filter
