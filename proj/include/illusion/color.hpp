#pragma once

#include <cstdint>
#include <string>

namespace illusion {

/// 8-bit sRGB triple.
struct Rgb {
	std::uint8_t r{0};
	std::uint8_t g{0};
	std::uint8_t b{0};

	friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// h in [0, 360), s and v in [0, 1]. h is 0 whenever s is 0.
struct Hsv {
	double h{0.0};
	double s{0.0};
	double v{0.0};
};

/// Positive multiplicative brightness factor applied to every RGB channel.
class BrightnessFactor {
public:
	explicit BrightnessFactor(double mu);

	[[nodiscard]] double value() const noexcept { return mu_; }

private:
	double mu_;
};

/// Hue interval in degrees with saturation/value floors. lo > hi wraps through 0.
struct HueRange {
	double lo{0.0};
	double hi{0.0};
	double s_min{0.3};
	double v_min{0.2};

	/// Throws ValidationError when bounds are out of range.
	void validate() const;
	[[nodiscard]] bool contains_hue(double h) const noexcept;
	[[nodiscard]] double width() const noexcept;
	[[nodiscard]] double center() const noexcept;
};

Rgb scale_brightness(Rgb c, BrightnessFactor mu);

Hsv rgb_to_hsv(Rgb c);
Rgb hsv_to_rgb(const Hsv& c);

/// Euclidean distance in 8-bit RGB space.
double color_distance(Rgb a, Rgb b);

bool hsv_in_range(const Hsv& c, const HueRange& range) noexcept;
bool hue_in_range(Rgb c, const HueRange& range) noexcept;

/// Rec. 601 luma in [0, 255]; used for darker/brighter comparisons.
double luma(Rgb c) noexcept;

/// Coarse English color name ("red", "gray", ...) for a pixel value.
std::string color_name(Rgb c);

/// Wraps any angle into [0, 360).
double wrap_hue(double degrees) noexcept;

/// Signed shortest angular difference to - from, in (-180, 180].
double hue_delta(double from, double to) noexcept;

/// Round half up, saturating to [0, 255].
std::uint8_t to_channel(double value) noexcept;

} // namespace illusion
