#include "illusion/color.hpp"

#include "illusion/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>

namespace illusion {

namespace {

// Absorbs binary representation error of decimal factors (5 * 0.7 must round like 3.5).
constexpr double kRoundingSlack = 1e-9;

} // namespace

BrightnessFactor::BrightnessFactor(double mu) : mu_(mu) {
	if (!(mu > 0.0) || !std::isfinite(mu)) {
		throw ValidationError("brightness factor must be a positive finite number, got " + std::to_string(mu));
	}
}

void HueRange::validate() const {
	auto inUnit = [](double x) { return x >= 0.0 && x <= 1.0; };
	if (!(lo >= 0.0 && lo < 360.0 && hi >= 0.0 && hi < 360.0)) {
		throw ValidationError("hue range bounds must lie in [0, 360)");
	}
	if (!inUnit(s_min) || !inUnit(v_min)) {
		throw ValidationError("hue range s_min/v_min must lie in [0, 1]");
	}
}

bool HueRange::contains_hue(double h) const noexcept {
	if (lo <= hi) {
		return h >= lo && h <= hi;
	}
	return h >= lo || h <= hi;
}

double HueRange::width() const noexcept {
	return lo <= hi ? hi - lo : 360.0 - lo + hi;
}

double HueRange::center() const noexcept {
	return wrap_hue(lo + width() / 2.0);
}

std::uint8_t to_channel(double value) noexcept {
	const double rounded = std::floor(value + 0.5 + kRoundingSlack);
	return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

Rgb scale_brightness(Rgb c, BrightnessFactor mu) {
	const double m = mu.value();
	return Rgb{to_channel(c.r * m), to_channel(c.g * m), to_channel(c.b * m)};
}

Hsv rgb_to_hsv(Rgb c) {
	const double r = c.r / 255.0;
	const double g = c.g / 255.0;
	const double b = c.b / 255.0;
	const double maxc = std::max({r, g, b});
	const double minc = std::min({r, g, b});
	const double delta = maxc - minc;

	Hsv out;
	out.v = maxc;
	if (maxc <= 0.0 || delta <= 0.0) {
		return out;
	}
	out.s = delta / maxc;

	// Integer channel comparisons keep the sector choice exact.
	double h = 0.0;
	if (c.r >= c.g && c.r >= c.b) {
		h = 60.0 * ((g - b) / delta);
	} else if (c.g >= c.b) {
		h = 60.0 * ((b - r) / delta + 2.0);
	} else {
		h = 60.0 * ((r - g) / delta + 4.0);
	}
	out.h = wrap_hue(h);
	return out;
}

Rgb hsv_to_rgb(const Hsv& c) {
	const double v = std::clamp(c.v, 0.0, 1.0);
	const double s = std::clamp(c.s, 0.0, 1.0);
	if (s <= 0.0) {
		const auto grey = to_channel(v * 255.0);
		return Rgb{grey, grey, grey};
	}
	const double h = wrap_hue(c.h) / 60.0;
	const int sector = static_cast<int>(std::floor(h)) % 6;
	const double f = h - std::floor(h);
	const double p = v * (1.0 - s);
	const double q = v * (1.0 - s * f);
	const double t = v * (1.0 - s * (1.0 - f));

	double r = 0.0;
	double g = 0.0;
	double b = 0.0;
	switch (sector) {
	case 0: r = v; g = t; b = p; break;
	case 1: r = q; g = v; b = p; break;
	case 2: r = p; g = v; b = t; break;
	case 3: r = p; g = q; b = v; break;
	case 4: r = t; g = p; b = v; break;
	default: r = v; g = p; b = q; break;
	}
	return Rgb{to_channel(r * 255.0), to_channel(g * 255.0), to_channel(b * 255.0)};
}

double color_distance(Rgb a, Rgb b) {
	const double dr = double(a.r) - double(b.r);
	const double dg = double(a.g) - double(b.g);
	const double db = double(a.b) - double(b.b);
	return std::sqrt(dr * dr + dg * dg + db * db);
}

bool hsv_in_range(const Hsv& c, const HueRange& range) noexcept {
	// Zero saturation has no hue; it never belongs to a hue bucket.
	if (c.s <= 0.0) {
		return false;
	}
	return c.s >= range.s_min && c.v >= range.v_min && range.contains_hue(c.h);
}

bool hue_in_range(Rgb c, const HueRange& range) noexcept {
	return hsv_in_range(rgb_to_hsv(c), range);
}

double luma(Rgb c) noexcept {
	return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
}

std::string color_name(Rgb c) {
	const Hsv hsv = rgb_to_hsv(c);
	if (hsv.v < 0.2) {
		return "black";
	}
	if (hsv.s < 0.15) {
		return hsv.v > 0.85 ? "white" : "gray";
	}
	struct Sector {
		double upTo;
		const char* name;
	};
	static constexpr std::array<Sector, 8> sectors{{
	    {15.0, "red"},
	    {40.0, "orange"},
	    {70.0, "yellow"},
	    {170.0, "green"},
	    {200.0, "cyan"},
	    {260.0, "blue"},
	    {300.0, "purple"},
	    {345.0, "pink"},
	}};
	for (const auto& sector : sectors) {
		if (hsv.h < sector.upTo) {
			if (sector.name == std::string_view{"orange"} && hsv.v < 0.6) {
				return "brown";
			}
			return sector.name;
		}
	}
	return "red";
}

double wrap_hue(double degrees) noexcept {
	double h = std::fmod(degrees, 360.0);
	if (h < 0.0) {
		h += 360.0;
	}
	if (h >= 360.0) {
		h -= 360.0;
	}
	return h;
}

double hue_delta(double from, double to) noexcept {
	double d = wrap_hue(to - from);
	if (d > 180.0) {
		d -= 360.0;
	}
	return d;
}

} // namespace illusion
