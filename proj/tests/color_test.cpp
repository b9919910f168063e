#include "illusion/color.hpp"
#include "illusion/errors.hpp"
#include "illusion/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

namespace illusion {
namespace {

const HueRange kRed{345.0, 15.0, 0.3, 0.2};

Rgb randomRgb(Rng& rng) {
	return Rgb{static_cast<std::uint8_t>(rng.uniform_int(0, 255)), static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
	           static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
}

TEST(ScaleBrightness, Examples) {
	EXPECT_EQ(scale_brightness({100, 200, 50}, BrightnessFactor(1.0)), (Rgb{100, 200, 50}));
	EXPECT_EQ(scale_brightness({100, 200, 50}, BrightnessFactor(0.5)), (Rgb{50, 100, 25}));
	EXPECT_EQ(scale_brightness({200, 10, 10}, BrightnessFactor(1.5)), (Rgb{255, 15, 15}));
}

TEST(ScaleBrightness, RoundsHalfUp) {
	// 5 * 0.7 = 3.5 exactly in decimal, 3.4999... in binary.
	EXPECT_EQ(scale_brightness({5, 1, 3}, BrightnessFactor(0.7)), (Rgb{4, 1, 2}));
	EXPECT_EQ(scale_brightness({1, 3, 5}, BrightnessFactor(0.5)), (Rgb{1, 2, 3}));
}

TEST(ScaleBrightness, RejectsNonPositiveFactor) {
	EXPECT_THROW(BrightnessFactor(0.0), ValidationError);
	EXPECT_THROW(BrightnessFactor(-0.5), ValidationError);
	EXPECT_THROW(BrightnessFactor(std::nan("")), ValidationError);
}

TEST(ScaleBrightness, IdentityAndMonotoneProperty) {
	Rng rng(11);
	for (int i = 0; i < 2000; ++i) {
		const Rgb c = randomRgb(rng);
		EXPECT_EQ(scale_brightness(c, BrightnessFactor(1.0)), c);
		double m1 = rng.uniform(0.01, 3.0);
		double m2 = rng.uniform(0.01, 3.0);
		if (m1 > m2) {
			std::swap(m1, m2);
		}
		const Rgb lo = scale_brightness(c, BrightnessFactor(m1));
		const Rgb hi = scale_brightness(c, BrightnessFactor(m2));
		EXPECT_LE(lo.r, hi.r);
		EXPECT_LE(lo.g, hi.g);
		EXPECT_LE(lo.b, hi.b);
	}
}

TEST(RgbToHsv, Examples) {
	const Hsv red = rgb_to_hsv({255, 0, 0});
	EXPECT_DOUBLE_EQ(red.h, 0.0);
	EXPECT_DOUBLE_EQ(red.s, 1.0);
	EXPECT_DOUBLE_EQ(red.v, 1.0);

	const Hsv grey = rgb_to_hsv({128, 128, 128});
	EXPECT_DOUBLE_EQ(grey.h, 0.0);
	EXPECT_DOUBLE_EQ(grey.s, 0.0);
	EXPECT_NEAR(grey.v, 0.502, 5e-4);

	const Hsv blue = rgb_to_hsv({0, 0, 255});
	EXPECT_DOUBLE_EQ(blue.h, 240.0);
	EXPECT_DOUBLE_EQ(blue.s, 1.0);
	EXPECT_DOUBLE_EQ(blue.v, 1.0);
}

TEST(RgbToHsv, CanonicalRanges) {
	Rng rng(5);
	for (int i = 0; i < 5000; ++i) {
		const Hsv c = rgb_to_hsv(randomRgb(rng));
		EXPECT_GE(c.h, 0.0);
		EXPECT_LT(c.h, 360.0);
		EXPECT_GE(c.s, 0.0);
		EXPECT_LE(c.s, 1.0);
		EXPECT_GE(c.v, 0.0);
		EXPECT_LE(c.v, 1.0);
		if (c.s == 0.0) {
			EXPECT_EQ(c.h, 0.0);
		}
	}
}

TEST(HsvToRgb, Examples) {
	EXPECT_EQ(hsv_to_rgb({0.0, 1.0, 1.0}), (Rgb{255, 0, 0}));
	EXPECT_EQ(hsv_to_rgb({0.0, 0.0, 1.0}), (Rgb{255, 255, 255}));
}

TEST(HsvToRgb, RandomRoundtripWithinOne) {
	Rng rng(2024);
	int worst = 0;
	for (int i = 0; i < 1000; ++i) {
		const Rgb c = randomRgb(rng);
		const Rgb back = hsv_to_rgb(rgb_to_hsv(c));
		worst = std::max({worst, std::abs(c.r - back.r), std::abs(c.g - back.g), std::abs(c.b - back.b)});
	}
	EXPECT_LE(worst, 1);
}

TEST(HsvToRgb, ExhaustiveRoundtripWithinOne) {
	int worst = 0;
	for (int r = 0; r < 256; r += 3) {
		for (int g = 0; g < 256; ++g) {
			for (int b = 0; b < 256; ++b) {
				const Rgb c{std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)};
				const Rgb back = hsv_to_rgb(rgb_to_hsv(c));
				worst = std::max({worst, std::abs(c.r - back.r), std::abs(c.g - back.g), std::abs(c.b - back.b)});
			}
		}
	}
	EXPECT_LE(worst, 1);
}

TEST(ColorDistance, Examples) {
	EXPECT_DOUBLE_EQ(color_distance({10, 10, 10}, {10, 10, 10}), 0.0);
	EXPECT_NEAR(color_distance({0, 0, 0}, {255, 255, 255}), 441.673, 1e-3);
	EXPECT_DOUBLE_EQ(color_distance({0, 0, 0}, {3, 4, 0}), 5.0);
}

TEST(ColorDistance, MetricProperties) {
	Rng rng(77);
	for (int i = 0; i < 3000; ++i) {
		const Rgb a = randomRgb(rng);
		const Rgb b = randomRgb(rng);
		const Rgb c = randomRgb(rng);
		EXPECT_DOUBLE_EQ(color_distance(a, b), color_distance(b, a));
		EXPECT_LE(color_distance(a, c), color_distance(a, b) + color_distance(b, c) + 1e-9);
		EXPECT_EQ(color_distance(a, b) == 0.0, a == b);
	}
}

TEST(HueInRange, Examples) {
	EXPECT_TRUE(hue_in_range({255, 0, 0}, kRed));
	EXPECT_FALSE(hue_in_range({128, 128, 128}, HueRange{0.0, 359.0, 0.01, 0.0}));
	EXPECT_FALSE(hue_in_range({128, 128, 128}, kRed));
	EXPECT_FALSE(hue_in_range({0, 0, 255}, kRed));
}

TEST(HueInRange, WrapAroundBoundaries) {
	EXPECT_TRUE(kRed.contains_hue(345.0));
	EXPECT_TRUE(kRed.contains_hue(15.0));
	EXPECT_TRUE(kRed.contains_hue(359.9));
	EXPECT_FALSE(kRed.contains_hue(15.1));
	EXPECT_FALSE(kRed.contains_hue(344.9));
	EXPECT_DOUBLE_EQ(kRed.width(), 30.0);
	EXPECT_DOUBLE_EQ(kRed.center(), 0.0);
	const HueRange blue{200.0, 260.0};
	EXPECT_DOUBLE_EQ(blue.center(), 230.0);
}

TEST(HueInRange, FloorsApply) {
	EXPECT_FALSE(hue_in_range({40, 0, 0}, kRed));   // v = 0.157 < 0.2
	EXPECT_FALSE(hue_in_range({255, 200, 200}, kRed)); // s = 0.216 < 0.3
	EXPECT_TRUE(hue_in_range({255, 170, 170}, kRed));  // s = 0.333
}

TEST(HueInRange, ValueScalingAboveFloorPreservesMembership) {
	Rng rng(3);
	for (int i = 0; i < 5000; ++i) {
		Hsv c{rng.uniform(0.0, 360.0), rng.uniform(0.0, 1.0), rng.uniform(0.2, 1.0)};
		const HueRange range{rng.uniform(0.0, 360.0), rng.uniform(0.0, 360.0), rng.uniform(0.0, 1.0), 0.2};
		const bool before = hsv_in_range(c, range);
		c.v = rng.uniform(range.v_min, 1.0);
		EXPECT_EQ(hsv_in_range(c, range), before);
	}
	// Exact integer doubling preserves hue and saturation on 8-bit pixels too.
	for (int i = 0; i < 5000; ++i) {
		const Rgb c{std::uint8_t(rng.uniform_int(51, 127)), std::uint8_t(rng.uniform_int(0, 127)),
		            std::uint8_t(rng.uniform_int(0, 127))};
		EXPECT_EQ(hue_in_range(c, kRed), hue_in_range(scale_brightness(c, BrightnessFactor(2.0)), kRed));
	}
}

TEST(HueRange, Validate) {
	EXPECT_NO_THROW(kRed.validate());
	EXPECT_THROW((HueRange{360.0, 10.0}.validate()), ValidationError);
	EXPECT_THROW((HueRange{0.0, 10.0, 1.5, 0.2}.validate()), ValidationError);
}

TEST(ColorName, CommonColors) {
	EXPECT_EQ(color_name({255, 0, 0}), "red");
	EXPECT_EQ(color_name({0, 0, 255}), "blue");
	EXPECT_EQ(color_name({0, 200, 0}), "green");
	EXPECT_EQ(color_name({250, 230, 20}), "yellow");
	EXPECT_EQ(color_name({128, 128, 128}), "gray");
	EXPECT_EQ(color_name({10, 10, 10}), "black");
	EXPECT_EQ(color_name({250, 250, 250}), "white");
}

TEST(Hue, WrapAndDelta) {
	EXPECT_DOUBLE_EQ(wrap_hue(-30.0), 330.0);
	EXPECT_DOUBLE_EQ(wrap_hue(720.0), 0.0);
	EXPECT_DOUBLE_EQ(hue_delta(350.0, 10.0), 20.0);
	EXPECT_DOUBLE_EQ(hue_delta(10.0, 350.0), -20.0);
	EXPECT_DOUBLE_EQ(hue_delta(0.0, 180.0), 180.0);
}

} // namespace
} // namespace illusion
