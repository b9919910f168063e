#include "illusion/filter.hpp"

#include "illusion/errors.hpp"
#include "illusion/rng.hpp"

#include <cmath>
#include <utility>

namespace illusion::filter {

namespace {

constexpr std::array<std::pair<std::string_view, ColorBucket>, 4> kBucketNames{{
    {"red", ColorBucket::Red},
    {"yellow", ColorBucket::Yellow},
    {"green", ColorBucket::Green},
    {"blue", ColorBucket::Blue},
}};

constexpr std::array<std::pair<std::string_view, SceneClass>, 3> kSceneNames{{
    {"single-object", SceneClass::SingleObject},
    {"multi-object", SceneClass::MultiObject},
    {"complex-scene", SceneClass::ComplexScene},
}};

template <typename Enum, std::size_t N>
Enum lookup(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table,
            std::string_view what) {
	for (const auto& [name, value] : table) {
		if (name == text) {
			return value;
		}
	}
	throw ValidationError("unknown " + std::string(what) + ": '" + std::string(text) + "'");
}

template <typename Enum, std::size_t N>
std::string_view nameOf(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
	for (const auto& [name, v] : table) {
		if (v == value) {
			return name;
		}
	}
	return "?";
}

Rgb transformPixel(Rgb p, double complement, double shift, double satBlend, double valueKeep) {
	Hsv c = rgb_to_hsv(p);
	if (c.s > 0.0) {
		const double d = hue_delta(c.h, complement);
		const double step = std::min(shift, std::abs(d));
		c.h = wrap_hue(c.h + (d >= 0.0 ? step : -step));
		c.s = c.s + satBlend * c.s * (1.0 - c.s);
	}
	c.v *= valueKeep;
	return hsv_to_rgb(c);
}

} // namespace

std::string_view to_string(ColorBucket b) { return nameOf(b, kBucketNames); }
ColorBucket parse_bucket(std::string_view text) { return lookup(text, kBucketNames, "color bucket"); }
std::string_view to_string(SceneClass c) { return nameOf(c, kSceneNames); }
SceneClass parse_scene_class(std::string_view text) { return lookup(text, kSceneNames, "scene class"); }

HueRange bucket_range(ColorBucket b) {
	switch (b) {
	case ColorBucket::Red: return {345.0, 15.0, 0.3, 0.2};
	case ColorBucket::Yellow: return {40.0, 70.0, 0.3, 0.2};
	case ColorBucket::Green: return {90.0, 150.0, 0.3, 0.2};
	case ColorBucket::Blue: return {200.0, 260.0, 0.3, 0.2};
	}
	throw ValidationError("unknown color bucket");
}

void FilterSpec::validate() const {
	const HueRange range = bucket_range(target);
	if (!(filter_hue_shift > range.width() / 2.0 && filter_hue_shift <= 180.0)) {
		throw ValidationError("filter_hue_shift must exceed half the target bucket width and be at most 180");
	}
	if (!(saturation_blend >= 0.0 && saturation_blend <= 1.0)) {
		throw ValidationError("saturation_blend must lie in [0, 1]");
	}
	if (!(value_blend >= 0.0 && value_blend < 1.0)) {
		throw ValidationError("value_blend must lie in [0, 1)");
	}
}

FilterSpec sample_filter_spec(std::uint64_t seed, ColorBucket target) {
	Rng rng(mix_seed(seed, 0));
	FilterSpec spec;
	spec.target = target;
	spec.filter_hue_shift = rng.uniform(35.0, 60.0);
	spec.saturation_blend = rng.uniform(0.0, 0.3);
	spec.value_blend = rng.uniform(0.0, 0.2);
	spec.seed = seed;
	spec.validate();
	return spec;
}

DominanceReport dominant_color(const Image& image, double threshold) {
	if (image.empty()) {
		throw ValidationError("dominant_color needs a non-empty image");
	}
	std::array<std::size_t, 4> counts{};
	std::array<HueRange, 4> ranges{};
	for (std::size_t i = 0; i < kAllBuckets.size(); ++i) {
		ranges[i] = bucket_range(kAllBuckets[i]);
	}
	for (const Rgb& p : image.pixels()) {
		const Hsv c = rgb_to_hsv(p);
		for (std::size_t i = 0; i < ranges.size(); ++i) {
			if (hsv_in_range(c, ranges[i])) {
				++counts[i];
				break;
			}
		}
	}
	DominanceReport report;
	std::size_t best = 0;
	for (std::size_t i = 0; i < counts.size(); ++i) {
		report.fractions[i] = static_cast<double>(counts[i]) / static_cast<double>(image.size());
		if (counts[i] > counts[best]) {
			best = i;
		}
	}
	if (counts[best] > 0 && report.fractions[best] >= threshold) {
		report.dominant = kAllBuckets[best];
	}
	return report;
}

Image apply_filter_pass(const Image& image, const FilterSpec& spec, double hue_shift) {
	const double complement = wrap_hue(bucket_range(spec.target).center() + 180.0);
	const double valueKeep = 1.0 - spec.value_blend;
	Image out = image;
	for (Rgb& p : out.pixels()) {
		p = transformPixel(p, complement, hue_shift, spec.saturation_blend, valueKeep);
	}
	return out;
}

std::size_t verify_suppression(const Image& image, const HueRange& target) {
	std::size_t violations = 0;
	for (const Rgb& p : image.pixels()) {
		if (hue_in_range(p, target)) {
			++violations;
		}
	}
	return violations;
}

SuppressionResult suppress(const Image& image, const FilterSpec& spec) {
	spec.validate();
	const HueRange range = bucket_range(spec.target);
	for (int i = 0; i < kMaxIterations; ++i) {
		// Every pass starts from the original so shifts never compound.
		const double shift = std::min(180.0, spec.filter_hue_shift + kShiftStep * i);
		Image candidate = apply_filter_pass(image, spec, shift);
		if (verify_suppression(candidate, range) == 0) {
			return SuppressionResult{std::move(candidate), shift, i + 1};
		}
	}
	throw ValidationError("suppression of " + std::string(to_string(spec.target)) + " did not converge after " +
	                      std::to_string(kMaxIterations) + " passes");
}

Image apply_suppression_filter(const Image& image, const FilterSpec& spec) {
	return suppress(image, spec).image;
}

FilterIllusion make_filter_illusion(const Image& source, const FilterSpec& spec) {
	const HueRange range = bucket_range(spec.target);
	Mask object(source.width(), source.height());
	for (int y = 0; y < source.height(); ++y) {
		for (int x = 0; x < source.width(); ++x) {
			if (hue_in_range(source.at(x, y), range)) {
				object.set(x, y);
			}
		}
	}
	if (object.count() == 0) {
		throw ValidationError("source image has no " + std::string(to_string(spec.target)) + " pixels");
	}
	SuppressionResult result = suppress(source, spec);
	FilterIllusion out;
	out.violations = verify_suppression(result.image, range);
	const MeanColor mean = masked_mean(result.image, object);
	out.pixel_answer = color_name(Rgb{to_channel(mean.r), to_channel(mean.g), to_channel(mean.b)});
	out.human_answer = std::string(to_string(spec.target));
	out.filtered = std::move(result.image);
	out.object = std::move(object);
	out.spec = spec;
	out.applied_shift = result.applied_shift;
	return out;
}

} // namespace illusion::filter
