#include "illusion/procgen.hpp"

#include "illusion/errors.hpp"
#include "illusion/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace illusion::procgen {

namespace {

template <typename Enum, std::size_t N>
Enum parseEnum(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table,
               std::string_view what) {
	for (const auto& [name, value] : table) {
		if (name == text) {
			return value;
		}
	}
	throw ValidationError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::array<std::pair<std::string_view, Orientation>, 2> kOrientations{{
    {"left-right", Orientation::LeftRight},
    {"up-down", Orientation::UpDown},
}};
constexpr std::array<std::pair<std::string_view, StripeDirection>, 3> kDirections{{
    {"horizontal", StripeDirection::Horizontal},
    {"vertical", StripeDirection::Vertical},
    {"diagonal", StripeDirection::Diagonal},
}};
constexpr std::array<std::pair<std::string_view, LabelKind>, 3> kKinds{{
    {"illusion", LabelKind::Illusion},
    {"control", LabelKind::Control},
    {"ambiguous", LabelKind::Ambiguous},
}};
constexpr std::array<std::pair<std::string_view, Relation>, 3> kRelations{{
    {"a_darker", Relation::ADarker},
    {"b_darker", Relation::BDarker},
    {"identical", Relation::Identical},
}};

template <typename Enum, std::size_t N>
std::string_view enumName(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
	for (const auto& [name, v] : table) {
		if (v == value) {
			return name;
		}
	}
	return "?";
}

void requireRange(const Range& r, std::string_view name) {
	if (r.empty() || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
		throw ValidationError("config range '" + std::string(name) + "' is empty");
	}
}

void requireRange(const IntRange& r, std::string_view name) {
	if (r.empty()) {
		throw ValidationError("config range '" + std::string(name) + "' is empty");
	}
}

int blurRadius(double sigma) {
	return sigma > 0.0 ? static_cast<int>(std::ceil(3.0 * sigma)) : 0;
}

// Boundary offsets: uniform +-amplitude knots every few pixels, linearly interpolated, rounded.
std::vector<int> jitterProfile(Rng& rng, int length, double amplitude) {
	std::vector<int> out(static_cast<std::size_t>(length), 0);
	if (amplitude <= 0.0 || length <= 0) {
		return out;
	}
	constexpr int kKnotSpacing = 6;
	const int knots = length / kKnotSpacing + 2;
	std::vector<double> knotValues(static_cast<std::size_t>(knots));
	for (auto& k : knotValues) {
		k = rng.uniform(-amplitude, amplitude);
	}
	for (int i = 0; i < length; ++i) {
		const int k = i / kKnotSpacing;
		const double t = static_cast<double>(i % kKnotSpacing) / kKnotSpacing;
		const double value = knotValues[k] * (1.0 - t) + knotValues[k + 1] * t;
		out[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(value + 0.5));
	}
	return out;
}

void paintJitteredSquare(Image& image, Mask& mask, int x0, int y0, int size, Rgb fill, Rng& rng, double amplitude) {
	const auto left = jitterProfile(rng, size, amplitude);
	const auto right = jitterProfile(rng, size, amplitude);
	const auto top = jitterProfile(rng, size, amplitude);
	const auto bottom = jitterProfile(rng, size, amplitude);
	const int pad = static_cast<int>(std::ceil(amplitude));
	for (int y = std::max(0, y0 - pad); y < std::min(image.height(), y0 + size + pad); ++y) {
		const int ry = std::clamp(y - y0, 0, size - 1);
		for (int x = std::max(0, x0 - pad); x < std::min(image.width(), x0 + size + pad); ++x) {
			const int cx = std::clamp(x - x0, 0, size - 1);
			const bool inside = x >= x0 + left[ry] && x <= x0 + size - 1 + right[ry] && y >= y0 + top[cx] &&
			                    y <= y0 + size - 1 + bottom[cx];
			if (inside) {
				image.at(x, y) = fill;
				mask.set(x, y);
			}
		}
	}
}

// Separable Gaussian blur with clamp-to-edge borders; uniform areas stay exact.
void gaussianBlur(Image& image, double sigma) {
	const int radius = blurRadius(sigma);
	if (radius == 0) {
		return;
	}
	std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
	double total = 0.0;
	for (int i = -radius; i <= radius; ++i) {
		const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
		kernel[static_cast<std::size_t>(i + radius)] = w;
		total += w;
	}
	for (auto& w : kernel) {
		w /= total;
	}

	const int width = image.width();
	const int height = image.height();
	std::vector<float> tmp(static_cast<std::size_t>(width) * height * 3);
	for (int y = 0; y < height; ++y) {
		for (int x = 0; x < width; ++x) {
			double acc[3] = {0.0, 0.0, 0.0};
			for (int k = -radius; k <= radius; ++k) {
				const Rgb& p = image.at(std::clamp(x + k, 0, width - 1), y);
				const double w = kernel[static_cast<std::size_t>(k + radius)];
				acc[0] += w * p.r;
				acc[1] += w * p.g;
				acc[2] += w * p.b;
			}
			const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
			tmp[i] = static_cast<float>(acc[0]);
			tmp[i + 1] = static_cast<float>(acc[1]);
			tmp[i + 2] = static_cast<float>(acc[2]);
		}
	}
	for (int y = 0; y < height; ++y) {
		for (int x = 0; x < width; ++x) {
			double acc[3] = {0.0, 0.0, 0.0};
			for (int k = -radius; k <= radius; ++k) {
				const std::size_t i = (static_cast<std::size_t>(std::clamp(y + k, 0, height - 1)) * width + x) * 3;
				const double w = kernel[static_cast<std::size_t>(k + radius)];
				acc[0] += w * tmp[i];
				acc[1] += w * tmp[i + 1];
				acc[2] += w * tmp[i + 2];
			}
			image.at(x, y) = Rgb{to_channel(acc[0]), to_channel(acc[1]), to_channel(acc[2])};
		}
	}
}

struct Percept {
	double a{0.0};
	double b{0.0};
};

// Relation from two brightness values via a Weber contrast against the jnd.
std::pair<Relation, bool> judge(const Percept& p, const LabelModel& model) {
	const double mean = (p.a + p.b) / 2.0;
	const double contrast = mean > 0.0 ? (p.b - p.a) / mean : 0.0;
	const bool ambiguous = std::abs(std::abs(contrast) - model.jnd) < model.dead_band;
	if (std::abs(contrast) < model.jnd) {
		return {Relation::Identical, ambiguous};
	}
	return {contrast > 0.0 ? Relation::ADarker : Relation::BDarker, ambiguous};
}

Relation pixelRelation(Rgb a, Rgb b) {
	const double la = luma(a);
	const double lb = luma(b);
	if (la == lb) {
		return Relation::Identical;
	}
	return la < lb ? Relation::ADarker : Relation::BDarker;
}

IllusionLabel makeLabel(Relation direction, std::pair<Relation, bool> human, double shift) {
	IllusionLabel label;
	label.direction = direction;
	label.predicted_human = human.first;
	label.shift = shift;
	if (human.second) {
		label.kind = LabelKind::Ambiguous;
	} else {
		label.kind = direction == human.first ? LabelKind::Control : LabelKind::Illusion;
	}
	return label;
}

struct WallRect {
	int x0{0};
	int y0{0};
	int x1{0}; // exclusive
	int y1{0}; // exclusive
};

std::pair<WallRect, WallRect> stripeWalls(int width, int height) {
	const int margin = std::max(4, width / 16);
	const int gap = std::max(2, width / 32);
	const int vmargin = std::max(4, height / 16);
	return {WallRect{margin, vmargin, width / 2 - gap, height - vmargin},
	        WallRect{width / 2 + gap, vmargin, width - margin, height - vmargin}};
}

double stripeExtent(const WallRect& r, StripeDirection direction) {
	const int w = r.x1 - r.x0;
	const int h = r.y1 - r.y0;
	switch (direction) {
	case StripeDirection::Horizontal: return h;
	case StripeDirection::Vertical: return w;
	case StripeDirection::Diagonal: return std::min(w, h);
	}
	return 0.0;
}

int stripeNoisePad(const StripeNoise& noise) {
	return static_cast<int>(std::ceil(noise.curvature)) + noise.misalignment;
}

struct StripeCoords {
	double u{0.0};
	double v{0.0};
};

StripeCoords stripeCoords(StripeDirection direction, double x, double y) {
	switch (direction) {
	case StripeDirection::Horizontal: return {y, x};
	case StripeDirection::Vertical: return {x, y};
	case StripeDirection::Diagonal: return {(x + y) / std::numbers::sqrt2, (x - y) / std::numbers::sqrt2};
	}
	return {};
}

void paintStripeWall(Image& image, Mask& mask, const WallRect& rect, const StripeSpec& spec, Rgb fill, Rgb separator,
                     Rng& rng) {
	const auto [uc, vc] = stripeCoords(spec.direction, (rect.x0 + rect.x1) / 2.0, (rect.y0 + rect.y1) / 2.0);
	(void)vc;
	const int bands = 2 * spec.stripe_count - 1;
	const double uStart = uc - bands * spec.stripe_width / 2.0;

	// v-extent of the wall for curvature period and segment indexing.
	double vMin = 1e300;
	double vMax = -1e300;
	for (const auto& [cx, cy] : std::array<std::pair<double, double>, 4>{
	         {{double(rect.x0), double(rect.y0)}, {double(rect.x1), double(rect.y0)},
	          {double(rect.x0), double(rect.y1)}, {double(rect.x1), double(rect.y1)}}}) {
		const double v = stripeCoords(spec.direction, cx, cy).v;
		vMin = std::min(vMin, v);
		vMax = std::max(vMax, v);
	}
	const double vSpan = std::max(1.0, vMax - vMin);

	const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
	constexpr int kSegments = 4;
	std::array<int, kSegments> offsets{};
	for (auto& o : offsets) {
		o = static_cast<int>(rng.uniform_int(-spec.noise.misalignment, spec.noise.misalignment));
	}

	for (int y = rect.y0; y < rect.y1; ++y) {
		for (int x = rect.x0; x < rect.x1; ++x) {
			const auto [u, v] = stripeCoords(spec.direction, x + 0.5, y + 0.5);
			const double vRel = v - vMin;
			const int segment = std::clamp(static_cast<int>(vRel / vSpan * kSegments), 0, kSegments - 1);
			const double bend = spec.noise.curvature * std::sin(2.0 * std::numbers::pi * vRel / vSpan + phase);
			const double local = u - uStart + bend + offsets[static_cast<std::size_t>(segment)];
			const int band = static_cast<int>(std::floor(local / spec.stripe_width));
			if (band < 0 || band >= bands) {
				continue;
			}
			if (band % 2 == 0) {
				image.at(x, y) = fill;
				mask.set(x, y);
			} else {
				image.at(x, y) = separator;
			}
		}
	}
}

} // namespace

std::string_view to_string(Orientation o) { return enumName(o, kOrientations); }
std::string_view to_string(StripeDirection d) { return enumName(d, kDirections); }
std::string_view to_string(LabelKind k) { return enumName(k, kKinds); }
std::string_view to_string(Relation r) { return enumName(r, kRelations); }
Orientation parse_orientation(std::string_view text) { return parseEnum(text, kOrientations, "orientation"); }
StripeDirection parse_stripe_direction(std::string_view text) { return parseEnum(text, kDirections, "stripe direction"); }
LabelKind parse_label_kind(std::string_view text) { return parseEnum(text, kKinds, "label kind"); }
Relation parse_relation(std::string_view text) { return parseEnum(text, kRelations, "relation"); }

bool IllusionLabel::consistent() const noexcept {
	switch (kind) {
	case LabelKind::Illusion: return direction != predicted_human;
	case LabelKind::Control: return direction == predicted_human;
	case LabelKind::Ambiguous: return true;
	}
	return false;
}

// ---------------------------------------------------------------------------
// Contrast stimuli

int ContrastSpec::noise_padding() const noexcept {
	return static_cast<int>(std::ceil(noise.edge_jitter)) + blurRadius(noise.softness) + 1;
}

void ContrastSpec::validate() const {
	if (width < 8 || height < 8) {
		throw ValidationError("contrast canvas must be at least 8x8");
	}
	if (!(mu_b1 > 0.0 && mu_b1 < 1.0) || !(mu_b2 > 1.0)) {
		throw ValidationError("contrast background factors must satisfy 0 < mu_b1 < 1 < mu_b2");
	}
	if (!(mu_f1 > 0.0) || !(mu_f2 > 0.0)) {
		throw ValidationError("foreground brightness factors must be positive");
	}
	if (noise.edge_jitter < 0.0 || noise.softness < 0.0) {
		throw ValidationError("noise parameters must be non-negative");
	}
	if (square_size < 1) {
		throw ValidationError("square size must be positive");
	}
	const int pad = noise_padding();
	const int s = square_size;
	if (orientation == Orientation::LeftRight) {
		const int boundary = width / 2;
		if (x1 < pad || x1 + s + pad > boundary || y1 < pad || y1 + s + pad > height) {
			throw ValidationError("square A must lie inside the first (left) background half");
		}
		if (x2 != width - x1 - s || y2 != y1) {
			throw ValidationError("square B must mirror square A across the vertical boundary");
		}
	} else {
		const int boundary = height / 2;
		if (y1 < pad || y1 + s + pad > boundary || x1 < pad || x1 + s + pad > width) {
			throw ValidationError("square A must lie inside the first (upper) background half");
		}
		if (y2 != height - y1 - s || x2 != x1) {
			throw ValidationError("square B must mirror square A across the horizontal boundary");
		}
	}
}

void ContrastConfig::validate() const {
	requireRange(mu_b1, "mu_b1");
	requireRange(mu_b2, "mu_b2");
	requireRange(mu_f, "mu_f");
	requireRange(square_fraction, "square_fraction");
	if (!(mu_b1.lo > 0.0 && mu_b1.hi < 1.0)) {
		throw ValidationError("mu_b1 range must lie inside (0, 1)");
	}
	if (!(mu_b2.lo > 1.0)) {
		throw ValidationError("mu_b2 range must lie above 1");
	}
	if (!(mu_f.lo > 0.0)) {
		throw ValidationError("mu_f range must be positive");
	}
	if (!(square_fraction.lo > 0.0)) {
		throw ValidationError("square_fraction must be positive");
	}
	if (equal_foreground_probability < 0.0 || equal_foreground_probability > 1.0) {
		throw ValidationError("equal_foreground_probability must lie in [0, 1]");
	}
	if (noise.edge_jitter < 0.0 || noise.softness < 0.0) {
		throw ValidationError("noise parameters must be non-negative");
	}
	ContrastSpec probe;
	probe.noise = noise;
	const int pad = probe.noise_padding();
	const int largest = static_cast<int>(std::lround(square_fraction.hi * std::min(width, height)));
	if (width < 8 || height < 8 || largest + 2 * pad > std::min(width, height) / 2) {
		throw ValidationError("largest square plus noise padding does not fit in half the canvas");
	}
}

ContrastSpec sample_contrast_spec(std::uint64_t seed, const ContrastConfig& config) {
	config.validate();
	Rng rng(mix_seed(seed, 0));
	auto randomColor = [&rng] {
		return Rgb{static_cast<std::uint8_t>(rng.uniform_int(0, 255)), static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
		           static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
	};

	ContrastSpec spec;
	spec.width = config.width;
	spec.height = config.height;
	spec.seed = seed;
	spec.noise = config.noise;
	spec.background = randomColor();
	spec.foreground = randomColor();
	spec.mu_b1 = rng.uniform(config.mu_b1.lo, config.mu_b1.hi);
	spec.mu_b2 = rng.uniform(config.mu_b2.lo, config.mu_b2.hi);
	spec.mu_f1 = rng.uniform(config.mu_f.lo, config.mu_f.hi);
	const double mu = rng.uniform(config.mu_f.lo, config.mu_f.hi);
	spec.mu_f2 = rng.bernoulli(config.equal_foreground_probability) ? spec.mu_f1 : mu;
	const bool leftRight = rng.bernoulli(0.5);
	spec.orientation = config.orientation.value_or(leftRight ? Orientation::LeftRight : Orientation::UpDown);
	spec.dark_half_first = rng.bernoulli(0.5);

	const int minSide = std::min(config.width, config.height);
	const double fraction = rng.uniform(config.square_fraction.lo, config.square_fraction.hi);
	spec.square_size = std::max(1, static_cast<int>(std::lround(fraction * minSide)));
	const int pad = spec.noise_padding();
	const int s = spec.square_size;
	if (spec.orientation == Orientation::LeftRight) {
		spec.x1 = static_cast<int>(rng.uniform_int(pad, config.width / 2 - s - pad));
		spec.y1 = static_cast<int>(rng.uniform_int(pad, config.height - s - pad));
		spec.x2 = config.width - spec.x1 - s;
		spec.y2 = spec.y1;
	} else {
		spec.x1 = static_cast<int>(rng.uniform_int(pad, config.width - s - pad));
		spec.y1 = static_cast<int>(rng.uniform_int(pad, config.height / 2 - s - pad));
		spec.x2 = spec.x1;
		spec.y2 = config.height - spec.y1 - s;
	}
	spec.validate();
	return spec;
}

std::pair<Rgb, Rgb> target_fills(const ContrastSpec& spec) {
	return {scale_brightness(spec.foreground, BrightnessFactor(spec.mu_f1)),
	        scale_brightness(spec.foreground, BrightnessFactor(spec.mu_f2))};
}

double predicted_shift(const ContrastSpec& spec, const LabelModel& model) {
	const double d = color_distance(spec.background, spec.foreground);
	return model.amplitude * (spec.mu_b2 - spec.mu_b1) * std::exp(-d / model.distance_scale);
}

IllusionLabel predict_label(const ContrastSpec& spec, const LabelModel& model) {
	const auto [fillA, fillB] = target_fills(spec);
	const double shift = predicted_shift(spec, model);
	// A darker surround brightens the square; a brighter one dims it.
	const double signA = spec.dark_half_first ? 1.0 : -1.0;
	const Percept percept{luma(fillA) * (1.0 + signA * shift), luma(fillB) * (1.0 - signA * shift)};
	return makeLabel(pixelRelation(fillA, fillB), judge(percept, model), shift);
}

SimpleStimulus render_contrast(const ContrastSpec& spec, const LabelModel& model) {
	spec.validate();
	const Rgb dark = scale_brightness(spec.background, BrightnessFactor(spec.mu_b1));
	const Rgb bright = scale_brightness(spec.background, BrightnessFactor(spec.mu_b2));
	const Rgb firstHalf = spec.dark_half_first ? dark : bright;
	const Rgb secondHalf = spec.dark_half_first ? bright : dark;

	SimpleStimulus out;
	out.pixels = Image(spec.width, spec.height, firstHalf);
	out.region_a = Mask(spec.width, spec.height);
	out.region_b = Mask(spec.width, spec.height);
	for (int y = 0; y < spec.height; ++y) {
		for (int x = 0; x < spec.width; ++x) {
			const bool second = spec.orientation == Orientation::LeftRight ? x >= spec.width / 2 : y >= spec.height / 2;
			if (second) {
				out.pixels.at(x, y) = secondHalf;
			}
		}
	}

	Rng rng(mix_seed(spec.seed, 1));
	const auto [fillA, fillB] = target_fills(spec);
	paintJitteredSquare(out.pixels, out.region_a, spec.x1, spec.y1, spec.square_size, fillA, rng, spec.noise.edge_jitter);
	paintJitteredSquare(out.pixels, out.region_b, spec.x2, spec.y2, spec.square_size, fillB, rng, spec.noise.edge_jitter);
	gaussianBlur(out.pixels, spec.noise.softness);

	out.spec = spec;
	out.predicted_label = predict_label(spec, model);
	return out;
}

ContrastSpec sample_contrast_with_kind(std::uint64_t seed, const ContrastConfig& config, const LabelModel& model,
                                       LabelKind wanted, int max_attempts) {
	if (wanted == LabelKind::Ambiguous) {
		throw ValidationError("ambiguous stimuli are never emitted on request");
	}
	for (int attempt = 0; attempt < max_attempts; ++attempt) {
		const ContrastSpec spec = sample_contrast_spec(mix_seed(seed, static_cast<std::uint64_t>(attempt)), config);
		if (predict_label(spec, model).kind == wanted) {
			return spec;
		}
	}
	throw ValidationError("no contrast spec with label '" + std::string(to_string(wanted)) + "' after " +
	                      std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Stripe stimuli

void StripeSpec::validate() const {
	if (width < 32 || height < 32) {
		throw ValidationError("stripe canvas must be at least 32x32");
	}
	if (stripe_count < 2) {
		throw ValidationError("stripe count must be at least 2");
	}
	if (stripe_width < 1) {
		throw ValidationError("stripe width must be positive");
	}
	if (!(mu_s1 > 0.0) || !(mu_s2 > 0.0)) {
		throw ValidationError("stripe brightness factors must be positive");
	}
	if (noise.curvature < 0.0 || noise.misalignment < 0) {
		throw ValidationError("noise parameters must be non-negative");
	}
	const auto [wallA, wallB] = stripeWalls(width, height);
	(void)wallB;
	const double needed = double(2 * stripe_count - 1) * stripe_width + 2.0 * stripeNoisePad(noise);
	if (needed > stripeExtent(wallA, direction)) {
		throw ValidationError("stripe_width * stripe count exceeds the canvas");
	}
}

void StripeConfig::validate() const {
	requireRange(mu_s, "mu_s");
	requireRange(stripe_count, "stripe_count");
	requireRange(stripe_width, "stripe_width");
	if (!(mu_s.lo > 0.0)) {
		throw ValidationError("mu_s range must be positive");
	}
	if (stripe_count.lo < 2 || stripe_width.lo < 1) {
		throw ValidationError("stripe_count must be >= 2 and stripe_width >= 1");
	}
	if (equal_stripe_probability < 0.0 || equal_stripe_probability > 1.0) {
		throw ValidationError("equal_stripe_probability must lie in [0, 1]");
	}
	if (noise.curvature < 0.0 || noise.misalignment < 0) {
		throw ValidationError("noise parameters must be non-negative");
	}
	if (width < 32 || height < 32) {
		throw ValidationError("stripe canvas must be at least 32x32");
	}
	// The smallest configuration must fit in every direction.
	const auto [wallA, wallB] = stripeWalls(width, height);
	(void)wallB;
	const double needed = double(2 * stripe_count.lo - 1) * stripe_width.lo + 2.0 * stripeNoisePad(noise);
	for (const auto d : {StripeDirection::Horizontal, StripeDirection::Vertical, StripeDirection::Diagonal}) {
		if ((!direction || *direction == d) && needed > stripeExtent(wallA, d)) {
			throw ValidationError("smallest stripe layout exceeds the canvas");
		}
	}
}

StripeSpec sample_stripe_spec(std::uint64_t seed, const StripeConfig& config) {
	config.validate();
	Rng rng(mix_seed(seed, 0));
	auto randomColor = [&rng] {
		return Rgb{static_cast<std::uint8_t>(rng.uniform_int(0, 255)), static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
		           static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
	};

	StripeSpec spec;
	spec.width = config.width;
	spec.height = config.height;
	spec.seed = seed;
	spec.noise = config.noise;
	spec.background = randomColor();
	spec.stripe = randomColor();
	spec.mu_s1 = rng.uniform(config.mu_s.lo, config.mu_s.hi);
	const double mu = rng.uniform(config.mu_s.lo, config.mu_s.hi);
	spec.mu_s2 = rng.bernoulli(config.equal_stripe_probability) ? spec.mu_s1 : mu;
	const auto directionIndex = rng.uniform_int(0, 2);
	spec.direction = config.direction.value_or(static_cast<StripeDirection>(directionIndex));

	const auto [wallA, wallB] = stripeWalls(config.width, config.height);
	(void)wallB;
	const double room = stripeExtent(wallA, spec.direction) - 2.0 * stripeNoisePad(config.noise);
	// Draw N, then a width that fits; fall back to the smallest N if the draw cannot fit.
	int count = static_cast<int>(rng.uniform_int(config.stripe_count.lo, config.stripe_count.hi));
	int maxWidth = static_cast<int>(std::floor(room / (2 * count - 1)));
	if (maxWidth < config.stripe_width.lo) {
		count = config.stripe_count.lo;
		maxWidth = static_cast<int>(std::floor(room / (2 * count - 1)));
	}
	spec.stripe_count = count;
	spec.stripe_width = static_cast<int>(
	    rng.uniform_int(config.stripe_width.lo, std::max(config.stripe_width.lo, std::min(config.stripe_width.hi, maxWidth))));
	spec.validate();
	return spec;
}

std::pair<Rgb, Rgb> target_fills(const StripeSpec& spec) {
	return {scale_brightness(spec.stripe, BrightnessFactor(spec.mu_s1)),
	        scale_brightness(spec.stripe, BrightnessFactor(spec.mu_s2))};
}

double predicted_shift(const StripeSpec& spec, const LabelModel& model) {
	return model.stripe_amplitude * (1.0 - std::exp(-spec.stripe_count / model.stripe_scale));
}

IllusionLabel predict_label(const StripeSpec& spec, const LabelModel& model) {
	const auto [fillA, fillB] = target_fills(spec);
	const double shift = predicted_shift(spec, model);
	// Wall A assimilates toward its black separators; wall B toward the background color.
	const double la = luma(fillA);
	const double lb = luma(fillB);
	const double pull = (luma(spec.background) - lb) / 255.0;
	const Percept percept{la * (1.0 - shift), lb * (1.0 + shift * pull)};
	return makeLabel(pixelRelation(fillA, fillB), judge(percept, model), shift);
}

SimpleStimulus render_stripe(const StripeSpec& spec, const LabelModel& model) {
	spec.validate();
	SimpleStimulus out;
	out.pixels = Image(spec.width, spec.height, spec.background);
	out.region_a = Mask(spec.width, spec.height);
	out.region_b = Mask(spec.width, spec.height);

	Rng rng(mix_seed(spec.seed, 1));
	const auto [fillA, fillB] = target_fills(spec);
	const auto [wallA, wallB] = stripeWalls(spec.width, spec.height);
	paintStripeWall(out.pixels, out.region_a, wallA, spec, fillA, Rgb{0, 0, 0}, rng);
	paintStripeWall(out.pixels, out.region_b, wallB, spec, fillB, spec.background, rng);

	out.spec = spec;
	out.predicted_label = predict_label(spec, model);
	return out;
}

StripeSpec sample_stripe_with_kind(std::uint64_t seed, const StripeConfig& config, const LabelModel& model,
                                   LabelKind wanted, int max_attempts) {
	if (wanted == LabelKind::Ambiguous) {
		throw ValidationError("ambiguous stimuli are never emitted on request");
	}
	for (int attempt = 0; attempt < max_attempts; ++attempt) {
		const StripeSpec spec = sample_stripe_spec(mix_seed(seed, static_cast<std::uint64_t>(attempt)), config);
		if (predict_label(spec, model).kind == wanted) {
			return spec;
		}
	}
	throw ValidationError("no stripe spec with label '" + std::string(to_string(wanted)) + "' after " +
	                      std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------

SimpleStimulus render(const StimulusSpec& spec, const LabelModel& model) {
	return std::visit([&model](const auto& s) {
		if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ContrastSpec>) {
			return render_contrast(s, model);
		} else {
			return render_stripe(s, model);
		}
	}, spec);
}

IllusionLabel predict_label(const StimulusSpec& spec, const LabelModel& model) {
	return std::visit([&model](const auto& s) { return predict_label(s, model); }, spec);
}

std::pair<std::string, std::string> region_descriptors(const StimulusSpec& spec) {
	if (const auto* contrast = std::get_if<ContrastSpec>(&spec)) {
		if (contrast->orientation == Orientation::LeftRight) {
			return {"the left square", "the right square"};
		}
		return {"the upper square", "the lower square"};
	}
	return {"the left wall", "the right wall"};
}

namespace {

// 5x7 glyphs, one row per byte, bit 4 is the leftmost column.
constexpr std::array<std::uint8_t, 7> kGlyphA{0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001};
constexpr std::array<std::uint8_t, 7> kGlyphB{0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110};

void drawGlyph(Image& image, const std::array<std::uint8_t, 7>& glyph, int cx, int cy, int scale, Rgb ink, Rgb outline) {
	const int w = 5 * scale;
	const int h = 7 * scale;
	const int x0 = cx - w / 2;
	const int y0 = cy - h / 2;
	auto lit = [&glyph](int gx, int gy) {
		return gx >= 0 && gx < 5 && gy >= 0 && gy < 7 && ((glyph[static_cast<std::size_t>(gy)] >> (4 - gx)) & 1U) != 0;
	};
	for (int pass = 0; pass < 2; ++pass) {
		for (int y = y0 - scale; y < y0 + h + scale; ++y) {
			for (int x = x0 - scale; x < x0 + w + scale; ++x) {
				if (x < 0 || y < 0 || x >= image.width() || y >= image.height()) {
					continue;
				}
				const int gx = (x - x0) < 0 ? -1 : (x - x0) / scale;
				const int gy = (y - y0) < 0 ? -1 : (y - y0) / scale;
				if (pass == 1) {
					if (lit(gx, gy)) {
						image.at(x, y) = ink;
					}
					continue;
				}
				// Outline: any lit cell within one scale step.
				bool near = false;
				for (int dy = -scale; dy <= scale && !near; dy += scale) {
					for (int dx = -scale; dx <= scale && !near; dx += scale) {
						const int ox = x - x0 + dx;
						const int oy = y - y0 + dy;
						near = ox >= 0 && oy >= 0 && lit(ox / scale, oy / scale);
					}
				}
				if (near) {
					image.at(x, y) = outline;
				}
			}
		}
	}
}

std::pair<int, int> centroid(const Mask& mask) {
	double sx = 0.0;
	double sy = 0.0;
	std::size_t n = 0;
	for (int y = 0; y < mask.height(); ++y) {
		for (int x = 0; x < mask.width(); ++x) {
			if (mask.test(x, y)) {
				sx += x;
				sy += y;
				++n;
			}
		}
	}
	if (n == 0) {
		return {mask.width() / 2, mask.height() / 2};
	}
	return {static_cast<int>(std::lround(sx / n)), static_cast<int>(std::lround(sy / n))};
}

} // namespace

Image mark_regions(const Image& image, const Mask* a, const Mask* b) {
	Image out = image;
	const int scale = std::max(2, std::min(out.width(), out.height()) / 64);
	const Rgb white{255, 255, 255};
	const Rgb black{0, 0, 0};
	if (a) {
		const auto [ax, ay] = centroid(*a);
		drawGlyph(out, kGlyphA, ax, ay, scale, white, black);
	}
	if (b) {
		const auto [bx, by] = centroid(*b);
		drawGlyph(out, kGlyphB, bx, by, scale, white, black);
	}
	return out;
}

Image render_labeled_variant(const SimpleStimulus& stimulus) {
	return mark_regions(stimulus.pixels, &stimulus.region_a, &stimulus.region_b);
}

// ---------------------------------------------------------------------------
// Probe set

std::string_view to_string(ProbeLabel l) {
	switch (l) {
	case ProbeLabel::LeftDarker: return "left_darker";
	case ProbeLabel::RightDarker: return "right_darker";
	case ProbeLabel::Identical: return "identical";
	}
	return "?";
}

std::string_view to_string(ProbeSplit s) {
	switch (s) {
	case ProbeSplit::Train: return "train";
	case ProbeSplit::TestPlain: return "test_plain";
	case ProbeSplit::TestIllusion: return "test_illusion";
	}
	return "?";
}

ContrastConfig ProbeConfig::default_contrast() {
	ContrastConfig c;
	c.width = 224;
	c.height = 224;
	c.orientation = Orientation::LeftRight;
	c.noise = ContrastNoise{0.0, 0.0};
	return c;
}

ProbeLabel probe_label_from_pixels(const Image& pixels, const Mask& left, const Mask& right) {
	const MeanColor l = masked_mean(pixels, left);
	const MeanColor r = masked_mean(pixels, right);
	if (l.count == 0 || r.count == 0) {
		throw ValidationError("probe rectangles must be non-empty");
	}
	const double ll = 0.299 * l.r + 0.587 * l.g + 0.114 * l.b;
	const double rl = 0.299 * r.r + 0.587 * r.g + 0.114 * r.b;
	if (ll == rl) {
		return ProbeLabel::Identical;
	}
	return ll < rl ? ProbeLabel::LeftDarker : ProbeLabel::RightDarker;
}

namespace {

ProbeItem makeProbeItem(std::uint64_t itemSeed, bool illusion, const ProbeConfig& config, int maxAttempts = 50000) {
	ContrastConfig contrast = config.contrast;
	contrast.width = config.canvas;
	contrast.height = config.canvas;
	contrast.orientation = Orientation::LeftRight;

	Rng chooser(mix_seed(itemSeed, 99));
	const auto wantedClass = static_cast<ProbeLabel>(chooser.uniform_int(0, 2));
	for (int attempt = 0; attempt < maxAttempts; ++attempt) {
		ContrastSpec spec = sample_contrast_spec(mix_seed(itemSeed, static_cast<std::uint64_t>(attempt)), contrast);
		if (illusion || wantedClass == ProbeLabel::Identical) {
			spec.mu_f2 = spec.mu_f1;
		} else if (wantedClass == ProbeLabel::LeftDarker) {
			if (spec.mu_f1 > spec.mu_f2) {
				std::swap(spec.mu_f1, spec.mu_f2);
			}
		} else if (spec.mu_f1 < spec.mu_f2) {
			std::swap(spec.mu_f1, spec.mu_f2);
		}
		const IllusionLabel label = predict_label(spec, config.model);
		const bool accept = illusion ? label.kind == LabelKind::Illusion
		                             : label.kind == LabelKind::Control &&
		                                   static_cast<int>(label.direction) == static_cast<int>(wantedClass);
		if (!accept) {
			continue;
		}
		SimpleStimulus stimulus = render_contrast(spec, config.model);
		ProbeItem item;
		item.label = probe_label_from_pixels(stimulus.pixels, stimulus.region_a, stimulus.region_b);
		item.is_illusion = illusion;
		item.spec = spec;
		item.pixels = std::move(stimulus.pixels);
		item.left = std::move(stimulus.region_a);
		item.right = std::move(stimulus.region_b);
		return item;
	}
	throw ValidationError("probe sampler exhausted its attempt budget");
}

} // namespace

void for_each_probe_item(std::uint64_t seed, const ProbeCounts& counts, const ProbeConfig& config,
                         const ProbeVisitor& visit) {
	if (counts.train <= 0 || counts.test_plain <= 0 || counts.test_illusion <= 0) {
		throw ValidationError("probe set counts must be positive");
	}
	const std::array<std::pair<ProbeSplit, int>, 3> plan{{
	    {ProbeSplit::Train, counts.train},
	    {ProbeSplit::TestPlain, counts.test_plain},
	    {ProbeSplit::TestIllusion, counts.test_illusion},
	}};
	for (const auto& [split, n] : plan) {
		const std::uint64_t splitSeed = mix_seed(seed, static_cast<std::uint64_t>(split) + 1000);
		for (int i = 0; i < n; ++i) {
			visit(split, i, makeProbeItem(mix_seed(splitSeed, static_cast<std::uint64_t>(i)), split == ProbeSplit::TestIllusion, config));
		}
	}
}

ProbeSet generate_probe_set(std::uint64_t seed, int n_train, int n_test_plain, int n_test_illusion,
                            const ProbeConfig& config) {
	ProbeSet out;
	for_each_probe_item(seed, ProbeCounts{n_train, n_test_plain, n_test_illusion}, config,
	                    [&out](ProbeSplit split, int, ProbeItem&& item) {
		                    switch (split) {
		                    case ProbeSplit::Train: out.train.push_back(std::move(item)); break;
		                    case ProbeSplit::TestPlain: out.test_plain.push_back(std::move(item)); break;
		                    case ProbeSplit::TestIllusion: out.test_illusion.push_back(std::move(item)); break;
		                    }
	                    });
	return out;
}

} // namespace illusion::procgen
