#pragma once

#include "illusion/color.hpp"
#include "illusion/image.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace illusion::procgen {

enum class Orientation { LeftRight, UpDown };
enum class StripeDirection { Horizontal, Vertical, Diagonal };
enum class LabelKind { Illusion, Control, Ambiguous };
/// Relation between region A and region B.
enum class Relation { ADarker, BDarker, Identical };

std::string_view to_string(Orientation o);
std::string_view to_string(StripeDirection d);
std::string_view to_string(LabelKind k);
std::string_view to_string(Relation r);
Orientation parse_orientation(std::string_view text);
StripeDirection parse_stripe_direction(std::string_view text);
LabelKind parse_label_kind(std::string_view text);
Relation parse_relation(std::string_view text);

struct Range {
	double lo{0.0};
	double hi{0.0};

	[[nodiscard]] bool empty() const noexcept { return lo > hi; }
};

struct IntRange {
	int lo{0};
	int hi{0};

	[[nodiscard]] bool empty() const noexcept { return lo > hi; }
};

/// Edge noise for contrast squares: boundary jitter (px, uniform +-amplitude) and Gaussian softness (sigma, px).
struct ContrastNoise {
	double edge_jitter{0.0};
	double softness{0.0};
};

/// Geometric stripe noise: sinusoidal bending (px) and per-segment offsets (px).
struct StripeNoise {
	double curvature{0.0};
	int misalignment{0};
};

struct ContrastSpec {
	Rgb background;
	Rgb foreground;
	double mu_b1{0.7}; ///< darker background half, < 1
	double mu_b2{1.3}; ///< brighter background half, > 1
	double mu_f1{1.0}; ///< square A (first half)
	double mu_f2{1.0}; ///< square B (second half)
	int x1{0};
	int y1{0};
	int x2{0};
	int y2{0};
	int square_size{0};
	Orientation orientation{Orientation::LeftRight};
	bool dark_half_first{true};
	ContrastNoise noise;
	std::uint64_t seed{0};
	int width{512};
	int height{512};

	void validate() const;
	/// Number of pixels squares must keep from any background boundary.
	[[nodiscard]] int noise_padding() const noexcept;
};

struct StripeSpec {
	Rgb background;
	Rgb stripe;
	double mu_s1{1.0}; ///< wall A colored stripes
	double mu_s2{1.0}; ///< wall B colored stripes
	StripeDirection direction{StripeDirection::Horizontal};
	int stripe_count{8};
	int stripe_width{8};
	StripeNoise noise;
	std::uint64_t seed{0};
	int width{512};
	int height{512};

	void validate() const;
};

using StimulusSpec = std::variant<ContrastSpec, StripeSpec>;

struct IllusionLabel {
	LabelKind kind{LabelKind::Control};
	Relation direction{Relation::Identical};       ///< from rendered pixel values
	Relation predicted_human{Relation::Identical}; ///< from the perceptual model
	double shift{0.0};                             ///< predicted perceptual shift

	/// kind agrees with direction/predicted_human (ambiguous is exempt).
	[[nodiscard]] bool consistent() const noexcept;
};

struct SimpleStimulus {
	Image pixels;
	Mask region_a;
	Mask region_b;
	StimulusSpec spec;
	IllusionLabel predicted_label;
};

/// Perceptual-shift model constants. The trend directions are fixed; the magnitudes are calibration knobs.
struct LabelModel {
	double amplitude{0.12};         ///< contrast shift per unit background brightness gap
	double distance_scale{120.0};   ///< d0 in exp(-d / d0)
	double stripe_amplitude{0.12};  ///< asymptotic stripe shift
	double stripe_scale{6.0};       ///< N0 in 1 - exp(-N / N0)
	double jnd{0.06};               ///< Weber fraction below which two patches look identical
	double dead_band{0.015};        ///< |contrast - jnd| below this is ambiguous
};

struct ContrastConfig {
	int width{512};
	int height{512};
	Range mu_b1{0.55, 0.9};
	Range mu_b2{1.1, 1.6};
	Range mu_f{0.7, 1.3};
	Range square_fraction{0.15, 0.30}; ///< of min(width, height)
	std::optional<Orientation> orientation;
	double equal_foreground_probability{0.5};
	ContrastNoise noise{2.0, 1.0};

	void validate() const;
};

struct StripeConfig {
	int width{512};
	int height{512};
	Range mu_s{0.7, 1.3};
	IntRange stripe_count{3, 14};
	IntRange stripe_width{4, 16};
	std::optional<StripeDirection> direction;
	double equal_stripe_probability{0.5};
	StripeNoise noise{3.0, 2};

	void validate() const;
};

ContrastSpec sample_contrast_spec(std::uint64_t seed, const ContrastConfig& config);
StripeSpec sample_stripe_spec(std::uint64_t seed, const StripeConfig& config);

SimpleStimulus render_contrast(const ContrastSpec& spec, const LabelModel& model = {});
SimpleStimulus render_stripe(const StripeSpec& spec, const LabelModel& model = {});
SimpleStimulus render(const StimulusSpec& spec, const LabelModel& model = {});

/// Fill colors of the two target regions.
std::pair<Rgb, Rgb> target_fills(const ContrastSpec& spec);
std::pair<Rgb, Rgb> target_fills(const StripeSpec& spec);

/// Predicted perceptual shift alone (monotone in color distance / stripe count).
double predicted_shift(const ContrastSpec& spec, const LabelModel& model = {});
double predicted_shift(const StripeSpec& spec, const LabelModel& model = {});

IllusionLabel predict_label(const ContrastSpec& spec, const LabelModel& model = {});
IllusionLabel predict_label(const StripeSpec& spec, const LabelModel& model = {});
IllusionLabel predict_label(const StimulusSpec& spec, const LabelModel& model = {});

/// Human-readable names of region A and region B ("the left square", ...).
std::pair<std::string, std::string> region_descriptors(const StimulusSpec& spec);

/// Copy of the stimulus with 'A' and 'B' markers drawn over the target regions.
Image render_labeled_variant(const SimpleStimulus& stimulus);
/// Draws 'A' at the centroid of `a` and 'B' at the centroid of `b`; either may be null.
Image mark_regions(const Image& image, const Mask* a, const Mask* b);

/// Samples specs from consecutive sub-seeds until one has the wanted label kind (never ambiguous).
/// Throws ValidationError after max_attempts.
ContrastSpec sample_contrast_with_kind(std::uint64_t seed, const ContrastConfig& config, const LabelModel& model,
                                       LabelKind wanted, int max_attempts = 20000);
StripeSpec sample_stripe_with_kind(std::uint64_t seed, const StripeConfig& config, const LabelModel& model,
                                   LabelKind wanted, int max_attempts = 20000);

// ---------------------------------------------------------------------------
// Pure-vision probe task: left/right rectangle comparison.

enum class ProbeLabel { LeftDarker, RightDarker, Identical };
enum class ProbeSplit { Train, TestPlain, TestIllusion };

std::string_view to_string(ProbeLabel l);
std::string_view to_string(ProbeSplit s);

struct ProbeItem {
	Image pixels;
	ProbeLabel label{ProbeLabel::Identical};
	bool is_illusion{false};
	ContrastSpec spec;
	Mask left;
	Mask right;
};

struct ProbeCounts {
	int train{6000};
	int test_plain{1000};
	int test_illusion{1000};
};

struct ProbeConfig {
	int canvas{224};
	LabelModel model;
	ContrastConfig contrast = default_contrast();

	static ContrastConfig default_contrast();
};

/// Label from the actual mean colors of the two rectangles.
ProbeLabel probe_label_from_pixels(const Image& pixels, const Mask& left, const Mask& right);

using ProbeVisitor = std::function<void(ProbeSplit, int index, ProbeItem&&)>;

/// Streams items in a fixed order (train, then plain test, then illusion test).
void for_each_probe_item(std::uint64_t seed, const ProbeCounts& counts, const ProbeConfig& config,
                         const ProbeVisitor& visit);

struct ProbeSet {
	std::vector<ProbeItem> train;
	std::vector<ProbeItem> test_plain;
	std::vector<ProbeItem> test_illusion;
};

ProbeSet generate_probe_set(std::uint64_t seed, int n_train, int n_test_plain, int n_test_illusion,
                            const ProbeConfig& config = {});

} // namespace illusion::procgen
