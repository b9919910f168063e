#pragma once

#include "illusion/manifest.hpp"
#include "illusion/questions.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace illusion::eval {

struct ModelResponse {
	std::string image_id;
	std::string question_id;
	questions::PromptMode prompt_mode{questions::PromptMode::None};
	std::string text;
	std::string run_tag;
};

/// Maps free text to a color name ("Dark red." -> red). nullopt when no color, or conflicting colors, appear.
std::optional<std::string> normalize_color_answer(std::string_view text);

struct ParsedAnswer {
	std::optional<std::string> key; ///< option key or color name
	std::string failure;            ///< why parsing failed; empty on success

	[[nodiscard]] bool ok() const noexcept { return key.has_value(); }
};

/// Multiple choice accepts a letter, the option text, the option key, or an unambiguous prefix of one option.
/// Recognition questions go through normalize_color_answer.
ParsedAnswer parse_answer(std::string_view text, const questions::QuestionRecord& question);

enum class Outcome { NoIllusion, HumanLike, NotApplicable, Accurate, Wrong };
std::string_view to_string(Outcome o);

/// Key a human gives: the validated answer, or the predicted percept before validation.
const std::string& human_key(const questions::QuestionRecord& question);

/// Illusion items: pixel key -> no_illusion, human key -> human_like, anything else -> n/a.
/// Control items: accurate iff the pixel key. A failed parse is n/a or wrong.
/// Throws ValidationError for labels other than illusion or control.
Outcome classify_response(const ParsedAnswer& parsed, manifest::RecordLabel label,
                          const questions::QuestionRecord& question);

struct GroupMetrics {
	std::size_t illusion_total{0};
	std::size_t human_like{0};
	std::size_t no_illusion{0};
	std::size_t not_applicable{0};
	std::size_t control_total{0};
	std::size_t accurate{0};
	std::size_t wrong{0};
	std::size_t parse_failures{0};

	[[nodiscard]] std::optional<double> human_like_rate() const;
	[[nodiscard]] std::optional<double> no_illusion_rate() const;
	[[nodiscard]] std::optional<double> na_rate() const;
	[[nodiscard]] std::optional<double> accurate_rate() const;
};

/// Factors an image can be broken down by; absent fields do not apply to its type.
struct ImageFactors {
	std::string subtype;
	std::optional<double> color_distance;
	std::optional<int> stripe_count;
	std::optional<std::string> scene_class;
};

struct BreakdownOptions {
	double color_distance_bin{50.0};
	int stripe_count_bin{2};
	questions::PromptMode mode{questions::PromptMode::Pixel};
};

struct BreakdownCell {
	std::string factor; ///< orientation, direction, color_distance, stripe_count, scene_class
	std::string bin;
	double lower{0.0};  ///< numeric bins only, for ordering
	std::size_t n{0};
	std::size_t deceived{0};

	[[nodiscard]] double rate() const { return static_cast<double>(deceived) / static_cast<double>(n); }
};

struct MetricsReport {
	/// keyed by (illusion type, prompt mode) names
	std::map<std::pair<std::string, std::string>, GroupMetrics> groups;
	std::vector<BreakdownCell> breakdown; ///< only bins that received responses
	std::vector<std::string> orphans;     ///< responses that join to no record or question
	std::size_t skipped_unlabeled{0};     ///< responses on pending or discarded images
	std::size_t scored{0};

	/// human_like_rate under the pixel prompt.
	[[nodiscard]] std::optional<double> deception_rate(const std::string& type) const;
};

MetricsReport compute_metrics(const std::vector<ModelResponse>& responses,
                              const std::vector<manifest::DatasetRecord>& records,
                              const std::vector<questions::QuestionRecord>& question_set,
                              const std::map<std::string, ImageFactors>& factors = {},
                              const BreakdownOptions& options = {});

/// Reads factors from each record's sidecar (paths relative to `root`).
std::map<std::string, ImageFactors> load_factors(const std::vector<manifest::DatasetRecord>& records,
                                                 const std::filesystem::path& root);

std::string report_to_json(const MetricsReport& report);
std::string report_to_table(const MetricsReport& report);
std::string breakdown_to_csv(const MetricsReport& report);

std::vector<ModelResponse> read_responses(const std::filesystem::path& path);
std::string to_json_line(const ModelResponse& response);

} // namespace illusion::eval
