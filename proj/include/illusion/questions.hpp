#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace illusion::questions {

enum class QuestionKind { Comparison, Recognition };
enum class PromptMode { Pixel, Human, None };

inline constexpr std::string_view kPixelPrefix = "Based on pixel values, ";
inline constexpr std::string_view kHumanPrefix = "Based on human perception, ";

std::string_view to_string(QuestionKind k);
std::string_view to_string(PromptMode m);
QuestionKind parse_question_kind(std::string_view text);
PromptMode parse_prompt_mode(std::string_view text);
std::string_view prefix(PromptMode m);

/// Comparison answer keys.
inline constexpr std::string_view kADarker = "a_darker";
inline constexpr std::string_view kBDarker = "b_darker";
inline constexpr std::string_view kIdentical = "identical";

struct Option {
	std::string key;
	std::string text;

	friend bool operator==(const Option&, const Option&) = default;
};

struct QuestionRecord {
	std::string id;
	std::string image_id;
	QuestionKind kind{QuestionKind::Comparison};
	PromptMode prompt_mode{PromptMode::None};
	std::string body;          ///< question without the mode prefix or option list
	std::vector<Option> options; ///< comparison only, lettered A, B, C in this order
	std::string pixel_answer;  ///< option key or color name
	std::string expected_human_answer;       ///< what the perceptual model predicts
	std::optional<std::string> human_answer; ///< set once validated
	std::string region_a;      ///< region descriptor, or the object for recognition
	std::string region_b;

	/// Prefix, body and lettered options as shown to a respondent.
	[[nodiscard]] std::string text() const;
	[[nodiscard]] std::string text_for(PromptMode mode) const;
	/// Throws ValidationError when an invariant is broken.
	void validate() const;

	friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// 'A', 'B', 'C', ...
char option_letter(std::size_t index);

struct ComparisonMeta {
	std::string image_id;
	std::string region_a;
	std::string region_b;
	std::string direction;       ///< pixel relation key
	std::string predicted_human; ///< perceptual relation key
};

struct RecognitionMeta {
	std::string image_id;
	std::string object;
	std::string original_color; ///< the suppressed color, what people report
	std::string pixel_color;    ///< color name of the filtered object region
};

/// Template and option order are chosen from (seed, image id); the mode only changes the prefix.
QuestionRecord make_comparison_question(const ComparisonMeta& meta, PromptMode mode, std::uint64_t seed);
QuestionRecord make_recognition_question(const RecognitionMeta& meta, PromptMode mode, std::uint64_t seed);

std::size_t comparison_template_count();
std::size_t recognition_template_count();

/// Which answer a prefixless row gets on an illusion item.
enum class NoneModeAnswer { Pixel, Human };

struct TrainingRow {
	std::string image;
	std::string prompt;
	std::string answer;
	PromptMode mode{PromptMode::None};
};

struct TrainingPairs {
	std::vector<TrainingRow> rows;
	std::vector<std::string> excluded; ///< record ids without a validated human answer
};

/// Three rows per validated record: pixel mode answers pixel_answer, human mode answers human_answer.
TrainingPairs emit_training_pairs(const std::vector<QuestionRecord>& records,
                                  NoneModeAnswer none_answer = NoneModeAnswer::Pixel);

/// Answer as it appears in a training row ("B. The right square is darker" or "red").
std::string answer_text(const QuestionRecord& record, const std::string& key);

/// External text rewriter. Output must keep every region descriptor verbatim.
class Paraphraser {
public:
	virtual ~Paraphraser() = default;
	virtual std::string rewrite(std::string_view body) = 0;
};

/// Rewrites the body; throws ValidationError if a descriptor went missing.
QuestionRecord paraphrase(const QuestionRecord& record, Paraphraser& paraphraser);

std::string to_json_line(const QuestionRecord& record);
QuestionRecord from_json_line(std::string_view line);
void write_questions(const std::filesystem::path& path, const std::vector<QuestionRecord>& records);
std::vector<QuestionRecord> read_questions(const std::filesystem::path& path);
void write_training_rows(const std::filesystem::path& path, const std::vector<TrainingRow>& rows);

} // namespace illusion::questions
