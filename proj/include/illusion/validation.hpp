#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace illusion::validation {

struct VoteRecord {
	std::string image_id;
	std::string participant_id;
	std::string question_id;
	std::string answer;
	bool is_deceived{false};         ///< matches the predicted percept but not the pixels
	bool is_pixel_consistent{false}; ///< matches the pixels
	std::int64_t timestamp_ms{0};

	friend bool operator==(const VoteRecord&, const VoteRecord&) = default;
};

/// Derives the two flags from the answer keys of the question.
VoteRecord make_vote(std::string image_id, std::string participant_id, std::string question_id, std::string answer,
                     const std::string& pixel_answer, const std::string& expected_human_answer,
                     std::int64_t timestamp_ms);

enum class FinalLabel { Illusion, Control, Discarded };
std::string_view to_string(FinalLabel l);
FinalLabel parse_final_label(std::string_view text);

struct AggregationRules {
	int votes_per_image{5};
	int deception_threshold{3}; ///< illusion iff at least this many deceived votes
	std::uint64_t seed{0};      ///< breaks ties for the majority answer
};

struct AggregationResult {
	std::string image_id;
	int n_votes{0};
	int n_deceived{0};
	int n_pixel_consistent{0};
	FinalLabel final_label{FinalLabel::Discarded};
	std::string majority_human_answer;
};

/// Votes must all belong to one image and come from distinct participants; throws ValidationError otherwise.
AggregationResult aggregate_votes(std::span<const VoteRecord> votes, const AggregationRules& rules = {});

/// Groups by image id and aggregates each group; images with a wrong vote count raise ValidationError.
std::vector<AggregationResult> aggregate_all(std::span<const VoteRecord> votes, const AggregationRules& rules = {});

/// Ids whose every vote was deceived.
std::vector<std::string> strict_subset(std::span<const AggregationResult> results, int votes_per_image = 5);

using CountMatrix = std::vector<std::vector<int>>;

/// Fleiss' kappa for items x categories counts with `raters` per row.
/// nullopt when chance agreement is 1 (every rating in one category). Throws on inconsistent rows.
std::optional<double> fleiss_kappa(const CountMatrix& counts, int raters);

/// Rows are images (sorted by id), columns are the sorted distinct answers.
CountMatrix vote_matrix(std::span<const VoteRecord> votes, std::vector<std::string>* categories = nullptr);

struct KappaReport {
	std::optional<double> before;
	std::optional<double> after;
	std::size_t items_before{0};
	std::size_t items_after{0};
};

/// Kappa on all rows, then on rows where some category reached `min_agreement` votes.
KappaReport kappa_with_filter(const CountMatrix& counts, int raters, int min_agreement = 3);

std::string to_json_line(const VoteRecord& vote);
VoteRecord vote_from_json_line(std::string_view line);
std::vector<VoteRecord> read_votes(const std::filesystem::path& path);

} // namespace illusion::validation
