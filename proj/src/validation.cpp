#include "illusion/validation.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <set>

namespace illusion::validation {

namespace {

constexpr std::array<std::pair<std::string_view, FinalLabel>, 3> kLabels{{
    {"illusion", FinalLabel::Illusion},
    {"control", FinalLabel::Control},
    {"discarded", FinalLabel::Discarded},
}};

} // namespace

std::string_view to_string(FinalLabel l) {
	for (const auto& [name, v] : kLabels) {
		if (v == l) {
			return name;
		}
	}
	return "?";
}

FinalLabel parse_final_label(std::string_view text) {
	for (const auto& [name, v] : kLabels) {
		if (name == text) {
			return v;
		}
	}
	throw ValidationError("unknown final label: '" + std::string(text) + "'");
}

VoteRecord make_vote(std::string image_id, std::string participant_id, std::string question_id, std::string answer,
                     const std::string& pixel_answer, const std::string& expected_human_answer,
                     std::int64_t timestamp_ms) {
	VoteRecord v;
	v.is_pixel_consistent = answer == pixel_answer;
	v.is_deceived = answer == expected_human_answer && answer != pixel_answer;
	v.image_id = std::move(image_id);
	v.participant_id = std::move(participant_id);
	v.question_id = std::move(question_id);
	v.answer = std::move(answer);
	v.timestamp_ms = timestamp_ms;
	return v;
}

AggregationResult aggregate_votes(std::span<const VoteRecord> votes, const AggregationRules& rules) {
	if (static_cast<int>(votes.size()) != rules.votes_per_image) {
		throw ValidationError("expected " + std::to_string(rules.votes_per_image) + " votes per image, got " +
		                      std::to_string(votes.size()) +
		                      (votes.empty() ? std::string() : " for " + votes.front().image_id));
	}
	if (rules.deception_threshold < 1 || rules.deception_threshold > rules.votes_per_image) {
		throw ValidationError("deception threshold must lie in [1, votes per image]");
	}
	AggregationResult result;
	result.image_id = votes.front().image_id;
	result.n_votes = static_cast<int>(votes.size());
	std::set<std::string> participants;
	std::map<std::string, int> tally;
	for (const auto& v : votes) {
		if (v.image_id != result.image_id) {
			throw ValidationError("votes for " + v.image_id + " mixed into " + result.image_id);
		}
		if (!participants.insert(v.participant_id).second) {
			throw ValidationError(result.image_id + ": participant " + v.participant_id + " voted twice");
		}
		if (v.is_deceived && v.is_pixel_consistent) {
			throw ValidationError(result.image_id + ": a vote cannot be both deceived and pixel-consistent");
		}
		result.n_deceived += v.is_deceived ? 1 : 0;
		result.n_pixel_consistent += v.is_pixel_consistent ? 1 : 0;
		++tally[v.answer];
	}

	if (result.n_deceived >= rules.deception_threshold) {
		result.final_label = FinalLabel::Illusion;
	} else if (result.n_pixel_consistent == result.n_votes) {
		result.final_label = FinalLabel::Control;
	} else {
		result.final_label = FinalLabel::Discarded;
	}

	int best = 0;
	for (const auto& [answer, n] : tally) {
		best = std::max(best, n);
	}
	std::vector<std::string> tied;
	for (const auto& [answer, n] : tally) {
		if (n == best) {
			tied.push_back(answer); // map order: sorted, so independent of vote order
		}
	}
	Rng rng(mix_seed(rules.seed, stable_hash(result.image_id)));
	result.majority_human_answer =
	    tied.size() == 1 ? tied.front()
	                     : tied[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tied.size()) - 1))];
	return result;
}

std::vector<AggregationResult> aggregate_all(std::span<const VoteRecord> votes, const AggregationRules& rules) {
	std::map<std::string, std::vector<VoteRecord>> byImage;
	for (const auto& v : votes) {
		byImage[v.image_id].push_back(v);
	}
	std::vector<AggregationResult> results;
	results.reserve(byImage.size());
	for (const auto& [id, group] : byImage) {
		results.push_back(aggregate_votes(group, rules));
	}
	return results;
}

std::vector<std::string> strict_subset(std::span<const AggregationResult> results, int votes_per_image) {
	std::vector<std::string> ids;
	for (const auto& r : results) {
		if (r.n_votes == votes_per_image && r.n_deceived == votes_per_image) {
			ids.push_back(r.image_id);
		}
	}
	return ids;
}

std::optional<double> fleiss_kappa(const CountMatrix& counts, int raters) {
	if (counts.empty()) {
		throw ValidationError("fleiss_kappa needs at least one item");
	}
	if (raters < 2) {
		throw ValidationError("fleiss_kappa needs at least two raters per item");
	}
	const std::size_t categories = counts.front().size();
	if (categories == 0) {
		throw ValidationError("fleiss_kappa needs at least one category");
	}
	std::vector<long double> columnTotals(categories, 0.0L);
	long double pSum = 0.0L;
	for (std::size_t i = 0; i < counts.size(); ++i) {
		const auto& row = counts[i];
		if (row.size() != categories) {
			throw ValidationError("fleiss_kappa row " + std::to_string(i) + " has the wrong number of categories");
		}
		long long sum = 0;
		long long squares = 0;
		for (std::size_t j = 0; j < categories; ++j) {
			if (row[j] < 0) {
				throw ValidationError("fleiss_kappa counts must be non-negative");
			}
			sum += row[j];
			squares += static_cast<long long>(row[j]) * row[j];
			columnTotals[j] += row[j];
		}
		if (sum != raters) {
			throw ValidationError("fleiss_kappa row " + std::to_string(i) + " sums to " + std::to_string(sum) +
			                      ", expected " + std::to_string(raters));
		}
		pSum += static_cast<long double>(squares - raters) / (static_cast<long double>(raters) * (raters - 1));
	}
	const long double total = static_cast<long double>(counts.size()) * raters;
	long double pe = 0.0L;
	for (const long double c : columnTotals) {
		const long double p = c / total;
		pe += p * p;
	}
	if (1.0L - pe <= 0.0L) {
		return std::nullopt;
	}
	const long double pBar = pSum / static_cast<long double>(counts.size());
	return static_cast<double>((pBar - pe) / (1.0L - pe));
}

CountMatrix vote_matrix(std::span<const VoteRecord> votes, std::vector<std::string>* categories) {
	std::set<std::string> answers;
	std::map<std::string, std::map<std::string, int>> byImage;
	for (const auto& v : votes) {
		answers.insert(v.answer);
		++byImage[v.image_id][v.answer];
	}
	const std::vector<std::string> columns(answers.begin(), answers.end());
	CountMatrix matrix;
	for (const auto& [id, tally] : byImage) {
		std::vector<int> row;
		for (const auto& c : columns) {
			const auto it = tally.find(c);
			row.push_back(it == tally.end() ? 0 : it->second);
		}
		matrix.push_back(std::move(row));
	}
	if (categories) {
		*categories = columns;
	}
	return matrix;
}

KappaReport kappa_with_filter(const CountMatrix& counts, int raters, int min_agreement) {
	KappaReport report;
	report.items_before = counts.size();
	report.before = fleiss_kappa(counts, raters);
	CountMatrix kept;
	for (const auto& row : counts) {
		if (*std::max_element(row.begin(), row.end()) >= min_agreement) {
			kept.push_back(row);
		}
	}
	report.items_after = kept.size();
	if (!kept.empty()) {
		report.after = fleiss_kappa(kept, raters);
	}
	return report;
}

std::string to_json_line(const VoteRecord& v) {
	nlohmann::ordered_json j;
	j["image_id"] = v.image_id;
	j["participant_id"] = v.participant_id;
	j["question_id"] = v.question_id;
	j["answer"] = v.answer;
	j["is_deceived"] = v.is_deceived;
	j["is_pixel_consistent"] = v.is_pixel_consistent;
	j["timestamp_ms"] = v.timestamp_ms;
	return j.dump();
}

VoteRecord vote_from_json_line(std::string_view line) {
	try {
		const auto j = nlohmann::json::parse(line);
		VoteRecord v;
		v.image_id = j.at("image_id").get<std::string>();
		v.participant_id = j.at("participant_id").get<std::string>();
		v.question_id = j.value("question_id", std::string{});
		v.answer = j.at("answer").get<std::string>();
		v.is_deceived = j.at("is_deceived").get<bool>();
		v.is_pixel_consistent = j.at("is_pixel_consistent").get<bool>();
		v.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
		return v;
	} catch (const nlohmann::json::exception& e) {
		throw ValidationError(e.what());
	}
}

std::vector<VoteRecord> read_votes(const std::filesystem::path& path) {
	std::vector<VoteRecord> votes;
	jsonl::for_each_line(path, [&](std::string_view line, std::size_t number) {
		try {
			votes.push_back(vote_from_json_line(line));
		} catch (const ValidationError& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		}
	});
	return votes;
}

} // namespace illusion::validation
