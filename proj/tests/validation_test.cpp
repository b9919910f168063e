#include "illusion/errors.hpp"
#include "illusion/rng.hpp"
#include "illusion/validation.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

namespace illusion::validation {
namespace {

// Illusion candidate: pixels say identical, the model predicts b_darker.
std::vector<VoteRecord> panel(int deceived, int pixel, const std::string& image = "img") {
	std::vector<VoteRecord> votes;
	for (int i = 0; i < 5; ++i) {
		const std::string answer = i < deceived ? "b_darker" : (i < deceived + pixel ? "identical" : "a_darker");
		votes.push_back(make_vote(image, "p" + std::to_string(i), image + "-q", answer, "identical", "b_darker", i));
	}
	return votes;
}

CountMatrix randomMatrix(Rng& rng, int items, int categories, int raters) {
	CountMatrix m(static_cast<std::size_t>(items), std::vector<int>(static_cast<std::size_t>(categories), 0));
	for (auto& row : m) {
		for (int r = 0; r < raters; ++r) {
			++row[static_cast<std::size_t>(rng.uniform_int(0, categories - 1))];
		}
	}
	return m;
}

TEST(MakeVote, Flags) {
	const VoteRecord d = make_vote("i", "p", "q", "b_darker", "identical", "b_darker", 0);
	EXPECT_TRUE(d.is_deceived);
	EXPECT_FALSE(d.is_pixel_consistent);
	const VoteRecord c = make_vote("i", "p", "q", "identical", "identical", "b_darker", 0);
	EXPECT_FALSE(c.is_deceived);
	EXPECT_TRUE(c.is_pixel_consistent);
	// On a control the predicted percept equals the pixels; agreeing is not deception.
	const VoteRecord k = make_vote("i", "p", "q", "a_darker", "a_darker", "a_darker", 0);
	EXPECT_FALSE(k.is_deceived);
	EXPECT_TRUE(k.is_pixel_consistent);
}

TEST(AggregateVotes, Examples) {
	EXPECT_EQ(aggregate_votes(panel(5, 0)).final_label, FinalLabel::Illusion);
	EXPECT_EQ(aggregate_votes(panel(0, 5)).final_label, FinalLabel::Control);
	EXPECT_EQ(aggregate_votes(panel(2, 3)).final_label, FinalLabel::Discarded);
	EXPECT_EQ(aggregate_votes(panel(5, 0)).majority_human_answer, "b_darker");
}

TEST(AggregateVotes, ExhaustiveOverCompositions) {
	for (int deceived = 0; deceived <= 5; ++deceived) {
		for (int pixel = 0; deceived + pixel <= 5; ++pixel) {
			const AggregationResult r = aggregate_votes(panel(deceived, pixel));
			EXPECT_EQ(r.n_deceived, deceived);
			const FinalLabel expected = deceived >= 3 ? FinalLabel::Illusion
			                            : (deceived == 0 && pixel == 5) ? FinalLabel::Control
			                                                            : FinalLabel::Discarded;
			EXPECT_EQ(r.final_label, expected) << deceived << "/" << pixel;
			if (r.final_label == FinalLabel::Illusion) {
				EXPECT_GE(r.n_deceived, 3);
				EXPECT_NE(r.majority_human_answer, "identical");
			}
			if (r.final_label == FinalLabel::Control) {
				EXPECT_EQ(r.n_pixel_consistent, 5);
			}
		}
	}
}

TEST(AggregateVotes, StricterThresholdConfigurable) {
	AggregationRules rules;
	rules.deception_threshold = 4;
	EXPECT_EQ(aggregate_votes(panel(3, 2), rules).final_label, FinalLabel::Discarded);
	EXPECT_EQ(aggregate_votes(panel(4, 1), rules).final_label, FinalLabel::Illusion);
}

TEST(AggregateVotes, PermutationInvariant) {
	Rng rng(3);
	for (int trial = 0; trial < 200; ++trial) {
		std::vector<VoteRecord> votes;
		const std::array<std::string, 3> answers{"a_darker", "b_darker", "identical"};
		for (int i = 0; i < 5; ++i) {
			votes.push_back(make_vote("img" + std::to_string(trial), "p" + std::to_string(i), "q",
			                          answers[std::size_t(rng.uniform_int(0, 2))], "identical", "b_darker", i));
		}
		const AggregationResult base = aggregate_votes(votes);
		for (int k = 0; k < 5; ++k) {
			rng.shuffle(std::span<VoteRecord>(votes));
			const AggregationResult r = aggregate_votes(votes);
			EXPECT_EQ(r.final_label, base.final_label);
			EXPECT_EQ(r.majority_human_answer, base.majority_human_answer);
			EXPECT_EQ(r.n_deceived, base.n_deceived);
		}
	}
}

TEST(AggregateVotes, RejectsBadPanels) {
	auto votes = panel(3, 2);
	votes.pop_back();
	EXPECT_THROW(aggregate_votes(votes), ValidationError);
	votes = panel(3, 2);
	votes[4].participant_id = votes[0].participant_id;
	EXPECT_THROW(aggregate_votes(votes), ValidationError);
	votes = panel(3, 2);
	votes[1].image_id = "other";
	EXPECT_THROW(aggregate_votes(votes), ValidationError);
}

TEST(StrictSubset, Counting) {
	std::vector<VoteRecord> all;
	for (int i = 0; i < 12; ++i) {
		const auto votes = panel(i % 6, 0, "img" + std::to_string(i));
		all.insert(all.end(), votes.begin(), votes.end());
	}
	const auto results = aggregate_all(all);
	ASSERT_EQ(results.size(), 12u);
	const auto strict = strict_subset(results);
	EXPECT_EQ(strict, (std::vector<std::string>{"img11", "img5"}));

	std::vector<AggregationResult> allFive;
	for (int i = 0; i < 3; ++i) {
		allFive.push_back(aggregate_votes(panel(5, 0, "x" + std::to_string(i))));
	}
	EXPECT_EQ(strict_subset(allFive).size(), 3u);
	EXPECT_TRUE(strict_subset(std::vector<AggregationResult>{aggregate_votes(panel(4, 1))}).empty());
}

TEST(FleissKappa, WorkedExamples) {
	EXPECT_DOUBLE_EQ(*fleiss_kappa({{5, 0}, {0, 5}}, 5), 1.0);
	EXPECT_NEAR(*fleiss_kappa({{3, 2}, {3, 2}}, 5), -0.25, 1e-12);
}

TEST(FleissKappa, MatchesPairwiseOracle) {
	Rng rng(500);
	for (int i = 0; i < 500; ++i) {
		const int categories = int(rng.uniform_int(2, 5));
		const CountMatrix m = randomMatrix(rng, int(rng.uniform_int(1, 40)), categories, 5);
		const auto k = fleiss_kappa(m, 5);
		if (!k) {
			continue;
		}
		ASSERT_NEAR(*k, oracle::fleiss_kappa_pairwise(m), 1e-9);
		EXPECT_GE(*k, -1.0);
		EXPECT_LE(*k, 1.0);
	}
}

TEST(FleissKappa, OneIffRowsConcentrated) {
	Rng rng(8);
	for (int i = 0; i < 300; ++i) {
		const CountMatrix m = randomMatrix(rng, int(rng.uniform_int(2, 8)), 3, 5);
		const auto k = fleiss_kappa(m, 5);
		const bool concentrated =
		    std::all_of(m.begin(), m.end(), [](const auto& row) { return *std::max_element(row.begin(), row.end()) == 5; });
		if (k) {
			EXPECT_EQ(std::abs(*k - 1.0) < 1e-12, concentrated);
		}
	}
}

TEST(FleissKappa, DegenerateAndInvalid) {
	EXPECT_FALSE(fleiss_kappa({{5, 0}, {5, 0}}, 5).has_value());
	EXPECT_THROW(fleiss_kappa({{3, 1}}, 5), ValidationError);
	EXPECT_THROW(fleiss_kappa({}, 5), ValidationError);
	EXPECT_THROW(fleiss_kappa({{5, 0}, {5}}, 5), ValidationError);
}

TEST(KappaFilter, TwoCategoriesNeverDecrease) {
	Rng rng(31);
	for (int i = 0; i < 200; ++i) {
		const CountMatrix m = randomMatrix(rng, int(rng.uniform_int(2, 30)), 2, 5);
		const KappaReport r = kappa_with_filter(m, 5);
		if (r.before && r.after) {
			EXPECT_GE(*r.after, *r.before - 1e-12);
		}
	}
	const KappaReport r = kappa_with_filter({{2, 2, 1}, {5, 0, 0}, {0, 4, 1}}, 5);
	EXPECT_EQ(r.items_before, 3u);
	EXPECT_EQ(r.items_after, 2u);
}

TEST(VoteMatrix, BuildsSortedColumns) {
	std::vector<VoteRecord> votes = panel(3, 2, "b");
	const auto more = panel(0, 5, "a");
	votes.insert(votes.end(), more.begin(), more.end());
	std::vector<std::string> cats;
	const CountMatrix m = vote_matrix(votes, &cats);
	EXPECT_EQ(cats, (std::vector<std::string>{"b_darker", "identical"}));
	EXPECT_EQ(m, (CountMatrix{{0, 5}, {3, 2}}));
}

TEST(VoteFile, RoundTripAndBadLine) {
	testing::TempDir dir{"votes"};
	const auto votes = panel(2, 3);
	{
		std::ofstream out(dir / "v.jsonl");
		for (const auto& v : votes) {
			out << to_json_line(v) << "\n";
		}
	}
	EXPECT_EQ(read_votes(dir / "v.jsonl"), votes);
	{
		std::ofstream out(dir / "v.jsonl", std::ios::app);
		out << "not json\n";
	}
	try {
		read_votes(dir / "v.jsonl");
		FAIL();
	} catch (const ValidationError& e) {
		EXPECT_NE(std::string(e.what()).find("v.jsonl:6:"), std::string::npos);
	}
}

} // namespace
} // namespace illusion::validation
