#include "illusion/errors.hpp"
#include "illusion/eval.hpp"
#include "illusion/rng.hpp"
#include "support/tempdir.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace illusion::eval {
namespace {

using manifest::DatasetRecord;
using manifest::IllusionType;
using manifest::RecordLabel;
using questions::PromptMode;
using questions::QuestionRecord;

QuestionRecord comparison(const std::string& image, bool illusion, PromptMode mode = PromptMode::Pixel) {
	questions::ComparisonMeta meta{image, "the left square", "the right square", illusion ? "identical" : "a_darker",
	                               illusion ? "b_darker" : "a_darker"};
	QuestionRecord q = questions::make_comparison_question(meta, mode, 1);
	q.human_answer = q.expected_human_answer;
	return q;
}

DatasetRecord record(const std::string& id, bool illusion, IllusionType type = IllusionType::Contrast,
                     const std::string& subtype = "left-right") {
	DatasetRecord r;
	r.id = id;
	r.illusion_type = type;
	r.subtype = subtype;
	r.label = illusion ? RecordLabel::Illusion : RecordLabel::Control;
	return r;
}

std::string letterFor(const QuestionRecord& q, const std::string& key) {
	for (std::size_t i = 0; i < q.options.size(); ++i) {
		if (q.options[i].key == key) {
			return std::string(1, questions::option_letter(i));
		}
	}
	return "?";
}

std::string otherKey(const QuestionRecord& q) {
	for (const auto& o : q.options) {
		if (o.key != q.pixel_answer && o.key != human_key(q)) {
			return o.key;
		}
	}
	return "";
}

TEST(NormalizeColor, Examples) {
	EXPECT_EQ(normalize_color_answer("Dark red."), "red");
	EXPECT_EQ(normalize_color_answer("blue"), "blue");
	EXPECT_EQ(normalize_color_answer("the uniform"), std::nullopt);
	EXPECT_EQ(normalize_color_answer("  GREY  "), "gray");
	EXPECT_EQ(normalize_color_answer("It looks reddish"), "red");
	EXPECT_EQ(normalize_color_answer("light bluish tone"), "blue");
	EXPECT_EQ(normalize_color_answer("red or blue"), std::nullopt);
	EXPECT_EQ(normalize_color_answer("The shirt is a deep crimson red"), "red");
}

TEST(ParseAnswer, LettersTextAndPrefixes) {
	const QuestionRecord q = comparison("img", true);
	for (std::size_t i = 0; i < q.options.size(); ++i) {
		const std::string letter(1, char('A' + i));
		EXPECT_EQ(parse_answer(letter, q).key, q.options[i].key);
		EXPECT_EQ(parse_answer("(" + letter + ")", q).key, q.options[i].key);
		EXPECT_EQ(parse_answer(letter + ". " + q.options[i].text, q).key, q.options[i].key);
		EXPECT_EQ(parse_answer("Answer: " + letter, q).key, q.options[i].key);
		EXPECT_EQ(parse_answer(q.options[i].text + ".", q).key, q.options[i].key);
		EXPECT_EQ(parse_answer(q.options[i].key, q).key, q.options[i].key);
	}
	EXPECT_EQ(parse_answer("they are", q).key, "identical");
	EXPECT_EQ(parse_answer("The left", q).key, "a_darker");
}

TEST(ParseAnswer, AmbiguityIsAFlaggedFailure) {
	const QuestionRecord q = comparison("img", true);
	const ParsedAnswer p = parse_answer("The", q);
	EXPECT_FALSE(p.ok());
	EXPECT_EQ(p.failure, "ambiguous prefix");
	EXPECT_FALSE(parse_answer("purple", q).ok());
	EXPECT_FALSE(parse_answer("", q).ok());
	// A letter paired with another option's text is contradictory.
	const std::string a = letterFor(q, "a_darker");
	EXPECT_FALSE(parse_answer(a + ". They are identical", q).ok());
}

TEST(ClassifyResponse, IllusionAndControl) {
	const QuestionRecord ill = comparison("i", true);
	EXPECT_EQ(classify_response(parse_answer(letterFor(ill, ill.pixel_answer), ill), RecordLabel::Illusion, ill),
	          Outcome::NoIllusion);
	EXPECT_EQ(classify_response(parse_answer(letterFor(ill, "b_darker"), ill), RecordLabel::Illusion, ill),
	          Outcome::HumanLike);
	EXPECT_EQ(classify_response(parse_answer(letterFor(ill, otherKey(ill)), ill), RecordLabel::Illusion, ill),
	          Outcome::NotApplicable);
	EXPECT_EQ(classify_response(parse_answer("no idea", ill), RecordLabel::Illusion, ill), Outcome::NotApplicable);

	const QuestionRecord ctl = comparison("c", false);
	EXPECT_EQ(classify_response(parse_answer(letterFor(ctl, "a_darker"), ctl), RecordLabel::Control, ctl),
	          Outcome::Accurate);
	EXPECT_EQ(classify_response(parse_answer("no idea", ctl), RecordLabel::Control, ctl), Outcome::Wrong);
	EXPECT_THROW(classify_response(parse_answer("A", ctl), RecordLabel::Pending, ctl), ValidationError);
}

TEST(ClassifyResponse, Recognition) {
	QuestionRecord q = questions::make_recognition_question({"f", "the car", "red", "gray"}, PromptMode::Human, 1);
	q.human_answer = "red";
	EXPECT_EQ(classify_response(parse_answer("Dark red", q), RecordLabel::Illusion, q), Outcome::HumanLike);
	EXPECT_EQ(classify_response(parse_answer("grey", q), RecordLabel::Illusion, q), Outcome::NoIllusion);
	EXPECT_EQ(classify_response(parse_answer("blue", q), RecordLabel::Illusion, q), Outcome::NotApplicable);
}

struct Fixture {
	std::vector<DatasetRecord> records;
	std::vector<QuestionRecord> questions;
};

Fixture mixedSet(int n) {
	Fixture f;
	for (int i = 0; i < n; ++i) {
		const bool illusion = i % 2 == 0;
		const std::string id = "img" + std::to_string(i);
		f.records.push_back(record(id, illusion, i % 3 == 0 ? IllusionType::Stripe : IllusionType::Contrast));
		for (const PromptMode m : {PromptMode::Pixel, PromptMode::Human, PromptMode::None}) {
			f.questions.push_back(comparison(id, illusion, m));
		}
	}
	return f;
}

std::vector<ModelResponse> respond(const Fixture& f, const std::function<std::string(const QuestionRecord&)>& pick) {
	std::vector<ModelResponse> out;
	for (const auto& q : f.questions) {
		out.push_back(ModelResponse{q.image_id, q.id, q.prompt_mode, pick(q), "test"});
	}
	return out;
}

TEST(ComputeMetrics, OracleResponders) {
	const Fixture f = mixedSet(40);
	const MetricsReport pixel =
	    compute_metrics(respond(f, [](const QuestionRecord& q) { return letterFor(q, q.pixel_answer); }), f.records,
	                    f.questions);
	for (const auto& [key, g] : pixel.groups) {
		EXPECT_DOUBLE_EQ(*g.no_illusion_rate(), 1.0);
		EXPECT_DOUBLE_EQ(*g.accurate_rate(), 1.0);
	}
	const MetricsReport human =
	    compute_metrics(respond(f, [](const QuestionRecord& q) { return letterFor(q, human_key(q)); }), f.records,
	                    f.questions);
	for (const auto& [key, g] : human.groups) {
		EXPECT_DOUBLE_EQ(*g.human_like_rate(), 1.0);
	}
	EXPECT_DOUBLE_EQ(*human.deception_rate("contrast"), 1.0);
}

TEST(ComputeMetrics, ToySetOfTen) {
	Fixture f;
	std::vector<ModelResponse> responses;
	for (int i = 0; i < 10; ++i) {
		const std::string id = "t" + std::to_string(i);
		f.records.push_back(record(id, true));
		f.questions.push_back(comparison(id, true));
		const auto& q = f.questions.back();
		const std::string key = i < 6 ? q.pixel_answer : (i < 9 ? human_key(q) : otherKey(q));
		responses.push_back({id, q.id, PromptMode::Pixel, letterFor(q, key), ""});
	}
	const MetricsReport r = compute_metrics(responses, f.records, f.questions);
	const GroupMetrics& g = r.groups.at({"contrast", "pixel"});
	EXPECT_DOUBLE_EQ(*g.no_illusion_rate(), 0.6);
	EXPECT_DOUBLE_EQ(*g.human_like_rate(), 0.3);
	EXPECT_DOUBLE_EQ(*g.na_rate(), 0.1);
	EXPECT_EQ(r.deception_rate("contrast"), g.human_like_rate());
}

TEST(ComputeMetrics, PartitionIdentityAndPermutationInvariance) {
	const Fixture f = mixedSet(60);
	Rng rng(4);
	const std::array<std::string, 5> noise{"A", "B", "C", "unsure", "The"};
	auto responses = respond(f, [&](const QuestionRecord&) { return noise[std::size_t(rng.uniform_int(0, 4))]; });
	const MetricsReport r = compute_metrics(responses, f.records, f.questions);
	for (const auto& [key, g] : r.groups) {
		if (g.illusion_total > 0) {
			EXPECT_NEAR(*g.human_like_rate() + *g.no_illusion_rate() + *g.na_rate(), 1.0, 1e-9);
		}
		if (key.second == "pixel") {
			EXPECT_EQ(r.deception_rate(key.first), g.human_like_rate());
		}
	}
	rng.shuffle(std::span<ModelResponse>(responses));
	EXPECT_EQ(report_to_json(compute_metrics(responses, f.records, f.questions)), report_to_json(r));
}

TEST(ComputeMetrics, OrphansAndUnlabeledReported) {
	Fixture f = mixedSet(2);
	f.records[1].label = RecordLabel::Discarded;
	auto responses = respond(f, [](const QuestionRecord&) { return "A"; });
	responses.push_back({"ghost", "ghost-cmp-pixel", PromptMode::Pixel, "A", ""});
	const MetricsReport r = compute_metrics(responses, f.records, f.questions);
	EXPECT_EQ(r.orphans, (std::vector<std::string>{"ghost/ghost-cmp-pixel"}));
	EXPECT_EQ(r.skipped_unlabeled, 3u);
	EXPECT_EQ(r.scored, 3u);
}

TEST(Breakdown, OrientationCellsAndAbsentBins) {
	Fixture f;
	std::map<std::string, ImageFactors> factors;
	std::vector<ModelResponse> responses;
	for (int i = 0; i < 8; ++i) {
		const std::string id = "b" + std::to_string(i);
		const std::string orientation = i < 4 ? "left-right" : "up-down";
		f.records.push_back(record(id, true, IllusionType::Contrast, orientation));
		f.questions.push_back(comparison(id, true));
		const auto& q = f.questions.back();
		factors[id] = ImageFactors{orientation, 10.0 + 20.0 * i, std::nullopt, std::nullopt};
		responses.push_back({id, q.id, PromptMode::Pixel, letterFor(q, i < 4 ? human_key(q) : q.pixel_answer), ""});
	}
	const MetricsReport r = compute_metrics(responses, f.records, f.questions, factors);
	std::map<std::pair<std::string, std::string>, double> cells;
	for (const auto& c : r.breakdown) {
		cells[{c.factor, c.bin}] = c.rate();
	}
	EXPECT_DOUBLE_EQ(cells.at({"orientation", "left-right"}), 1.0);
	EXPECT_DOUBLE_EQ(cells.at({"orientation", "up-down"}), 0.0);
	EXPECT_EQ(cells.count({"direction", "horizontal"}), 0u);
	EXPECT_EQ(cells.count({"color_distance", "[200,250)"}), 0u);
	EXPECT_EQ(cells.count({"color_distance", "[0,50)"}), 1u);
	EXPECT_NE(breakdown_to_csv(r).find("orientation,\"left-right\",4,4,1"), std::string::npos);
	EXPECT_NE(report_to_table(r).find("left-right"), std::string::npos);
}

TEST(Breakdown, ConstructedResponderIsMonotone) {
	Fixture f;
	std::map<std::string, ImageFactors> factors;
	std::vector<ModelResponse> responses;
	for (int i = 0; i < 441; i += 3) {
		const std::string id = "d" + std::to_string(i);
		f.records.push_back(record(id, true));
		f.questions.push_back(comparison(id, true));
		const auto& q = f.questions.back();
		factors[id] = ImageFactors{"left-right", double(i), std::nullopt, std::nullopt};
		responses.push_back({id, q.id, PromptMode::Pixel, letterFor(q, i < 100 ? human_key(q) : q.pixel_answer), ""});
	}
	const MetricsReport r = compute_metrics(responses, f.records, f.questions, factors, {25.0, 2, PromptMode::Pixel});
	double previous = 2.0;
	int bins = 0;
	for (const auto& c : r.breakdown) {
		if (c.factor == "color_distance") {
			EXPECT_LE(c.rate(), previous) << c.bin;
			previous = c.rate();
			++bins;
		}
	}
	EXPECT_GE(bins, 10);
}

TEST(Responses, FileRoundTrip) {
	testing::TempDir dir{"responses"};
	const std::vector<ModelResponse> in{{"a", "a-cmp-pixel", PromptMode::Pixel, "B", "run1"},
	                                    {"b", "b-rec-none", PromptMode::None, "red\n", ""}};
	{
		std::ofstream out(dir / "r.jsonl");
		for (const auto& r : in) {
			out << to_json_line(r) << "\n";
		}
	}
	const auto back = read_responses(dir / "r.jsonl");
	ASSERT_EQ(back.size(), 2u);
	EXPECT_EQ(back[1].text, "red\n");
	EXPECT_EQ(back[0].run_tag, "run1");
}

} // namespace
} // namespace illusion::eval
