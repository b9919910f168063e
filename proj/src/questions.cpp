#include "illusion/questions.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <span>

namespace illusion::questions {

namespace {

using nlohmann::ordered_json;

constexpr std::array<std::string_view, 12> kComparisonTemplates{
    "which of the two regions is darker: {a} or {b}?",
    "how does the color of {a} compare with the color of {b}?",
    "is {a} darker than, lighter than, or the same as {b}?",
    "compare the brightness of {a} and {b}. Which one is darker?",
    "looking at {a} and {b}, which one is darker?",
    "which is darker, {a} or {b}?",
    "do {a} and {b} share the same color, or is one of them darker?",
    "between {a} and {b}, which has the darker color?",
    "are {a} and {b} identical in color? If not, which is darker?",
    "what is the relationship between the colors of {a} and {b}?",
    "tell me whether {a} or {b} is darker, or whether they are the same.",
    "which region has the lower brightness, {a} or {b}?",
};

constexpr std::array<std::string_view, 11> kRecognitionTemplates{
    "what color is {o}?",
    "what is the color of {o}?",
    "which color best describes {o}?",
    "name the color of {o}.",
    "how would you describe the color of {o}?",
    "what color does {o} have?",
    "identify the color of {o}.",
    "in this image, what color is {o}?",
    "tell me the color of {o}.",
    "what single color word fits {o}?",
    "what is the main color of {o}?",
};

constexpr std::array<std::pair<std::string_view, QuestionKind>, 2> kKinds{{
    {"comparison", QuestionKind::Comparison},
    {"recognition", QuestionKind::Recognition},
}};

constexpr std::array<std::pair<std::string_view, PromptMode>, 3> kModes{{
    {"pixel", PromptMode::Pixel},
    {"human", PromptMode::Human},
    {"none", PromptMode::None},
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

std::string fill(std::string_view pattern, std::string_view token, std::string_view value) {
	std::string out(pattern);
	for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size())) {
		out.replace(pos, token.size(), value);
	}
	return out;
}

std::string capitalized(std::string text) {
	if (!text.empty()) {
		text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
	}
	return text;
}

bool isRelationKey(std::string_view key) {
	return key == kADarker || key == kBDarker || key == kIdentical;
}

void requireRelation(const std::string& key, std::string_view what) {
	if (!isRelationKey(key)) {
		throw ValidationError(std::string(what) + " must be a_darker, b_darker or identical, got '" + key + "'");
	}
}

} // namespace

std::string_view to_string(QuestionKind k) { return nameOf(k, kKinds); }
std::string_view to_string(PromptMode m) { return nameOf(m, kModes); }
QuestionKind parse_question_kind(std::string_view text) { return lookup(text, kKinds, "question kind"); }
PromptMode parse_prompt_mode(std::string_view text) { return lookup(text, kModes, "prompt mode"); }

std::string_view prefix(PromptMode m) {
	switch (m) {
	case PromptMode::Pixel: return kPixelPrefix;
	case PromptMode::Human: return kHumanPrefix;
	case PromptMode::None: return "";
	}
	return "";
}

char option_letter(std::size_t index) {
	return static_cast<char>('A' + index);
}

std::string QuestionRecord::text_for(PromptMode mode) const {
	std::string out = mode == PromptMode::None ? capitalized(body) : std::string(prefix(mode)) + body;
	if (!options.empty()) {
		out += "\nOptions:";
		for (std::size_t i = 0; i < options.size(); ++i) {
			out += "\n";
			out += option_letter(i);
			out += ". ";
			out += options[i].text;
		}
	}
	return out;
}

std::string QuestionRecord::text() const {
	return text_for(prompt_mode);
}

void QuestionRecord::validate() const {
	if (id.empty() || image_id.empty()) {
		throw ValidationError("question record needs id and image_id");
	}
	if (region_a.empty() || body.find(region_a) == std::string::npos) {
		throw ValidationError(id + ": body must mention the first region descriptor verbatim");
	}
	if (kind == QuestionKind::Comparison) {
		if (region_b.empty() || body.find(region_b) == std::string::npos) {
			throw ValidationError(id + ": body must mention the second region descriptor verbatim");
		}
		if (options.size() < 3) {
			throw ValidationError(id + ": comparison questions need at least three options");
		}
		auto has = [&](std::string_view key) {
			return std::any_of(options.begin(), options.end(), [&](const Option& o) { return o.key == key; });
		};
		if (!has(kIdentical)) {
			throw ValidationError(id + ": comparison options must include 'identical'");
		}
		if (!has(pixel_answer) || !has(expected_human_answer) || (human_answer && !has(*human_answer))) {
			throw ValidationError(id + ": answers must be option keys");
		}
	} else {
		if (!options.empty()) {
			throw ValidationError(id + ": recognition questions are open-ended");
		}
		if (pixel_answer.empty() || expected_human_answer.empty()) {
			throw ValidationError(id + ": recognition answers must be color names");
		}
	}
}

std::size_t comparison_template_count() { return kComparisonTemplates.size(); }
std::size_t recognition_template_count() { return kRecognitionTemplates.size(); }

QuestionRecord make_comparison_question(const ComparisonMeta& meta, PromptMode mode, std::uint64_t seed) {
	if (meta.image_id.empty() || meta.region_a.empty() || meta.region_b.empty()) {
		throw ValidationError("comparison question needs an image id and two region descriptors");
	}
	requireRelation(meta.direction, "direction");
	requireRelation(meta.predicted_human, "predicted_human");

	Rng rng(mix_seed(seed, stable_hash(meta.image_id)));
	const auto pattern = kComparisonTemplates[static_cast<std::size_t>(
	    rng.uniform_int(0, static_cast<std::int64_t>(kComparisonTemplates.size()) - 1))];

	QuestionRecord q;
	q.id = meta.image_id + "-cmp-" + std::string(to_string(mode));
	q.image_id = meta.image_id;
	q.kind = QuestionKind::Comparison;
	q.prompt_mode = mode;
	q.body = fill(fill(pattern, "{a}", meta.region_a), "{b}", meta.region_b);
	q.options = {
	    Option{std::string(kADarker), capitalized(meta.region_a) + " is darker"},
	    Option{std::string(kBDarker), capitalized(meta.region_b) + " is darker"},
	    Option{std::string(kIdentical), "They are identical"},
	};
	rng.shuffle(std::span<Option>(q.options));
	q.pixel_answer = meta.direction;
	q.expected_human_answer = meta.predicted_human;
	q.region_a = meta.region_a;
	q.region_b = meta.region_b;
	q.validate();
	return q;
}

QuestionRecord make_recognition_question(const RecognitionMeta& meta, PromptMode mode, std::uint64_t seed) {
	if (meta.image_id.empty() || meta.object.empty()) {
		throw ValidationError("recognition question needs an image id and an object descriptor");
	}
	if (meta.original_color.empty() || meta.pixel_color.empty()) {
		throw ValidationError("recognition question needs original and pixel colors");
	}
	Rng rng(mix_seed(seed, stable_hash(meta.image_id)));
	const auto pattern = kRecognitionTemplates[static_cast<std::size_t>(
	    rng.uniform_int(0, static_cast<std::int64_t>(kRecognitionTemplates.size()) - 1))];

	QuestionRecord q;
	q.id = meta.image_id + "-rec-" + std::string(to_string(mode));
	q.image_id = meta.image_id;
	q.kind = QuestionKind::Recognition;
	q.prompt_mode = mode;
	q.body = fill(pattern, "{o}", meta.object);
	q.pixel_answer = meta.pixel_color;
	q.expected_human_answer = meta.original_color;
	q.region_a = meta.object;
	q.validate();
	return q;
}

std::string answer_text(const QuestionRecord& record, const std::string& key) {
	for (std::size_t i = 0; i < record.options.size(); ++i) {
		if (record.options[i].key == key) {
			return std::string(1, option_letter(i)) + ". " + record.options[i].text;
		}
	}
	if (record.kind == QuestionKind::Comparison) {
		throw ValidationError(record.id + ": '" + key + "' is not an option");
	}
	return key;
}

TrainingPairs emit_training_pairs(const std::vector<QuestionRecord>& records, NoneModeAnswer none_answer) {
	TrainingPairs out;
	for (const auto& record : records) {
		if (!record.human_answer) {
			out.excluded.push_back(record.id);
			continue;
		}
		const std::string& human = *record.human_answer;
		const std::string& unguided = none_answer == NoneModeAnswer::Pixel ? record.pixel_answer : human;
		for (const auto& [mode, key] : {std::pair{PromptMode::Pixel, &record.pixel_answer},
		                                std::pair{PromptMode::Human, &human},
		                                std::pair{PromptMode::None, &unguided}}) {
			out.rows.push_back(TrainingRow{record.image_id, record.text_for(mode), answer_text(record, *key), mode});
		}
	}
	return out;
}

QuestionRecord paraphrase(const QuestionRecord& record, Paraphraser& paraphraser) {
	QuestionRecord out = record;
	out.body = paraphraser.rewrite(record.body);
	for (const std::string* d : {&record.region_a, &record.region_b}) {
		if (!d->empty() && out.body.find(*d) == std::string::npos) {
			throw ValidationError(record.id + ": paraphrase dropped the descriptor '" + *d + "'");
		}
	}
	out.validate();
	return out;
}

std::string to_json_line(const QuestionRecord& r) {
	ordered_json j;
	j["id"] = r.id;
	j["image_id"] = r.image_id;
	j["kind"] = to_string(r.kind);
	j["prompt_mode"] = to_string(r.prompt_mode);
	j["text"] = r.text();
	j["body"] = r.body;
	ordered_json options = ordered_json::array();
	for (std::size_t i = 0; i < r.options.size(); ++i) {
		options.push_back({{"letter", std::string(1, option_letter(i))}, {"key", r.options[i].key},
		                   {"text", r.options[i].text}});
	}
	j["options"] = std::move(options);
	j["pixel_answer"] = r.pixel_answer;
	j["expected_human_answer"] = r.expected_human_answer;
	j["human_answer"] = r.human_answer ? ordered_json(*r.human_answer) : ordered_json(nullptr);
	j["region_a"] = r.region_a;
	j["region_b"] = r.region_b;
	return j.dump();
}

QuestionRecord from_json_line(std::string_view line) {
	QuestionRecord r;
	try {
		const auto j = nlohmann::json::parse(line);
		r.id = j.at("id").get<std::string>();
		r.image_id = j.at("image_id").get<std::string>();
		r.kind = parse_question_kind(j.at("kind").get<std::string>());
		r.prompt_mode = parse_prompt_mode(j.at("prompt_mode").get<std::string>());
		r.body = j.at("body").get<std::string>();
		for (const auto& o : j.at("options")) {
			r.options.push_back(Option{o.at("key").get<std::string>(), o.at("text").get<std::string>()});
		}
		r.pixel_answer = j.at("pixel_answer").get<std::string>();
		r.expected_human_answer = j.at("expected_human_answer").get<std::string>();
		if (j.contains("human_answer") && !j["human_answer"].is_null()) {
			r.human_answer = j["human_answer"].get<std::string>();
		}
		r.region_a = j.at("region_a").get<std::string>();
		r.region_b = j.value("region_b", std::string{});
	} catch (const nlohmann::json::exception& e) {
		throw ValidationError(e.what());
	}
	r.validate();
	return r;
}

void write_questions(const std::filesystem::path& path, const std::vector<QuestionRecord>& records) {
	std::string out;
	for (const auto& r : records) {
		out += to_json_line(r);
		out += '\n';
	}
	jsonl::write_atomic(path, out);
}

std::vector<QuestionRecord> read_questions(const std::filesystem::path& path) {
	std::vector<QuestionRecord> records;
	jsonl::for_each_line(path, [&](std::string_view line, std::size_t number) {
		try {
			records.push_back(from_json_line(line));
		} catch (const ValidationError& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		}
	});
	return records;
}

void write_training_rows(const std::filesystem::path& path, const std::vector<TrainingRow>& rows) {
	std::string out;
	for (const auto& row : rows) {
		ordered_json j;
		j["image"] = row.image;
		j["prompt"] = row.prompt;
		j["answer"] = row.answer;
		out += j.dump();
		out += '\n';
	}
	jsonl::write_atomic(path, out);
}

} // namespace illusion::questions
