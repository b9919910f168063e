#include "illusion/eval.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace illusion::eval {

namespace {

using nlohmann::ordered_json;
using questions::PromptMode;
using questions::QuestionKind;
using questions::QuestionRecord;

std::string lowerTrimmed(std::string_view text) {
	std::string out;
	for (const char c : text) {
		out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
	}
	const auto first = out.find_first_not_of(" \t\r\n\"'`*");
	if (first == std::string::npos) {
		return {};
	}
	const auto last = out.find_last_not_of(" \t\r\n\"'`*.!?");
	return last == std::string::npos || last < first ? std::string{} : out.substr(first, last - first + 1);
}

std::string collapseSpaces(const std::string& text) {
	std::string out;
	bool space = false;
	for (const char c : text) {
		if (std::isspace(static_cast<unsigned char>(c))) {
			space = !out.empty();
			continue;
		}
		if (space) {
			out += ' ';
			space = false;
		}
		out += c;
	}
	return out;
}

const std::map<std::string, std::string>& colorWords() {
	static const std::map<std::string, std::string> words{
	    {"red", "red"},       {"crimson", "red"},     {"scarlet", "red"},     {"maroon", "red"},
	    {"orange", "orange"}, {"yellow", "yellow"},   {"gold", "yellow"},     {"golden", "yellow"},
	    {"green", "green"},   {"lime", "green"},      {"olive", "green"},     {"cyan", "cyan"},
	    {"teal", "cyan"},     {"turquoise", "cyan"},  {"blue", "blue"},       {"navy", "blue"},
	    {"azure", "blue"},    {"purple", "purple"},   {"violet", "purple"},   {"magenta", "purple"},
	    {"pink", "pink"},     {"brown", "brown"},     {"black", "black"},     {"white", "white"},
	    {"gray", "gray"},     {"grey", "gray"},       {"silver", "gray"},
	};
	return words;
}

std::string numberLabel(double v) {
	char buffer[32];
	std::snprintf(buffer, sizeof buffer, "%g", v);
	return buffer;
}

ordered_json optionalRate(const std::optional<double>& r) {
	return r ? ordered_json(*r) : ordered_json(nullptr);
}

std::optional<double> ratio(std::size_t part, std::size_t whole) {
	if (whole == 0) {
		return std::nullopt;
	}
	return static_cast<double>(part) / static_cast<double>(whole);
}

} // namespace

std::optional<std::string> normalize_color_answer(std::string_view text) {
	std::set<std::string> found;
	std::string token;
	auto flush = [&] {
		if (token.empty()) {
			return;
		}
		const auto& words = colorWords();
		auto it = words.find(token);
		if (it == words.end() && token.size() > 3 && token.ends_with("ish")) {
			// reddish, bluish, greenish, yellowish
			const std::string stem = token.substr(0, token.size() - 3);
			it = words.find(stem);
			if (it == words.end() && stem.size() > 1 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
				it = words.find(stem.substr(0, stem.size() - 1));
			}
			if (it == words.end()) {
				it = words.find(stem + "e");
			}
		}
		if (it != words.end()) {
			found.insert(it->second);
		}
		token.clear();
	};
	for (const char c : text) {
		if (std::isalpha(static_cast<unsigned char>(c))) {
			token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
		} else {
			flush();
		}
	}
	flush();
	if (found.size() != 1) {
		return std::nullopt;
	}
	return *found.begin();
}

ParsedAnswer parse_answer(std::string_view text, const QuestionRecord& question) {
	ParsedAnswer out;
	if (question.kind == QuestionKind::Recognition) {
		out.key = normalize_color_answer(text);
		if (!out.key) {
			out.failure = "no single color term";
		}
		return out;
	}
	std::string norm = collapseSpaces(lowerTrimmed(text));
	for (const std::string_view lead : {"answer:", "the answer is", "answer", "option"}) {
		if (norm.rfind(lead, 0) == 0) {
			norm = collapseSpaces(lowerTrimmed(norm.substr(lead.size())));
			break;
		}
	}
	if (norm.empty()) {
		out.failure = "empty response";
		return out;
	}
	const auto& options = question.options;
	std::vector<std::string> optionTexts;
	for (const auto& o : options) {
		optionTexts.push_back(collapseSpaces(lowerTrimmed(o.text)));
	}

	// Letter forms: "b", "(b)", "b.", "b)", "b: ...", "b. the right square is darker".
	std::string rest = norm;
	if (rest.front() == '(') {
		rest.erase(0, 1);
	}
	if (!rest.empty() && rest[0] >= 'a' && rest[0] < static_cast<char>('a' + options.size()) &&
	    (rest.size() == 1 || rest[1] == '.' || rest[1] == ')' || rest[1] == ':' || rest[1] == ' ')) {
		const auto index = static_cast<std::size_t>(rest[0] - 'a');
		std::string tail = collapseSpaces(lowerTrimmed(rest.substr(1)));
		while (!tail.empty() && (tail.front() == '.' || tail.front() == ')' || tail.front() == ':')) {
			tail = collapseSpaces(lowerTrimmed(tail.substr(1)));
		}
		if (tail.empty() || optionTexts[index].rfind(tail, 0) == 0) {
			out.key = options[index].key;
			return out;
		}
		// A bare letter followed by an unrelated sentence is not a letter answer; fall through.
		if (rest.size() > 1 && rest[1] != ' ') {
			out.failure = "letter contradicts option text";
			return out;
		}
	}

	for (std::size_t i = 0; i < options.size(); ++i) {
		if (norm == optionTexts[i] || norm == options[i].key) {
			out.key = options[i].key;
			return out;
		}
	}
	std::vector<std::size_t> prefixed;
	for (std::size_t i = 0; i < options.size(); ++i) {
		if (norm.size() >= 3 && optionTexts[i].rfind(norm, 0) == 0) {
			prefixed.push_back(i);
		}
	}
	if (prefixed.size() == 1) {
		out.key = options[prefixed.front()].key;
		return out;
	}
	out.failure = prefixed.empty() ? "matches no option" : "ambiguous prefix";
	return out;
}

std::string_view to_string(Outcome o) {
	switch (o) {
	case Outcome::NoIllusion: return "no_illusion";
	case Outcome::HumanLike: return "human_like";
	case Outcome::NotApplicable: return "na";
	case Outcome::Accurate: return "accurate";
	case Outcome::Wrong: return "wrong";
	}
	return "?";
}

const std::string& human_key(const QuestionRecord& question) {
	return question.human_answer ? *question.human_answer : question.expected_human_answer;
}

Outcome classify_response(const ParsedAnswer& parsed, manifest::RecordLabel label, const QuestionRecord& question) {
	using manifest::RecordLabel;
	if (label == RecordLabel::Illusion) {
		if (!parsed.ok()) {
			return Outcome::NotApplicable;
		}
		if (*parsed.key == question.pixel_answer) {
			return Outcome::NoIllusion;
		}
		if (*parsed.key == human_key(question)) {
			return Outcome::HumanLike;
		}
		return Outcome::NotApplicable;
	}
	if (label == RecordLabel::Control) {
		return parsed.ok() && *parsed.key == question.pixel_answer ? Outcome::Accurate : Outcome::Wrong;
	}
	throw ValidationError("responses can only be scored on illusion or control images");
}

std::optional<double> GroupMetrics::human_like_rate() const { return ratio(human_like, illusion_total); }
std::optional<double> GroupMetrics::no_illusion_rate() const { return ratio(no_illusion, illusion_total); }
std::optional<double> GroupMetrics::na_rate() const { return ratio(not_applicable, illusion_total); }
std::optional<double> GroupMetrics::accurate_rate() const { return ratio(accurate, control_total); }

std::optional<double> MetricsReport::deception_rate(const std::string& type) const {
	const auto it = groups.find({type, "pixel"});
	return it == groups.end() ? std::nullopt : it->second.human_like_rate();
}

MetricsReport compute_metrics(const std::vector<ModelResponse>& responses,
                              const std::vector<manifest::DatasetRecord>& records,
                              const std::vector<QuestionRecord>& question_set,
                              const std::map<std::string, ImageFactors>& factors, const BreakdownOptions& options) {
	if (!(options.color_distance_bin > 0.0) || options.stripe_count_bin < 1) {
		throw ValidationError("breakdown bin widths must be positive");
	}
	std::map<std::string, const manifest::DatasetRecord*> byImage;
	for (const auto& r : records) {
		byImage[r.id] = &r;
	}
	std::map<std::string, const QuestionRecord*> byQuestion;
	for (const auto& q : question_set) {
		byQuestion[q.id] = &q;
	}

	MetricsReport report;
	std::map<std::pair<std::string, std::string>, BreakdownCell> cells;
	auto tally = [&](const std::string& factor, const std::string& bin, double lower, bool deceived) {
		auto& cell = cells[{factor, bin}];
		cell.factor = factor;
		cell.bin = bin;
		cell.lower = lower;
		++cell.n;
		cell.deceived += deceived ? 1 : 0;
	};

	for (const auto& resp : responses) {
		const auto rec = byImage.find(resp.image_id);
		const auto q = byQuestion.find(resp.question_id);
		if (rec == byImage.end() || q == byQuestion.end() || q->second->image_id != resp.image_id) {
			report.orphans.push_back(resp.image_id + "/" + resp.question_id);
			continue;
		}
		const auto label = rec->second->label;
		if (label != manifest::RecordLabel::Illusion && label != manifest::RecordLabel::Control) {
			++report.skipped_unlabeled;
			continue;
		}
		const ParsedAnswer parsed = parse_answer(resp.text, *q->second);
		const Outcome outcome = classify_response(parsed, label, *q->second);
		const std::string type(manifest::to_string(rec->second->illusion_type));
		auto& g = report.groups[{type, std::string(questions::to_string(resp.prompt_mode))}];
		++report.scored;
		g.parse_failures += parsed.ok() ? 0 : 1;
		switch (outcome) {
		case Outcome::NoIllusion: ++g.no_illusion; ++g.illusion_total; break;
		case Outcome::HumanLike: ++g.human_like; ++g.illusion_total; break;
		case Outcome::NotApplicable: ++g.not_applicable; ++g.illusion_total; break;
		case Outcome::Accurate: ++g.accurate; ++g.control_total; break;
		case Outcome::Wrong: ++g.wrong; ++g.control_total; break;
		}

		if (label != manifest::RecordLabel::Illusion || resp.prompt_mode != options.mode) {
			continue;
		}
		const bool deceived = outcome == Outcome::HumanLike;
		const auto f = factors.find(resp.image_id);
		const ImageFactors* fx = f == factors.end() ? nullptr : &f->second;
		const std::string& subtype = fx && !fx->subtype.empty() ? fx->subtype : rec->second->subtype;
		switch (rec->second->illusion_type) {
		case manifest::IllusionType::Contrast: tally("orientation", subtype, 0.0, deceived); break;
		case manifest::IllusionType::Stripe: tally("direction", subtype, 0.0, deceived); break;
		case manifest::IllusionType::Filter:
			tally("scene_class", fx && fx->scene_class ? *fx->scene_class : subtype, 0.0, deceived);
			break;
		}
		if (fx && fx->color_distance) {
			const double w = options.color_distance_bin;
			const double lo = std::floor(*fx->color_distance / w) * w;
			tally("color_distance", "[" + numberLabel(lo) + "," + numberLabel(lo + w) + ")", lo, deceived);
		}
		if (fx && fx->stripe_count) {
			const int w = options.stripe_count_bin;
			const int lo = (*fx->stripe_count / w) * w;
			const std::string bin =
			    w == 1 ? std::to_string(lo) : "[" + std::to_string(lo) + "," + std::to_string(lo + w) + ")";
			tally("stripe_count", bin, lo, deceived);
		}
	}
	for (auto& [key, cell] : cells) {
		report.breakdown.push_back(cell);
	}
	std::stable_sort(report.breakdown.begin(), report.breakdown.end(), [](const auto& a, const auto& b) {
		return a.factor != b.factor ? a.factor < b.factor : (a.lower != b.lower ? a.lower < b.lower : a.bin < b.bin);
	});
	return report;
}

std::map<std::string, ImageFactors> load_factors(const std::vector<manifest::DatasetRecord>& records,
                                                 const std::filesystem::path& root) {
	std::map<std::string, ImageFactors> out;
	for (const auto& r : records) {
		ImageFactors f;
		f.subtype = r.subtype;
		if (!r.sidecar.empty()) {
			const auto path = root / r.sidecar;
			try {
				const auto j = nlohmann::json::parse(jsonl::read_file(path));
				if (j.contains("color_distance") && j["color_distance"].is_number()) {
					f.color_distance = j["color_distance"].get<double>();
				}
				if (j.contains("stripe_count") && j["stripe_count"].is_number_integer()) {
					f.stripe_count = j["stripe_count"].get<int>();
				}
				if (j.contains("scene_class") && j["scene_class"].is_string()) {
					f.scene_class = j["scene_class"].get<std::string>();
				}
			} catch (const nlohmann::json::exception& e) {
				throw ValidationError(path.string() + ": " + e.what());
			}
		}
		out[r.id] = std::move(f);
	}
	return out;
}

std::string report_to_json(const MetricsReport& report) {
	ordered_json groups = ordered_json::array();
	for (const auto& [key, g] : report.groups) {
		ordered_json j;
		j["illusion_type"] = key.first;
		j["prompt_mode"] = key.second;
		j["illusion_responses"] = g.illusion_total;
		j["human_like_rate"] = optionalRate(g.human_like_rate());
		j["no_illusion_rate"] = optionalRate(g.no_illusion_rate());
		j["na_rate"] = optionalRate(g.na_rate());
		if (key.second == "pixel") {
			j["deception_rate"] = optionalRate(g.human_like_rate());
		}
		j["control_responses"] = g.control_total;
		j["accurate_rate"] = optionalRate(g.accurate_rate());
		j["parse_failures"] = g.parse_failures;
		groups.push_back(std::move(j));
	}
	ordered_json breakdown = ordered_json::array();
	for (const auto& c : report.breakdown) {
		breakdown.push_back({{"factor", c.factor}, {"bin", c.bin}, {"n", c.n}, {"deceived", c.deceived},
		                     {"deception_rate", c.rate()}});
	}
	ordered_json j;
	j["scored"] = report.scored;
	j["groups"] = std::move(groups);
	j["breakdown"] = std::move(breakdown);
	j["orphans"] = report.orphans;
	j["skipped_unlabeled"] = report.skipped_unlabeled;
	return j.dump(2);
}

std::string report_to_table(const MetricsReport& report) {
	auto pct = [](const std::optional<double>& r) {
		char buffer[16];
		if (!r) {
			return std::string("     -");
		}
		std::snprintf(buffer, sizeof buffer, "%6.1f", *r * 100.0);
		return std::string(buffer);
	};
	std::ostringstream out;
	out << "type      mode    n_ill  human  no_ill     na   n_ctl   accur  parse_fail\n";
	for (const auto& [key, g] : report.groups) {
		char line[160];
		std::snprintf(line, sizeof line, "%-9s %-6s %6zu %s  %s %s  %6zu  %s  %10zu\n", key.first.c_str(),
		              key.second.c_str(), g.illusion_total, pct(g.human_like_rate()).c_str(),
		              pct(g.no_illusion_rate()).c_str(), pct(g.na_rate()).c_str(), g.control_total,
		              pct(g.accurate_rate()).c_str(), g.parse_failures);
		out << line;
	}
	if (!report.breakdown.empty()) {
		out << "\nfactor          bin             n  deception\n";
		for (const auto& c : report.breakdown) {
			char line[160];
			std::snprintf(line, sizeof line, "%-15s %-12s %4zu  %s\n", c.factor.c_str(), c.bin.c_str(), c.n,
			              pct(c.rate()).c_str());
			out << line;
		}
	}
	if (!report.orphans.empty()) {
		out << "\norphan responses: " << report.orphans.size() << "\n";
	}
	return out.str();
}

std::string breakdown_to_csv(const MetricsReport& report) {
	std::ostringstream out;
	out << "factor,bin,n,deceived,deception_rate\n";
	for (const auto& c : report.breakdown) {
		out << c.factor << ",\"" << c.bin << "\"," << c.n << "," << c.deceived << "," << c.rate() << "\n";
	}
	return out.str();
}

std::string to_json_line(const ModelResponse& r) {
	ordered_json j;
	j["image_id"] = r.image_id;
	j["question_id"] = r.question_id;
	j["prompt_mode"] = questions::to_string(r.prompt_mode);
	j["text"] = r.text;
	if (!r.run_tag.empty()) {
		j["run_tag"] = r.run_tag;
	}
	return j.dump();
}

std::vector<ModelResponse> read_responses(const std::filesystem::path& path) {
	std::vector<ModelResponse> out;
	jsonl::for_each_line(path, [&](std::string_view line, std::size_t number) {
		try {
			const auto j = nlohmann::json::parse(line);
			ModelResponse r;
			r.image_id = j.at("image_id").get<std::string>();
			r.question_id = j.at("question_id").get<std::string>();
			r.prompt_mode = questions::parse_prompt_mode(j.at("prompt_mode").get<std::string>());
			r.text = j.at("text").get<std::string>();
			r.run_tag = j.value("run_tag", std::string{});
			out.push_back(std::move(r));
		} catch (const nlohmann::json::exception& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		} catch (const ValidationError& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		}
	});
	return out;
}

} // namespace illusion::eval
