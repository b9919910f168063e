#include "illusion/config.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>

namespace illusion::config {

namespace {

std::string trim(std::string_view s) {
	const auto b = s.find_first_not_of(" \t\r");
	if (b == std::string_view::npos) {
		return {};
	}
	const auto e = s.find_last_not_of(" \t\r");
	return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string v) {
	if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
		return v.substr(1, v.size() - 2);
	}
	return v;
}

std::pair<std::string, std::string> splitPair(const std::string& v) {
	const auto comma = v.find(',');
	if (comma == std::string::npos) {
		return {v, v};
	}
	return {trim(std::string_view(v).substr(0, comma)), trim(std::string_view(v).substr(comma + 1))};
}

} // namespace

Config Config::load(const std::filesystem::path& path) {
	std::string text;
	try {
		text = jsonl::read_file(path);
	} catch (const IoError& e) {
		throw ConfigError(std::string("cannot read config: ") + e.what());
	}
	return parse(text, path.string());
}

Config Config::parse(std::string_view text, const std::string& origin) {
	Config c;
	std::string section;
	std::size_t lineNo = 0;
	std::size_t start = 0;
	while (start <= text.size()) {
		auto end = text.find('\n', start);
		if (end == std::string_view::npos) {
			end = text.size();
		}
		++lineNo;
		std::string line = trim(text.substr(start, end - start));
		start = end + 1;
		const std::string at = origin + ":" + std::to_string(lineNo);
		if (line.empty() || line[0] == '#' || line[0] == ';') {
			continue;
		}
		if (line.front() == '[') {
			if (line.back() != ']' || line.size() < 3) {
				throw ConfigError(at + ": malformed section header");
			}
			section = trim(std::string_view(line).substr(1, line.size() - 2));
			continue;
		}
		const auto eq = line.find('=');
		if (eq == std::string::npos) {
			throw ConfigError(at + ": expected key = value");
		}
		std::string key = trim(std::string_view(line).substr(0, eq));
		std::string value = trim(std::string_view(line).substr(eq + 1));
		if (const auto hash = value.find(" #"); hash != std::string::npos) {
			value = trim(std::string_view(value).substr(0, hash));
		}
		if (key.empty()) {
			throw ConfigError(at + ": empty key");
		}
		if (!section.empty()) {
			key = section + "." + key;
		}
		if (c.values_.count(key)) {
			throw ConfigError(at + ": duplicate key " + key);
		}
		c.values_[key] = unquote(value);
		c.origins_[key] = at;
	}
	return c;
}

void Config::set(const std::string& key, const std::string& value) {
	values_[key] = value;
	origins_[key] = "--set";
}

std::string Config::where(const std::string& key) const {
	const auto it = origins_.find(key);
	return (it == origins_.end() ? std::string("<config>") : it->second) + ": " + key;
}

std::optional<std::string> Config::text(const std::string& key) const {
	const auto it = values_.find(key);
	if (it == values_.end()) {
		return std::nullopt;
	}
	return it->second;
}

std::optional<double> Config::number(const std::string& key) const {
	const auto v = text(key);
	if (!v) {
		return std::nullopt;
	}
	char* end = nullptr;
	errno = 0;
	const double d = std::strtod(v->c_str(), &end);
	if (v->empty() || *end != '\0' || errno != 0) {
		throw ConfigError(where(key) + " is not a number: " + *v);
	}
	return d;
}

std::optional<long long> Config::integer(const std::string& key) const {
	const auto v = text(key);
	if (!v) {
		return std::nullopt;
	}
	long long out = 0;
	const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
	if (ec != std::errc() || ptr != v->data() + v->size()) {
		throw ConfigError(where(key) + " is not an integer: " + *v);
	}
	return out;
}

std::optional<bool> Config::flag(const std::string& key) const {
	const auto v = text(key);
	if (!v) {
		return std::nullopt;
	}
	if (*v == "true" || *v == "yes" || *v == "1") {
		return true;
	}
	if (*v == "false" || *v == "no" || *v == "0") {
		return false;
	}
	throw ConfigError(where(key) + " is not a boolean: " + *v);
}

std::optional<procgen::Range> Config::range(const std::string& key) const {
	const auto v = text(key);
	if (!v) {
		return std::nullopt;
	}
	const auto [a, b] = splitPair(*v);
	Config tmp;
	tmp.values_ = {{"lo", a}, {"hi", b}};
	tmp.origins_ = {{"lo", where(key)}, {"hi", where(key)}};
	return procgen::Range{*tmp.number("lo"), *tmp.number("hi")};
}

std::optional<procgen::IntRange> Config::int_range(const std::string& key) const {
	const auto v = text(key);
	if (!v) {
		return std::nullopt;
	}
	const auto [a, b] = splitPair(*v);
	Config tmp;
	tmp.values_ = {{"lo", a}, {"hi", b}};
	tmp.origins_ = {{"lo", where(key)}, {"hi", where(key)}};
	return procgen::IntRange{static_cast<int>(*tmp.integer("lo")), static_cast<int>(*tmp.integer("hi"))};
}

const std::set<std::string>& known_keys() {
	static const std::set<std::string> keys{
	    "seed",
	    "jobs",
	    "contrast.width",
	    "contrast.height",
	    "contrast.mu_b1",
	    "contrast.mu_b2",
	    "contrast.mu_f",
	    "contrast.square_fraction",
	    "contrast.orientation",
	    "contrast.equal_foreground_probability",
	    "contrast.edge_jitter",
	    "contrast.softness",
	    "stripe.width",
	    "stripe.height",
	    "stripe.mu_s",
	    "stripe.stripe_count",
	    "stripe.stripe_width",
	    "stripe.direction",
	    "stripe.equal_stripe_probability",
	    "stripe.curvature",
	    "stripe.misalignment",
	    "label.amplitude",
	    "label.distance_scale",
	    "label.stripe_amplitude",
	    "label.stripe_scale",
	    "label.jnd",
	    "label.dead_band",
	    "generate.illusion_fraction",
	    "generate.predicted_labels",
	    "filter.dominance_threshold",
	    "filter.emit_controls",
	    "questions.modes",
	    "questions.none_answer",
	    "validation.votes_per_image",
	    "validation.deception_threshold",
	    "validation.kappa_min_agreement",
	    "splits.ratios",
	    "eval.color_distance_bin",
	    "eval.stripe_count_bin",
	    "eval.breakdown_mode",
	    "probe.canvas",
	    "survey.items_per_participant",
	    "survey.slots_per_image",
	    "survey.break_every",
	    "survey.break_seconds",
	};
	return keys;
}

void Config::check_known() const {
	for (const auto& [key, value] : values_) {
		if (!known_keys().count(key)) {
			throw ConfigError(where(key) + " is not a known setting");
		}
	}
}

// Every validate() failure is a configuration problem here, so rethrow it as one.
template <typename T>
T validated(T value) {
	try {
		value.validate();
	} catch (const ValidationError& e) {
		throw ConfigError(e.what());
	}
	return value;
}

template <typename F>
auto parsedEnum(const Config& c, const std::string& key, F parse) -> std::optional<decltype(parse(""))> {
	const auto v = c.text(key);
	if (!v || *v == "any") {
		return std::nullopt;
	}
	try {
		return parse(*v);
	} catch (const ValidationError& e) {
		throw ConfigError(key + ": " + e.what());
	}
}

procgen::ContrastConfig contrast_config(const Config& c) {
	procgen::ContrastConfig o;
	o.width = static_cast<int>(c.integer("contrast.width").value_or(o.width));
	o.height = static_cast<int>(c.integer("contrast.height").value_or(o.height));
	o.mu_b1 = c.range("contrast.mu_b1").value_or(o.mu_b1);
	o.mu_b2 = c.range("contrast.mu_b2").value_or(o.mu_b2);
	o.mu_f = c.range("contrast.mu_f").value_or(o.mu_f);
	o.square_fraction = c.range("contrast.square_fraction").value_or(o.square_fraction);
	o.orientation = parsedEnum(c, "contrast.orientation", procgen::parse_orientation);
	o.equal_foreground_probability =
	    c.number("contrast.equal_foreground_probability").value_or(o.equal_foreground_probability);
	o.noise.edge_jitter = c.number("contrast.edge_jitter").value_or(o.noise.edge_jitter);
	o.noise.softness = c.number("contrast.softness").value_or(o.noise.softness);
	return validated(o);
}

procgen::StripeConfig stripe_config(const Config& c) {
	procgen::StripeConfig o;
	o.width = static_cast<int>(c.integer("stripe.width").value_or(o.width));
	o.height = static_cast<int>(c.integer("stripe.height").value_or(o.height));
	o.mu_s = c.range("stripe.mu_s").value_or(o.mu_s);
	o.stripe_count = c.int_range("stripe.stripe_count").value_or(o.stripe_count);
	o.stripe_width = c.int_range("stripe.stripe_width").value_or(o.stripe_width);
	o.direction = parsedEnum(c, "stripe.direction", procgen::parse_stripe_direction);
	o.equal_stripe_probability = c.number("stripe.equal_stripe_probability").value_or(o.equal_stripe_probability);
	o.noise.curvature = c.number("stripe.curvature").value_or(o.noise.curvature);
	o.noise.misalignment = static_cast<int>(c.integer("stripe.misalignment").value_or(o.noise.misalignment));
	return validated(o);
}

procgen::LabelModel label_model(const Config& c) {
	procgen::LabelModel m;
	m.amplitude = c.number("label.amplitude").value_or(m.amplitude);
	m.distance_scale = c.number("label.distance_scale").value_or(m.distance_scale);
	m.stripe_amplitude = c.number("label.stripe_amplitude").value_or(m.stripe_amplitude);
	m.stripe_scale = c.number("label.stripe_scale").value_or(m.stripe_scale);
	m.jnd = c.number("label.jnd").value_or(m.jnd);
	m.dead_band = c.number("label.dead_band").value_or(m.dead_band);
	if (!(m.amplitude >= 0 && m.distance_scale > 0 && m.stripe_amplitude >= 0 && m.stripe_scale > 0 && m.jnd > 0 &&
	      m.dead_band >= 0 && m.dead_band < m.jnd)) {
		throw ConfigError("label model parameters out of range");
	}
	return m;
}

procgen::ProbeConfig probe_config(const Config& c) {
	procgen::ProbeConfig p;
	p.canvas = static_cast<int>(c.integer("probe.canvas").value_or(p.canvas));
	if (p.canvas < 32) {
		throw ConfigError("probe.canvas must be at least 32");
	}
	p.model = label_model(c);
	p.contrast.width = p.contrast.height = p.canvas;
	return p;
}

annotation::SurveyOptions survey_options(const Config& c) {
	annotation::SurveyOptions o;
	const auto items = c.integer("survey.items_per_participant").value_or(400);
	const auto slots = c.integer("survey.slots_per_image").value_or(5);
	const auto every = c.integer("survey.break_every").value_or(50);
	const auto secs = c.number("survey.break_seconds").value_or(30.0);
	if (items < 1 || slots < 1 || every < 1 || secs < 0) {
		throw ConfigError("survey settings must be positive");
	}
	o.items_per_participant = static_cast<std::size_t>(items);
	o.slots_per_image = static_cast<int>(slots);
	o.break_every = static_cast<int>(every);
	o.break_ms = static_cast<std::int64_t>(secs * 1000.0 + 0.5);
	o.seed = static_cast<std::uint64_t>(c.integer("seed").value_or(0));
	return o;
}

validation::AggregationRules aggregation_rules(const Config& c) {
	validation::AggregationRules r;
	r.votes_per_image = static_cast<int>(c.integer("validation.votes_per_image").value_or(r.votes_per_image));
	r.deception_threshold =
	    static_cast<int>(c.integer("validation.deception_threshold").value_or(r.deception_threshold));
	r.seed = static_cast<std::uint64_t>(c.integer("seed").value_or(0));
	if (r.votes_per_image < 1 || r.deception_threshold < 1 || r.deception_threshold > r.votes_per_image) {
		throw ConfigError("validation.deception_threshold must lie in [1, votes_per_image]");
	}
	return r;
}

eval::BreakdownOptions breakdown_options(const Config& c) {
	eval::BreakdownOptions o;
	o.color_distance_bin = c.number("eval.color_distance_bin").value_or(o.color_distance_bin);
	o.stripe_count_bin = static_cast<int>(c.integer("eval.stripe_count_bin").value_or(o.stripe_count_bin));
	if (const auto m = c.text("eval.breakdown_mode")) {
		try {
			o.mode = questions::parse_prompt_mode(*m);
		} catch (const ValidationError& e) {
			throw ConfigError(std::string("eval.breakdown_mode: ") + e.what());
		}
	}
	if (!(o.color_distance_bin > 0) || o.stripe_count_bin < 1) {
		throw ConfigError("breakdown bin widths must be positive");
	}
	return o;
}

} // namespace illusion::config
