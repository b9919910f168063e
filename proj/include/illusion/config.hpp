#pragma once

#include "illusion/annotation.hpp"
#include "illusion/eval.hpp"
#include "illusion/procgen.hpp"
#include "illusion/questions.hpp"
#include "illusion/validation.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace illusion::config {

/// Flat key/value settings. File syntax, one entry per line:
///
///   # comment
///   [contrast]
///   width = 256
///   mu_b1 = 0.55, 0.9
///
/// A [section] header prefixes the following keys ("contrast.width"). Values may be quoted.
/// Every problem, including unknown keys, raises ConfigError.
class Config {
public:
	static Config load(const std::filesystem::path& path);
	static Config parse(std::string_view text, const std::string& origin = "<config>");

	void set(const std::string& key, const std::string& value);
	[[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
	[[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

	[[nodiscard]] std::optional<std::string> text(const std::string& key) const;
	[[nodiscard]] std::optional<double> number(const std::string& key) const;
	[[nodiscard]] std::optional<long long> integer(const std::string& key) const;
	[[nodiscard]] std::optional<bool> flag(const std::string& key) const;
	/// "lo, hi"
	[[nodiscard]] std::optional<procgen::Range> range(const std::string& key) const;
	[[nodiscard]] std::optional<procgen::IntRange> int_range(const std::string& key) const;

	/// Throws ConfigError naming the first key not in known_keys().
	void check_known() const;

private:
	std::map<std::string, std::string> values_;
	std::map<std::string, std::string> origins_; ///< key -> "file:line" for messages
	[[nodiscard]] std::string where(const std::string& key) const;
};

const std::set<std::string>& known_keys();

procgen::ContrastConfig contrast_config(const Config& c);
procgen::StripeConfig stripe_config(const Config& c);
procgen::LabelModel label_model(const Config& c);
procgen::ProbeConfig probe_config(const Config& c);
annotation::SurveyOptions survey_options(const Config& c);
validation::AggregationRules aggregation_rules(const Config& c);
eval::BreakdownOptions breakdown_options(const Config& c);

} // namespace illusion::config
