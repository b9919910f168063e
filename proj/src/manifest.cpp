#include "illusion/manifest.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace illusion::manifest {

namespace {

using nlohmann::ordered_json;

constexpr std::array<std::pair<std::string_view, IllusionType>, 3> kTypes{{
    {"contrast", IllusionType::Contrast},
    {"stripe", IllusionType::Stripe},
    {"filter", IllusionType::Filter},
}};

constexpr std::array<std::pair<std::string_view, RecordLabel>, 4> kLabels{{
    {"illusion", RecordLabel::Illusion},
    {"control", RecordLabel::Control},
    {"discarded", RecordLabel::Discarded},
    {"pending", RecordLabel::Pending},
}};

constexpr std::array<std::pair<std::string_view, Split>, 4> kSplits{{
    {"train", Split::Train},
    {"dev", Split::Dev},
    {"test", Split::Test},
    {"unassigned", Split::Unassigned},
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

bool finalized(RecordLabel l) {
	return l == RecordLabel::Illusion || l == RecordLabel::Control;
}

using Table = std::vector<std::array<std::size_t, 3>>;

/// Integer table with the given row totals and column totals whose cells are the floor or ceiling of
/// rows[i] * cols[k] / total. Such a table always exists because the exact fractional table has integer
/// margins; the rounding is found as a max-flow over the fractional cells.
Table controlledRound(const std::vector<std::size_t>& rows, const std::array<std::size_t, 3>& cols) {
	const std::size_t total = std::accumulate(rows.begin(), rows.end(), std::size_t{0});
	Table out(rows.size(), {0, 0, 0});
	if (total == 0) {
		return out;
	}
	std::vector<std::size_t> rowNeed(rows.size(), 0);
	std::array<std::size_t, 3> colNeed = cols;
	std::vector<std::array<bool, 3>> fractional(rows.size(), {false, false, false});
	for (std::size_t i = 0; i < rows.size(); ++i) {
		std::size_t used = 0;
		for (std::size_t k = 0; k < 3; ++k) {
			const std::size_t product = rows[i] * cols[k];
			out[i][k] = product / total;
			fractional[i][k] = product % total != 0;
			used += out[i][k];
			colNeed[k] -= out[i][k];
		}
		rowNeed[i] = rows[i] - used;
	}

	// Augmenting paths over source -> row -> column -> sink, with unit capacity on fractional cells.
	std::vector<std::array<int, 3>> flow(rows.size(), {0, 0, 0});
	for (std::size_t i = 0; i < rows.size(); ++i) {
		while (rowNeed[i] > 0) {
			// BFS from row i through alternating edges to a column with remaining need.
			const std::size_t nodes = rows.size() + 3;
			std::vector<int> parent(nodes, -1);
			std::vector<bool> seen(nodes, false);
			std::vector<std::size_t> queue{i};
			seen[i] = true;
			int found = -1;
			for (std::size_t head = 0; head < queue.size() && found < 0; ++head) {
				const std::size_t u = queue[head];
				if (u < rows.size()) {
					for (std::size_t k = 0; k < 3; ++k) {
						const std::size_t v = rows.size() + k;
						if (fractional[u][k] && flow[u][k] == 0 && !seen[v]) {
							seen[v] = true;
							parent[v] = static_cast<int>(u);
							if (colNeed[k] > 0) {
								found = static_cast<int>(v);
								break;
							}
							queue.push_back(v);
						}
					}
				} else {
					const std::size_t k = u - rows.size();
					for (std::size_t r = 0; r < rows.size(); ++r) {
						if (flow[r][k] == 1 && !seen[r]) {
							seen[r] = true;
							parent[r] = static_cast<int>(u);
							queue.push_back(r);
						}
					}
				}
			}
			if (found < 0) {
				throw ValidationError("split rounding found no feasible assignment");
			}
			--colNeed[static_cast<std::size_t>(found) - rows.size()];
			for (int v = found; v != static_cast<int>(i);) {
				const int u = parent[static_cast<std::size_t>(v)];
				if (static_cast<std::size_t>(v) >= rows.size()) {
					flow[static_cast<std::size_t>(u)][static_cast<std::size_t>(v) - rows.size()] = 1;
				} else {
					flow[static_cast<std::size_t>(v)][static_cast<std::size_t>(u) - rows.size()] = 0;
				}
				v = u;
			}
			--rowNeed[i];
		}
	}
	for (std::size_t i = 0; i < rows.size(); ++i) {
		for (std::size_t k = 0; k < 3; ++k) {
			out[i][k] += static_cast<std::size_t>(flow[i][k]);
		}
	}
	return out;
}

} // namespace

std::string_view to_string(IllusionType t) { return nameOf(t, kTypes); }
std::string_view to_string(RecordLabel l) { return nameOf(l, kLabels); }
std::string_view to_string(Split s) { return nameOf(s, kSplits); }
IllusionType parse_illusion_type(std::string_view text) { return lookup(text, kTypes, "illusion type"); }
RecordLabel parse_record_label(std::string_view text) { return lookup(text, kLabels, "label"); }
Split parse_split(std::string_view text) { return lookup(text, kSplits, "split"); }

std::string to_json_line(const DatasetRecord& r) {
	ordered_json j;
	j["id"] = r.id;
	j["illusion_type"] = to_string(r.illusion_type);
	j["subtype"] = r.subtype;
	j["label"] = to_string(r.label);
	j["asset"] = r.asset;
	j["sidecar"] = r.sidecar;
	j["split"] = to_string(r.split);
	j["seed"] = r.seed;
	return j.dump();
}

DatasetRecord record_from_json_line(std::string_view line) {
	DatasetRecord r;
	try {
		const auto j = nlohmann::json::parse(line);
		if (!j.is_object()) {
			throw ValidationError("expected a JSON object");
		}
		r.id = j.at("id").get<std::string>();
		r.illusion_type = parse_illusion_type(j.at("illusion_type").get<std::string>());
		r.subtype = j.at("subtype").get<std::string>();
		r.label = parse_record_label(j.at("label").get<std::string>());
		r.asset = j.at("asset").get<std::string>();
		r.sidecar = j.at("sidecar").get<std::string>();
		r.split = parse_split(j.at("split").get<std::string>());
		r.seed = j.at("seed").get<std::uint64_t>();
	} catch (const nlohmann::json::exception& e) {
		throw ValidationError(e.what());
	}
	if (r.id.empty()) {
		throw ValidationError("record id is empty");
	}
	if (r.split != Split::Unassigned && !finalized(r.label)) {
		throw ValidationError(r.id + ": split assigned before the label was finalized");
	}
	return r;
}

std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path) {
	std::vector<DatasetRecord> records;
	std::set<std::string> ids;
	jsonl::for_each_line(path, [&](std::string_view line, std::size_t number) {
		try {
			DatasetRecord r = record_from_json_line(line);
			if (!ids.insert(r.id).second) {
				throw ValidationError("duplicate id " + r.id);
			}
			records.push_back(std::move(r));
		} catch (const ValidationError& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		}
	});
	return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
	std::string out;
	out.reserve(records.size() * 160);
	for (const auto& r : records) {
		out += to_json_line(r);
		out += '\n';
	}
	jsonl::write_atomic(path, out);
}

void append_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
	std::vector<std::string> lines;
	lines.reserve(records.size());
	for (const auto& r : records) {
		lines.push_back(to_json_line(r));
	}
	jsonl::append_locked(path, lines);
}

void SplitRatios::validate() const {
	for (const double r : values()) {
		if (!(r >= 0.0) || !std::isfinite(r)) {
			throw ValidationError("split ratios must be non-negative");
		}
	}
	if (std::abs(train + dev + test - 1.0) > 1e-9) {
		throw ValidationError("split ratios must sum to 1");
	}
}

SplitRatios parse_ratios(std::string_view text) {
	std::vector<double> parts;
	std::stringstream in{std::string(text)};
	std::string item;
	while (std::getline(in, item, ',')) {
		try {
			std::size_t used = 0;
			parts.push_back(std::stod(item, &used));
			if (item.find_first_not_of(" \t", used) != std::string::npos) {
				throw std::invalid_argument(item);
			}
		} catch (const std::logic_error&) {
			throw ValidationError("bad split ratio '" + item + "'");
		}
	}
	if (parts.size() != 3) {
		throw ValidationError("expected three comma-separated ratios (train,dev,test)");
	}
	SplitRatios r{parts[0], parts[1], parts[2]};
	r.validate();
	return r;
}

std::array<std::size_t, 3> split_targets(std::size_t total, const SplitRatios& ratios) {
	ratios.validate();
	const auto values = ratios.values();
	std::array<std::size_t, 3> out{};
	std::array<double, 3> remainder{};
	std::size_t assigned = 0;
	for (std::size_t k = 0; k < 3; ++k) {
		const double exact = static_cast<double>(total) * values[k];
		// Slack keeps 0.25 * 19000 from landing just below 4750.
		out[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
		remainder[k] = exact - static_cast<double>(out[k]);
		assigned += out[k];
	}
	std::array<std::size_t, 3> order{0, 1, 2};
	std::stable_sort(order.begin(), order.end(),
	                 [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
	for (std::size_t i = 0; assigned < total; ++i) {
		++out[order[i % 3]];
		++assigned;
	}
	return out;
}

std::vector<DatasetRecord> assign_splits(std::vector<DatasetRecord> records, const SplitRatios& ratios,
                                         std::uint64_t seed) {
	constexpr std::array<IllusionType, 3> types{IllusionType::Contrast, IllusionType::Stripe, IllusionType::Filter};
	constexpr std::array<RecordLabel, 2> labels{RecordLabel::Illusion, RecordLabel::Control};
	constexpr std::array<Split, 3> splits{Split::Train, Split::Dev, Split::Test};

	// strata[type][label] -> record indices
	std::array<std::array<std::vector<std::size_t>, 2>, 3> strata;
	for (std::size_t i = 0; i < records.size(); ++i) {
		auto& r = records[i];
		if (r.label == RecordLabel::Pending) {
			throw ValidationError("cannot assign splits: " + r.id + " is still pending");
		}
		r.split = Split::Unassigned;
		if (r.label == RecordLabel::Discarded) {
			continue;
		}
		const auto t = static_cast<std::size_t>(r.illusion_type);
		const std::size_t l = r.label == RecordLabel::Illusion ? 0 : 1;
		strata[t][l].push_back(i);
	}

	std::vector<std::size_t> typeSizes;
	for (const auto& byLabel : strata) {
		typeSizes.push_back(byLabel[0].size() + byLabel[1].size());
	}
	const std::size_t eligible = std::accumulate(typeSizes.begin(), typeSizes.end(), std::size_t{0});
	const Table perType = controlledRound(typeSizes, split_targets(eligible, ratios));

	for (std::size_t t = 0; t < types.size(); ++t) {
		const std::vector<std::size_t> labelSizes{strata[t][0].size(), strata[t][1].size()};
		const Table perLabel = controlledRound(labelSizes, perType[t]);
		for (std::size_t l = 0; l < labels.size(); ++l) {
			auto& members = strata[t][l];
			std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
			keyed.reserve(members.size());
			for (const std::size_t idx : members) {
				keyed.emplace_back(mix_seed(seed, stable_hash(records[idx].id)), idx);
			}
			std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
				return a.first != b.first ? a.first < b.first : records[a.second].id < records[b.second].id;
			});
			std::size_t cursor = 0;
			for (std::size_t k = 0; k < splits.size(); ++k) {
				for (std::size_t n = 0; n < perLabel[l][k]; ++n) {
					records[keyed[cursor++].second].split = splits[k];
				}
			}
		}
	}
	return records;
}

CompositionStats stats(const std::vector<DatasetRecord>& records) {
	CompositionStats s;
	for (const auto& [name, v] : kTypes) {
		s.by_type[std::string(name)] = 0;
	}
	for (const auto& [name, v] : kLabels) {
		s.by_label[std::string(name)] = 0;
	}
	for (const auto& [name, v] : kSplits) {
		s.by_split[std::string(name)] = 0;
	}
	for (const auto& r : records) {
		++s.total;
		++s.by_type[std::string(to_string(r.illusion_type))];
		++s.by_subtype[std::string(to_string(r.illusion_type)) + "/" + r.subtype];
		++s.by_label[std::string(to_string(r.label))];
		++s.by_split[std::string(to_string(r.split))];
	}
	return s;
}

std::string stats_to_json(const CompositionStats& s) {
	ordered_json j;
	j["total"] = s.total;
	j["by_type"] = s.by_type;
	j["by_subtype"] = s.by_subtype;
	j["by_label"] = s.by_label;
	j["by_split"] = s.by_split;
	return j.dump(2);
}

} // namespace illusion::manifest
