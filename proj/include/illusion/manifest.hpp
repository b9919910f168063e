#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace illusion::manifest {

enum class IllusionType { Contrast, Stripe, Filter };
enum class RecordLabel { Illusion, Control, Discarded, Pending };
enum class Split { Train, Dev, Test, Unassigned };

std::string_view to_string(IllusionType t);
std::string_view to_string(RecordLabel l);
std::string_view to_string(Split s);
IllusionType parse_illusion_type(std::string_view text);
RecordLabel parse_record_label(std::string_view text);
Split parse_split(std::string_view text);

struct DatasetRecord {
	std::string id;
	IllusionType illusion_type{IllusionType::Contrast};
	std::string subtype; ///< orientation, stripe direction, or scene class
	RecordLabel label{RecordLabel::Pending};
	std::string asset;
	std::string sidecar;
	Split split{Split::Unassigned};
	std::uint64_t seed{0};

	friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// One JSON object with keys in the order id, illusion_type, subtype, label, asset, sidecar, split, seed.
std::string to_json_line(const DatasetRecord& record);
/// Throws ValidationError on missing fields, unknown enum values, or a split on an unfinalized label.
DatasetRecord record_from_json_line(std::string_view line);

/// Errors name the offending "path:line". Duplicate ids are rejected.
std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path);
/// Atomic replace.
void write_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
/// Locked single-write append; safe for concurrent writers.
void append_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

struct SplitRatios {
	double train{0.5};
	double dev{0.25};
	double test{0.25};

	/// Non-negative and summing to 1 within 1e-9.
	void validate() const;
	[[nodiscard]] std::array<double, 3> values() const { return {train, dev, test}; }
};

/// Parses "0.5,0.25,0.25".
SplitRatios parse_ratios(std::string_view text);

/// Largest-remainder apportionment of `total` items; ties go to the earlier split.
std::array<std::size_t, 3> split_targets(std::size_t total, const SplitRatios& ratios);

/// Stratified by illusion type, then by label within each type. Split totals follow split_targets exactly;
/// each stratum is within one record of its proportional share. Within a stratum, records are ordered by a
/// (seed, id) hash, so the result does not depend on input order. Discarded records stay unassigned.
/// Throws ValidationError when any record is still pending.
std::vector<DatasetRecord> assign_splits(std::vector<DatasetRecord> records, const SplitRatios& ratios,
                                         std::uint64_t seed);

struct CompositionStats {
	std::size_t total{0};
	std::map<std::string, std::size_t> by_type;
	std::map<std::string, std::size_t> by_subtype; ///< "type/subtype"
	std::map<std::string, std::size_t> by_label;
	std::map<std::string, std::size_t> by_split;
};

CompositionStats stats(const std::vector<DatasetRecord>& records);
std::string stats_to_json(const CompositionStats& s);

} // namespace illusion::manifest
