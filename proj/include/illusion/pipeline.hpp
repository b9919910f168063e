#pragma once

#include "illusion/filter.hpp"
#include "illusion/manifest.hpp"
#include "illusion/procgen.hpp"
#include "illusion/questions.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace illusion::pipeline {

/// Runs body(i) for i in [0, count) on `jobs` threads (jobs <= 0 means hardware concurrency).
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

int default_jobs();

/// Stimulus id such as "contrast-000042".
std::string stimulus_id(manifest::IllusionType type, std::size_t index);

nlohmann::ordered_json spec_to_json(const procgen::ContrastSpec& spec);
nlohmann::ordered_json spec_to_json(const procgen::StripeSpec& spec);
procgen::ContrastSpec contrast_spec_from_json(const nlohmann::json& j);
procgen::StripeSpec stripe_spec_from_json(const nlohmann::json& j);

/// What downstream stages need from a sidecar.
struct SidecarInfo {
	std::string id;
	manifest::IllusionType type{manifest::IllusionType::Contrast};
	std::string subtype;
	std::string predicted_kind; ///< illusion or control
	std::string direction;      ///< comparison: pixel relation key
	std::string predicted_human;
	std::string region_a; ///< region descriptor, or the object for filter images
	std::string region_b;
	std::string original_color; ///< filter only
	std::string pixel_color;    ///< filter only
	std::string image;          ///< asset paths relative to the dataset root
	std::string labeled_image;
};

SidecarInfo read_sidecar(const std::filesystem::path& path);

/// Builds the comparison or recognition question for a sidecar.
questions::QuestionRecord question_for(const SidecarInfo& info, questions::PromptMode mode, std::uint64_t seed);

struct SimpleGenerateOptions {
	manifest::IllusionType type{manifest::IllusionType::Contrast};
	std::size_t count{0};
	std::uint64_t seed{0};
	std::filesystem::path out;
	int jobs{1};
	procgen::ContrastConfig contrast;
	procgen::StripeConfig stripe;
	procgen::LabelModel model;
	double target_illusion_fraction{0.5};
	/// Write the model's predicted kind as the manifest label instead of "pending".
	bool predicted_labels{false};
};

struct GenerateSummary {
	std::size_t written{0};
	std::size_t illusions{0};
	std::size_t controls{0};
	std::vector<std::string> skipped; ///< source files rejected, with reasons
};

/// Writes DIR/images/<id>.png, DIR/images/<id>_labeled.png, DIR/sidecars/<id>.json and merges rows
/// into DIR/manifest.jsonl. Output bytes depend only on the options, never on `jobs`.
GenerateSummary generate_simple(const SimpleGenerateOptions& options);

struct FilterGenerateOptions {
	std::filesystem::path source_dir;
	filter::ColorBucket target{filter::ColorBucket::Red};
	std::size_t count{0}; ///< 0 means every eligible source
	std::uint64_t seed{0};
	std::filesystem::path out;
	int jobs{1};
	double dominance_threshold{filter::kDominanceThreshold};
	bool emit_controls{false}; ///< also write the unfiltered source as a control item
	bool predicted_labels{false};
};

/// Sources are the PNGs in source_dir in name order; optional <stem>.json next to each gives
/// {"object": "...", "scene_class": "single-object|multi-object|complex-scene"}.
GenerateSummary generate_filter(const FilterGenerateOptions& options);

/// Replaces rows with the same id and appends the rest, keeping the file sorted by id.
void merge_into_manifest(const std::filesystem::path& path, const std::vector<manifest::DatasetRecord>& records);

} // namespace illusion::pipeline
