#pragma once

#include "illusion/color.hpp"
#include "illusion/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace illusion::conditioning {

inline constexpr int kGridSize = 10;

/// 10x10 average-color map, row-major.
struct ConditioningGrid {
	std::array<Rgb, kGridSize * kGridSize> cells{};
	int source_width{0};
	int source_height{0};

	[[nodiscard]] const Rgb& at(int gx, int gy) const { return cells[static_cast<std::size_t>(gy * kGridSize + gx)]; }

	friend bool operator==(const ConditioningGrid&, const ConditioningGrid&) = default;
};

/// Cell (gx, gy) covers [floor(gx*W/10), floor((gx+1)*W/10)) x [floor(gy*H/10), floor((gy+1)*H/10)).
/// Each channel is the integer mean rounded half up. Throws ValidationError below 10x10.
ConditioningGrid quantize_grid(const Image& image);

struct StimulusRef {
	std::string id;
	std::filesystem::path png;
};

struct ConditioningPair {
	ConditioningGrid grid;
	std::string caption;
	std::string source_ref;
	std::string source_png;
};

/// Index of the caption paired with `id`; depends only on (seed, id, pool size).
std::size_t caption_index(std::uint64_t seed, const std::string& id, std::size_t pool_size);

/// Reads each stimulus PNG and pairs it with a seeded caption. Throws ValidationError on an empty pool.
std::vector<ConditioningPair> export_pairs(const std::vector<StimulusRef>& stimuli,
                                           const std::vector<std::string>& captions, std::uint64_t seed);

/// JSONL: {id, caption, grid: [[r,g,b] x 100], source_png} per line.
void write_pairs(const std::filesystem::path& path, const std::vector<ConditioningPair>& pairs);
std::vector<ConditioningPair> read_pairs(const std::filesystem::path& path);

/// Captions from a COCO-style annotation file (.json, annotations[].caption) or one caption per line.
std::vector<std::string> load_captions(const std::filesystem::path& path);

} // namespace illusion::conditioning
