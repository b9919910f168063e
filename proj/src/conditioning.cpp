#include "illusion/conditioning.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/rng.hpp"

#include <json.hpp>

namespace illusion::conditioning {

namespace {

using nlohmann::ordered_json;

std::uint8_t roundedMean(std::uint64_t sum, std::uint64_t n) {
	return static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
}

ordered_json pairToJson(const ConditioningPair& pair) {
	ordered_json grid = ordered_json::array();
	for (const Rgb& c : pair.grid.cells) {
		grid.push_back({c.r, c.g, c.b});
	}
	ordered_json j;
	j["id"] = pair.source_ref;
	j["caption"] = pair.caption;
	j["grid"] = std::move(grid);
	j["source_png"] = pair.source_png;
	return j;
}

} // namespace

ConditioningGrid quantize_grid(const Image& image) {
	const int w = image.width();
	const int h = image.height();
	if (w < kGridSize || h < kGridSize) {
		throw ValidationError("quantize_grid needs at least 10x10 pixels, got " + std::to_string(w) + "x" +
		                      std::to_string(h));
	}
	std::vector<int> column(static_cast<std::size_t>(w));
	for (int gx = 0; gx < kGridSize; ++gx) {
		const long long lo = static_cast<long long>(gx) * w / kGridSize;
		const long long hi = static_cast<long long>(gx + 1) * w / kGridSize;
		for (long long x = lo; x < hi; ++x) {
			column[static_cast<std::size_t>(x)] = gx;
		}
	}
	std::array<std::array<std::uint64_t, 3>, kGridSize * kGridSize> sums{};
	std::array<std::uint64_t, kGridSize * kGridSize> counts{};
	for (int gy = 0; gy < kGridSize; ++gy) {
		const long long lo = static_cast<long long>(gy) * h / kGridSize;
		const long long hi = static_cast<long long>(gy + 1) * h / kGridSize;
		for (long long y = lo; y < hi; ++y) {
			for (int x = 0; x < w; ++x) {
				const std::size_t cell = static_cast<std::size_t>(gy * kGridSize + column[static_cast<std::size_t>(x)]);
				const Rgb& p = image.at(x, static_cast<int>(y));
				sums[cell][0] += p.r;
				sums[cell][1] += p.g;
				sums[cell][2] += p.b;
				++counts[cell];
			}
		}
	}
	ConditioningGrid grid;
	grid.source_width = w;
	grid.source_height = h;
	for (std::size_t i = 0; i < grid.cells.size(); ++i) {
		grid.cells[i] = Rgb{roundedMean(sums[i][0], counts[i]), roundedMean(sums[i][1], counts[i]),
		                    roundedMean(sums[i][2], counts[i])};
	}
	return grid;
}

std::size_t caption_index(std::uint64_t seed, const std::string& id, std::size_t pool_size) {
	if (pool_size == 0) {
		throw ValidationError("caption pool is empty");
	}
	Rng rng(mix_seed(seed, stable_hash(id)));
	return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool_size) - 1));
}

std::vector<ConditioningPair> export_pairs(const std::vector<StimulusRef>& stimuli,
                                           const std::vector<std::string>& captions, std::uint64_t seed) {
	if (captions.empty()) {
		throw ValidationError("caption pool is empty");
	}
	std::vector<ConditioningPair> pairs;
	pairs.reserve(stimuli.size());
	for (const auto& s : stimuli) {
		ConditioningPair pair;
		pair.grid = quantize_grid(read_png(s.png));
		pair.caption = captions[caption_index(seed, s.id, captions.size())];
		pair.source_ref = s.id;
		pair.source_png = s.png.generic_string();
		pairs.push_back(std::move(pair));
	}
	return pairs;
}

void write_pairs(const std::filesystem::path& path, const std::vector<ConditioningPair>& pairs) {
	std::string out;
	for (const auto& pair : pairs) {
		out += pairToJson(pair).dump();
		out += '\n';
	}
	jsonl::write_atomic(path, out);
}

std::vector<ConditioningPair> read_pairs(const std::filesystem::path& path) {
	std::vector<ConditioningPair> pairs;
	jsonl::for_each_line(path, [&](std::string_view line, std::size_t number) {
		try {
			const auto j = nlohmann::json::parse(line);
			ConditioningPair pair;
			pair.source_ref = j.at("id").get<std::string>();
			pair.caption = j.at("caption").get<std::string>();
			pair.source_png = j.at("source_png").get<std::string>();
			const auto& grid = j.at("grid");
			if (grid.size() != pair.grid.cells.size()) {
				throw ValidationError("grid must have 100 cells");
			}
			for (std::size_t i = 0; i < grid.size(); ++i) {
				pair.grid.cells[i] = Rgb{grid[i].at(0).get<std::uint8_t>(), grid[i].at(1).get<std::uint8_t>(),
				                         grid[i].at(2).get<std::uint8_t>()};
			}
			pairs.push_back(std::move(pair));
		} catch (const nlohmann::json::exception& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		} catch (const ValidationError& e) {
			throw ValidationError(jsonl::where(path, number, e.what()));
		}
	});
	return pairs;
}

std::vector<std::string> load_captions(const std::filesystem::path& path) {
	std::vector<std::string> captions;
	if (path.extension() == ".json") {
		try {
			const auto j = nlohmann::json::parse(jsonl::read_file(path));
			for (const auto& ann : j.at("annotations")) {
				captions.push_back(ann.at("caption").get<std::string>());
			}
		} catch (const nlohmann::json::exception& e) {
			throw ValidationError(path.string() + ": not a caption annotation file: " + e.what());
		}
	} else {
		jsonl::for_each_line(path, [&](std::string_view line, std::size_t) {
			const auto first = line.find_first_not_of(" \t");
			const auto last = line.find_last_not_of(" \t");
			captions.emplace_back(line.substr(first, last - first + 1));
		});
	}
	if (captions.empty()) {
		throw ValidationError(path.string() + ": caption pool is empty");
	}
	return captions;
}

} // namespace illusion::conditioning
