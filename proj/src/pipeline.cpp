#include "illusion/pipeline.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace illusion::pipeline {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using manifest::DatasetRecord;
using manifest::IllusionType;
using manifest::RecordLabel;

ordered_json rgbJson(Rgb c) {
	return ordered_json::array({c.r, c.g, c.b});
}

Rgb rgbFrom(const json& j) {
	return Rgb{j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

ordered_json maskJson(const Mask& m) {
	return ordered_json{{"encoding", "rle-row-major-off-first"}, {"runs", m.run_lengths()}};
}

void writeText(const std::filesystem::path& path, const std::string& text) {
	jsonl::write_atomic(path, text);
}

void writeBytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
	jsonl::write_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

struct Emitted {
	DatasetRecord record;
	bool illusion{false};
	bool written{false};
	std::string skipped;
};

Emitted emitSimple(const SimpleGenerateOptions& o, std::size_t index) {
	const std::uint64_t itemSeed = mix_seed(mix_seed(o.seed, stable_hash(manifest::to_string(o.type))), index);
	Rng kindRng(mix_seed(itemSeed, 7));
	const auto wanted =
	    kindRng.bernoulli(o.target_illusion_fraction) ? procgen::LabelKind::Illusion : procgen::LabelKind::Control;

	procgen::StimulusSpec spec;
	ordered_json specJson;
	ordered_json extra;
	std::string subtype;
	if (o.type == IllusionType::Contrast) {
		const auto s = procgen::sample_contrast_with_kind(itemSeed, o.contrast, o.model, wanted);
		spec = s;
		specJson = spec_to_json(s);
		subtype = std::string(procgen::to_string(s.orientation));
		extra["color_distance"] = color_distance(s.background, s.foreground);
	} else if (o.type == IllusionType::Stripe) {
		const auto s = procgen::sample_stripe_with_kind(itemSeed, o.stripe, o.model, wanted);
		spec = s;
		specJson = spec_to_json(s);
		subtype = std::string(procgen::to_string(s.direction));
		extra["stripe_count"] = s.stripe_count;
	} else {
		throw ValidationError("generate_simple handles contrast and stripe only");
	}

	const procgen::SimpleStimulus stim = procgen::render(spec, o.model);
	const std::string id = stimulus_id(o.type, index);
	const std::string image = "images/" + id + ".png";
	const std::string labeled = "images/" + id + "_labeled.png";
	const std::string sidecar = "sidecars/" + id + ".json";
	writeBytes(o.out / image, encode_png(stim.pixels));
	writeBytes(o.out / labeled, encode_png(procgen::render_labeled_variant(stim)));

	const auto [descA, descB] = procgen::region_descriptors(spec);
	const auto& label = stim.predicted_label;
	ordered_json j;
	j["id"] = id;
	j["illusion_type"] = manifest::to_string(o.type);
	j["subtype"] = subtype;
	j["index"] = index;
	j["seed"] = itemSeed;
	j["spec"] = specJson;
	j["label"] = {{"kind", procgen::to_string(label.kind)},
	              {"direction", procgen::to_string(label.direction)},
	              {"predicted_human", procgen::to_string(label.predicted_human)},
	              {"shift", label.shift}};
	j["regions"] = {{"a", {{"descriptor", descA}, {"mask", maskJson(stim.region_a)}}},
	                {"b", {{"descriptor", descB}, {"mask", maskJson(stim.region_b)}}}};
	for (auto& [k, v] : extra.items()) {
		j[k] = v;
	}
	j["image"] = image;
	j["labeled_image"] = labeled;
	writeText(o.out / sidecar, j.dump(2) + "\n");

	Emitted e;
	e.record.id = id;
	e.record.illusion_type = o.type;
	e.record.subtype = subtype;
	e.record.label = o.predicted_labels
	                     ? (label.kind == procgen::LabelKind::Illusion ? RecordLabel::Illusion : RecordLabel::Control)
	                     : RecordLabel::Pending;
	e.record.asset = image;
	e.record.sidecar = sidecar;
	e.record.seed = itemSeed;
	e.illusion = label.kind == procgen::LabelKind::Illusion;
	e.written = true;
	return e;
}

struct FilterSource {
	std::filesystem::path png;
	std::string object{"the main object"};
	filter::SceneClass scene{filter::SceneClass::ComplexScene};
};

FilterSource describeSource(const std::filesystem::path& png) {
	FilterSource src;
	src.png = png;
	auto meta = png;
	meta.replace_extension(".json");
	if (std::filesystem::exists(meta)) {
		try {
			const auto j = json::parse(jsonl::read_file(meta));
			src.object = j.value("object", src.object);
			if (j.contains("scene_class")) {
				src.scene = filter::parse_scene_class(j["scene_class"].get<std::string>());
			}
		} catch (const json::exception& e) {
			throw ValidationError(meta.string() + ": " + e.what());
		}
	}
	return src;
}

} // namespace

int default_jobs() {
	const unsigned n = std::thread::hardware_concurrency();
	return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
	const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(jobs <= 0 ? default_jobs() : jobs));
	if (workers <= 1) {
		for (std::size_t i = 0; i < count; ++i) {
			body(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::atomic<bool> failed{false};
	std::exception_ptr error;
	std::mutex errorMutex;
	std::vector<std::thread> threads;
	threads.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		threads.emplace_back([&] {
			while (!failed) {
				const std::size_t i = next++;
				if (i >= count) {
					return;
				}
				try {
					body(i);
				} catch (...) {
					const std::lock_guard lock(errorMutex);
					if (!error) {
						error = std::current_exception();
					}
					failed = true;
				}
			}
		});
	}
	for (auto& t : threads) {
		t.join();
	}
	if (error) {
		std::rethrow_exception(error);
	}
}

std::string stimulus_id(IllusionType type, std::size_t index) {
	char digits[24];
	std::snprintf(digits, sizeof digits, "%06zu", index);
	return std::string(manifest::to_string(type)) + "-" + digits;
}

nlohmann::ordered_json spec_to_json(const procgen::ContrastSpec& s) {
	ordered_json j;
	j["background"] = rgbJson(s.background);
	j["foreground"] = rgbJson(s.foreground);
	j["mu_b1"] = s.mu_b1;
	j["mu_b2"] = s.mu_b2;
	j["mu_f1"] = s.mu_f1;
	j["mu_f2"] = s.mu_f2;
	j["x1"] = s.x1;
	j["y1"] = s.y1;
	j["x2"] = s.x2;
	j["y2"] = s.y2;
	j["square_size"] = s.square_size;
	j["orientation"] = procgen::to_string(s.orientation);
	j["dark_half_first"] = s.dark_half_first;
	j["edge_jitter"] = s.noise.edge_jitter;
	j["softness"] = s.noise.softness;
	j["seed"] = s.seed;
	j["width"] = s.width;
	j["height"] = s.height;
	return j;
}

nlohmann::ordered_json spec_to_json(const procgen::StripeSpec& s) {
	ordered_json j;
	j["background"] = rgbJson(s.background);
	j["stripe"] = rgbJson(s.stripe);
	j["mu_s1"] = s.mu_s1;
	j["mu_s2"] = s.mu_s2;
	j["direction"] = procgen::to_string(s.direction);
	j["stripe_count"] = s.stripe_count;
	j["stripe_width"] = s.stripe_width;
	j["curvature"] = s.noise.curvature;
	j["misalignment"] = s.noise.misalignment;
	j["seed"] = s.seed;
	j["width"] = s.width;
	j["height"] = s.height;
	return j;
}

procgen::ContrastSpec contrast_spec_from_json(const json& j) {
	procgen::ContrastSpec s;
	s.background = rgbFrom(j.at("background"));
	s.foreground = rgbFrom(j.at("foreground"));
	s.mu_b1 = j.at("mu_b1").get<double>();
	s.mu_b2 = j.at("mu_b2").get<double>();
	s.mu_f1 = j.at("mu_f1").get<double>();
	s.mu_f2 = j.at("mu_f2").get<double>();
	s.x1 = j.at("x1").get<int>();
	s.y1 = j.at("y1").get<int>();
	s.x2 = j.at("x2").get<int>();
	s.y2 = j.at("y2").get<int>();
	s.square_size = j.at("square_size").get<int>();
	s.orientation = procgen::parse_orientation(j.at("orientation").get<std::string>());
	s.dark_half_first = j.at("dark_half_first").get<bool>();
	s.noise.edge_jitter = j.at("edge_jitter").get<double>();
	s.noise.softness = j.at("softness").get<double>();
	s.seed = j.at("seed").get<std::uint64_t>();
	s.width = j.at("width").get<int>();
	s.height = j.at("height").get<int>();
	return s;
}

procgen::StripeSpec stripe_spec_from_json(const json& j) {
	procgen::StripeSpec s;
	s.background = rgbFrom(j.at("background"));
	s.stripe = rgbFrom(j.at("stripe"));
	s.mu_s1 = j.at("mu_s1").get<double>();
	s.mu_s2 = j.at("mu_s2").get<double>();
	s.direction = procgen::parse_stripe_direction(j.at("direction").get<std::string>());
	s.stripe_count = j.at("stripe_count").get<int>();
	s.stripe_width = j.at("stripe_width").get<int>();
	s.noise.curvature = j.at("curvature").get<double>();
	s.noise.misalignment = j.at("misalignment").get<int>();
	s.seed = j.at("seed").get<std::uint64_t>();
	s.width = j.at("width").get<int>();
	s.height = j.at("height").get<int>();
	return s;
}

SidecarInfo read_sidecar(const std::filesystem::path& path) {
	SidecarInfo info;
	try {
		const auto j = json::parse(jsonl::read_file(path));
		info.id = j.at("id").get<std::string>();
		info.type = manifest::parse_illusion_type(j.at("illusion_type").get<std::string>());
		info.subtype = j.at("subtype").get<std::string>();
		info.image = j.at("image").get<std::string>();
		info.labeled_image = j.at("labeled_image").get<std::string>();
		info.predicted_kind = j.at("label").at("kind").get<std::string>();
		if (info.type == IllusionType::Filter) {
			info.region_a = j.at("object").get<std::string>();
			info.original_color = j.at("original_color").get<std::string>();
			info.pixel_color = j.at("pixel_color").get<std::string>();
		} else {
			info.direction = j.at("label").at("direction").get<std::string>();
			info.predicted_human = j.at("label").at("predicted_human").get<std::string>();
			info.region_a = j.at("regions").at("a").at("descriptor").get<std::string>();
			info.region_b = j.at("regions").at("b").at("descriptor").get<std::string>();
		}
	} catch (const json::exception& e) {
		throw ValidationError(path.string() + ": " + e.what());
	}
	return info;
}

questions::QuestionRecord question_for(const SidecarInfo& info, questions::PromptMode mode, std::uint64_t seed) {
	if (info.type == IllusionType::Filter) {
		return questions::make_recognition_question({info.id, info.region_a, info.original_color, info.pixel_color},
		                                            mode, seed);
	}
	return questions::make_comparison_question(
	    {info.id, info.region_a, info.region_b, info.direction, info.predicted_human}, mode, seed);
}

void merge_into_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
	std::map<std::string, DatasetRecord> merged;
	if (std::filesystem::exists(path)) {
		for (auto& r : manifest::read_manifest(path)) {
			merged[r.id] = std::move(r);
		}
	}
	for (const auto& r : records) {
		merged[r.id] = r;
	}
	std::vector<DatasetRecord> out;
	out.reserve(merged.size());
	for (auto& [id, r] : merged) {
		out.push_back(std::move(r));
	}
	manifest::write_manifest(path, out);
}

GenerateSummary generate_simple(const SimpleGenerateOptions& options) {
	if (!(options.target_illusion_fraction >= 0.0 && options.target_illusion_fraction <= 1.0)) {
		throw ValidationError("target_illusion_fraction must lie in [0, 1]");
	}
	if (options.type == IllusionType::Contrast) {
		options.contrast.validate();
	} else {
		options.stripe.validate();
	}
	std::filesystem::create_directories(options.out / "images");
	std::filesystem::create_directories(options.out / "sidecars");

	std::vector<Emitted> emitted(options.count);
	parallel_for(options.count, options.jobs, [&](std::size_t i) { emitted[i] = emitSimple(options, i); });

	GenerateSummary summary;
	std::vector<DatasetRecord> rows;
	for (auto& e : emitted) {
		++summary.written;
		(e.illusion ? summary.illusions : summary.controls) += 1;
		rows.push_back(std::move(e.record));
	}
	merge_into_manifest(options.out / "manifest.jsonl", rows);
	return summary;
}

GenerateSummary generate_filter(const FilterGenerateOptions& options) {
	if (!std::filesystem::is_directory(options.source_dir)) {
		throw IoError("source directory not found: " + options.source_dir.string());
	}
	std::vector<std::filesystem::path> pngs;
	for (const auto& entry : std::filesystem::directory_iterator(options.source_dir)) {
		if (entry.is_regular_file() && entry.path().extension() == ".png") {
			pngs.push_back(entry.path());
		}
	}
	std::sort(pngs.begin(), pngs.end());

	// Dominance screening reads every source; keep those dominated by the target color.
	std::vector<std::optional<filter::ColorBucket>> dominant(pngs.size());
	parallel_for(pngs.size(), options.jobs, [&](std::size_t i) {
		dominant[i] = filter::dominant_color(read_png(pngs[i]), options.dominance_threshold).dominant;
	});
	GenerateSummary summary;
	std::vector<std::size_t> eligible;
	for (std::size_t i = 0; i < pngs.size(); ++i) {
		if (dominant[i] == options.target) {
			eligible.push_back(i);
		} else {
			summary.skipped.push_back(pngs[i].filename().string() + ": not dominated by " +
			                          std::string(filter::to_string(options.target)));
		}
	}
	if (options.count > 0 && eligible.size() > options.count) {
		eligible.resize(options.count);
	}

	std::filesystem::create_directories(options.out / "images");
	std::filesystem::create_directories(options.out / "sidecars");
	const std::size_t perSource = options.emit_controls ? 2 : 1;
	std::vector<Emitted> emitted(eligible.size() * perSource);
	parallel_for(eligible.size(), options.jobs, [&](std::size_t k) {
		const FilterSource src = describeSource(pngs[eligible[k]]);
		const Image source = read_png(src.png);
		const std::string name = src.png.filename().string();
		const filter::FilterSpec spec =
		    filter::sample_filter_spec(mix_seed(options.seed, stable_hash(name)), options.target);
		filter::FilterIllusion fi = filter::make_filter_illusion(source, spec);
		if (fi.violations != 0) {
			throw ValidationError(name + ": suppression left target pixels behind");
		}
		if (fi.pixel_answer == fi.human_answer) {
			emitted[k * perSource].skipped = name + ": filtered object still reads as " + fi.human_answer;
			return;
		}
		const auto report = filter::dominant_color(source, options.dominance_threshold);
		ordered_json fractions;
		for (const auto b : filter::kAllBuckets) {
			fractions[std::string(filter::to_string(b))] = report.fraction(b);
		}

		auto emit = [&](const std::string& id, const Image& pixels, bool illusion, const std::string& pixelColor,
		                const std::string& humanColor, std::size_t slot) {
			const std::string image = "images/" + id + ".png";
			const std::string labeled = "images/" + id + "_labeled.png";
			const std::string sidecar = "sidecars/" + id + ".json";
			writeBytes(options.out / image, encode_png(pixels));
			writeBytes(options.out / labeled, encode_png(procgen::mark_regions(pixels, &fi.object, nullptr)));
			ordered_json j;
			j["id"] = id;
			j["illusion_type"] = "filter";
			j["subtype"] = filter::to_string(src.scene);
			j["source"] = name;
			j["seed"] = spec.seed;
			j["filter"] = illusion ? ordered_json{{"target", filter::to_string(spec.target)},
			                                      {"filter_hue_shift", spec.filter_hue_shift},
			                                      {"saturation_blend", spec.saturation_blend},
			                                      {"value_blend", spec.value_blend},
			                                      {"applied_shift", fi.applied_shift},
			                                      {"violations", fi.violations}}
			                       : ordered_json(nullptr);
			j["dominance"] = fractions;
			j["label"] = {{"kind", illusion ? "illusion" : "control"}};
			j["object"] = src.object;
			j["object_mask"] = maskJson(fi.object);
			j["original_color"] = humanColor;
			j["pixel_color"] = pixelColor;
			j["scene_class"] = filter::to_string(src.scene);
			j["image"] = image;
			j["labeled_image"] = labeled;
			writeText(options.out / sidecar, j.dump(2) + "\n");

			Emitted& e = emitted[slot];
			e.record.id = id;
			e.record.illusion_type = IllusionType::Filter;
			e.record.subtype = std::string(filter::to_string(src.scene));
			e.record.label = options.predicted_labels ? (illusion ? RecordLabel::Illusion : RecordLabel::Control)
			                                          : RecordLabel::Pending;
			e.record.asset = image;
			e.record.sidecar = sidecar;
			e.record.seed = spec.seed;
			e.illusion = illusion;
			e.written = true;
		};

		emit(stimulus_id(IllusionType::Filter, k), fi.filtered, true, fi.pixel_answer, fi.human_answer, k * perSource);
		if (options.emit_controls) {
			const MeanColor m = masked_mean(source, fi.object);
			const std::string seen = color_name(Rgb{to_channel(m.r), to_channel(m.g), to_channel(m.b)});
			emit(stimulus_id(IllusionType::Filter, k) + "-control", source, false, seen, seen, k * perSource + 1);
		}
	});

	std::vector<DatasetRecord> rows;
	for (auto& e : emitted) {
		if (!e.skipped.empty()) {
			summary.skipped.push_back(e.skipped);
		}
		if (!e.written) {
			continue;
		}
		++summary.written;
		(e.illusion ? summary.illusions : summary.controls) += 1;
		rows.push_back(std::move(e.record));
	}
	merge_into_manifest(options.out / "manifest.jsonl", rows);
	return summary;
}

} // namespace illusion::pipeline
