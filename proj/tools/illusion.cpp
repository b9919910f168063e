// illusion: command-line entry point for generating, validating, splitting and scoring the dataset.

#include "illusion/annotation.hpp"
#include "illusion/conditioning.hpp"
#include "illusion/config.hpp"
#include "illusion/errors.hpp"
#include "illusion/eval.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/manifest.hpp"
#include "illusion/pipeline.hpp"
#include "illusion/questions.hpp"
#include "illusion/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace illusion {
namespace {

/// Options every subcommand accepts. Flags override the config file.
struct Common {
	std::string config_path;
	std::vector<std::string> overrides;
	std::optional<std::uint64_t> seed;
	std::optional<int> jobs;

	config::Config load() const {
		config::Config c = config_path.empty() ? config::Config{} : config::Config::load(config_path);
		for (const auto& kv : overrides) {
			const auto eq = kv.find('=');
			if (eq == std::string::npos) {
				throw ConfigError("--set expects key=value, got " + kv);
			}
			c.set(kv.substr(0, eq), kv.substr(eq + 1));
		}
		c.check_known();
		return c;
	}

	std::uint64_t seedFrom(const config::Config& c) const {
		if (seed) {
			return *seed;
		}
		const auto s = c.integer("seed").value_or(0);
		if (s < 0) {
			throw ConfigError("seed must be non-negative");
		}
		return static_cast<std::uint64_t>(s);
	}

	int jobsFrom(const config::Config& c) const {
		const long long j = jobs ? *jobs : c.integer("jobs").value_or(0);
		if (j < 0) {
			throw ConfigError("jobs must be non-negative");
		}
		return j == 0 ? pipeline::default_jobs() : static_cast<int>(j);
	}
};

void addCommon(CLI::App* app, Common& common) {
	app->add_option("--config", common.config_path, "key = value settings file")->check(CLI::ExistingFile);
	app->add_option("--set", common.overrides, "override one setting, key=value (repeatable)");
	app->add_option("--seed", common.seed, "master seed");
	app->add_option("--jobs", common.jobs, "worker threads (0 = all cores)");
}

void printSummary(const pipeline::GenerateSummary& s) {
	for (const auto& reason : s.skipped) {
		std::cerr << "skipped " << reason << "\n";
	}
	std::cout << ordered_json{{"written", s.written},
	                          {"illusions", s.illusions},
	                          {"controls", s.controls},
	                          {"skipped", s.skipped.size()}}
	                 .dump()
	          << "\n";
}

std::vector<questions::PromptMode> parseModes(const std::string& text) {
	std::vector<questions::PromptMode> modes;
	std::size_t start = 0;
	while (start <= text.size()) {
		auto end = text.find(',', start);
		if (end == std::string::npos) {
			end = text.size();
		}
		modes.push_back(questions::parse_prompt_mode(text.substr(start, end - start)));
		start = end + 1;
	}
	return modes;
}

std::string aggregationLine(const validation::AggregationResult& r, bool strict) {
	return ordered_json{{"image_id", r.image_id},
	                    {"n_votes", r.n_votes},
	                    {"n_deceived", r.n_deceived},
	                    {"n_pixel_consistent", r.n_pixel_consistent},
	                    {"final_label", validation::to_string(r.final_label)},
	                    {"majority_human_answer", r.majority_human_answer},
	                    {"strict", strict}}
	    .dump();
}

std::string writeOrPrint(const std::string& out, const std::string& content) {
	if (out.empty() || out == "-") {
		std::cout << content;
	} else {
		jsonl::write_atomic(out, content);
	}
	return content;
}

annotation::HttpServer* gServer = nullptr;

void onSignal(int) {
	if (gServer) {
		gServer->stop();
	}
}

int run(int argc, char** argv) {
	CLI::App app{"Color illusion dataset toolkit"};
	app.require_subcommand(1);
	Common common;

	// gen-contrast / gen-stripe
	pipeline::SimpleGenerateOptions simple;
	std::optional<double> illusionFraction;
	bool predictedLabels = false;
	std::string outDir;
	auto addSimple = [&](const char* name, manifest::IllusionType type, const char* help) {
		auto* cmd = app.add_subcommand(name, help);
		addCommon(cmd, common);
		cmd->add_option("--count", simple.count, "number of stimuli")->required();
		cmd->add_option("--out", outDir, "dataset directory")->required();
		cmd->add_option("--illusion-fraction", illusionFraction, "share of items sampled as predicted illusions");
		cmd->add_flag("--predicted-labels", predictedLabels, "write predicted labels instead of pending");
		cmd->callback([&, type] {
			const auto c = common.load();
			simple.type = type;
			simple.seed = common.seedFrom(c);
			simple.jobs = common.jobsFrom(c);
			simple.out = outDir;
			simple.model = config::label_model(c);
			if (type == manifest::IllusionType::Contrast) {
				simple.contrast = config::contrast_config(c);
			} else {
				simple.stripe = config::stripe_config(c);
			}
			simple.target_illusion_fraction =
			    illusionFraction ? *illusionFraction : c.number("generate.illusion_fraction").value_or(0.5);
			simple.predicted_labels = predictedLabels || c.flag("generate.predicted_labels").value_or(false);
			printSummary(pipeline::generate_simple(simple));
		});
	};
	addSimple("gen-contrast", manifest::IllusionType::Contrast, "generate contrast stimuli");
	addSimple("gen-stripe", manifest::IllusionType::Stripe, "generate stripe stimuli");

	// gen-filter
	pipeline::FilterGenerateOptions filt;
	std::string targetColor;
	std::string sourceDir;
	bool emitControls = false;
	{
		auto* cmd = app.add_subcommand("gen-filter", "apply color suppression filters to natural images");
		addCommon(cmd, common);
		cmd->add_option("--source-dir", sourceDir, "directory of PNG crops")->required();
		cmd->add_option("--target-color", targetColor, "red, yellow, green or blue")->required();
		cmd->add_option("--count", filt.count, "maximum number of sources (0 = all)");
		cmd->add_option("--out", outDir, "dataset directory")->required();
		cmd->add_flag("--emit-controls", emitControls, "also emit the unfiltered crop as a control");
		cmd->add_flag("--predicted-labels", predictedLabels, "write predicted labels instead of pending");
		cmd->callback([&] {
			const auto c = common.load();
			filt.source_dir = sourceDir;
			try {
				filt.target = filter::parse_bucket(targetColor);
			} catch (const ValidationError& e) {
				throw ConfigError(std::string("--target-color: ") + e.what());
			}
			filt.seed = common.seedFrom(c);
			filt.jobs = common.jobsFrom(c);
			filt.out = outDir;
			filt.dominance_threshold = c.number("filter.dominance_threshold").value_or(filter::kDominanceThreshold);
			filt.emit_controls = emitControls || c.flag("filter.emit_controls").value_or(false);
			filt.predicted_labels = predictedLabels || c.flag("generate.predicted_labels").value_or(false);
			printSummary(pipeline::generate_filter(filt));
		});
	}

	// conditioning export
	std::string manifestPath;
	std::string outPath;
	std::string captionsPath;
	{
		auto* group = app.add_subcommand("conditioning", "grid conditioning data");
		group->require_subcommand(1);
		auto* cmd = group->add_subcommand("export", "pair 10x10 color grids with captions");
		addCommon(cmd, common);
		cmd->add_option("--manifest", manifestPath, "dataset manifest")->required();
		cmd->add_option("--captions", captionsPath, "COCO annotations JSON or one caption per line")->required();
		cmd->add_option("--out", outPath, "output JSONL")->required();
		cmd->callback([&] {
			const auto c = common.load();
			const fs::path root = fs::path(manifestPath).parent_path();
			std::vector<conditioning::StimulusRef> refs;
			for (const auto& r : manifest::read_manifest(manifestPath)) {
				refs.push_back({r.id, root / r.asset});
			}
			const auto pairs = conditioning::export_pairs(refs, conditioning::load_captions(captionsPath),
			                                              common.seedFrom(c));
			conditioning::write_pairs(outPath, pairs);
			std::cout << ordered_json{{"pairs", pairs.size()}}.dump() << "\n";
		});
	}

	// questions make / training-pairs
	std::string modesText;
	std::string aggregationPath;
	std::string questionsPath;
	std::string noneAnswer;
	{
		auto* group = app.add_subcommand("questions", "question records and tuning data");
		group->require_subcommand(1);
		auto* make = group->add_subcommand("make", "build question records for every usable image");
		addCommon(make, common);
		make->add_option("--manifest", manifestPath, "dataset manifest")->required();
		make->add_option("--out", outPath, "output JSONL (default: questions.jsonl next to the manifest)");
		make->add_option("--modes", modesText, "comma-separated prompt modes (default pixel,human,none)");
		make->add_option("--aggregation", aggregationPath, "aggregation JSONL supplying validated human answers");
		make->callback([&] {
			const auto c = common.load();
			const std::uint64_t seed = common.seedFrom(c);
			const auto modes =
			    parseModes(!modesText.empty() ? modesText : c.text("questions.modes").value_or("pixel,human,none"));
			std::map<std::string, std::string> validated;
			if (!aggregationPath.empty()) {
				jsonl::for_each_line(aggregationPath, [&](std::string_view line, std::size_t n) {
					try {
						const auto j = nlohmann::json::parse(line);
						if (j.at("final_label").get<std::string>() != "discarded") {
							validated[j.at("image_id").get<std::string>()] =
							    j.at("majority_human_answer").get<std::string>();
						}
					} catch (const nlohmann::json::exception& e) {
						throw ValidationError(jsonl::where(aggregationPath, n, e.what()));
					}
				});
			}
			const fs::path root = fs::path(manifestPath).parent_path();
			std::vector<questions::QuestionRecord> out;
			for (const auto& r : manifest::read_manifest(manifestPath)) {
				if (r.label == manifest::RecordLabel::Discarded) {
					continue;
				}
				const auto info = pipeline::read_sidecar(root / r.sidecar);
				for (const auto mode : modes) {
					auto q = pipeline::question_for(info, mode, seed);
					if (const auto it = validated.find(r.id); it != validated.end()) {
						q.human_answer = it->second;
					}
					out.push_back(std::move(q));
				}
			}
			questions::write_questions(outPath.empty() ? root / "questions.jsonl" : fs::path(outPath), out);
			std::cout << ordered_json{{"questions", out.size()}}.dump() << "\n";
		});

		auto* pairs = group->add_subcommand("training-pairs", "emit image/prompt/answer tuning rows");
		addCommon(pairs, common);
		pairs->add_option("--questions", questionsPath, "question JSONL")->required();
		pairs->add_option("--out", outPath, "output JSONL")->required();
		pairs->add_option("--none-answer", noneAnswer, "answer for prefixless rows: pixel or human");
		pairs->callback([&] {
			const auto c = common.load();
			const std::string na = !noneAnswer.empty() ? noneAnswer : c.text("questions.none_answer").value_or("pixel");
			if (na != "pixel" && na != "human") {
				throw ConfigError("none answer must be pixel or human, got " + na);
			}
			// One record per image is enough; the pairing emits all three modes itself.
			std::vector<questions::QuestionRecord> unique;
			std::set<std::string> seen;
			for (auto& q : questions::read_questions(questionsPath)) {
				if (seen.insert(q.image_id).second) {
					unique.push_back(std::move(q));
				}
			}
			const auto result = questions::emit_training_pairs(
			    unique, na == "human" ? questions::NoneModeAnswer::Human : questions::NoneModeAnswer::Pixel);
			questions::write_training_rows(outPath, result.rows);
			for (const auto& id : result.excluded) {
				std::cerr << "excluded " << id << ": no validated human answer\n";
			}
			std::cout << ordered_json{{"rows", result.rows.size()}, {"excluded", result.excluded.size()}}.dump()
			          << "\n";
		});
	}

	// validate aggregate / kappa
	std::string votesPath;
	bool allowIncomplete = false;
	std::optional<int> minAgreement;
	{
		auto* group = app.add_subcommand("validate", "human validation");
		group->require_subcommand(1);
		auto* agg = group->add_subcommand("aggregate", "finalize labels from five votes per image");
		addCommon(agg, common);
		agg->add_option("--votes", votesPath, "vote JSONL")->required();
		agg->add_option("--manifest", manifestPath, "manifest whose labels are finalized in place");
		agg->add_option("--out", outPath, "aggregation JSONL (default: aggregation.jsonl next to the votes)");
		agg->add_flag("--allow-incomplete", allowIncomplete, "skip images that do not have every vote yet");
		agg->callback([&] {
			const auto c = common.load();
			const auto rules = config::aggregation_rules(c);
			auto votes = validation::read_votes(votesPath);
			if (allowIncomplete) {
				std::map<std::string, int> counts;
				for (const auto& v : votes) {
					++counts[v.image_id];
				}
				std::erase_if(votes, [&](const auto& v) { return counts[v.image_id] < rules.votes_per_image; });
			}
			const auto results = validation::aggregate_all(votes, rules);
			const auto strict = validation::strict_subset(results, rules.votes_per_image);
			const std::set<std::string> strictSet(strict.begin(), strict.end());
			std::string text;
			std::map<std::string, validation::FinalLabel> finals;
			std::map<std::string, std::size_t> tally;
			for (const auto& r : results) {
				text += aggregationLine(r, strictSet.count(r.image_id) != 0) + "\n";
				finals[r.image_id] = r.final_label;
				++tally[std::string(validation::to_string(r.final_label))];
			}
			const fs::path out = outPath.empty() ? fs::path(votesPath).parent_path() / "aggregation.jsonl" : fs::path(outPath);
			jsonl::write_atomic(out, text);

			std::size_t updated = 0;
			if (!manifestPath.empty()) {
				auto records = manifest::read_manifest(manifestPath);
				for (auto& r : records) {
					const auto it = finals.find(r.id);
					if (it == finals.end()) {
						continue;
					}
					r.label = manifest::parse_record_label(validation::to_string(it->second));
					++updated;
				}
				manifest::write_manifest(manifestPath, records);
			}
			ordered_json summary{{"images", results.size()}, {"strict", strict.size()}, {"manifest_updated", updated}};
			for (const auto& [k, v] : tally) {
				summary[k] = v;
			}
			std::cout << summary.dump() << "\n";
		});

		auto* kappa = group->add_subcommand("kappa", "Fleiss' kappa before and after agreement filtering");
		addCommon(kappa, common);
		kappa->add_option("--votes", votesPath, "vote JSONL")->required();
		kappa->add_option("--min-agreement", minAgreement, "votes the modal answer needs to keep an image");
		kappa->callback([&] {
			const auto c = common.load();
			const auto rules = config::aggregation_rules(c);
			const int agree =
			    minAgreement ? *minAgreement
			                 : static_cast<int>(c.integer("validation.kappa_min_agreement").value_or(3));
			const auto votes = validation::read_votes(votesPath);
			std::vector<std::string> categories;
			const auto matrix = validation::vote_matrix(votes, &categories);
			const auto report = validation::kappa_with_filter(matrix, rules.votes_per_image, agree);
			auto k = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
			std::cout << ordered_json{{"kappa_before", k(report.before)},
			                          {"items_before", report.items_before},
			                          {"kappa_after", k(report.after)},
			                          {"items_after", report.items_after},
			                          {"min_agreement", agree},
			                          {"categories", categories}}
			                 .dump()
			          << "\n";
		});
	}

	// splits assign
	std::string ratiosText;
	{
		auto* group = app.add_subcommand("splits", "train/dev/test assignment");
		group->require_subcommand(1);
		auto* cmd = group->add_subcommand("assign", "stratified split assignment");
		addCommon(cmd, common);
		cmd->add_option("--manifest", manifestPath, "manifest to rewrite")->required();
		cmd->add_option("--ratios", ratiosText, "train,dev,test ratios (default 0.5,0.25,0.25)");
		cmd->add_option("--out", outPath, "write here instead of in place");
		cmd->callback([&] {
			const auto c = common.load();
			const std::string text = !ratiosText.empty() ? ratiosText : c.text("splits.ratios").value_or("0.5,0.25,0.25");
			manifest::SplitRatios ratios;
			try {
				ratios = manifest::parse_ratios(text);
			} catch (const ValidationError& e) {
				throw ConfigError(std::string("ratios: ") + e.what());
			}
			const auto assigned =
			    manifest::assign_splits(manifest::read_manifest(manifestPath), ratios, common.seedFrom(c));
			manifest::write_manifest(outPath.empty() ? manifestPath : outPath, assigned);
			std::cout << manifest::stats_to_json(manifest::stats(assigned)) << "\n";
		});

		auto* st = app.add_subcommand("stats", "dataset composition counts");
		st->add_option("--manifest", manifestPath, "dataset manifest")->required();
		st->callback([&] { std::cout << manifest::stats_to_json(manifest::stats(manifest::read_manifest(manifestPath))) << "\n"; });
	}

	// eval score / breakdown
	std::string responsesPath;
	bool asJson = false;
	auto compute = [&] {
		const auto c = common.load();
		const auto records = manifest::read_manifest(manifestPath);
		const auto factors = eval::load_factors(records, fs::path(manifestPath).parent_path());
		auto report = eval::compute_metrics(eval::read_responses(responsesPath), records,
		                                    questions::read_questions(questionsPath), factors,
		                                    config::breakdown_options(c));
		for (const auto& o : report.orphans) {
			std::cerr << "orphan response " << o << "\n";
		}
		return report;
	};
	{
		auto* group = app.add_subcommand("eval", "score model responses");
		group->require_subcommand(1);
		auto setup = [&](CLI::App* cmd) {
			addCommon(cmd, common);
			cmd->add_option("--responses", responsesPath, "response JSONL")->required();
			cmd->add_option("--manifest", manifestPath, "dataset manifest with final labels")->required();
			cmd->add_option("--questions", questionsPath, "question JSONL")->required();
			cmd->add_option("--out", outPath, "write here instead of stdout");
		};
		auto* score = group->add_subcommand("score", "metrics per illusion type and prompt mode");
		setup(score);
		score->add_flag("--json", asJson, "print the JSON report instead of the table");
		score->callback([&] {
			const auto report = compute();
			if (asJson || (!outPath.empty() && outPath != "-")) {
				writeOrPrint(outPath, eval::report_to_json(report) + "\n");
			}
			if (!asJson) {
				std::cout << eval::report_to_table(report);
			}
		});
		auto* breakdown = group->add_subcommand("breakdown", "deception rate per factor bin as CSV");
		setup(breakdown);
		breakdown->callback([&] { writeOrPrint(outPath, eval::breakdown_to_csv(compute())); });
	}

	// probe gen
	int probeTrain = 6000;
	std::vector<int> probeTest{1000, 1000};
	{
		auto* group = app.add_subcommand("probe", "pure-vision probe task");
		group->require_subcommand(1);
		auto* cmd = group->add_subcommand("gen", "left/right rectangle comparison images");
		addCommon(cmd, common);
		cmd->add_option("--train", probeTrain, "training items")->check(CLI::NonNegativeNumber);
		cmd->add_option("--test", probeTest, "plain,illusion test items")->delimiter(',')->expected(2);
		cmd->add_option("--out", outDir, "output directory")->required();
		cmd->callback([&] {
			const auto c = common.load();
			const auto cfg = config::probe_config(c);
			const int jobs = common.jobsFrom(c);
			if (probeTest.size() != 2 || probeTest[0] < 0 || probeTest[1] < 0) {
				throw ConfigError("--test expects two non-negative counts");
			}
			const fs::path root = outDir;
			for (const char* d : {"train", "test_plain", "test_illusion"}) {
				fs::create_directories(root / d);
			}
			struct Pending {
				fs::path file;
				Image pixels;
			};
			std::vector<Pending> batch;
			std::string labels;
			auto flush = [&] {
				pipeline::parallel_for(batch.size(), jobs, [&](std::size_t i) { write_png(batch[i].file, batch[i].pixels); });
				batch.clear();
			};
			std::map<std::string, int> counts;
			procgen::for_each_probe_item(
			    common.seedFrom(c), {probeTrain, probeTest[0], probeTest[1]}, cfg,
			    [&](procgen::ProbeSplit split, int index, procgen::ProbeItem&& item) {
				    char name[32];
				    std::snprintf(name, sizeof name, "%06d.png", index);
				    const std::string rel = std::string(procgen::to_string(split)) + "/" + name;
				    labels += ordered_json{{"split", procgen::to_string(split)},
				                           {"index", index},
				                           {"image", rel},
				                           {"label", procgen::to_string(item.label)},
				                           {"is_illusion", item.is_illusion}}
				                  .dump() +
				              "\n";
				    ++counts[std::string(procgen::to_string(split))];
				    batch.push_back({root / rel, std::move(item.pixels)});
				    if (batch.size() >= 256) {
					    flush();
				    }
			    });
			flush();
			jsonl::write_atomic(root / "labels.jsonl", labels);
			std::cout << ordered_json(counts).dump() << "\n";
		});
	}

	// serve
	int port = 8080;
	std::string host = "127.0.0.1";
	std::string stateDir;
	bool includeLabeled = false;
	{
		auto* cmd = app.add_subcommand("serve", "run the annotation survey service");
		addCommon(cmd, common);
		cmd->add_option("--port", port, "TCP port (0 picks a free one)");
		cmd->add_option("--host", host, "bind address");
		cmd->add_option("--manifest", manifestPath, "dataset manifest")->required();
		cmd->add_option("--state-dir", stateDir, "votes and sessions (default: survey/ next to the manifest)");
		cmd->add_flag("--include-labeled", includeLabeled, "also survey images that already have a final label");
		cmd->callback([&] {
			const auto c = common.load();
			const auto options = config::survey_options(c);
			auto items = annotation::load_items(manifestPath, common.seedFrom(c), includeLabeled);
			if (items.empty()) {
				throw ValidationError("no pending images in " + manifestPath);
			}
			const fs::path state = stateDir.empty() ? fs::path(manifestPath).parent_path() / "survey" : fs::path(stateDir);
			annotation::SurveyStore store(std::move(items), options, state);
			annotation::HttpServer server(store);
			const int bound = server.bind(host, port);
			gServer = &server;
			std::signal(SIGINT, onSignal);
			std::signal(SIGTERM, onSignal);
			std::cerr << "listening on http://" << host << ":" << bound << " (state in " << state.string() << ")\n";
			server.listen();
			gServer = nullptr;
		});
	}

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : 4;
	}
	return 0;
}

} // namespace
} // namespace illusion

int main(int argc, char** argv) {
	using namespace illusion;
	try {
		return run(argc, argv);
	} catch (const ConfigError& e) {
		std::cerr << "config error: " << e.what() << "\n";
		return 4;
	} catch (const IoError& e) {
		std::cerr << "i/o error: " << e.what() << "\n";
		return 3;
	} catch (const std::filesystem::filesystem_error& e) {
		std::cerr << "i/o error: " << e.what() << "\n";
		return 3;
	} catch (const ValidationError& e) {
		std::cerr << "validation error: " << e.what() << "\n";
		return 2;
	} catch (const nlohmann::json::exception& e) {
		std::cerr << "validation error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
}
