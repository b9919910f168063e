#include "illusion/errors.hpp"
#include "illusion/manifest.hpp"
#include "illusion/rng.hpp"
#include "support/tempdir.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>

namespace illusion::manifest {
namespace {

DatasetRecord makeRecord(int i, IllusionType type, RecordLabel label) {
	DatasetRecord r;
	r.id = std::string(to_string(type)) + "-" + std::to_string(i);
	r.illusion_type = type;
	r.subtype = type == IllusionType::Contrast ? (i % 2 ? "left-right" : "up-down")
	            : type == IllusionType::Stripe ? "horizontal"
	                                           : "single-object";
	r.label = label;
	r.asset = "images/" + r.id + ".png";
	r.sidecar = "sidecars/" + r.id + ".json";
	r.seed = static_cast<std::uint64_t>(i) * 7919u;
	return r;
}

std::vector<DatasetRecord> randomRecords(Rng& rng, int n) {
	std::vector<DatasetRecord> out;
	for (int i = 0; i < n; ++i) {
		const auto type = static_cast<IllusionType>(rng.uniform_int(0, 2));
		const auto label = static_cast<RecordLabel>(rng.uniform_int(0, 2));
		out.push_back(makeRecord(i, type, label));
	}
	return out;
}

std::size_t lineCount(const std::filesystem::path& path) {
	std::ifstream in(path);
	std::size_t n = 0;
	std::string line;
	while (std::getline(in, line)) {
		n += line.empty() ? 0 : 1;
	}
	return n;
}

TEST(ManifestLine, FieldOrderIsFixed) {
	DatasetRecord r = makeRecord(3, IllusionType::Stripe, RecordLabel::Control);
	r.split = Split::Dev;
	EXPECT_EQ(to_json_line(r),
	          R"({"id":"stripe-3","illusion_type":"stripe","subtype":"horizontal","label":"control",)"
	          R"("asset":"images/stripe-3.png","sidecar":"sidecars/stripe-3.json","split":"dev","seed":23757})");
	EXPECT_EQ(record_from_json_line(to_json_line(r)), r);
}

TEST(ManifestLine, SplitRequiresFinalLabel) {
	DatasetRecord r = makeRecord(1, IllusionType::Contrast, RecordLabel::Pending);
	r.split = Split::Train;
	EXPECT_THROW(record_from_json_line(to_json_line(r)), ValidationError);
}

TEST(ManifestFile, RoundTrip) {
	testing::TempDir dir{"manifest"};
	Rng rng(1);
	auto records = randomRecords(rng, 2000);
	records[5].subtype = "unicode \xc3\xa9 \"quoted\"";
	write_manifest(dir / "m.jsonl", records);
	EXPECT_EQ(read_manifest(dir / "m.jsonl"), records);
	EXPECT_EQ(lineCount(dir / "m.jsonl"), records.size());
}

TEST(ManifestFile, BadLineNamed) {
	testing::TempDir dir{"manifest"};
	Rng rng(2);
	write_manifest(dir / "m.jsonl", randomRecords(rng, 5));
	{
		std::ofstream out(dir / "m.jsonl", std::ios::app);
		out << R"({"id":"x","illusion_type":"spiral"})" << "\n";
	}
	try {
		read_manifest(dir / "m.jsonl");
		FAIL() << "expected an error";
	} catch (const ValidationError& e) {
		EXPECT_NE(std::string(e.what()).find("m.jsonl:6:"), std::string::npos) << e.what();
	}
}

TEST(ManifestFile, DuplicateIdRejected) {
	testing::TempDir dir{"manifest"};
	const auto r = makeRecord(1, IllusionType::Filter, RecordLabel::Illusion);
	write_manifest(dir / "m.jsonl", {r, r});
	EXPECT_THROW(read_manifest(dir / "m.jsonl"), ValidationError);
	EXPECT_THROW(read_manifest(dir / "missing.jsonl"), IoError);
}

TEST(ManifestFile, ConcurrentAppendPreservesUnion) {
	testing::TempDir dir{"manifest"};
	constexpr int kWriters = 8;
	constexpr int kBatches = 25;
	constexpr int kPerBatch = 10;
	std::vector<std::thread> writers;
	for (int w = 0; w < kWriters; ++w) {
		writers.emplace_back([&, w] {
			for (int b = 0; b < kBatches; ++b) {
				std::vector<DatasetRecord> batch;
				for (int i = 0; i < kPerBatch; ++i) {
					batch.push_back(makeRecord((w * kBatches + b) * kPerBatch + i, IllusionType::Contrast,
					                           RecordLabel::Pending));
				}
				append_manifest(dir / "m.jsonl", batch);
			}
		});
	}
	for (auto& t : writers) {
		t.join();
	}
	const auto records = read_manifest(dir / "m.jsonl");
	std::set<std::string> ids;
	for (const auto& r : records) {
		ids.insert(r.id);
	}
	EXPECT_EQ(records.size(), std::size_t(kWriters * kBatches * kPerBatch));
	EXPECT_EQ(ids.size(), records.size());
}

TEST(SplitTargets, LargestRemainder) {
	EXPECT_EQ(split_targets(19000, {}), (std::array<std::size_t, 3>{9500, 4750, 4750}));
	EXPECT_EQ(split_targets(4, {}), (std::array<std::size_t, 3>{2, 1, 1}));
	EXPECT_EQ(split_targets(5, {}), (std::array<std::size_t, 3>{3, 1, 1}));
	EXPECT_EQ(split_targets(0, {}), (std::array<std::size_t, 3>{0, 0, 0}));
	EXPECT_EQ(split_targets(10, {0.7, 0.2, 0.1}), (std::array<std::size_t, 3>{7, 2, 1}));
	EXPECT_THROW(split_targets(10, {0.5, 0.5, 0.5}), ValidationError);
}

TEST(ParseRatios, Forms) {
	const SplitRatios r = parse_ratios("0.5,0.25,0.25");
	EXPECT_DOUBLE_EQ(r.dev, 0.25);
	EXPECT_THROW(parse_ratios("0.5,0.5"), ValidationError);
	EXPECT_THROW(parse_ratios("a,b,c"), ValidationError);
	EXPECT_THROW(parse_ratios("0.6,0.3,0.3"), ValidationError);
}

std::array<std::size_t, 3> countSplits(const std::vector<DatasetRecord>& records) {
	std::array<std::size_t, 3> c{};
	for (const auto& r : records) {
		if (r.split != Split::Unassigned) {
			++c[static_cast<std::size_t>(r.split)];
		}
	}
	return c;
}

TEST(AssignSplits, SmallExample) {
	std::vector<DatasetRecord> records;
	for (int i = 0; i < 4; ++i) {
		records.push_back(makeRecord(i, IllusionType::Contrast, RecordLabel::Illusion));
	}
	EXPECT_EQ(countSplits(assign_splits(records, {}, 1)), (std::array<std::size_t, 3>{2, 1, 1}));
}

TEST(AssignSplits, DeterministicAndOrderIndependent) {
	Rng rng(4);
	auto records = randomRecords(rng, 997);
	const auto a = assign_splits(records, {}, 11);
	EXPECT_EQ(a, assign_splits(records, {}, 11));
	std::map<std::string, Split> byId;
	for (const auto& r : a) {
		byId[r.id] = r.split;
	}
	rng.shuffle(std::span<DatasetRecord>(records));
	for (const auto& r : assign_splits(records, {}, 11)) {
		EXPECT_EQ(r.split, byId[r.id]) << r.id;
	}
}

TEST(AssignSplits, StrataWithinOneAndTotalsExact) {
	Rng rng(21);
	for (int trial = 0; trial < 60; ++trial) {
		auto records = randomRecords(rng, int(rng.uniform_int(0, 400)));
		const double a = rng.uniform(0.05, 0.9);
		const double b = rng.uniform(0.0, 1.0 - a);
		const SplitRatios ratios{a, b, 1.0 - a - b};
		const auto out = assign_splits(records, ratios, std::uint64_t(trial));
		std::size_t eligible = 0;
		std::map<std::pair<int, int>, std::array<std::size_t, 4>> strata;
		for (const auto& r : out) {
			if (r.label == RecordLabel::Discarded) {
				EXPECT_EQ(r.split, Split::Unassigned);
				continue;
			}
			ASSERT_NE(r.split, Split::Unassigned);
			++eligible;
			auto& s = strata[{int(r.illusion_type), int(r.label)}];
			++s[static_cast<std::size_t>(r.split)];
			++s[3];
		}
		EXPECT_EQ(countSplits(out), split_targets(eligible, ratios));
		const auto values = ratios.values();
		std::map<int, std::array<std::size_t, 4>> types;
		for (const auto& [key, s] : strata) {
			for (std::size_t k = 0; k < 4; ++k) {
				types[key.first][k] += s[k];
			}
			for (std::size_t k = 0; k < 3; ++k) {
				EXPECT_LE(std::abs(double(s[k]) - double(s[3]) * values[k]), 2.0);
			}
		}
		for (const auto& [type, s] : types) {
			for (std::size_t k = 0; k < 3; ++k) {
				EXPECT_LE(std::abs(double(s[k]) - double(s[3]) * values[k]), 1.0 + double(s[3]) / double(eligible));
			}
		}
	}
}

TEST(AssignSplits, PendingRejected) {
	std::vector<DatasetRecord> records{makeRecord(1, IllusionType::Stripe, RecordLabel::Pending)};
	EXPECT_THROW(assign_splits(records, {}, 1), ValidationError);
}

TEST(Stats, Counts) {
	const CompositionStats empty = stats({});
	EXPECT_EQ(empty.total, 0u);
	for (const auto& [k, v] : empty.by_type) {
		EXPECT_EQ(v, 0u) << k;
	}
	EXPECT_EQ(empty.by_split.at("train"), 0u);

	std::vector<DatasetRecord> records;
	for (int i = 0; i < 10; ++i) {
		records.push_back(makeRecord(i, IllusionType::Contrast, RecordLabel::Illusion));
	}
	for (int i = 0; i < 5; ++i) {
		records.push_back(makeRecord(i, IllusionType::Stripe, RecordLabel::Control));
	}
	const CompositionStats s = stats(records);
	EXPECT_EQ(s.by_type.at("contrast"), 10u);
	EXPECT_EQ(s.by_type.at("stripe"), 5u);
	EXPECT_EQ(s.by_type.at("filter"), 0u);
	EXPECT_EQ(s.by_subtype.at("contrast/left-right"), 5u);
	EXPECT_EQ(s.by_label.at("control"), 5u);
	EXPECT_EQ(s.by_split.at("unassigned"), 15u);
}

TEST(Stats, MatchLineCountsInFile) {
	testing::TempDir dir{"manifest"};
	Rng rng(9);
	const auto records = assign_splits(randomRecords(rng, 300), {}, 3);
	write_manifest(dir / "m.jsonl", records);
	const CompositionStats s = stats(read_manifest(dir / "m.jsonl"));
	// Independent count: scan raw lines for the serialized field.
	std::map<std::string, std::size_t> grep;
	std::ifstream in(dir / "m.jsonl");
	std::string line;
	while (std::getline(in, line)) {
		for (const char* type : {"contrast", "stripe", "filter"}) {
			if (line.find(std::string("\"illusion_type\":\"") + type + "\"") != std::string::npos) {
				++grep[type];
			}
		}
	}
	for (const auto& [type, n] : grep) {
		EXPECT_EQ(s.by_type.at(type), n);
	}
	EXPECT_EQ(s.total, lineCount(dir / "m.jsonl"));
}

} // namespace
} // namespace illusion::manifest
