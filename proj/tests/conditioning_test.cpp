#include "illusion/conditioning.hpp"
#include "illusion/errors.hpp"
#include "illusion/rng.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>

namespace illusion::conditioning {
namespace {

Image randomImage(Rng& rng, int w, int h) {
	Image image(w, h);
	for (Rgb& p : image.pixels()) {
		p = Rgb{std::uint8_t(rng.uniform_int(0, 255)), std::uint8_t(rng.uniform_int(0, 255)),
		        std::uint8_t(rng.uniform_int(0, 255))};
	}
	return image;
}

TEST(QuantizeGrid, SolidImage) {
	const ConditioningGrid g = quantize_grid(Image(37, 41, {128, 128, 128}));
	for (const Rgb& c : g.cells) {
		EXPECT_EQ(c, (Rgb{128, 128, 128}));
	}
	EXPECT_EQ(g.source_width, 37);
	EXPECT_EQ(g.source_height, 41);
}

TEST(QuantizeGrid, HalfBlackHalfWhite) {
	Image image(100, 100, {255, 255, 255});
	for (int y = 0; y < 100; ++y) {
		for (int x = 0; x < 50; ++x) {
			image.at(x, y) = {0, 0, 0};
		}
	}
	const ConditioningGrid g = quantize_grid(image);
	for (int gy = 0; gy < 10; ++gy) {
		for (int gx = 0; gx < 10; ++gx) {
			EXPECT_EQ(g.at(gx, gy), (gx < 5 ? Rgb{0, 0, 0} : Rgb{255, 255, 255}));
		}
	}
}

TEST(QuantizeGrid, MatchesBruteForceOracle) {
	Rng rng(97);
	const Image odd = randomImage(rng, 97, 103);
	const ConditioningGrid g = quantize_grid(odd);
	EXPECT_EQ(std::vector<Rgb>(g.cells.begin(), g.cells.end()), oracle::grid_means(odd));
	for (int i = 0; i < 40; ++i) {
		const Image image = randomImage(rng, int(rng.uniform_int(10, 90)), int(rng.uniform_int(10, 90)));
		const ConditioningGrid q = quantize_grid(image);
		ASSERT_EQ(std::vector<Rgb>(q.cells.begin(), q.cells.end()), oracle::grid_means(image));
	}
}

TEST(QuantizeGrid, PartitionReproducesGlobalMean) {
	Rng rng(5);
	for (int i = 0; i < 30; ++i) {
		const int w = int(rng.uniform_int(10, 64));
		const int h = int(rng.uniform_int(10, 64));
		const Image image = randomImage(rng, w, h);
		const ConditioningGrid g = quantize_grid(image);
		double weighted = 0.0;
		double direct = 0.0;
		for (int gy = 0; gy < 10; ++gy) {
			for (int gx = 0; gx < 10; ++gx) {
				const int cw = (gx + 1) * w / 10 - gx * w / 10;
				const int ch = (gy + 1) * h / 10 - gy * h / 10;
				weighted += double(g.at(gx, gy).r) * cw * ch;
			}
		}
		for (const Rgb& p : image.pixels()) {
			direct += p.r;
		}
		// Each cell rounds by at most half a level.
		EXPECT_NEAR(weighted / (w * h), direct / (w * h), 0.5);
	}
}

TEST(QuantizeGrid, UpscaledGridIsFixedPoint) {
	Rng rng(12);
	for (int scale = 1; scale <= 7; ++scale) {
		ConditioningGrid grid;
		for (Rgb& c : grid.cells) {
			c = Rgb{std::uint8_t(rng.uniform_int(0, 255)), std::uint8_t(rng.uniform_int(0, 255)),
			        std::uint8_t(rng.uniform_int(0, 255))};
		}
		Image up(10 * scale, 10 * scale);
		for (int y = 0; y < up.height(); ++y) {
			for (int x = 0; x < up.width(); ++x) {
				up.at(x, y) = grid.at(x / scale, y / scale);
			}
		}
		EXPECT_EQ(quantize_grid(up).cells, grid.cells);
	}
}

TEST(QuantizeGrid, RejectsUndersized) {
	EXPECT_THROW(quantize_grid(Image(9, 20)), ValidationError);
	EXPECT_THROW(quantize_grid(Image(20, 9)), ValidationError);
	EXPECT_NO_THROW(quantize_grid(Image(10, 10)));
}

class ExportPairs : public ::testing::Test {
protected:
	void SetUp() override {
		for (int i = 0; i < 3; ++i) {
			StimulusRef ref{"s" + std::to_string(i), dir / ("s" + std::to_string(i) + ".png")};
			write_png(ref.png, Image(20, 20, Rgb{std::uint8_t(i * 50), 10, 10}));
			stimuli.push_back(ref);
		}
	}

	testing::TempDir dir{"cond"};
	std::vector<StimulusRef> stimuli;
};

TEST_F(ExportPairs, SingleCaptionShared) {
	const auto pairs = export_pairs(stimuli, {"a red apple"}, 1);
	ASSERT_EQ(pairs.size(), 3u);
	for (const auto& p : pairs) {
		EXPECT_EQ(p.caption, "a red apple");
	}
	EXPECT_EQ(pairs[2].grid.at(0, 0), (Rgb{100, 10, 10}));
}

TEST_F(ExportPairs, DeterministicAndRoundTrips) {
	const std::vector<std::string> captions{"one", "two", "three", "four"};
	const auto a = export_pairs(stimuli, captions, 9);
	const auto b = export_pairs(stimuli, captions, 9);
	for (std::size_t i = 0; i < a.size(); ++i) {
		EXPECT_EQ(a[i].caption, b[i].caption);
	}
	write_pairs(dir / "pairs.jsonl", a);
	const auto back = read_pairs(dir / "pairs.jsonl");
	ASSERT_EQ(back.size(), a.size());
	for (std::size_t i = 0; i < a.size(); ++i) {
		EXPECT_EQ(back[i].grid.cells, a[i].grid.cells);
		EXPECT_EQ(back[i].caption, a[i].caption);
		EXPECT_EQ(back[i].source_ref, a[i].source_ref);
		EXPECT_EQ(back[i].source_png, a[i].source_png);
	}
}

TEST_F(ExportPairs, EmptyPoolRejected) {
	EXPECT_THROW(export_pairs(stimuli, {}, 1), ValidationError);
}

TEST(CaptionIndex, UniformUsage) {
	constexpr int kStimuli = 1000;
	constexpr int kCaptions = 100;
	std::map<std::size_t, int> usage;
	for (int i = 0; i < kStimuli; ++i) {
		++usage[caption_index(3, "contrast-" + std::to_string(i), kCaptions)];
	}
	// Chi-square with 99 degrees of freedom: mean 99, sd sqrt(198).
	const double expected = double(kStimuli) / kCaptions;
	double chi2 = 0.0;
	for (int c = 0; c < kCaptions; ++c) {
		const double d = usage[std::size_t(c)] - expected;
		chi2 += d * d / expected;
	}
	EXPECT_LT(std::abs(chi2 - 99.0), 3.0 * std::sqrt(198.0));
}

TEST(LoadCaptions, TextAndAnnotationFiles) {
	testing::TempDir dir{"captions"};
	{
		std::ofstream out(dir / "c.txt");
		out << "  a dog on a couch  \n\n a red bus\n";
	}
	EXPECT_EQ(load_captions(dir / "c.txt"), (std::vector<std::string>{"a dog on a couch", "a red bus"}));
	{
		std::ofstream out(dir / "c.json");
		out << R"({"images": [], "annotations": [{"id": 1, "caption": "x"}, {"id": 2, "caption": "y"}]})";
	}
	EXPECT_EQ(load_captions(dir / "c.json"), (std::vector<std::string>{"x", "y"}));
	{
		std::ofstream out(dir / "empty.txt");
	}
	EXPECT_THROW(load_captions(dir / "empty.txt"), ValidationError);
	EXPECT_THROW(load_captions(dir / "missing.txt"), IoError);
}

TEST(ReadPairs, MalformedLineNamed) {
	testing::TempDir dir{"pairs"};
	{
		std::ofstream out(dir / "p.jsonl");
		out << "{\"id\": \"a\"}\n";
	}
	try {
		read_pairs(dir / "p.jsonl");
		FAIL() << "expected ValidationError";
	} catch (const ValidationError& e) {
		EXPECT_NE(std::string(e.what()).find("p.jsonl:1:"), std::string::npos);
	}
}

} // namespace
} // namespace illusion::conditioning
