#pragma once

#include "illusion/color.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace illusion {

/// Row-major RGB raster.
class Image {
public:
	Image() = default;
	Image(int width, int height, Rgb fill = {});

	[[nodiscard]] int width() const noexcept { return width_; }
	[[nodiscard]] int height() const noexcept { return height_; }
	[[nodiscard]] bool empty() const noexcept { return pixels_.empty(); }
	[[nodiscard]] std::size_t size() const noexcept { return pixels_.size(); }

	[[nodiscard]] Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
	[[nodiscard]] const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }

	[[nodiscard]] std::span<Rgb> pixels() noexcept { return pixels_; }
	[[nodiscard]] std::span<const Rgb> pixels() const noexcept { return pixels_; }

	friend bool operator==(const Image&, const Image&) = default;

private:
	[[nodiscard]] std::size_t index(int x, int y) const noexcept {
		return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
	}

	int width_{0};
	int height_{0};
	std::vector<Rgb> pixels_;
};

/// Binary pixel mask with the same geometry as an Image.
class Mask {
public:
	Mask() = default;
	Mask(int width, int height);

	[[nodiscard]] int width() const noexcept { return width_; }
	[[nodiscard]] int height() const noexcept { return height_; }
	[[nodiscard]] bool test(int x, int y) const { return bits_[index(x, y)] != 0; }
	void set(int x, int y, bool on = true) { bits_[index(x, y)] = on ? 1 : 0; }
	[[nodiscard]] std::size_t count() const noexcept;
	[[nodiscard]] bool intersects(const Mask& other) const;

	/// Pixels whose full (2*radius+1)^2 neighbourhood lies inside the mask.
	[[nodiscard]] Mask eroded(int radius) const;

	/// Alternating run lengths over the row-major bitmap, starting with an "off" run.
	[[nodiscard]] std::vector<std::uint32_t> run_lengths() const;
	static Mask from_run_lengths(int width, int height, std::span<const std::uint32_t> runs);

	friend bool operator==(const Mask&, const Mask&) = default;

private:
	[[nodiscard]] std::size_t index(int x, int y) const noexcept {
		return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
	}

	int width_{0};
	int height_{0};
	std::vector<std::uint8_t> bits_;
};

struct MeanColor {
	double r{0.0};
	double g{0.0};
	double b{0.0};
	std::size_t count{0};
};

/// Per-channel mean over the masked pixels.
MeanColor masked_mean(const Image& image, const Mask& mask);

/// Encodes as 8-bit RGB PNG. Output bytes depend only on the pixels.
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);
/// Decodes any PNG color type into 8-bit RGB (alpha discarded).
Image read_png(const std::filesystem::path& path);
Image decode_png(std::span<const std::uint8_t> bytes);

} // namespace illusion
