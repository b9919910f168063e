#include "illusion/image.hpp"

#include "illusion/errors.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>
#include <string>
#include <fstream>
#include <iterator>

namespace illusion {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
	if (width < 0 || height < 0) {
		throw ValidationError("image dimensions must be non-negative");
	}
	pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Mask::Mask(int width, int height) : width_(width), height_(height) {
	if (width < 0 || height < 0) {
		throw ValidationError("mask dimensions must be non-negative");
	}
	bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t Mask::count() const noexcept {
	return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::intersects(const Mask& other) const {
	if (other.width_ != width_ || other.height_ != height_) {
		throw ValidationError("mask geometry mismatch");
	}
	for (std::size_t i = 0; i < bits_.size(); ++i) {
		if (bits_[i] != 0 && other.bits_[i] != 0) {
			return true;
		}
	}
	return false;
}

Mask Mask::eroded(int radius) const {
	Mask out(width_, height_);
	if (radius <= 0) {
		out.bits_ = bits_;
		return out;
	}
	// Summed-area table; a pixel survives when its window is fully set and fully inside the image.
	const std::size_t w1 = static_cast<std::size_t>(width_) + 1;
	std::vector<std::uint32_t> sat(w1 * (static_cast<std::size_t>(height_) + 1), 0);
	for (int y = 0; y < height_; ++y) {
		std::uint32_t rowSum = 0;
		for (int x = 0; x < width_; ++x) {
			rowSum += bits_[index(x, y)];
			sat[(y + 1) * w1 + (x + 1)] = sat[y * w1 + (x + 1)] + rowSum;
		}
	}
	const std::uint32_t full = static_cast<std::uint32_t>((2 * radius + 1) * (2 * radius + 1));
	for (int y = radius; y < height_ - radius; ++y) {
		for (int x = radius; x < width_ - radius; ++x) {
			const std::size_t x0 = x - radius;
			const std::size_t y0 = y - radius;
			const std::size_t x1 = x + radius + 1;
			const std::size_t y1 = y + radius + 1;
			const std::uint32_t sum = sat[y1 * w1 + x1] - sat[y0 * w1 + x1] - sat[y1 * w1 + x0] + sat[y0 * w1 + x0];
			if (sum == full) {
				out.set(x, y);
			}
		}
	}
	return out;
}

std::vector<std::uint32_t> Mask::run_lengths() const {
	std::vector<std::uint32_t> runs;
	std::uint8_t current = 0;
	std::uint32_t length = 0;
	for (const auto bit : bits_) {
		if (bit == current) {
			++length;
		} else {
			runs.push_back(length);
			current = bit;
			length = 1;
		}
	}
	runs.push_back(length);
	return runs;
}

Mask Mask::from_run_lengths(int width, int height, std::span<const std::uint32_t> runs) {
	Mask out(width, height);
	std::size_t pos = 0;
	std::uint8_t value = 0;
	for (const auto run : runs) {
		if (pos + run > out.bits_.size()) {
			throw ValidationError("run-length mask overflows its geometry");
		}
		std::fill_n(out.bits_.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
		pos += run;
		value ^= 1U;
	}
	if (pos != out.bits_.size()) {
		throw ValidationError("run-length mask does not cover its geometry");
	}
	return out;
}

MeanColor masked_mean(const Image& image, const Mask& mask) {
	if (image.width() != mask.width() || image.height() != mask.height()) {
		throw ValidationError("mask geometry does not match image");
	}
	std::uint64_t r = 0;
	std::uint64_t g = 0;
	std::uint64_t b = 0;
	MeanColor out;
	for (int y = 0; y < image.height(); ++y) {
		for (int x = 0; x < image.width(); ++x) {
			if (mask.test(x, y)) {
				const Rgb& p = image.at(x, y);
				r += p.r;
				g += p.g;
				b += p.b;
				++out.count;
			}
		}
	}
	if (out.count > 0) {
		const double n = static_cast<double>(out.count);
		out.r = static_cast<double>(r) / n;
		out.g = static_cast<double>(g) / n;
		out.b = static_cast<double>(b) / n;
	}
	return out;
}

namespace {

void pngWrite(png_structp png, png_bytep data, png_size_t length) {
	auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
	sink->insert(sink->end(), data, data + length);
}

void pngFlush(png_structp) {}

struct ReadCursor {
	std::span<const std::uint8_t> bytes;
	std::size_t offset{0};
};

void pngRead(png_structp png, png_bytep data, png_size_t length) {
	auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
	if (cursor->offset + length > cursor->bytes.size()) {
		png_error(png, "truncated PNG stream");
	}
	std::memcpy(data, cursor->bytes.data() + cursor->offset, length);
	cursor->offset += length;
}

thread_local std::string pngLastError;

[[noreturn]] void pngFail(png_structp png, png_const_charp message) {
	pngLastError = message;
	png_longjmp(png, 1);
}

void pngWarn(png_structp, png_const_charp) {}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
	if (image.empty()) {
		throw ValidationError("cannot encode an empty image");
	}
	std::vector<std::uint8_t> out;
	png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, pngFail, pngWarn);
	png_infop info = png ? png_create_info_struct(png) : nullptr;
	if (!png || !info) {
		png_destroy_write_struct(&png, &info);
		throw IoError("png: allocation failed");
	}
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_write_struct(&png, &info);
		throw IoError("png: " + pngLastError);
	}
	{
		png_set_write_fn(png, &out, pngWrite, pngFlush);
		png_set_compression_level(png, 6);
		png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
		             PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
		png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
		png_write_info(png, info);
		const auto pixels = image.pixels();
		for (int y = 0; y < image.height(); ++y) {
			// Rgb is three packed bytes.
			auto* row = reinterpret_cast<const png_byte*>(pixels.data() + static_cast<std::size_t>(y) * image.width());
			png_write_row(png, const_cast<png_bytep>(row));
		}
		png_write_end(png, nullptr);
	}
	png_destroy_write_struct(&png, &info);
	return out;
}

static_assert(sizeof(Rgb) == 3, "Rgb must be tightly packed for PNG row I/O");

void write_png(const std::filesystem::path& path, const Image& image) {
	const auto bytes = encode_png(image);
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw IoError("cannot open " + path.string() + " for writing");
	}
	out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
	if (!out) {
		throw IoError("failed writing " + path.string());
	}
}

Image decode_png(std::span<const std::uint8_t> bytes) {
	if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
		throw IoError("png: bad signature");
	}
	png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, pngFail, pngWarn);
	png_infop info = png ? png_create_info_struct(png) : nullptr;
	if (!png || !info) {
		png_destroy_read_struct(&png, &info, nullptr);
		throw IoError("png: allocation failed");
	}
	ReadCursor cursor{bytes, 0};
	Image image;
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_read_struct(&png, &info, nullptr);
		throw IoError("png: " + pngLastError);
	}
	{
		png_set_read_fn(png, &cursor, pngRead);
		png_read_info(png, info);
		const auto colorType = png_get_color_type(png, info);
		const auto bitDepth = png_get_bit_depth(png, info);
		if (colorType == PNG_COLOR_TYPE_PALETTE) {
			png_set_palette_to_rgb(png);
		}
		if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8) {
			png_set_expand_gray_1_2_4_to_8(png);
		}
		if (colorType == PNG_COLOR_TYPE_GRAY || colorType == PNG_COLOR_TYPE_GRAY_ALPHA) {
			png_set_gray_to_rgb(png);
		}
		if (bitDepth == 16) {
			png_set_strip_16(png);
		}
		png_set_strip_alpha(png);
		png_read_update_info(png, info);

		const int width = static_cast<int>(png_get_image_width(png, info));
		const int height = static_cast<int>(png_get_image_height(png, info));
		if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
			png_error(png, "unexpected row layout after transforms");
		}
		image = Image(width, height);
		auto pixels = image.pixels();
		for (int y = 0; y < height; ++y) {
			png_read_row(png, reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width), nullptr);
		}
		png_read_end(png, nullptr);
	}
	png_destroy_read_struct(&png, &info, nullptr);
	return image;
}

Image read_png(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot open " + path.string());
	}
	std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
	try {
		return decode_png(bytes);
	} catch (const IoError& e) {
		throw IoError(path.string() + ": " + e.what());
	}
}

} // namespace illusion
