#include "dmfour/image_io.hpp"

#include "dmfour/color.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace dmfour {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg)
{
    *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

std::filesystem::path temp_path_for(const std::filesystem::path& path)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    return tmp;
}

} // namespace

Tensor read_png(const std::filesystem::path& path)
{
    File file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw DataError("cannot open image " + path.string());
    }
    unsigned char sig[8] = {};
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw DataError(path.string() + " is not a PNG file");
    }
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int depth = 0, channels = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("cannot decode " + path.string() + ": " + error);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_swap(png);
    }
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    depth = png_get_bit_depth(png, info);
    channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    buffer.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        rows[y] = buffer.data() + y * row_bytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t c = static_cast<std::size_t>(channels);
    Tensor out({1, c, height, width});
    const double max_value = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t k = x * c + ch;
                double v = 0.0;
                if (depth == 16) {
                    std::uint16_t s = 0;
                    std::memcpy(&s, rows[y] + 2 * k, 2);
                    v = s;
                } else {
                    v = rows[y][k];
                }
                out.at(0, ch, y, x) = v / max_value;
            }
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image, int bit_depth)
{
    require_rank(image, 4, "write_png");
    const std::size_t c = image.dim(1);
    if (image.dim(0) != 1 || (c != 1 && c != 3)) {
        throw ShapeError("write_png: expected a 1CHW image with 1 or 3 channels, got " + shape_str(image.shape()));
    }
    if (bit_depth != 8 && bit_depth != 16) {
        throw std::invalid_argument("write_png: bit depth must be 8 or 16");
    }
    const std::size_t h = image.dim(2);
    const std::size_t w = image.dim(3);
    const std::size_t bytes = bit_depth / 8;
    const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<png_byte> buffer(h * w * c * bytes);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = std::clamp(image.at(0, ch, y, x), 0.0, 1.0);
                const auto q = static_cast<unsigned>(std::lround(v * max_value));
                const std::size_t k = ((y * w + x) * c + ch) * bytes;
                if (bytes == 2) {
                    buffer[k] = static_cast<png_byte>(q >> 8);
                    buffer[k + 1] = static_cast<png_byte>(q & 0xff);
                } else {
                    buffer[k] = static_cast<png_byte>(q);
                }
            }
        }
    }

    const std::filesystem::path tmp = temp_path_for(path);
    {
        File file(std::fopen(tmp.c_str(), "wb"));
        if (!file) {
            throw DataError("cannot write " + tmp.string());
        }
        std::string error;
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
        png_infop info = png_create_info_struct(png);
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw DataError("cannot encode " + path.string() + ": " + error);
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                     c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (std::size_t y = 0; y < h; ++y) {
            png_write_row(png, buffer.data() + y * w * c * bytes);
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    const std::filesystem::path tmp = temp_path_for(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw DataError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Tensor to_gray(const Tensor& image)
{
    require_rank(image, 4, "to_gray");
    return image.dim(1) == 1 ? image : luminance(image);
}

Tensor to_rgb(const Tensor& image)
{
    require_rank(image, 4, "to_rgb");
    if (image.dim(1) == 3) {
        return image;
    }
    const std::array<Tensor, 3> parts{image, image, image};
    return concat_channels(parts);
}

} // namespace dmfour
