#include "hidcode/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "hidcode/errors.hpp"

namespace hidcode {

namespace {

bool has_suffix(const std::string& path, const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    return path.size() >= n && path.compare(path.size() - n, n, suffix) == 0;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// rows: gray ? width : width*3 bytes each.
std::vector<std::vector<png_byte>> read_png_rows(const std::string& path, int& height,
                                                 int& width, bool gray) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (gray) {
        if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
            color == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    } else {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    std::vector<std::vector<png_byte>> rows(height);
    std::vector<png_bytep> ptrs(height);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    for (int y = 0; y < height; ++y) {
        rows[y].resize(rowbytes);
        ptrs[y] = rows[y].data();
    }
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

void write_png(const std::string& path, int height, int width, bool gray,
               const std::vector<png_bytep>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot create " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8,
                 gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RasterImage load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IoError(path + ": not a binary PPM (P6)");
    int width = 0, height = 0, maxval = 0;
    in >> width >> height >> maxval;
    if (!in || width <= 0 || height <= 0 || maxval != 255)
        throw IoError(path + ": unsupported PPM header");
    in.get();  // single whitespace after maxval
    RasterImage image(height, width);
    in.read(reinterpret_cast<char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
    if (!in) throw IoError(path + ": truncated PPM data");
    return image;
}

void save_ppm(const RasterImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw IoError("failed to write " + path);
}

}  // namespace

RasterImage load_image(const std::string& path) {
    if (has_suffix(path, ".ppm")) return load_ppm(path);
    int height = 0, width = 0;
    auto rows = read_png_rows(path, height, width, /*gray=*/false);
    RasterImage image(height, width);
    for (int y = 0; y < height; ++y)
        std::memcpy(&image.data[static_cast<std::size_t>(y) * width * 3], rows[y].data(),
                    static_cast<std::size_t>(width) * 3);
    return image;
}

void save_image(const RasterImage& image, const std::string& path) {
    if (image.height <= 0 || image.width <= 0)
        throw ValidationError("save_image: empty image");
    if (has_suffix(path, ".ppm")) {
        save_ppm(image, path);
        return;
    }
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y)
        rows[y] = const_cast<png_bytep>(&image.data[static_cast<std::size_t>(y) * image.width * 3]);
    write_png(path, image.height, image.width, /*gray=*/false, rows);
}

PixelMask load_mask(const std::string& path) {
    int height = 0, width = 0;
    auto rows = read_png_rows(path, height, width, /*gray=*/true);
    PixelMask mask(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask.at(y, x) = static_cast<float>(rows[y][x]) / 255.0f;
    return mask;
}

void save_mask(const PixelMask& mask, const std::string& path) {
    if (mask.height <= 0 || mask.width <= 0) throw ValidationError("save_mask: empty mask");
    std::vector<std::vector<png_byte>> rows(mask.height);
    std::vector<png_bytep> ptrs(mask.height);
    for (int y = 0; y < mask.height; ++y) {
        rows[y].resize(mask.width);
        for (int x = 0; x < mask.width; ++x) {
            float v = mask.at(y, x) * 255.0f;
            if (v < 0.0f) v = 0.0f;
            if (v > 255.0f) v = 255.0f;
            rows[y][x] = static_cast<png_byte>(std::lround(v));
        }
        ptrs[y] = rows[y].data();
    }
    write_png(path, mask.height, mask.width, /*gray=*/true, ptrs);
}

}  // namespace hidcode
