#include "splat/io/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace splat {

namespace {

uint8_t to_byte(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ImageBuffer load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw ParseError("load_image: cannot open '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        std::fclose(fp);
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("load_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("load_image: malformed PNG '" + path + "'");
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);  // alpha is discarded
    png_read_update_info(png, info);

    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw InputError("load_image: zero-dimension PNG");
    }

    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            img.at(static_cast<int>(x), static_cast<int>(y)) =
                Vec3(row[x * 3] / 255.0, row[x * 3 + 1] / 255.0, row[x * 3 + 2] / 255.0);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

ImageBuffer load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("load_image: cannot open '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ParseError("load_image: unsupported PPM variant '" + magic + "'");

    auto next_int = [&]() -> long {
        // skip whitespace and '#' comments between header fields
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {
                while ((c = in.get()) != EOF && c != '\n') {
                }
            } else if (!std::isspace(c)) {
                in.unget();
                break;
            }
        }
        long v;
        if (!(in >> v)) throw ParseError("load_image: malformed PPM header in '" + path + "'");
        return v;
    };

    long w = next_int(), h = next_int(), maxval = next_int();
    if (w <= 0 || h <= 0) throw InputError("load_image: zero-dimension PPM");
    if (maxval != 255) throw ParseError("load_image: only 8-bit PPM (maxval 255) supported");
    in.get();  // the single whitespace after maxval

    std::vector<uint8_t> data(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!in) throw ParseError("load_image: truncated PPM '" + path + "'");

    ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < img.size(); ++i)
        img.pixels[i] =
            Vec3(data[i * 3] / 255.0, data[i * 3 + 1] / 255.0, data[i * 3 + 2] / 255.0);
    return img;
}

void save_png(const ImageBuffer& image, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw InputError("save_image: cannot open '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        std::fclose(fp);
        png_destroy_write_struct(&png, &info);
        throw InputError("save_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw InputError("save_image: PNG write failed for '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Vec3& p = image.at(x, y);
            row[x * 3] = to_byte(p[0]);
            row[x * 3 + 1] = to_byte(p[1]);
            row[x * 3 + 2] = to_byte(p[2]);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void save_ppm(const ImageBuffer& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("save_image: cannot open '" + path + "'");
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    for (const Vec3& p : image.pixels) {
        uint8_t rgb[3] = {to_byte(p[0]), to_byte(p[1]), to_byte(p[2])};
        out.write(reinterpret_cast<const char*>(rgb), 3);
    }
    if (!out) throw InputError("save_image: write failed for '" + path + "'");
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw ParseError("load_image: cannot open '" + path + "'");
    uint8_t sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), 8);
    probe.close();
    static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(sig, png_sig, 8) == 0) return load_png(path);
    if (sig[0] == 'P' && sig[1] == '6') return load_ppm(path);
    throw ParseError("load_image: unsupported format in '" + path + "' (PNG or P6 PPM expected)");
}

void save_image(const ImageBuffer& image, const std::string& path) {
    if (image.width < 1 || image.height < 1)
        throw InputError("save_image: zero-dimension image");
    if (has_suffix(path, ".ppm"))
        save_ppm(image, path);
    else
        save_png(image, path);
}

}  // namespace splat
