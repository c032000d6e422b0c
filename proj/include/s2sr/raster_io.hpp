#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "s2sr/error.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

static_assert(std::endian::native == std::endian::little, "RAS1 I/O assumes a little-endian host");

namespace detail {

inline constexpr std::array<char, 4> kRasMagic{'R', 'A', 'S', '1'};
inline constexpr std::uint32_t kRasVersion = 1;
inline constexpr std::size_t kRasHeaderBytes = 24;
// Refuse headers describing more than 2^31 samples.
inline constexpr std::uint64_t kRasMaxSamples = std::uint64_t{1} << 31U;

inline void put_u32(std::string& buf, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    std::memcpy(&v, p, 4);
    return v;
}

}  // namespace detail

/// Serializes a raster into the RAS1 byte layout (header + binary32 payload).
inline std::string encode_raster(const Raster& r) {
    if (r.bands < 1) throw DataError("raster has no bands");
    if (r.data.size() != static_cast<std::size_t>(r.bands) * r.plane_size()) throw DataError("raster data length mismatch");
    if (!r.all_finite()) throw DataError("raster contains non-finite values");
    std::string buf;
    buf.reserve(detail::kRasHeaderBytes + r.data.size() * 4);
    buf.append(detail::kRasMagic.data(), 4);
    detail::put_u32(buf, detail::kRasVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(r.bands));
    detail::put_u32(buf, static_cast<std::uint32_t>(r.height));
    detail::put_u32(buf, static_cast<std::uint32_t>(r.width));
    detail::put_u32(buf, 0);
    const auto* bytes = reinterpret_cast<const char*>(r.data.data());
    buf.append(bytes, r.data.size() * sizeof(float));
    return buf;
}

inline Raster decode_raster(const std::string& buf) {
    if (buf.size() < detail::kRasHeaderBytes) throw DataError("truncated header");
    if (std::memcmp(buf.data(), detail::kRasMagic.data(), 4) != 0) throw DataError("bad magic");
    if (detail::get_u32(buf.data() + 4) != detail::kRasVersion) throw DataError("unsupported version");
    const std::uint64_t bands = detail::get_u32(buf.data() + 8);
    const std::uint64_t height = detail::get_u32(buf.data() + 12);
    const std::uint64_t width = detail::get_u32(buf.data() + 16);
    if (bands == 0) throw DataError("zero bands");
    if (height > 0 && width > 0 && bands * height * width / (height * width) != bands) throw DataError("dimension overflow");
    const std::uint64_t samples = bands * height * width;
    if (height > INT32_MAX || width > INT32_MAX || samples > detail::kRasMaxSamples) throw DataError("dimension overflow");
    if (buf.size() - detail::kRasHeaderBytes < samples * 4) throw DataError("truncated payload");
    Raster r(static_cast<int>(bands), static_cast<int>(height), static_cast<int>(width));
    std::memcpy(r.data.data(), buf.data() + detail::kRasHeaderBytes, samples * 4);
    return r;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

inline Raster read_raster(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
    return decode_raster(read_file_bytes(path));
}

inline void write_raster(const Raster& r, const std::filesystem::path& path) { write_file_bytes(path, encode_raster(r)); }

// ---------------------------------------------------------------------------
// PNG ingest / preview export

namespace detail {

struct PngReadGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() { png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr); }
};

struct PngWriteGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() { png_destroy_write_struct(&png, info != nullptr ? &info : nullptr); }
};

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace detail

/// Reads an 8- or 16-bit grayscale/RGB PNG (alpha dropped, palette expanded)
/// and rescales it to the 12-bit DN range.
inline Raster read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw DataError("cannot open " + path.string());
    detail::PngReadGuard g;
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png == nullptr) throw DataError("png_create_read_struct failed");
    g.info = png_create_info_struct(g.png);
    if (g.info == nullptr) throw DataError("png_create_info_struct failed");
    // Buffers live outside the setjmp scope so a libpng longjmp never skips a destructor.
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(g.png))) throw DataError("corrupt PNG: " + path.string());

    png_init_io(g.png, fp.get());
    png_read_info(g.png, g.info);
    const int color = png_get_color_type(g.png, g.info);
    int depth = png_get_bit_depth(g.png, g.info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
    if ((color & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(g.png);
    if (depth == 16) png_set_swap(g.png);
    png_read_update_info(g.png, g.info);

    const int width = static_cast<int>(png_get_image_width(g.png, g.info));
    const int height = static_cast<int>(png_get_image_height(g.png, g.info));
    const int channels = png_get_channels(g.png, g.info);
    depth = png_get_bit_depth(g.png, g.info);
    if (channels != 1 && channels != 3) throw DataError("unsupported PNG channel layout");

    const std::size_t rowbytes = png_get_rowbytes(g.png, g.info);
    pixels.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) rows[static_cast<std::size_t>(r)] = pixels.data() + rowbytes * r;
    png_read_image(g.png, rows.data());

    Raster out(channels, height, width);
    const double scale = depth == 16 ? kPeakDN / 65535.0 : kPeakDN / 255.0;
    for (int r = 0; r < height; ++r) {
        const unsigned char* row = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < width; ++c)
            for (int b = 0; b < channels; ++b) {
                const std::size_t i = static_cast<std::size_t>(c) * channels + b;
                double v = 0.0;
                if (depth == 16) {
                    std::uint16_t s = 0;
                    std::memcpy(&s, row + 2 * i, 2);
                    v = s;
                } else {
                    v = row[i];
                }
                out.at(b, r, c) = static_cast<float>(v * scale);
            }
    }
    return out;
}

/// 8-bit PNG preview: 0-4095 mapped linearly to 0-255, clamped. Bands must be 1 or 3.
inline void write_png_preview(const Raster& r, const std::filesystem::path& path) {
    if (r.bands != 1 && r.bands != 3) throw DataError("PNG preview needs 1 or 3 bands");
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw DataError("cannot write " + path.string());
    detail::PngWriteGuard g;
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png == nullptr) throw DataError("png_create_write_struct failed");
    g.info = png_create_info_struct(g.png);
    if (g.info == nullptr) throw DataError("png_create_info_struct failed");
    std::vector<unsigned char> row(static_cast<std::size_t>(r.width) * r.bands);
    if (setjmp(png_jmpbuf(g.png))) throw DataError("PNG write failed: " + path.string());

    png_init_io(g.png, fp.get());
    png_set_IHDR(g.png, g.info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
                 r.bands == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x)
            for (int b = 0; b < r.bands; ++b) {
                const double v = std::round(static_cast<double>(r.at(b, y, x)) * 255.0 / kPeakDN);
                row[static_cast<std::size_t>(x) * r.bands + b] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
        png_write_row(g.png, row.data());
    }
    png_write_end(g.png, nullptr);
}

/// Converts every *.png in png_dir into RAS1 files. With tile > 0 each image is
/// cut into a grid of tile x tile windows named <stem>__tNN.ras (leftover
/// borders dropped); with tile == 0 the image is kept whole, trimmed to even
/// dimensions. Returns the number of files written.
inline std::size_t ingest_png_dir(const std::filesystem::path& png_dir, const std::filesystem::path& out_dir, int tile) {
    if (tile < 0 || tile % 2 != 0) throw UsageError("tile size must be even and non-negative");
    if (!std::filesystem::is_directory(png_dir)) throw DataError("not a directory: " + png_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(png_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::filesystem::create_directories(out_dir);
    std::size_t written = 0;
    for (const auto& f : files) {
        const Raster img = read_png(f);
        const std::string stem = f.stem().string();
        if (tile == 0) {
            write_raster(window(img, 0, 0, img.height & ~1, img.width & ~1), out_dir / (stem + ".ras"));
            ++written;
            continue;
        }
        int k = 0;
        for (int r = 0; r + tile <= img.height; r += tile)
            for (int c = 0; c + tile <= img.width; c += tile) {
                char name[32];
                std::snprintf(name, sizeof name, "__t%02d.ras", k++);
                write_raster(window(img, r, c, tile, tile), out_dir / (stem + name));
                ++written;
            }
    }
    return written;
}

}  // namespace s2sr
