#include "nlh/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <vector>

namespace nlh {

IoError::IoError(const std::filesystem::path& path, const std::string& reason)
    : Error(path.string() + ": " + reason), reason_(reason) {}

namespace {

class PgmReader {
public:
    PgmReader(const std::filesystem::path& path, std::string bytes)
        : path_(path), bytes_(std::move(bytes)) {}

    ImageGrid read() {
        if (bytes_.size() < 2 || bytes_[0] != 'P') throw IoError(path_, "not a PGM file");
        if (bytes_[1] != '5') throw IoError(path_, "unsupported PGM variant (only binary P5)");
        pos_ = 2;
        const long width = read_header_int();
        const long height = read_header_int();
        const long maxval = read_header_int();
        if (pos_ >= bytes_.size()) throw IoError(path_, "unexpected end of file");
        // Exactly one whitespace byte separates the header from the raster.
        if (!std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw IoError(path_, "malformed PGM header");
        }
        ++pos_;
        if (width < 1 || height < 1) throw IoError(path_, "invalid dimensions");
        if (maxval < 1 || maxval > 65535) throw IoError(path_, "unsupported bit depth");

        const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
        if (bytes_.size() - pos_ < count * bytes_per_sample) {
            throw IoError(path_, "unexpected end of file");
        }
        std::vector<double> values(count);
        const auto* data = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
        const double scale = 1.0 / static_cast<double>(maxval);
        for (std::size_t i = 0; i < count; ++i) {
            unsigned sample = 0;
            if (bytes_per_sample == 2) {
                sample = (static_cast<unsigned>(data[2 * i]) << 8) | data[2 * i + 1];
            } else {
                sample = data[i];
            }
            if (sample > static_cast<unsigned>(maxval)) {
                throw IoError(path_, "sample exceeds maxval");
            }
            values[i] = static_cast<double>(sample) * scale;
        }
        return ImageGrid(static_cast<int>(width), static_cast<int>(height), std::move(values));
    }

private:
    void skip_whitespace_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_header_int() {
        skip_whitespace_and_comments();
        if (pos_ >= bytes_.size()) throw IoError(path_, "unexpected end of file");
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000L) throw IoError(path_, "header value too large");
            ++pos_;
            ++digits;
        }
        if (digits == 0) throw IoError(path_, "malformed PGM header");
        return value;
    }

    std::filesystem::path path_;
    std::string bytes_;
    std::size_t pos_ = 0;
};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

ImageGrid read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError(path, "cannot open file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path, "cannot initialise PNG reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError(path, "cannot initialise PNG reader");
    }

    // Locals written after setjmp are indeterminate after a longjmp, so all
    // mutable state lives behind a pointer that is fixed before the call.
    struct PngState {
        std::vector<unsigned char> raster;
        std::vector<png_bytep> rows;
        png_uint_32 width = 0;
        png_uint_32 height = 0;
        int bit_depth = 0;
        int color_type = 0;
        std::size_t rowbytes = 0;
    };
    const auto state = std::make_unique<PngState>();

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path, "corrupt or truncated PNG data");
    }

    png_init_io(png, file.get());
    png_read_info(png, info);
    png_get_IHDR(png, info, &state->width, &state->height, &state->bit_depth,
                 &state->color_type, nullptr, nullptr, nullptr);

    if (state->color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path, "unsupported colour type (grayscale without alpha required)");
    }
    if (state->bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    state->rowbytes = png_get_rowbytes(png, info);
    state->raster.resize(state->rowbytes * state->height);
    state->rows.resize(state->height);
    for (png_uint_32 y = 0; y < state->height; ++y) {
        state->rows[y] = state->raster.data() + y * state->rowbytes;
    }
    png_read_image(png, state->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const png_uint_32 width = state->width;
    const png_uint_32 height = state->height;
    const int bit_depth = state->bit_depth;
    const std::size_t rowbytes = state->rowbytes;
    const auto& raster = state->raster;
    const bool wide = bit_depth == 16;
    // Low-depth samples were expanded to the full 8-bit range by libpng.
    const double maxval = wide ? 65535.0 : 255.0;
    std::vector<double> values(static_cast<std::size_t>(width) * height);
    for (png_uint_32 y = 0; y < height; ++y) {
        const unsigned char* row = raster.data() + y * rowbytes;
        for (png_uint_32 x = 0; x < width; ++x) {
            unsigned sample = wide ? (unsigned(row[2 * x]) << 8) | row[2 * x + 1] : row[x];
            values[static_cast<std::size_t>(y) * width + x] = double(sample) / maxval;
        }
    }
    return ImageGrid(static_cast<int>(width), static_cast<int>(height), std::move(values));
}

}  // namespace

ImageGrid load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open file");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    static constexpr std::array<unsigned char, 8> png_magic = {0x89, 'P', 'N', 'G',
                                                               0x0d, 0x0a, 0x1a, 0x0a};
    if (got == 8 && std::equal(png_magic.begin(), png_magic.end(),
                               reinterpret_cast<const unsigned char*>(magic.data()))) {
        in.close();
        return read_png(path);
    }
    if (got == 0) throw IoError(path, "unexpected end of file");
    in.clear();
    in.seekg(0);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return PgmReader(path, std::move(bytes)).read();
}

std::string encode_pgm16(const ImageGrid& img) {
    std::ostringstream header;
    header << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::string out = header.str();
    out.reserve(out.size() + 2 * img.size());
    for (double v : img.values()) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(clamped * 65535.0));
        out.push_back(static_cast<char>((q >> 8) & 0xff));
        out.push_back(static_cast<char>(q & 0xff));
    }
    return out;
}

void save_image(const ImageGrid& img, const std::filesystem::path& path) {
    const std::string bytes = encode_pgm16(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open file for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
}

}  // namespace nlh
