#pragma once

#include <filesystem>
#include <string>

#include "nlh/image.hpp"

namespace nlh {

/// Raised for unreadable, malformed, or unwritable image files.
class IoError : public Error {
public:
    IoError(const std::filesystem::path& path, const std::string& reason);

    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

/// Reads a binary (P5) PGM with 8- or 16-bit samples, or a grayscale PNG.
/// Values are scaled into [0,1] by the file's maximum sample value.
ImageGrid load_image(const std::filesystem::path& path);

/// Writes a 16-bit binary PGM. Values are clamped to [0,1] and rounded to the
/// nearest of 65536 levels, so identical input gives identical bytes.
void save_image(const ImageGrid& img, const std::filesystem::path& path);

/// Encodes an image as the bytes save_image would write.
std::string encode_pgm16(const ImageGrid& img);

}  // namespace nlh
