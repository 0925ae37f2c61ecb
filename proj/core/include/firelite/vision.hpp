#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "firelite/tensor.hpp"

namespace firelite {

/// Identifier stamped into weight metadata; the CLI refuses weights produced
/// under any other preprocessing.
inline constexpr std::string_view kPreprocessingId = "mobilenet_scale_127.5";

struct RawImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // RGB8, row-major

    /// Throws a shape error when a dimension is zero or the buffer length is
    /// not width * height * 3.
    void validate() const;

    std::uint8_t at(std::size_t x, std::size_t y, std::size_t channel) const {
        return pixels[(y * width + x) * 3 + channel];
    }

    friend bool operator==(const RawImage&, const RawImage&) = default;
};

enum class ImageFormat { Png, Jpeg, Unknown };

std::string_view to_string(ImageFormat format) noexcept;
ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG or JPEG into RGB8. Gray is replicated, alpha is dropped and
/// 16-bit samples are reduced to 8 bits. Any decoder error or warning
/// (truncation included) is a decode error naming the sniffed format.
RawImage decode_image(std::span<const std::uint8_t> bytes);

/// Bilinear resize with half-pixel centers and no antialiasing:
/// source coordinate s = (d + 0.5) * in / out - 0.5, clamped to the image.
/// Results are rounded to the nearest integer.
RawImage resize_bilinear(const RawImage& image, std::size_t out_width, std::size_t out_height);

/// 1 x H x W x 3 tensor with x / 127.5 - 1 applied to every sample.
Tensor image_to_tensor(const RawImage& image);

/// decode -> resize to 224 x 224 -> scale to [-1, 1].
Tensor preprocess(std::span<const std::uint8_t> bytes);

/// Reads a whole file; throws an I/O error naming the path.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace firelite
