#include "firelite/vision.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "firelite/errors.hpp"

namespace firelite {
namespace {

// Larger declared dimensions are rejected before any pixel allocation.
constexpr std::size_t kMaxImageSide = 1u << 14;

struct PngState {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
    RawImage* out = nullptr;
    std::vector<png_bytep> rows;
    char message[256] = {};
};

void png_read_bytes(png_structp png, png_bytep dst, png_size_t n) {
    auto* s = static_cast<PngState*>(png_get_io_ptr(png));
    if (n > s->data.size() - s->pos) png_error(png, "unexpected end of PNG data");
    std::memcpy(dst, s->data.data() + s->pos, n);
    s->pos += n;
}

[[noreturn]] void png_on_error(png_structp png, png_const_charp msg) {
    auto* s = static_cast<PngState*>(png_get_error_ptr(png));
    std::snprintf(s->message, sizeof(s->message), "%s", msg ? msg : "unknown libpng error");
    png_longjmp(png, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

// Returns false with state->message filled on failure. Only objects owned by
// the caller are touched after setjmp.
bool decode_png_into(PngState* state) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, state, png_on_error, png_on_warning);
    if (!png) {
        std::snprintf(state->message, sizeof(state->message), "cannot allocate libpng reader");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        std::snprintf(state->message, sizeof(state->message), "cannot allocate libpng info");
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_user_limits(png, kMaxImageSide, kMaxImageSide);
    png_set_read_fn(png, state, png_read_bytes);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const std::size_t width = png_get_image_width(png, info);
    const std::size_t height = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != width * 3) png_error(png, "unexpected row layout after conversion to RGB8");

    state->out->width = width;
    state->out->height = height;
    state->out->pixels.resize(width * height * 3);
    state->rows.resize(height);
    for (std::size_t y = 0; y < height; ++y) state->rows[y] = state->out->pixels.data() + y * width * 3;
    png_read_image(png, state->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

[[noreturn]] void jpeg_on_error(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Warnings (premature end of data, corrupt segments) are fatal.
void jpeg_on_message(j_common_ptr cinfo, int level) {
    if (level < 0) jpeg_on_error(cinfo);
}

struct JpegState {
    std::span<const std::uint8_t> data;
    RawImage* out = nullptr;
    jpeg_decompress_struct cinfo;
    JpegError err;
};

bool decode_jpeg_into(JpegState* s) {
    s->cinfo.err = jpeg_std_error(&s->err.mgr);
    s->err.mgr.error_exit = jpeg_on_error;
    s->err.mgr.emit_message = jpeg_on_message;
    s->err.message[0] = '\0';
    if (setjmp(s->err.jump)) {
        jpeg_destroy_decompress(&s->cinfo);
        return false;
    }
    jpeg_create_decompress(&s->cinfo);
    jpeg_mem_src(&s->cinfo, s->data.data(), static_cast<unsigned long>(s->data.size()));
    jpeg_read_header(&s->cinfo, TRUE);
    s->cinfo.out_color_space = JCS_RGB;
    if (s->cinfo.image_width > kMaxImageSide || s->cinfo.image_height > kMaxImageSide) {
        std::snprintf(s->err.message, sizeof(s->err.message), "image dimensions exceed %zu", kMaxImageSide);
        jpeg_destroy_decompress(&s->cinfo);
        return false;
    }
    jpeg_start_decompress(&s->cinfo);
    if (s->cinfo.output_components != 3) {
        std::snprintf(s->err.message, sizeof(s->err.message), "unsupported component count %d",
                      s->cinfo.output_components);
        jpeg_destroy_decompress(&s->cinfo);
        return false;
    }
    const std::size_t width = s->cinfo.output_width;
    const std::size_t height = s->cinfo.output_height;
    s->out->width = width;
    s->out->height = height;
    s->out->pixels.resize(width * height * 3);
    while (s->cinfo.output_scanline < s->cinfo.output_height) {
        JSAMPROW row = s->out->pixels.data() + static_cast<std::size_t>(s->cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&s->cinfo, &row, 1);
    }
    jpeg_finish_decompress(&s->cinfo);
    jpeg_destroy_decompress(&s->cinfo);
    return true;
}

}  // namespace

void RawImage::validate() const {
    if (width == 0 || height == 0) fail(ErrorKind::Shape, "image dimensions must be >= 1");
    if (pixels.size() != width * height * 3) {
        fail(ErrorKind::Shape, "image buffer holds " + std::to_string(pixels.size()) + " bytes, expected " +
                                   std::to_string(width * height * 3));
    }
}

std::string_view to_string(ImageFormat format) noexcept {
    switch (format) {
        case ImageFormat::Png: return "PNG";
        case ImageFormat::Jpeg: return "JPEG";
        case ImageFormat::Unknown: return "unknown";
    }
    return "unknown";
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
    static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin())) return ImageFormat::Png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::Jpeg;
    return ImageFormat::Unknown;
}

RawImage decode_image(std::span<const std::uint8_t> bytes) {
    const ImageFormat format = sniff_format(bytes);
    RawImage image;
    switch (format) {
        case ImageFormat::Png: {
            PngState state;
            state.data = bytes;
            state.out = &image;
            if (!decode_png_into(&state)) fail(ErrorKind::Decode, "PNG: " + std::string(state.message));
            break;
        }
        case ImageFormat::Jpeg: {
            auto state = std::make_unique<JpegState>();
            state->data = bytes;
            state->out = &image;
            if (!decode_jpeg_into(state.get())) fail(ErrorKind::Decode, "JPEG: " + std::string(state->err.message));
            break;
        }
        case ImageFormat::Unknown:
            fail(ErrorKind::Decode, "unknown format: data is neither PNG nor JPEG");
    }
    image.validate();
    return image;
}

RawImage resize_bilinear(const RawImage& image, std::size_t out_width, std::size_t out_height) {
    image.validate();
    if (out_width == 0 || out_height == 0) fail(ErrorKind::Shape, "resize target must be at least 1x1");
    if (out_width == image.width && out_height == image.height) return image;

    struct Tap {
        std::size_t lo, hi;
        float t;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        const float scale = static_cast<float>(in) / static_cast<float>(out);
        const float last = static_cast<float>(in - 1);
        std::vector<Tap> result(out);
        for (std::size_t d = 0; d < out; ++d) {
            const float s = std::clamp((static_cast<float>(d) + 0.5f) * scale - 0.5f, 0.0f, last);
            const float base = std::floor(s);
            const auto lo = static_cast<std::size_t>(base);
            result[d] = {lo, std::min(lo + 1, in - 1), s - base};
        }
        return result;
    };
    const auto xs = taps(image.width, out_width);
    const auto ys = taps(image.height, out_height);

    RawImage out{out_width, out_height, std::vector<std::uint8_t>(out_width * out_height * 3)};
    for (std::size_t y = 0; y < out_height; ++y) {
        const std::uint8_t* top = image.pixels.data() + ys[y].lo * image.width * 3;
        const std::uint8_t* bottom = image.pixels.data() + ys[y].hi * image.width * 3;
        for (std::size_t x = 0; x < out_width; ++x) {
            const Tap& tx = xs[x];
            for (std::size_t c = 0; c < 3; ++c) {
                const float tl = top[tx.lo * 3 + c], tr = top[tx.hi * 3 + c];
                const float bl = bottom[tx.lo * 3 + c], br = bottom[tx.hi * 3 + c];
                const float upper = tl + (tr - tl) * tx.t;
                const float lower = bl + (br - bl) * tx.t;
                const float v = upper + (lower - upper) * ys[y].t;
                out.pixels[(y * out_width + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5f), 0.0f, 255.0f));
            }
        }
    }
    return out;
}

Tensor image_to_tensor(const RawImage& image) {
    image.validate();
    std::vector<float> values(image.pixels.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(image.pixels[i]) / 127.5f - 1.0f;
    return Tensor::adopt({1, image.height, image.width, 3}, std::move(values));
}

Tensor preprocess(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kSide = 224;
    return image_to_tensor(resize_bilinear(decode_image(bytes), kSide, kSide));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::Io, "failed reading '" + path.string() + "'");
    return bytes;
}

}  // namespace firelite
