#include "firelite/weights_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "firelite/errors.hpp"
#include "firelite/model.hpp"

namespace firelite {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'L', 'W', '1'};
constexpr std::uint8_t kDtypeF32 = 1;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large buffers.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
        const std::size_t n = std::min(kChunk, bytes.size() - off);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int shift = 0; shift < 32; shift += 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void short_string(std::string_view s, const char* what) {
        if (s.size() > std::numeric_limits<std::uint16_t>::max())
            fail(ErrorKind::Format, std::string(what) + " longer than 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        bytes(s);
    }
    std::vector<std::uint8_t>& buffer() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (n > remaining()) {
            fail(ErrorKind::Truncation, std::string("stream ends inside ") + what + " at byte " +
                                            std::to_string(pos_));
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }
    std::string_view view(std::size_t n, const char* what) {
        need(n, what);
        std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t skip(std::size_t n, const char* what) {
        need(n, what);
        const std::size_t at = pos_;
        pos_ += n;
        return at;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Structure of one tensor record located during the first pass.
struct TensorRecord {
    std::string_view name;
    Shape shape;
    std::size_t payload_offset;
};

}  // namespace

bool is_valid_tensor_name(std::string_view name) noexcept {
    if (name.empty() || name.size() > kMaxTensorNameBytes) return false;
    std::size_t i = 0;
    while (i < name.size()) {
        const auto lead = static_cast<unsigned char>(name[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (lead < 0x80) {
            len = 1;
            cp = lead;
        } else if ((lead & 0xE0) == 0xC0) {
            len = 2;
            cp = lead & 0x1F;
        } else if ((lead & 0xF0) == 0xE0) {
            len = 3;
            cp = lead & 0x0F;
        } else if ((lead & 0xF8) == 0xF0) {
            len = 4;
            cp = lead & 0x07;
        } else {
            return false;
        }
        if (i + len > name.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cont = static_cast<unsigned char>(name[i + k]);
            if ((cont & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cont & 0x3F);
        }
        // Reject overlong encodings, surrogates and out-of-range code points.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
            return false;
        }
        i += len;
    }
    return true;
}

void WeightStore::add(std::string name, Tensor tensor) {
    if (!is_valid_tensor_name(name)) fail(ErrorKind::Format, "invalid tensor name '" + name + "'");
    if (tensor.size() == 0) fail(ErrorKind::Format, "tensor '" + name + "' is empty");
    if (index_.contains(name)) fail(ErrorKind::Format, "duplicate tensor name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(tensor)});
}

void WeightStore::set_metadata(std::string key, std::string value) {
    if (key.empty()) fail(ErrorKind::Format, "metadata key must not be empty");
    metadata_[std::move(key)] = std::move(value);
}

bool WeightStore::contains(std::string_view name) const { return find(name) != nullptr; }

const Tensor* WeightStore::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].tensor;
}

const Tensor& WeightStore::get(std::string_view name) const {
    const Tensor* t = find(name);
    if (!t) fail(ErrorKind::Weight, "missing weight tensor '" + std::string(name) + "'");
    return *t;
}

std::optional<std::string> WeightStore::metadata_value(std::string_view key) const {
    const auto it = metadata_.find(std::string(key));
    if (it == metadata_.end()) return std::nullopt;
    return it->second;
}

std::size_t WeightStore::byte_size() const noexcept {
    std::size_t total = 0;
    for (const auto& e : entries_) total += e.tensor.byte_size();
    return total;
}

void WeightStore::require_metadata() const {
    for (std::string_view key : {kMetaClassNames, kMetaPreprocessing, kMetaBnEpsilon}) {
        if (!metadata_.contains(std::string(key)))
            fail(ErrorKind::Format, "missing required metadata key '" + std::string(key) + "'");
    }
}

std::vector<std::uint8_t> serialize_store(const WeightStore& store) {
    store.require_metadata();
    ByteWriter w;
    for (std::uint8_t b : kMagic) w.u8(b);
    w.u32(kFlwVersion);
    w.u32(static_cast<std::uint32_t>(store.metadata().size()));
    for (const auto& [key, value] : store.metadata()) {
        w.short_string(key, "metadata key");
        w.short_string(value, "metadata value");
    }
    w.u32(static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& [name, tensor] : store.entries()) {
        w.short_string(name, "tensor name");
        w.u8(kDtypeF32);
        if (tensor.rank() > std::numeric_limits<std::uint8_t>::max())
            fail(ErrorKind::Format, "tensor '" + name + "' rank exceeds 255");
        w.u8(static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) {
            if (d > std::numeric_limits<std::uint32_t>::max())
                fail(ErrorKind::Format, "tensor '" + name + "' dimension exceeds u32");
            w.u32(static_cast<std::uint32_t>(d));
        }
        for (float v : tensor.data()) w.f32(v);
    }
    auto& out = w.buffer();
    const std::uint32_t crc = crc32_of(out);
    w.u32(crc);
    return std::move(out);
}

std::size_t write_store(const WeightStore& store, std::ostream& sink) {
    const auto bytes = serialize_store(store);
    sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!sink) fail(ErrorKind::Io, "failed writing " + std::to_string(bytes.size()) + " bytes of weight data");
    return bytes.size();
}

WeightStore parse_store(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const std::string_view magic = r.view(4, "magic");
    if (magic != std::string_view(reinterpret_cast<const char*>(kMagic), 4))
        fail(ErrorKind::Format, "bad magic, not an FLW1 file");
    const std::uint32_t version = r.u32("version");
    if (version != kFlwVersion) fail(ErrorKind::Version, "unsupported FLW version " + std::to_string(version));

    // Pass 1: walk the declared structure without surfacing anything.
    const std::uint32_t meta_count = r.u32("metadata count");
    std::vector<std::pair<std::string_view, std::string_view>> meta;
    for (std::uint32_t i = 0; i < meta_count; ++i) {
        const std::string_view key = r.view(r.u16("metadata key length"), "metadata key");
        const std::string_view value = r.view(r.u16("metadata value length"), "metadata value");
        meta.emplace_back(key, value);
    }
    const std::uint32_t tensor_count = r.u32("tensor count");
    std::vector<TensorRecord> records;
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        TensorRecord rec;
        rec.name = r.view(r.u16("tensor name length"), "tensor name");
        const std::uint8_t dtype = r.u8("dtype");
        if (dtype != kDtypeF32)
            fail(ErrorKind::Format, "tensor '" + std::string(rec.name) + "' has unsupported dtype " +
                                        std::to_string(dtype));
        const std::uint8_t rank = r.u8("rank");
        if (rank == 0) fail(ErrorKind::Format, "tensor '" + std::string(rec.name) + "' has rank 0");
        std::size_t count = 1;
        for (std::uint8_t a = 0; a < rank; ++a) {
            const std::uint32_t d = r.u32("tensor dims");
            if (d == 0) fail(ErrorKind::Format, "tensor '" + std::string(rec.name) + "' has a zero dimension");
            rec.shape.push_back(d);
            // Payload must fit in what is left; bail before the product can overflow.
            if (count > r.remaining() / d) {
                fail(ErrorKind::Truncation, "tensor '" + std::string(rec.name) + "' declares more data than the " +
                                                "stream holds");
            }
            count *= d;
        }
        if (count > r.remaining() / sizeof(float)) {
            fail(ErrorKind::Truncation, "tensor '" + std::string(rec.name) + "' declares more data than the " +
                                            "stream holds");
        }
        rec.payload_offset = r.skip(count * sizeof(float), "tensor payload");
        records.push_back(std::move(rec));
    }
    const std::size_t body_end = r.position();
    const std::uint32_t stored_crc = r.u32("CRC32 trailer");
    if (r.remaining() != 0)
        fail(ErrorKind::Format, std::to_string(r.remaining()) + " unexpected bytes after CRC32 trailer");
    const std::uint32_t actual_crc = crc32_of(bytes.first(body_end));
    if (stored_crc != actual_crc) fail(ErrorKind::Corruption, "CRC mismatch (file is corrupted)");

    // Pass 2: materialize.
    WeightStore store;
    std::set<std::string_view> seen_keys;
    for (const auto& [key, value] : meta) {
        if (key.empty()) fail(ErrorKind::Format, "empty metadata key");
        if (!seen_keys.insert(key).second) fail(ErrorKind::Format, "duplicate metadata key '" + std::string(key) + "'");
        store.set_metadata(std::string(key), std::string(value));
    }
    std::set<std::string_view> seen_names;
    for (const auto& rec : records) {
        if (!is_valid_tensor_name(rec.name)) fail(ErrorKind::Format, "invalid tensor name");
        if (!seen_names.insert(rec.name).second)
            fail(ErrorKind::Format, "duplicate tensor name '" + std::string(rec.name) + "'");
        const std::size_t n = element_count(rec.shape);
        std::vector<float> values(n);
        const std::uint8_t* p = bytes.data() + rec.payload_offset;
        for (std::size_t i = 0; i < n; ++i, p += 4) {
            const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                    (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
            values[i] = std::bit_cast<float>(u);
            if (!std::isfinite(values[i]))
                fail(ErrorKind::Data, "tensor '" + std::string(rec.name) + "' holds a non-finite value");
        }
        store.add(std::string(rec.name), Tensor::adopt(rec.shape, std::move(values)));
    }
    store.require_metadata();
    return store;
}

WeightStore read_store(std::istream& source) {
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
    if (source.bad()) fail(ErrorKind::Io, "failed reading weight stream");
    return parse_store(bytes);
}

WeightStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open weight file '" + path.string() + "'");
    return read_store(in);
}

void save_store(const WeightStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot create weight file '" + path.string() + "'");
    write_store(store, out);
    out.close();
    if (!out) fail(ErrorKind::Io, "failed closing weight file '" + path.string() + "'");
}

std::vector<std::string> class_names_from(const WeightStore& store) {
    const auto value = store.metadata_value(kMetaClassNames);
    if (!value) fail(ErrorKind::Weight, "weight file has no class_names metadata");
    std::vector<std::string> names;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value->find(',', start);
        names.push_back(value->substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return names;
}

std::string ValidationIssue::describe() const {
    switch (kind) {
        case IssueKind::Missing:
            return "missing tensor '" + tensor + "' (layer " + layer + ", expected " + shape_to_string(expected) + ")";
        case IssueKind::ShapeMismatch:
            return "shape mismatch for '" + tensor + "' (layer " + layer + "): expected " + shape_to_string(expected) +
                   ", found " + shape_to_string(found);
        case IssueKind::Unused:
            return "unused tensor '" + tensor + "' (" + shape_to_string(found) + ")";
    }
    return tensor;
}

std::size_t ValidationReport::count(IssueKind kind) const noexcept {
    std::size_t n = 0;
    for (const auto& issue : issues) n += issue.kind == kind ? 1 : 0;
    return n;
}

ValidationReport validate_against(const WeightStore& store, const ModelGraph& graph) {
    ValidationReport report;
    std::set<std::string> consumed;
    for (const auto& layer : graph.layers) {
        for (const auto& spec : expected_weights(layer)) {
            consumed.insert(spec.name);
            const Tensor* found = store.find(spec.name);
            if (!found) {
                report.issues.push_back({IssueKind::Missing, layer.name, spec.name, spec.shape, {}});
            } else if (found->shape() != spec.shape) {
                report.issues.push_back({IssueKind::ShapeMismatch, layer.name, spec.name, spec.shape, found->shape()});
            }
        }
    }
    for (const auto& [name, tensor] : store.entries()) {
        if (!consumed.contains(name)) report.issues.push_back({IssueKind::Unused, {}, name, {}, tensor.shape()});
    }
    return report;
}

}  // namespace firelite
