#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "firelite/tensor.hpp"

namespace firelite {

struct ModelGraph;

// Required metadata keys.
inline constexpr std::string_view kMetaClassNames = "class_names";
inline constexpr std::string_view kMetaPreprocessing = "preprocessing";
inline constexpr std::string_view kMetaBnEpsilon = "bn_epsilon";

inline constexpr std::size_t kMaxTensorNameBytes = 255;
inline constexpr std::uint32_t kFlwVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Named tensors in insertion order plus string metadata.
class WeightStore {
public:
    /// Appends a tensor. Throws a format error for an invalid or duplicate name.
    void add(std::string name, Tensor tensor);
    void set_metadata(std::string key, std::string value);

    bool contains(std::string_view name) const;
    const Tensor* find(std::string_view name) const;
    /// Throws a weight error naming the tensor when it is absent.
    const Tensor& get(std::string_view name) const;

    const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
    std::optional<std::string> metadata_value(std::string_view key) const;

    /// Sum of payload bytes over all tensors.
    std::size_t byte_size() const noexcept;

    /// Throws a format error when a required metadata key is missing.
    void require_metadata() const;

    friend bool operator==(const WeightStore& a, const WeightStore& b) {
        return a.entries_ == b.entries_ && a.metadata_ == b.metadata_;
    }

private:
    std::vector<NamedTensor> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::string, std::string> metadata_;
};

/// True when `name` is non-empty, at most 255 bytes and valid UTF-8.
bool is_valid_tensor_name(std::string_view name) noexcept;

/// Serializes to the FLW1 container:
///
///   "FLW1" | u32 version=1 | u32 n_meta | n_meta x (u16 klen, key, u16 vlen, value)
///   | u32 n_tensors | n_tensors x (u16 name_len, name, u8 dtype=1, u8 rank,
///   rank x u32 dim, f32 payload) | u32 CRC32 of everything before it
///
/// All integers and floats are little-endian. Metadata is written in key order.
std::vector<std::uint8_t> serialize_store(const WeightStore& store);

/// Writes serialize_store(store) to `sink`; returns the byte count. Throws an
/// I/O error when the stream fails.
std::size_t write_store(const WeightStore& store, std::ostream& sink);

/// Parses and fully validates an FLW1 buffer. The whole structure is walked and
/// the CRC checked before any tensor is materialized.
WeightStore parse_store(std::span<const std::uint8_t> bytes);
WeightStore read_store(std::istream& source);

WeightStore load_store(const std::filesystem::path& path);
void save_store(const WeightStore& store, const std::filesystem::path& path);

/// Splits the comma-separated class_names metadata value.
std::vector<std::string> class_names_from(const WeightStore& store);

enum class IssueKind { Missing, ShapeMismatch, Unused };

struct ValidationIssue {
    IssueKind kind;
    std::string layer;   // empty for Unused
    std::string tensor;
    Shape expected;      // empty for Unused
    Shape found;         // empty for Missing

    std::string describe() const;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const noexcept { return issues.empty(); }
    std::size_t count(IssueKind kind) const noexcept;
};

/// Checks every weight the graph consumes for presence and shape, then lists
/// store tensors no layer consumes. Problems are reported, never thrown.
ValidationReport validate_against(const WeightStore& store, const ModelGraph& graph);

}  // namespace firelite
