#pragma once
// Reproducibility record written beside every result: the canonical command
// (output paths and thread counts excluded, since they cannot change any
// result byte), the master seed, a content hash of the input data, the
// resolved spec entries, and the fixed metric conventions.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vinispec {

/// FNV-1a 64-bit hash of the bytes.
std::uint64_t fnv1a64(std::string_view data);

/// The hash as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view data);

struct RunManifest {
    std::string command; // canonical command line, no --out / --threads
    std::uint64_t seed = 0;
    std::string input_path;
    std::string input_hash; // fnv1a64_hex of the input file bytes
    /// Resolved spec entries in presentation order, e.g. {"task", "region"}.
    std::vector<std::pair<std::string, std::string>> spec;
};

/// Renders the manifest with the toolkit version and the metric conventions
/// (macro F1, population variance, pooled-then-scored CV metrics).
std::string manifest_json(const RunManifest& manifest);

} // namespace vinispec
