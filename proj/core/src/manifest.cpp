#include "vinispec/manifest.hpp"

#include <json.hpp>

#include "vinispec/version.hpp"

namespace vinispec {

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char byte : data) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fnv1a64_hex(std::string_view data) {
    static const char digits[] = "0123456789abcdef";
    std::uint64_t hash = fnv1a64(data);
    std::string out(16, '0');
    for (std::size_t i = 16; i-- > 0;) {
        out[i] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

std::string manifest_json(const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["command"] = manifest.command;
    doc["seed"] = manifest.seed;
    doc["input"] = {{"path", manifest.input_path},
                    {"fnv1a64", manifest.input_hash}};
    nlohmann::ordered_json spec;
    for (const auto& [key, value] : manifest.spec) {
        spec[key] = value;
    }
    doc["spec"] = std::move(spec);
    doc["conventions"] = {{"f1_average", "macro"},
                          {"variance", "population"},
                          {"cv_metrics", "pooled-then-scored"}};
    doc["version"] = std::string(kVersion);
    return doc.dump(2) + "\n";
}

} // namespace vinispec
