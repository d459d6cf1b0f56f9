#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace berrygan {

// One line of a dataset manifest. Paths are stored relative to the manifest
// file's directory.
struct ManifestRecord {
    std::string id;
    std::string split;  // "train" or "test"
    std::string style;  // "dense" or "trained"
    std::string occluded_image;
    std::string occluded_mask;
    std::string nonoccluded_image;
    std::string nonoccluded_mask;
    std::string footprint;
    std::uint64_t scene_seed = 0;
    int leaf_id = -1;
    int angle = 0;
    int offset_x = 0;
    int offset_y = 0;
    int berry_count = 0;

    bool operator==(const ManifestRecord&) const = default;
};

std::string to_json_line(const ManifestRecord& rec);
ManifestRecord record_from_json_line(const std::string& line);

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Load and validate: ids unique, splits share no scene seed, and (when
// check_files) every referenced file exists next to the manifest.
std::vector<ManifestRecord> read_manifest(const std::string& path, bool check_files = true);

// Resolve a record path against the manifest location.
std::string resolve_manifest_path(const std::string& manifest_path, const std::string& rel);

}  // namespace berrygan
