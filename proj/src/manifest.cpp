#include "berrygan/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace berrygan {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_json_line(const ManifestRecord& rec) {
    ordered_json j;
    j["id"] = rec.id;
    j["split"] = rec.split;
    j["style"] = rec.style;
    j["occluded_image"] = rec.occluded_image;
    j["occluded_mask"] = rec.occluded_mask;
    j["nonoccluded_image"] = rec.nonoccluded_image;
    j["nonoccluded_mask"] = rec.nonoccluded_mask;
    j["footprint"] = rec.footprint;
    j["scene_seed"] = rec.scene_seed;
    j["leaf_id"] = rec.leaf_id;
    j["angle"] = rec.angle;
    j["offset_x"] = rec.offset_x;
    j["offset_y"] = rec.offset_y;
    j["berry_count"] = rec.berry_count;
    return j.dump();
}

ManifestRecord record_from_json_line(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    ManifestRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.split = j.at("split").get<std::string>();
    rec.style = j.at("style").get<std::string>();
    rec.occluded_image = j.at("occluded_image").get<std::string>();
    rec.occluded_mask = j.at("occluded_mask").get<std::string>();
    rec.nonoccluded_image = j.at("nonoccluded_image").get<std::string>();
    rec.nonoccluded_mask = j.at("nonoccluded_mask").get<std::string>();
    rec.footprint = j.at("footprint").get<std::string>();
    rec.scene_seed = j.at("scene_seed").get<std::uint64_t>();
    rec.leaf_id = j.at("leaf_id").get<int>();
    rec.angle = j.at("angle").get<int>();
    rec.offset_x = j.at("offset_x").get<int>();
    rec.offset_y = j.at("offset_y").get<int>();
    rec.berry_count = j.at("berry_count").get<int>();
    if (rec.split != "train" && rec.split != "test")
        throw std::runtime_error("manifest: bad split '" + rec.split + "'");
    return rec;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    for (const ManifestRecord& rec : records) out << to_json_line(rec) << "\n";
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path, bool check_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);

    std::vector<ManifestRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json_line(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: " + path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }

    std::set<std::string> ids;
    std::set<std::uint64_t> train_seeds, test_seeds;
    for (const ManifestRecord& rec : records) {
        if (!ids.insert(rec.id).second)
            throw std::runtime_error("manifest: duplicate id '" + rec.id + "' in " + path);
        (rec.split == "train" ? train_seeds : test_seeds).insert(rec.scene_seed);
    }
    for (std::uint64_t s : train_seeds)
        if (test_seeds.count(s))
            throw std::runtime_error("manifest: scene seed " + std::to_string(s) +
                                     " appears in both splits in " + path);

    if (check_files) {
        for (const ManifestRecord& rec : records) {
            for (const std::string* rel : {&rec.occluded_image, &rec.occluded_mask,
                                           &rec.nonoccluded_image, &rec.nonoccluded_mask,
                                           &rec.footprint}) {
                std::string full = resolve_manifest_path(path, *rel);
                if (!fs::exists(full))
                    throw std::runtime_error("manifest: missing file " + full + " referenced by " + rec.id);
            }
        }
    }
    return records;
}

std::string resolve_manifest_path(const std::string& manifest_path, const std::string& rel) {
    fs::path base = fs::path(manifest_path).parent_path();
    return (base / rel).string();
}

}  // namespace berrygan
