#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "netpen/error.hpp"
#include "netpen/geometry.hpp"
#include "netpen/random.hpp"

namespace netpen {

struct ClassId {
    int id = 0;
    std::string name;

    bool operator==(const ClassId&) const = default;
};

/// Bijective id <-> name table. The canonical net-defect table is
/// {0: plant, 1: hole, 2: plastic}; other corpora may load their own.
class ClassTable {
public:
    ClassTable() = default;

    explicit ClassTable(std::vector<ClassId> classes) : classes_(std::move(classes)) {
        for (size_t i = 0; i < classes_.size(); ++i) {
            if (!by_id_.emplace(classes_[i].id, i).second) {
                throw Error(ErrorCategory::Data,
                            "class table not bijective: duplicate id " + std::to_string(classes_[i].id));
            }
            if (!by_name_.emplace(classes_[i].name, i).second) {
                throw Error(ErrorCategory::Data,
                            "class table not bijective: duplicate name '" + classes_[i].name + "'");
            }
        }
    }

    static ClassTable net_defects() {
        return ClassTable({{0, "plant"}, {1, "hole"}, {2, "plastic"}});
    }

    bool contains(int id) const { return by_id_.count(id) > 0; }

    const std::string& name(int id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) {
            throw Error(ErrorCategory::Data, "unknown class id " + std::to_string(id));
        }
        return classes_[it->second].name;
    }

    std::optional<int> id_of(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        if (it == by_name_.end()) return std::nullopt;
        return classes_[it->second].id;
    }

    const std::vector<ClassId>& classes() const { return classes_; }
    size_t size() const { return classes_.size(); }
    bool empty() const { return classes_.empty(); }

    bool operator==(const ClassTable& other) const { return classes_ == other.classes_; }

private:
    std::vector<ClassId> classes_;
    std::map<int, size_t> by_id_;
    std::map<std::string, size_t> by_name_;
};

/// One annotated object from a YOLO TXT label file.
struct GroundTruthRecord {
    std::string image_id;
    int class_id = 0;
    BoundingBox box;  // NormalizedCenter
};

struct ParseIssue {
    int line = 0;
    std::string message;
};

enum class ParseMode { Strict, Lenient };

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool parse_int(std::string_view tok, int& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size();
}

inline bool parse_real(std::string_view tok, double& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size();
}

}  // namespace detail

/// Parse one YOLO TXT label file: one object per line, `class_id cx cy w h`,
/// whitespace-separated decimals, coordinates in [0,1]. Strict mode aborts on
/// the first malformed line; lenient mode skips it and records an issue.
inline std::vector<GroundTruthRecord> parse_label_file(std::string_view text,
                                                       const std::string& image_id,
                                                       const ClassTable& classes,
                                                       ParseMode mode = ParseMode::Strict,
                                                       std::vector<ParseIssue>* issues = nullptr) {
    std::vector<GroundTruthRecord> records;
    int line_no = 0;
    size_t pos = 0;
    auto fail = [&](const std::string& msg) {
        if (mode == ParseMode::Strict) {
            throw Error(ErrorCategory::Data,
                        "label parse error at line " + std::to_string(line_no) + ": " + msg);
        }
        if (issues) issues->push_back({line_no, msg});
    };
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;

        const auto tokens = detail::split_ws(line);
        if (tokens.size() != 5) {
            fail("expected 5 fields, got " + std::to_string(tokens.size()));
            continue;
        }
        int class_id = 0;
        if (!detail::parse_int(tokens[0], class_id) || class_id < 0) {
            fail("class id is not a non-negative integer: '" + std::string(tokens[0]) + "'");
            continue;
        }
        double coords[4];
        bool ok = true;
        static const char* kFieldNames[4] = {"cx", "cy", "w", "h"};
        for (int i = 0; i < 4; ++i) {
            if (!detail::parse_real(tokens[i + 1], coords[i])) {
                fail(std::string(kFieldNames[i]) + " is not a decimal value: '" + std::string(tokens[i + 1]) + "'");
                ok = false;
                break;
            }
            if (coords[i] < 0.0 || coords[i] > 1.0) {
                fail(std::string(kFieldNames[i]) + " outside [0,1]: " + std::string(tokens[i + 1]));
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        if (!classes.contains(class_id)) {
            fail("unknown class id " + std::to_string(class_id));
            continue;
        }
        records.push_back({image_id, class_id,
                           BoundingBox::normalized_center(coords[0], coords[1], coords[2], coords[3])});
    }
    return records;
}

/// Round-trip partner of parse_label_file; six decimal places per coordinate.
inline std::string serialize_label_file(const std::vector<GroundTruthRecord>& records) {
    std::string out;
    char buf[128];
    for (const auto& r : records) {
        if (r.box.convention != BoxConvention::NormalizedCenter) {
            throw Error(ErrorCategory::Data, "serialize_label_file() expects NormalizedCenter boxes");
        }
        std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", r.class_id, r.box.cx(),
                      r.box.cy(), r.box.w(), r.box.h());
        out += buf;
    }
    return out;
}

struct ManifestEntry {
    std::string image_id;
    std::string image_path;
    std::string label_path;  // empty: no labels yet (extraction skeleton)
    int width = 0;
    int height = 0;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    ClassTable classes;

    const ManifestEntry* find(std::string_view image_id) const {
        for (const auto& e : entries)
            if (e.image_id == image_id) return &e;
        return nullptr;
    }
};

inline nlohmann::ordered_json to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : m.entries) {
        j["entries"].push_back({{"image_id", e.image_id},
                                {"image_path", e.image_path},
                                {"label_path", e.label_path},
                                {"width", e.width},
                                {"height", e.height}});
    }
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : m.classes.classes()) {
        j["classes"].push_back({{"id", c.id}, {"name", c.name}});
    }
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    try {
        DatasetManifest m;
        std::vector<ClassId> classes;
        for (const auto& c : j.at("classes")) {
            classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
        }
        m.classes = ClassTable(std::move(classes));
        std::map<std::string, bool> seen;
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry{e.at("image_id").get<std::string>(),
                                e.at("image_path").get<std::string>(),
                                e.at("label_path").get<std::string>(),
                                e.at("width").get<int>(),
                                e.at("height").get<int>()};
            if (!seen.emplace(entry.image_id, true).second) {
                throw Error(ErrorCategory::Data, "manifest image_id not unique: " + entry.image_id);
            }
            m.entries.push_back(std::move(entry));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, std::string("malformed manifest JSON: ") + e.what());
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCategory::Data, "cannot open file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCategory::Data, "cannot write file: " + path.string());
    }
    out << content;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, "manifest is not valid JSON: " + std::string(e.what()));
    }
    auto m = manifest_from_json(j);
    // Relative image/label paths are taken relative to the manifest location.
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    for (auto& e : m.entries) {
        auto resolve = [&](std::string& p) {
            if (!p.empty() && std::filesystem::path(p).is_relative()) {
                p = (base / p).string();
            }
        };
        resolve(e.image_path);
        resolve(e.label_path);
    }
    return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    write_text_file(path, to_json(m).dump(2) + "\n");
}

/// Ground truth for every manifest entry; entries without a label file get an
/// empty list so the manifest always defines the image universe.
inline std::map<std::string, std::vector<GroundTruthRecord>> load_ground_truth(
    const DatasetManifest& manifest, ParseMode mode = ParseMode::Strict,
    std::vector<ParseIssue>* issues = nullptr) {
    std::map<std::string, std::vector<GroundTruthRecord>> gt;
    for (const auto& e : manifest.entries) {
        if (e.label_path.empty() || !std::filesystem::exists(e.label_path)) {
            gt[e.image_id] = {};
            continue;
        }
        gt[e.image_id] =
            parse_label_file(read_text_file(e.label_path), e.image_id, manifest.classes, mode, issues);
    }
    return gt;
}

struct SplitResult {
    std::vector<std::string> train;
    std::vector<std::string> test;
    uint64_t seed = 0;
    double ratio = 0.9;
};

enum class SplitMode { Random, Sequential };

/// Deterministic train/test split. Random mode applies a seeded Fisher-Yates
/// permutation to the manifest order; sequential mode keeps timeline order
/// (leading fraction trains). |train| = floor(ratio * N), remainder to test.
inline SplitResult split_dataset(const DatasetManifest& manifest, double ratio, uint64_t seed,
                                 SplitMode mode = SplitMode::Random) {
    if (manifest.entries.empty()) {
        throw Error(ErrorCategory::Data, "empty dataset: nothing to split");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw Error(ErrorCategory::Usage, "split ratio must be in (0,1)");
    }
    std::vector<std::string> ids;
    ids.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) ids.push_back(e.image_id);

    if (mode == SplitMode::Random) {
        std::mt19937_64 rng(seed);
        for (size_t i = ids.size() - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(next_below(rng, i + 1));
            std::swap(ids[i], ids[j]);
        }
    }
    // Tiny epsilon keeps decimal ratios like 0.3 from flooring one short.
    const auto n_train =
        static_cast<size_t>(std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));
    SplitResult result;
    result.seed = seed;
    result.ratio = ratio;
    result.train.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
    result.test.assign(ids.begin() + static_cast<long>(n_train), ids.end());
    return result;
}

inline nlohmann::ordered_json to_json(const SplitResult& s) {
    return {{"seed", s.seed}, {"ratio", s.ratio}, {"train", s.train}, {"test", s.test}};
}

inline SplitResult split_from_json(const nlohmann::json& j) {
    try {
        SplitResult s;
        s.seed = j.at("seed").get<uint64_t>();
        s.ratio = j.at("ratio").get<double>();
        s.train = j.at("train").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, std::string("malformed split JSON: ") + e.what());
    }
}

inline SplitResult load_split(const std::filesystem::path& path) {
    try {
        return split_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, "split file is not valid JSON: " + std::string(e.what()));
    }
}

inline void save_split(const SplitResult& s, const std::filesystem::path& path) {
    write_text_file(path, to_json(s).dump(2) + "\n");
}

}  // namespace netpen
