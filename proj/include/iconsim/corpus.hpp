#pragma once
// Icon corpus ingestion and the developer/name-similarity heuristic that
// proposes candidate groups of visually similar apps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "iconsim/error.hpp"

namespace iconsim {

struct IconRecord {
    std::string app_id;
    std::filesystem::path icon_path;  // resolved against the manifest directory
    std::string app_name;
    std::string developer;
    std::string category;
    std::uint64_t downloads = 0;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<IconRecord> records, std::filesystem::path source_manifest = {})
        : records_(std::move(records)), source_manifest_(std::move(source_manifest)) {
        rows_.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (!rows_.emplace(records_[i].app_id, i).second) {
                throw Error(Errc::duplicate_id, "duplicate app_id '" + records_[i].app_id + "'");
            }
        }
    }

    const std::vector<IconRecord>& records() const noexcept { return records_; }
    const std::filesystem::path& source_manifest() const noexcept { return source_manifest_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const IconRecord& operator[](std::size_t row) const { return records_.at(row); }

    std::optional<std::size_t> row_of(std::string_view app_id) const {
        auto it = rows_.find(std::string(app_id));
        if (it == rows_.end()) return std::nullopt;
        return it->second;
    }

    const IconRecord& at(std::string_view app_id) const {
        auto row = row_of(app_id);
        if (!row) throw Error(Errc::not_found, "unknown app_id '" + std::string(app_id) + "'");
        return records_[*row];
    }

private:
    std::vector<IconRecord> records_;
    std::filesystem::path source_manifest_;
    std::unordered_map<std::string, std::size_t> rows_;
};

namespace detail {

inline IconRecord parse_manifest_line(const std::string& line, std::size_t line_no,
                                      const std::filesystem::path& base_dir) {
    auto fail = [&](const std::string& what) {
        return Error(Errc::parse, "manifest line " + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw fail(e.what());
    }
    if (!j.is_object()) throw fail("expected a JSON object");

    auto text = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw fail(std::string("missing string field '") + key + "'");
        return it->get<std::string>();
    };

    IconRecord rec;
    rec.app_id = text("app_id");
    if (rec.app_id.empty()) throw fail("empty app_id");
    std::filesystem::path icon = text("icon_path");
    rec.icon_path = icon.is_absolute() ? icon : base_dir / icon;
    rec.app_name = text("app_name");
    rec.developer = text("developer");
    rec.category = text("category");

    auto dl = j.find("downloads");
    if (dl == j.end() || !dl->is_number_integer()) throw fail("missing integer field 'downloads'");
    if (dl->is_number_unsigned()) {
        rec.downloads = dl->get<std::uint64_t>();
    } else {
        const auto value = dl->get<std::int64_t>();
        if (value < 0) throw fail("downloads must be non-negative");
        rec.downloads = static_cast<std::uint64_t>(value);
    }
    return rec;
}

}  // namespace detail

/// Reads a JSON-lines manifest. Blank lines are skipped; relative icon paths
/// are resolved against the manifest's directory.
inline Corpus load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());

    const auto base_dir = path.parent_path();
    std::vector<IconRecord> records;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto rec = detail::parse_manifest_line(line, line_no, base_dir);
        if (auto [it, fresh] = seen.emplace(rec.app_id, line_no); !fresh) {
            throw Error(Errc::duplicate_id, "duplicate app_id '" + rec.app_id + "' on manifest line " +
                                                std::to_string(line_no) + " (first seen on line " +
                                                std::to_string(it->second) + ")");
        }
        records.push_back(std::move(rec));
    }
    if (in.bad()) throw Error(Errc::io, "read failure on manifest " + path.string());
    return Corpus(std::move(records), path);
}

namespace detail {

// Decodes UTF-8 into code points; stray bytes map to themselves.
inline std::vector<char32_t> code_points(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
        bool ok = len != 0 && i + len <= s.size();
        char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto c = static_cast<unsigned char>(s[i + k]);
            if ((c >> 6) != 0x2) ok = false;
            cp = (cp << 6) | (c & 0x3F);
        }
        if (!ok) {
            out.push_back(b);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline char32_t ascii_lower(char32_t c) { return (c >= U'A' && c <= U'Z') ? c + 32 : c; }

}  // namespace detail

/// Cosine similarity of lowercase character-unigram frequency vectors
/// (whitespace counts as a character).
inline double char_cosine_similarity(std::string_view a, std::string_view b) {
    std::map<char32_t, std::pair<double, double>> counts;
    for (char32_t c : detail::code_points(a)) counts[detail::ascii_lower(c)].first += 1.0;
    for (char32_t c : detail::code_points(b)) counts[detail::ascii_lower(c)].second += 1.0;

    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [_, ab] : counts) {
        dot += ab.first * ab.second;
        na += ab.first * ab.first;
        nb += ab.second * ab.second;
    }
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

struct LabelledGroup {
    std::string base_app_id;
    std::vector<std::string> member_app_ids;

    /// Base followed by members.
    std::vector<std::string> all_app_ids() const {
        std::vector<std::string> ids{base_app_id};
        ids.insert(ids.end(), member_app_ids.begin(), member_app_ids.end());
        return ids;
    }

    bool operator==(const LabelledGroup&) const = default;
};

struct GroupOptions {
    double name_threshold = 0.8;
    std::uint64_t min_base_downloads = 500'000;
    std::size_t min_apps_per_developer = 3;
};

/// Candidate labelled groups: for each developer with enough apps and a
/// popular enough flagship, the flagship plus same-category apps whose names
/// are close to it. Groups are ordered by base app_id; members keep corpus order.
inline std::vector<LabelledGroup> propose_labelled_groups(const Corpus& corpus, const GroupOptions& opts = {}) {
    if (!(opts.name_threshold >= 0.0 && opts.name_threshold <= 1.0)) {
        throw Error(Errc::invalid_argument, "name_threshold must lie in [0, 1]");
    }
    std::map<std::string, std::vector<std::size_t>> by_developer;
    for (std::size_t i = 0; i < corpus.size(); ++i) by_developer[corpus[i].developer].push_back(i);

    std::vector<LabelledGroup> groups;
    for (const auto& [developer, rows] : by_developer) {
        if (rows.size() < opts.min_apps_per_developer) continue;
        const std::size_t base = *std::min_element(rows.begin(), rows.end(), [&](std::size_t x, std::size_t y) {
            const auto& rx = corpus[x];
            const auto& ry = corpus[y];
            if (rx.downloads != ry.downloads) return rx.downloads > ry.downloads;
            return rx.app_id < ry.app_id;
        });
        const auto& base_rec = corpus[base];
        if (base_rec.downloads < opts.min_base_downloads) continue;

        LabelledGroup group{base_rec.app_id, {}};
        for (std::size_t row : rows) {
            if (row == base) continue;
            const auto& rec = corpus[row];
            if (rec.category != base_rec.category) continue;
            if (char_cosine_similarity(rec.app_name, base_rec.app_name) < opts.name_threshold) continue;
            group.member_app_ids.push_back(rec.app_id);
        }
        if (!group.member_app_ids.empty()) groups.push_back(std::move(group));
    }
    std::sort(groups.begin(), groups.end(),
              [](const LabelledGroup& x, const LabelledGroup& y) { return x.base_app_id < y.base_app_id; });
    return groups;
}

inline void to_json(nlohmann::json& j, const LabelledGroup& g) {
    j = nlohmann::json{{"base_app_id", g.base_app_id}, {"member_app_ids", g.member_app_ids}};
}

inline void from_json(const nlohmann::json& j, LabelledGroup& g) {
    j.at("base_app_id").get_to(g.base_app_id);
    j.at("member_app_ids").get_to(g.member_app_ids);
}

inline void write_groups(const std::filesystem::path& path, const std::vector<LabelledGroup>& groups) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    for (const auto& g : groups) out << nlohmann::json(g).dump() << '\n';
    if (!out) throw Error(Errc::io, "write failure on " + path.string());
}

inline std::vector<LabelledGroup> read_groups(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open groups file " + path.string());
    std::vector<LabelledGroup> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            groups.push_back(nlohmann::json::parse(line).get<LabelledGroup>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, "groups line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return groups;
}

}  // namespace iconsim
