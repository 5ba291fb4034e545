#pragma once
// Embedding store: binary row matrix of (content, style) float32 vectors plus
// a JSON-lines sidecar mapping row index to app_id.
//
// Layout (little-endian):
//   "ICNE" | version u32 | flags u32 | content_dim u32 | style_dim u32
//   rows u64 | projection seed u64 | config hash u64
//   input_size u32 | means f32[3] | config JSON (u32 length + bytes)
//   rows × (content f32[content_dim], style f32[style_dim])

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iconsim/binary_io.hpp"
#include "iconsim/config.hpp"
#include "iconsim/embeddings.hpp"
#include "iconsim/error.hpp"
#include "iconsim/matrix.hpp"

namespace iconsim {

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::uint32_t kStoreFlagStubBackbone = 1u << 0;

struct StoreHeader {
    std::uint32_t version = kStoreVersion;
    std::uint32_t flags = 0;
    std::uint32_t content_dim = 0;
    std::uint32_t style_dim = 0;
    std::uint64_t rows = 0;
    std::uint64_t projection_seed = 0;
    std::uint64_t config_hash = 0;
    std::uint32_t input_size = 0;
    std::array<float, 3> means{};
    std::string config_json;

    bool operator==(const StoreHeader&) const = default;
};

struct EmbeddingStore {
    StoreHeader header;
    std::vector<std::string> app_ids;
    Matrix<float> content;
    Matrix<float> style;

    std::size_t size() const noexcept { return app_ids.size(); }

    IconEmbedding embedding(std::size_t row) const {
        const auto c = content.row(row);
        const auto s = style.row(row);
        return {app_ids.at(row), {c.begin(), c.end()}, {s.begin(), s.end()}};
    }

    PipelineConfig config() const { return PipelineConfig::from_json(nlohmann::json::parse(header.config_json)); }
};

/// An empty store whose header echoes `cfg`.
inline EmbeddingStore make_store(const PipelineConfig& cfg, std::size_t content_dim, std::size_t style_dim) {
    EmbeddingStore s;
    s.header.flags = cfg.backbone == BackboneKind::stub ? kStoreFlagStubBackbone : 0;
    s.header.content_dim = static_cast<std::uint32_t>(content_dim);
    s.header.style_dim = static_cast<std::uint32_t>(style_dim);
    s.header.projection_seed = cfg.projection_seed;
    s.header.config_hash = cfg.hash();
    s.header.input_size = static_cast<std::uint32_t>(cfg.input_size);
    for (int c = 0; c < 3; ++c) s.header.means[c] = static_cast<float>(cfg.means[c]);
    s.header.config_json = cfg.canonical_json();
    s.content = Matrix<float>(0, content_dim);
    s.style = Matrix<float>(0, style_dim);
    return s;
}

inline void append(EmbeddingStore& store, const IconEmbedding& e) {
    if (e.content.size() != store.header.content_dim || e.style.size() != store.header.style_dim) {
        throw Error(Errc::dimension_mismatch, "embedding for '" + e.app_id + "' does not match store dimensions");
    }
    store.content.push_row(e.content);
    store.style.push_row(e.style);
    store.app_ids.push_back(e.app_id);
    store.header.rows = store.app_ids.size();
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p += ".ids.jsonl";
    return p;
}

inline void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
    const auto& h = store.header;
    if (h.rows != store.app_ids.size() || store.content.rows() != h.rows || store.style.rows() != h.rows) {
        throw Error(Errc::dimension_mismatch, "store row counts are inconsistent");
    }
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(Errc::io, "cannot write " + path.string());
        out.write("ICNE", 4);
        binio::put_u32(out, h.version);
        binio::put_u32(out, h.flags);
        binio::put_u32(out, h.content_dim);
        binio::put_u32(out, h.style_dim);
        binio::put_u64(out, h.rows);
        binio::put_u64(out, h.projection_seed);
        binio::put_u64(out, h.config_hash);
        binio::put_u32(out, h.input_size);
        for (float m : h.means) binio::put_f32(out, m);
        binio::put_string(out, h.config_json);
        for (std::size_t r = 0; r < h.rows; ++r) {
            for (float v : store.content.row(r)) binio::put_f32(out, v);
            for (float v : store.style.row(r)) binio::put_f32(out, v);
        }
        if (!out) throw Error(Errc::io, "write failure on " + path.string());
    }
    std::ofstream ids(sidecar_path(path), std::ios::binary);
    if (!ids) throw Error(Errc::io, "cannot write " + sidecar_path(path).string());
    for (std::size_t r = 0; r < store.app_ids.size(); ++r) {
        ids << nlohmann::json{{"row", r}, {"app_id", store.app_ids[r]}}.dump() << '\n';
    }
}

inline EmbeddingStore read_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open store " + path.string());
    char magic[4];
    binio::read_exact(in, magic, 4);
    if (std::string(magic, 4) != "ICNE") throw Error(Errc::format, path.string() + " is not an embedding store");

    EmbeddingStore s;
    auto& h = s.header;
    h.version = binio::get_u32(in);
    if (h.version != kStoreVersion) {
        throw Error(Errc::config_mismatch, "store format version " + std::to_string(h.version) +
                                               " is not supported (expected " + std::to_string(kStoreVersion) + ")");
    }
    h.flags = binio::get_u32(in);
    h.content_dim = binio::get_u32(in);
    h.style_dim = binio::get_u32(in);
    h.rows = binio::get_u64(in);
    h.projection_seed = binio::get_u64(in);
    h.config_hash = binio::get_u64(in);
    h.input_size = binio::get_u32(in);
    for (float& m : h.means) m = binio::get_f32(in);
    h.config_json = binio::get_string(in);

    std::vector<float> content(h.rows * h.content_dim), style(h.rows * h.style_dim);
    for (std::uint64_t r = 0; r < h.rows; ++r) {
        for (std::uint32_t i = 0; i < h.content_dim; ++i) content[r * h.content_dim + i] = binio::get_f32(in);
        for (std::uint32_t i = 0; i < h.style_dim; ++i) style[r * h.style_dim + i] = binio::get_f32(in);
    }
    s.content = Matrix<float>(h.rows, h.content_dim, std::move(content));
    s.style = Matrix<float>(h.rows, h.style_dim, std::move(style));

    if (PipelineConfig::from_json(nlohmann::json::parse(h.config_json)).hash() != h.config_hash) {
        throw Error(Errc::config_mismatch, path.string() + ": header config does not match its hash");
    }

    const auto ids_path = sidecar_path(path);
    std::ifstream ids(ids_path);
    if (!ids) throw Error(Errc::io, "cannot open sidecar " + ids_path.string());
    std::string line;
    while (std::getline(ids, line)) {
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            if (j.at("row").get<std::uint64_t>() != s.app_ids.size()) {
                throw Error(Errc::format, ids_path.string() + ": rows out of order");
            }
            s.app_ids.push_back(j.at("app_id").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, ids_path.string() + ": " + e.what());
        }
    }
    if (s.app_ids.size() != h.rows) {
        throw Error(Errc::format, ids_path.string() + " lists " + std::to_string(s.app_ids.size()) +
                                      " rows but the store has " + std::to_string(h.rows));
    }
    return s;
}

}  // namespace iconsim
