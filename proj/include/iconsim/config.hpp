#pragma once
// Pipeline configuration. Its canonical JSON form is echoed into every
// artifact, and its hash tags artifacts so that mixed configs are rejected.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iconsim/backbone.hpp"
#include "iconsim/embeddings.hpp"
#include "iconsim/error.hpp"
#include "iconsim/metrics.hpp"
#include "iconsim/sift.hpp"

namespace iconsim {

enum class BackboneKind { stub, onnx };

struct ThresholdGrid {
    double start = 0.0;
    double stop = 1.0;
    double step = 0.01;

    std::vector<double> values() const {
        if (!(step > 0.0) || stop < start) throw Error(Errc::invalid_argument, "invalid threshold grid");
        const auto n = static_cast<std::size_t>(std::llround((stop - start) / step));
        std::vector<double> out;
        out.reserve(n + 1);
        for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(stop, start + static_cast<double>(i) * step));
        return out;
    }
};

struct PipelineConfig {
    BackboneKind backbone = BackboneKind::stub;
    std::string model;  // bundle directory when backbone == onnx
    std::uint64_t stub_seed = 7;
    int input_size = 64;
    std::array<double, 3> means{123.68, 116.779, 103.939};
    std::uint64_t projection_seed = 42;
    std::size_t projection_dim = 32;
    MetricConfig metric = MetricConfig::combined(Norm::cosine, 6.0);
    ThresholdGrid threshold_grid;
    SiftParams sift;

    static PipelineConfig stub_defaults() { return {}; }

    /// Full-size defaults: 224-pixel input, k = 4096.
    static PipelineConfig onnx_defaults(std::string bundle_dir) {
        PipelineConfig c;
        c.backbone = BackboneKind::onnx;
        c.model = std::move(bundle_dir);
        c.input_size = 224;
        c.projection_dim = 4096;
        return c;
    }

    PreprocessOptions preprocess_options() const {
        PreprocessOptions p;
        p.input_size = input_size;
        for (int c = 0; c < 3; ++c) p.means[c] = static_cast<float>(means[c]);
        return p;
    }

    nlohmann::json to_json() const {
        nlohmann::json metric_json{{"kind", to_string(metric.kind())}, {"norm", to_string(metric.norm())}};
        if (metric.alpha()) metric_json["alpha"] = *metric.alpha();
        return {
            {"backbone",
             {{"kind", backbone == BackboneKind::stub ? "stub" : "onnx"}, {"model", model}, {"stub_seed", stub_seed}}},
            {"input_size", input_size},
            {"means", means},
            {"projection", {{"seed", projection_seed}, {"dim", projection_dim}, {"generator", ProjectionMatrix::generator_name}}},
            {"metric", metric_json},
            {"threshold_grid", {{"start", threshold_grid.start}, {"stop", threshold_grid.stop}, {"step", threshold_grid.step}}},
            {"sift",
             {{"octave_layers", sift.octave_layers},
              {"contrast_threshold", sift.contrast_threshold},
              {"edge_threshold", sift.edge_threshold},
              {"sigma", sift.sigma}}},
        };
    }

    /// Missing keys take the defaults of the selected backbone kind.
    static PipelineConfig from_json(const nlohmann::json& j) {
        try {
            static const std::vector<std::string> known{"backbone", "input_size", "means", "projection",
                                                        "metric", "threshold_grid", "sift"};
            for (const auto& [key, _] : j.items()) {
                if (std::find(known.begin(), known.end(), key) == known.end()) {
                    throw Error(Errc::parse, "unknown config key '" + key + "'");
                }
            }
            PipelineConfig c;
            if (auto b = j.find("backbone"); b != j.end()) {
                const auto kind = b->value("kind", std::string("stub"));
                if (kind == "onnx") {
                    c = onnx_defaults(b->value("model", std::string()));
                } else if (kind != "stub") {
                    throw Error(Errc::parse, "unknown backbone kind '" + kind + "'");
                }
                c.stub_seed = b->value("stub_seed", c.stub_seed);
            }
            c.input_size = j.value("input_size", c.input_size);
            c.means = j.value("means", c.means);
            if (auto p = j.find("projection"); p != j.end()) {
                c.projection_seed = p->value("seed", c.projection_seed);
                c.projection_dim = p->value("dim", c.projection_dim);
                if (p->contains("generator") && p->at("generator") != ProjectionMatrix::generator_name) {
                    throw Error(Errc::config_mismatch, "unsupported projection generator " + p->at("generator").dump());
                }
            }
            if (auto m = j.find("metric"); m != j.end()) {
                std::optional<double> alpha;
                if (m->contains("alpha")) alpha = m->at("alpha").get<double>();
                c.metric = MetricConfig(parse_embedding_kind(m->value("kind", std::string("combined"))),
                                        parse_norm(m->value("norm", std::string("cos"))), alpha);
            }
            if (auto g = j.find("threshold_grid"); g != j.end()) {
                c.threshold_grid.start = g->value("start", c.threshold_grid.start);
                c.threshold_grid.stop = g->value("stop", c.threshold_grid.stop);
                c.threshold_grid.step = g->value("step", c.threshold_grid.step);
                (void)c.threshold_grid.values();
            }
            if (auto s = j.find("sift"); s != j.end()) {
                c.sift.octave_layers = s->value("octave_layers", c.sift.octave_layers);
                c.sift.contrast_threshold = s->value("contrast_threshold", c.sift.contrast_threshold);
                c.sift.edge_threshold = s->value("edge_threshold", c.sift.edge_threshold);
                c.sift.sigma = s->value("sigma", c.sift.sigma);
            }
            if (c.input_size < 1) throw Error(Errc::parse, "input_size must be positive");
            if (c.projection_dim < 1) throw Error(Errc::parse, "projection dim must be positive");
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, std::string("config: ") + e.what());
        }
    }

    std::string canonical_json() const { return to_json().dump(); }

    /// FNV-1a 64 of the canonical JSON.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char ch : canonical_json()) {
            h ^= ch;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    std::string hash_hex() const { return format_hash(hash()); }

    static std::string format_hash(std::uint64_t h) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open config " + path.string());
    try {
        return PipelineConfig::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::parse, path.string() + ": " + e.what());
    }
}

}  // namespace iconsim
