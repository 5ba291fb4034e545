#pragma once
// The `iconsim` command line: encode, groups, sift, index, query, eval, knee,
// report, verify-bundle. Data goes to files (or stdout where noted);
// progress and errors go to stderr, errors as one JSON object.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iconsim/bundle.hpp"
#include "iconsim/config.hpp"
#include "iconsim/corpus.hpp"
#include "iconsim/evaluation.hpp"
#include "iconsim/pipeline.hpp"
#include "iconsim/retrieval.hpp"
#include "iconsim/sift.hpp"
#include "iconsim/store.hpp"

namespace iconsim::cli {

namespace detail {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned jobs = default_jobs();
};

struct MetricFlags {
    std::optional<std::string> metric;
    std::optional<std::string> norm;
    std::optional<double> alpha;

    void attach(CLI::App* cmd) {
        cmd->add_option("--metric", metric, "content, style or combined")->check(CLI::IsMember({"content", "style", "combined"}));
        cmd->add_option("--norm", norm, "l2 or cos")->check(CLI::IsMember({"l2", "cos", "cosine", "L2"}));
        cmd->add_option("--alpha", alpha, "style weight for the combined metric")->check(CLI::NonNegativeNumber);
    }

    MetricConfig resolve(const MetricConfig& defaults) const {
        const auto kind = metric ? parse_embedding_kind(*metric) : defaults.kind();
        const auto n = norm ? parse_norm(*norm) : defaults.norm();
        std::optional<double> a;
        if (kind == EmbeddingKind::combined) a = alpha ? *alpha : defaults.alpha().value_or(6.0);
        else if (alpha) throw Error(Errc::invalid_argument, "--alpha only applies to --metric combined");
        return MetricConfig(kind, n, a);
    }
};

inline PipelineConfig config_for_encoding(const Common& common, const std::string& model) {
    PipelineConfig cfg = !common.config_path.empty() ? load_config(common.config_path)
                         : !model.empty()            ? PipelineConfig::onnx_defaults(model)
                                                     : PipelineConfig::stub_defaults();
    if (!model.empty()) {
        cfg.backbone = BackboneKind::onnx;
        cfg.model = model;
    }
    if (common.seed) cfg.projection_seed = *common.seed;
    return cfg;
}

// The store's own config is authoritative; an explicit --config/--seed must agree with it.
inline PipelineConfig config_from_store(const Common& common, const EmbeddingStore& store) {
    PipelineConfig cfg = store.config();
    if (!common.config_path.empty() || common.seed) {
        PipelineConfig expected = common.config_path.empty() ? cfg : load_config(common.config_path);
        if (common.seed) expected.projection_seed = *common.seed;
        if (expected.hash() != store.header.config_hash) {
            throw Error(Errc::config_mismatch, "store was encoded with config " +
                                                   PipelineConfig::format_hash(store.header.config_hash) +
                                                   " but the requested config is " + expected.hash_hex());
        }
    }
    return cfg;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << text;
    if (!out) throw Error(Errc::io, "write failure on " + path);
}

inline ProgressFn progress_logger(std::ostream& err, const char* what) {
    return [&err, what](const ProgressEvent& e) {
        const std::size_t every = std::max<std::size_t>(1, e.total / 10);
        if (e.done % every != 0 && e.done != e.total) return;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %zu/%zu icons (%.1f icons/s)\n", what, e.done, e.total,
                      e.seconds > 0 ? static_cast<double>(e.done) / e.seconds : 0.0);
        err << buf << std::flush;
    };
}

inline std::vector<std::string> read_id_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        ids.push_back(line.substr(b, e - b + 1));
    }
    return ids;
}

// Curve file: JSON array of {"threshold", "rate"} objects, or CSV "threshold,rate" lines.
inline std::vector<CurvePoint> read_curve(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::vector<CurvePoint> curve;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        try {
            for (const auto& p : nlohmann::json::parse(text)) {
                curve.push_back({p.at("threshold").get<double>(), p.at("rate").get<double>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, path + ": " + e.what());
        }
        return curve;
    }
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        double t = 0, r = 0;
        if (std::sscanf(line.c_str(), "%lf , %lf", &t, &r) != 2) {
            if (line_no == 1) continue;  // header row
            throw Error(Errc::parse, path + " line " + std::to_string(line_no) + ": expected 'threshold,rate'");
        }
        curve.push_back({t, r});
    }
    return curve;
}

inline nlohmann::json result_json(const RetrievalResult& r, const std::string& metric) {
    nlohmann::json j{{"rank", r.rank}, {"app_id", r.app_id}, {"raw_distance", r.raw_distance}, {"metric", metric}};
    j["normalized_distance"] = r.normalized_distance ? nlohmann::json(*r.normalized_distance) : nullptr;
    return j;
}

}  // namespace detail

/// Runs one command line (args[0] is the program name). Returns the exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Icon similarity search for counterfeit app detection", "iconsim"};
    app.require_subcommand(1);
    app.fallthrough();
    detail::Common common;
    app.add_option("--config", common.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
    app.add_option("--seed", common.seed, "projection seed (all randomness derives from it)");
    app.add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);

    std::string manifest, store_path, out_path, groups_path, model, target, targets_path, curve_path, sift_path,
        table_path, text_path, bundle_dir;
    std::size_t k = 10;
    std::optional<double> threshold;
    bool exclude_developer = false, same_category = false, include_self = false;
    detail::MetricFlags metric_flags;

    auto* encode = app.add_subcommand("encode", "encode a manifest into an embedding store");
    encode->add_option("--manifest", manifest, "JSON-lines manifest")->required()->check(CLI::ExistingFile);
    encode->add_option("--out", out_path, "embedding store path")->required();
    encode->add_option("--model", model, "exported model bundle directory (default: stub backbone)");

    GroupOptions group_opts;
    auto* groups = app.add_subcommand("groups", "propose labelled groups from a manifest");
    groups->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    groups->add_option("--out", out_path, "groups JSON-lines path")->required();
    groups->add_option("--name-threshold", group_opts.name_threshold)->check(CLI::Range(0.0, 1.0));
    groups->add_option("--min-downloads", group_opts.min_base_downloads);
    groups->add_option("--min-apps", group_opts.min_apps_per_developer);

    auto* sift = app.add_subcommand("sift", "compute the SIFT descriptor cache for a manifest");
    sift->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    sift->add_option("--out", out_path, "descriptor cache path")->required();

    auto* index = app.add_subcommand("index", "validate a store against its manifest and summarize the index");
    index->add_option("--store", store_path)->required()->check(CLI::ExistingFile);
    index->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    index->add_option("--out", out_path, "summary JSON path (default stdout)");
    metric_flags.attach(index);

    auto* query = app.add_subcommand("query", "top-k visually similar icons for one app");
    query->add_option("--store", store_path)->required()->check(CLI::ExistingFile);
    query->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    query->add_option("--target", target, "app_id to query")->required();
    query->add_option("--k", k)->check(CLI::PositiveNumber);
    query->add_option("--threshold", threshold, "maximum normalized distance")->check(CLI::Range(0.0, 1.0));
    query->add_flag("--exclude-developer", exclude_developer, "drop apps from the target's developer");
    query->add_flag("--same-category", same_category, "keep only apps in the target's category");
    query->add_flag("--include-self", include_self, "allow the target itself in the results");
    query->add_option("--out", out_path, "JSON-lines output (default stdout)");
    metric_flags.attach(query);

    std::vector<std::size_t> ks{5, 10, 15, 20};
    std::vector<double> alphas{0.1, 0.5, 1, 2, 6, 10, 100};
    std::vector<double> l2_alphas;
    auto* eval = app.add_subcommand("eval", "retrieval rates over labelled groups");
    eval->add_option("--store", store_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    eval->add_option("--groups", groups_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--k", ks, "comma-separated top-k values")->delimiter(',');
    eval->add_option("--alphas", alphas, "combined cosine alphas")->delimiter(',');
    eval->add_option("--l2-alphas", l2_alphas, "combined L2 alphas")->delimiter(',');
    eval->add_option("--sift", sift_path, "SIFT descriptor cache for the baseline row")->check(CLI::ExistingFile);
    eval->add_option("--out", out_path, "report JSON path");
    eval->add_option("--table", table_path, "rendered table path (default stdout when --out is absent)");

    auto* knee = app.add_subcommand("knee", "knee point of a retrieval-rate vs threshold curve");
    knee->add_option("--curve", curve_path, "curve file (JSON or CSV)")->check(CLI::ExistingFile);
    knee->add_option("--store", store_path)->check(CLI::ExistingFile);
    knee->add_option("--manifest", manifest)->check(CLI::ExistingFile);
    knee->add_option("--groups", groups_path)->check(CLI::ExistingFile);
    knee->add_option("--k", k)->check(CLI::PositiveNumber);
    knee->add_option("--out", out_path, "result JSON (default stdout)");
    metric_flags.attach(knee);

    auto* report = app.add_subcommand("report", "potential counterfeits for a list of target apps");
    report->add_option("--store", store_path)->required()->check(CLI::ExistingFile);
    report->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    report->add_option("--targets", targets_path, "file with one target app_id per line")->required()->check(CLI::ExistingFile);
    report->add_option("--k", k)->check(CLI::PositiveNumber);
    report->add_option("--threshold", threshold, "maximum normalized distance")->required()->check(CLI::Range(0.0, 1.0));
    report->add_option("--out", out_path, "report JSON path (default stdout)");
    report->add_option("--text", text_path, "rendered text report path");
    metric_flags.attach(report);

    double tolerance = 1e-4;
    auto* verify = app.add_subcommand("verify-bundle", "check a model bundle against its reference pack");
    verify->add_option("--bundle", bundle_dir)->required()->check(CLI::ExistingDirectory);
    verify->add_option("--tolerance", tolerance)->check(CLI::NonNegativeNumber);
    verify->add_option("--out", out_path, "result JSON (default stdout)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    auto load_index = [&](const PipelineConfig*& cfg_out, PipelineConfig& cfg_storage) {
        auto store = std::make_shared<const EmbeddingStore>(read_store(store_path));
        cfg_storage = detail::config_from_store(common, *store);
        cfg_out = &cfg_storage;
        auto corpus = std::make_shared<const Corpus>(load_manifest(manifest));
        return Index(store, corpus, metric_flags.resolve(cfg_storage.metric));
    };

    try {
        const QueryOptions qopts{common.jobs};
        if (*encode) {
            const auto cfg = detail::config_for_encoding(common, model);
            const auto corpus = load_manifest(manifest);
            const auto backbone = make_backbone(cfg);
            err << "encoding " << corpus.size() << " icons with " << backbone->info().kind << " backbone, config "
                << cfg.hash_hex() << '\n';
            const auto store = encode_corpus(corpus, *backbone, cfg, common.jobs, detail::progress_logger(err, "encoded"));
            write_store(out_path, store);
        } else if (*groups) {
            const auto found = propose_labelled_groups(load_manifest(manifest), group_opts);
            write_groups(out_path, found);
            err << "proposed " << found.size() << " labelled groups\n";
        } else if (*sift) {
            const auto cfg = detail::config_for_encoding(common, "");
            const auto corpus = load_manifest(manifest);
            const auto cache = compute_sift_cache(corpus, cfg, common.jobs, detail::progress_logger(err, "sift"));
            write_sift_cache(out_path, cache);
        } else if (*index) {
            PipelineConfig storage;
            const PipelineConfig* cfg = nullptr;
            const auto idx = load_index(cfg, storage);
            const auto& h = idx.store().header;
            nlohmann::json summary{{"rows", idx.size()},
                                   {"content_dim", h.content_dim},
                                   {"style_dim", h.style_dim},
                                   {"metric", idx.metric().name()},
                                   {"backend", "exact"},
                                   {"config_hash", cfg->hash_hex()},
                                   {"config", cfg->to_json()}};
            detail::write_text(out_path, summary.dump(2) + "\n", out);
        } else if (*query) {
            PipelineConfig storage;
            const PipelineConfig* cfg = nullptr;
            const auto idx = load_index(cfg, storage);
            const auto& t = idx.corpus().at(target);
            QueryFilter filter;
            filter.exclude_self = !include_self;
            if (exclude_developer) filter.exclude_developer = t.developer;
            if (same_category) filter.require_category = t.category;
            const auto results = query_top_k(idx, idx.embedding(target), k, filter, threshold, qopts);
            std::string lines;
            for (const auto& r : results) lines += detail::result_json(r, idx.metric().name()).dump() + "\n";
            detail::write_text(out_path, lines, out);
        } else if (*eval) {
            PipelineConfig storage;
            const PipelineConfig* cfg = nullptr;
            const auto idx = load_index(cfg, storage);
            const auto group_list = read_groups(groups_path);
            std::optional<SiftCache> cache;
            if (!sift_path.empty()) cache = read_sift_cache(sift_path);
            const auto rep = evaluate(idx, group_list, ks, alphas, l2_alphas, cache ? &*cache : nullptr, qopts);
            if (!out_path.empty()) detail::write_text(out_path, to_json(rep).dump(2) + "\n", out);
            if (!table_path.empty() || out_path.empty()) detail::write_text(table_path, render_table(rep), out);
        } else if (*knee) {
            std::vector<CurvePoint> curve;
            nlohmann::json result;
            if (!curve_path.empty()) {
                curve = detail::read_curve(curve_path);
            } else {
                if (store_path.empty() || manifest.empty() || groups_path.empty()) {
                    throw Error(Errc::invalid_argument, "knee needs --curve or --store, --manifest and --groups");
                }
                PipelineConfig storage;
                const PipelineConfig* cfg = nullptr;
                const auto idx = load_index(cfg, storage);
                curve = threshold_curve(idx, read_groups(groups_path), k, cfg->threshold_grid.values(), qopts);
                result["metric"] = idx.metric().name();
                result["k"] = k;
                result["config_hash"] = cfg->hash_hex();
            }
            const auto kp = knee_threshold(curve);
            result["knee"] = kp ? nlohmann::json(*kp) : nullptr;
            nlohmann::json points = nlohmann::json::array();
            for (const auto& p : curve) points.push_back({{"threshold", p.threshold}, {"rate", p.rate}});
            result["curve"] = points;
            detail::write_text(out_path, result.dump(2) + "\n", out);
        } else if (*report) {
            PipelineConfig storage;
            const PipelineConfig* cfg = nullptr;
            const auto idx = load_index(cfg, storage);
            const auto rep = counterfeit_report(idx, detail::read_id_list(targets_path), k, *threshold, qopts);
            detail::write_text(out_path, to_json(rep).dump(2) + "\n", out);
            if (!text_path.empty()) detail::write_text(text_path, render_text(rep), out);
        } else if (*verify) {
            const OnnxBackbone backbone(bundle_dir);
            const auto rep = verify_refpack(std::filesystem::path(bundle_dir) / backbone.metadata().refpack, backbone,
                                            tolerance);
            nlohmann::json cases = nlohmann::json::array();
            for (const auto& c : rep.cases) {
                cases.push_back({{"name", c.name},
                                 {"shapes_ok", c.shapes_ok},
                                 {"content_max_abs", c.content_max_abs},
                                 {"style_max_abs", c.style_max_abs}});
            }
            nlohmann::json result{{"passed", rep.passed()}, {"tolerance", tolerance}, {"cases", cases}};
            detail::write_text(out_path, result.dump(2) + "\n", out);
            return rep.passed() ? 0 : 1;
        }
    } catch (const Error& e) {
        err << nlohmann::json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace iconsim::cli
