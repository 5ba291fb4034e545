#pragma once
// Retrieval-rate evaluation over labelled groups and counterfeit-candidate
// reports.
//
// Accounting: a labelled image counts as retrieved at k when it appears in
// the top-k (self excluded) of at least one other member of its group.

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iconsim/corpus.hpp"
#include "iconsim/error.hpp"
#include "iconsim/retrieval.hpp"
#include "iconsim/sift.hpp"

namespace iconsim {

inline constexpr const char* kAccountingNote =
    "an image is retrieved at k if it appears in the top-k (self excluded) of any other member of its group";

struct LabelledImageHit {
    std::string app_id;
    std::optional<std::size_t> best_rank;           // over group-mates' top-kmax lists
    std::optional<double> best_normalized_distance;  // cosine metrics only
};

struct GroupHits {
    std::string base_app_id;
    std::vector<LabelledImageHit> images;
};

namespace detail {

inline void check_groups(const Corpus& corpus, const std::vector<LabelledGroup>& groups) {
    for (const auto& g : groups) {
        for (const auto& id : g.all_app_ids()) {
            if (!corpus.row_of(id)) {
                throw Error(Errc::not_found, "labelled app '" + id + "' (group of '" + g.base_app_id +
                                                 "') is not in the index");
            }
        }
    }
}

inline std::size_t labelled_total(const std::vector<GroupHits>& hits) {
    std::size_t n = 0;
    for (const auto& g : hits) n += g.images.size();
    return n;
}

}  // namespace detail

/// Per-image best ranks from one top-`max_k` query per labelled image.
inline std::vector<GroupHits> labelled_hits(const Index& index, const std::vector<LabelledGroup>& groups,
                                            std::size_t max_k, const QueryOptions& opts = {}) {
    detail::check_groups(index.corpus(), groups);
    std::vector<GroupHits> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        const auto ids = g.all_app_ids();
        GroupHits gh{g.base_app_id, {}};
        for (const auto& id : ids) gh.images.push_back({id, std::nullopt, std::nullopt});
        for (std::size_t q = 0; q < ids.size(); ++q) {
            const auto results = query_top_k(index, index.embedding(ids[q]), max_k, QueryFilter{}, std::nullopt, opts);
            for (const auto& res : results) {
                for (std::size_t x = 0; x < ids.size(); ++x) {
                    if (x == q || ids[x] != res.app_id) continue;
                    auto& hit = gh.images[x];
                    if (!hit.best_rank || res.rank < *hit.best_rank) hit.best_rank = res.rank;
                    if (res.normalized_distance &&
                        (!hit.best_normalized_distance || *res.normalized_distance < *hit.best_normalized_distance)) {
                        hit.best_normalized_distance = res.normalized_distance;
                    }
                }
            }
        }
        out.push_back(std::move(gh));
    }
    return out;
}

inline double rate_at(const std::vector<GroupHits>& hits, std::size_t k) {
    const std::size_t total = detail::labelled_total(hits);
    if (total == 0) return 0.0;
    std::size_t retrieved = 0;
    for (const auto& g : hits)
        for (const auto& img : g.images)
            if (img.best_rank && *img.best_rank <= k) ++retrieved;
    return 100.0 * static_cast<double>(retrieved) / static_cast<double>(total);
}

/// Percentage of labelled images retrieved within top-k under the index metric.
inline double retrieval_rate(const Index& index, const std::vector<LabelledGroup>& groups, std::size_t k,
                             const QueryOptions& opts = {}) {
    if (k < 1) throw Error(Errc::invalid_argument, "k must be at least 1");
    return rate_at(labelled_hits(index, groups, k, opts), k);
}

inline double retrieval_rate(const Index& index, const std::vector<LabelledGroup>& groups, std::size_t k,
                             const MetricConfig& metric, const QueryOptions& opts = {}) {
    return retrieval_rate(index.with_metric(metric), groups, k, opts);
}

/// Rate against a normalized distance threshold: an image counts when a
/// group-mate retrieves it within the top-k *and* within the threshold.
inline std::vector<CurvePoint> threshold_curve(const Index& index, const std::vector<LabelledGroup>& groups,
                                               std::size_t k, const std::vector<double>& thresholds,
                                               const QueryOptions& opts = {}) {
    if (index.metric().norm() != Norm::cosine) {
        throw Error(Errc::unsupported_normalization, "threshold curves require a cosine metric");
    }
    detail::check_groups(index.corpus(), groups);
    std::vector<double> best;  // min normalized distance at which each image is retrieved
    std::size_t total = 0;
    for (const auto& g : groups) {
        const auto ids = g.all_app_ids();
        std::vector<double> group_best(ids.size(), std::numeric_limits<double>::infinity());
        for (std::size_t q = 0; q < ids.size(); ++q) {
            for (const auto& res : query_top_k(index, index.embedding(ids[q]), k, QueryFilter{}, std::nullopt, opts)) {
                for (std::size_t x = 0; x < ids.size(); ++x) {
                    if (x != q && ids[x] == res.app_id) group_best[x] = std::min(group_best[x], *res.normalized_distance);
                }
            }
        }
        total += ids.size();
        best.insert(best.end(), group_best.begin(), group_best.end());
    }
    std::vector<CurvePoint> curve;
    for (double t : thresholds) {
        const auto hit = std::count_if(best.begin(), best.end(), [t](double d) { return d <= t; });
        curve.push_back({t, total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total)});
    }
    return curve;
}

/// SIFT baseline hits. Icons without descriptors are skipped as candidates
/// and as labelled images; their count is reported separately.
struct SiftHits {
    std::vector<GroupHits> hits;
    std::size_t excluded_labelled = 0;
};

inline SiftHits sift_labelled_hits(const std::vector<SiftDescriptorSet>& sets, const Corpus& corpus,
                                   const std::vector<LabelledGroup>& groups, std::size_t max_k) {
    if (sets.size() != corpus.size()) {
        throw Error(Errc::dimension_mismatch, "SIFT cache does not match the corpus size");
    }
    detail::check_groups(corpus, groups);
    SiftHits out;
    for (const auto& g : groups) {
        std::vector<std::string> ids;
        for (const auto& id : g.all_app_ids()) {
            if (sets[*corpus.row_of(id)].empty()) ++out.excluded_labelled;
            else ids.push_back(id);
        }
        GroupHits gh{g.base_app_id, {}};
        for (const auto& id : ids) gh.images.push_back({id, std::nullopt, std::nullopt});
        for (std::size_t q = 0; q < ids.size(); ++q) {
            const std::size_t qrow = *corpus.row_of(ids[q]);
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t r = 0; r < corpus.size(); ++r) {
                if (r == qrow || sets[r].empty()) continue;
                scored.emplace_back(sift_distance(sets[qrow], sets[r]), r);
            }
            const std::size_t take = std::min(max_k, scored.size());
            std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                              [&](const auto& a, const auto& b) {
                                  if (a.first != b.first) return a.first < b.first;
                                  return corpus[a.second].app_id < corpus[b.second].app_id;
                              });
            for (std::size_t rank = 1; rank <= take; ++rank) {
                const auto& id = corpus[scored[rank - 1].second].app_id;
                for (std::size_t x = 0; x < ids.size(); ++x) {
                    if (x == q || ids[x] != id) continue;
                    auto& hit = gh.images[x];
                    if (!hit.best_rank || rank < *hit.best_rank) hit.best_rank = rank;
                }
            }
        }
        out.hits.push_back(std::move(gh));
    }
    return out;
}

struct MetricRates {
    std::string name;
    std::vector<double> rates;  // aligned with EvaluationReport::ks
    std::vector<GroupHits> hits;
};

struct EvaluationReport {
    std::string config_hash;
    nlohmann::json config;
    std::vector<std::size_t> ks;
    std::vector<double> alphas;
    std::vector<double> l2_alphas;
    std::size_t labelled_images = 0;
    std::size_t sift_excluded = 0;
    std::vector<MetricRates> rows;
};

inline MetricRates metric_rates(std::string name, std::vector<GroupHits> hits, const std::vector<std::size_t>& ks) {
    MetricRates m{std::move(name), {}, std::move(hits)};
    for (std::size_t k : ks) m.rates.push_back(rate_at(m.hits, k));
    return m;
}

/// One row per metric: content, style, then combined for each alpha
/// (descending), first for cosine and then for L2 distances.
inline std::vector<MetricConfig> evaluation_metrics(const std::vector<double>& alphas,
                                                    const std::vector<double>& l2_alphas) {
    std::vector<MetricConfig> out;
    auto block = [&](Norm norm, std::vector<double> as) {
        out.push_back(MetricConfig::content(norm));
        out.push_back(MetricConfig::style(norm));
        std::sort(as.begin(), as.end(), std::greater<>());
        for (double a : as) out.push_back(MetricConfig::combined(norm, a));
    };
    block(Norm::cosine, alphas);
    block(Norm::l2, l2_alphas);
    return out;
}

inline EvaluationReport evaluate(const Index& index, const std::vector<LabelledGroup>& groups,
                                 std::vector<std::size_t> ks, const std::vector<double>& alphas,
                                 const std::vector<double>& l2_alphas, const SiftCache* sift = nullptr,
                                 const QueryOptions& opts = {}) {
    if (ks.empty()) throw Error(Errc::invalid_argument, "at least one k is required");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.front() < 1) throw Error(Errc::invalid_argument, "k must be at least 1");
    const std::size_t max_k = ks.back();

    EvaluationReport report;
    report.config = nlohmann::json::parse(index.store().header.config_json);
    report.config_hash = PipelineConfig::format_hash(index.store().header.config_hash);
    report.ks = ks;
    report.alphas = alphas;
    report.l2_alphas = l2_alphas;
    for (const auto& g : groups) report.labelled_images += 1 + g.member_app_ids.size();

    if (sift) {
        if (sift->config_hash != index.store().header.config_hash) {
            throw Error(Errc::config_mismatch, "SIFT cache and embedding store come from different configs");
        }
        auto sh = sift_labelled_hits(sift->sets, index.corpus(), groups, max_k);
        report.sift_excluded = sh.excluded_labelled;
        report.rows.push_back(metric_rates("sift", std::move(sh.hits), ks));
    }
    for (const auto& m : evaluation_metrics(alphas, l2_alphas)) {
        report.rows.push_back(metric_rates(m.name(), labelled_hits(index.with_metric(m), groups, max_k, opts), ks));
    }
    return report;
}

inline nlohmann::json to_json(const EvaluationReport& r, bool include_hits = true) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : r.rows) {
        nlohmann::json row{{"metric", m.name}, {"rates", m.rates}};
        if (include_hits) {
            nlohmann::json groups = nlohmann::json::array();
            for (const auto& g : m.hits) {
                nlohmann::json images = nlohmann::json::array();
                for (const auto& img : g.images) {
                    images.push_back({{"app_id", img.app_id},
                                      {"best_rank", img.best_rank ? nlohmann::json(*img.best_rank) : nullptr}});
                }
                groups.push_back({{"base_app_id", g.base_app_id}, {"images", images}});
            }
            row["groups"] = groups;
        }
        rows.push_back(row);
    }
    return {{"config_hash", r.config_hash},
            {"config", r.config},
            {"accounting", kAccountingNote},
            {"k", r.ks},
            {"alphas", r.alphas},
            {"l2_alphas", r.l2_alphas},
            {"labelled_images", r.labelled_images},
            {"sift_excluded_images", r.sift_excluded},
            {"rows", rows}};
}

/// Text table: one row per embedding, one column per top-k.
inline std::string render_table(const EvaluationReport& r) {
    std::ostringstream os;
    char buf[64];
    os << "Retrieval rates (" << r.labelled_images << " labelled images, config " << r.config_hash << ")\n";
    os << "Embedding                     ";
    for (auto k : r.ks) {
        std::snprintf(buf, sizeof buf, "| %9s ", ("top-" + std::to_string(k)).c_str());
        os << buf;
    }
    os << '\n' << std::string(30 + 12 * r.ks.size(), '-') << '\n';
    for (const auto& m : r.rows) {
        std::snprintf(buf, sizeof buf, "%-30s", m.name.c_str());
        os << buf;
        for (double rate : m.rates) {
            std::snprintf(buf, sizeof buf, "| %8.2f%% ", rate);
            os << buf;
        }
        os << '\n';
    }
    if (r.sift_excluded > 0) os << "(sift: " << r.sift_excluded << " labelled images without keypoints excluded)\n";
    return os.str();
}

struct CounterfeitCandidate {
    std::string app_id;
    std::string app_name;
    std::string developer;
    std::string category;
    std::uint64_t downloads = 0;
    std::size_t rank = 0;
    double raw_distance = 0.0;
    double normalized_distance = 0.0;
    double name_similarity = 0.0;  // character cosine similarity to the target's name
};

struct TargetCandidates {
    std::string app_id;
    std::string app_name;
    std::string developer;
    std::string category;
    std::uint64_t downloads = 0;
    std::vector<CounterfeitCandidate> candidates;
};

struct CounterfeitReport {
    std::string config_hash;
    std::string metric;
    std::size_t k = 0;
    double threshold = 0.0;
    std::vector<TargetCandidates> targets;
    std::vector<std::string> unique_candidates;  // sorted
    std::size_t candidate_entries = 0;
};

/// For each target: top-k icons from other developers in the target's
/// category, within the normalized threshold. Candidates are deduplicated
/// across targets in the summary.
inline CounterfeitReport counterfeit_report(const Index& index, const std::vector<std::string>& targets,
                                            std::size_t k, double threshold, const QueryOptions& opts = {}) {
    CounterfeitReport report;
    report.config_hash = PipelineConfig::format_hash(index.store().header.config_hash);
    report.metric = index.metric().name();
    report.k = k;
    report.threshold = threshold;
    std::set<std::string> unique;
    const auto& corpus = index.corpus();
    for (const auto& target_id : targets) {
        const auto& t = corpus.at(target_id);
        TargetCandidates tc{t.app_id, t.app_name, t.developer, t.category, t.downloads, {}};
        QueryFilter filter{t.developer, t.category, true};
        for (const auto& res : query_top_k(index, index.embedding(target_id), k, filter, threshold, opts)) {
            const auto& rec = corpus[res.row];
            tc.candidates.push_back({rec.app_id, rec.app_name, rec.developer, rec.category, rec.downloads, res.rank,
                                     res.raw_distance, *res.normalized_distance,
                                     char_cosine_similarity(rec.app_name, t.app_name)});
            unique.insert(rec.app_id);
        }
        report.candidate_entries += tc.candidates.size();
        report.targets.push_back(std::move(tc));
    }
    report.unique_candidates.assign(unique.begin(), unique.end());
    return report;
}

inline nlohmann::json to_json(const CounterfeitReport& r) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : r.targets) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : t.candidates) {
            cands.push_back({{"app_id", c.app_id},
                             {"app_name", c.app_name},
                             {"developer", c.developer},
                             {"category", c.category},
                             {"downloads", c.downloads},
                             {"rank", c.rank},
                             {"raw_distance", c.raw_distance},
                             {"normalized_distance", c.normalized_distance},
                             {"name_similarity", c.name_similarity}});
        }
        targets.push_back({{"app_id", t.app_id},
                           {"app_name", t.app_name},
                           {"developer", t.developer},
                           {"category", t.category},
                           {"downloads", t.downloads},
                           {"candidates", cands}});
    }
    return {{"config_hash", r.config_hash},
            {"metric", r.metric},
            {"k", r.k},
            {"threshold", r.threshold},
            {"summary",
             {{"targets", r.targets.size()},
              {"candidate_entries", r.candidate_entries},
              {"unique_candidates", r.unique_candidates.size()}}},
            {"unique_candidates", r.unique_candidates},
            {"targets", targets}};
}

inline std::string render_text(const CounterfeitReport& r) {
    std::ostringstream os;
    char buf[256];
    os << "Potential counterfeits (metric " << r.metric << ", top-" << r.k << ", threshold " << r.threshold
       << ", config " << r.config_hash << ")\n";
    for (const auto& t : r.targets) {
        os << t.app_id << "  \"" << t.app_name << "\"  [" << t.developer << ", " << t.category << ", "
           << t.downloads << " downloads]  " << t.candidates.size() << " candidate(s)\n";
        for (const auto& c : t.candidates) {
            std::snprintf(buf, sizeof buf, "  %2zu. %-24s d=%.4f (norm %.4f) name-sim %.2f  %s\n", c.rank,
                          c.app_id.c_str(), c.raw_distance, c.normalized_distance, c.name_similarity,
                          c.developer.c_str());
            os << buf;
        }
    }
    os << "unique candidates: " << r.unique_candidates.size() << " (entries: " << r.candidate_entries << ")\n";
    return os.str();
}

}  // namespace iconsim
