#pragma once
// Exact nearest-neighbour index over an embedding store, filtered top-k
// queries, and knee-point threshold selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "iconsim/corpus.hpp"
#include "iconsim/error.hpp"
#include "iconsim/metrics.hpp"
#include "iconsim/store.hpp"

namespace iconsim {

struct QueryFilter {
    std::optional<std::string> exclude_developer;
    std::optional<std::string> require_category;
    bool exclude_self = true;
};

struct RetrievalResult {
    std::string app_id;
    std::size_t row = 0;
    double raw_distance = 0.0;
    std::optional<double> normalized_distance;  // cosine metrics only
    std::size_t rank = 0;                       // 1-based

    bool operator==(const RetrievalResult&) const = default;
};

struct QueryOptions {
    /// Worker threads for the exhaustive scan; results do not depend on it.
    unsigned threads = 1;
};

/// Immutable after construction; copies share the underlying data.
class Index {
public:
    Index(std::shared_ptr<const EmbeddingStore> store, std::shared_ptr<const Corpus> corpus, MetricConfig metric)
        : metric_(metric) {
        if (!store || !corpus) throw Error(Errc::invalid_argument, "index needs a store and a corpus");
        if (store->size() != corpus->size()) {
            throw Error(Errc::dimension_mismatch, "store has " + std::to_string(store->size()) +
                                                      " rows but the corpus has " + std::to_string(corpus->size()) +
                                                      " records");
        }
        for (std::size_t r = 0; r < store->size(); ++r) {
            if (store->app_ids[r] != (*corpus)[r].app_id) {
                throw Error(Errc::dimension_mismatch, "store row " + std::to_string(r) + " is '" +
                                                          store->app_ids[r] + "' but the corpus has '" +
                                                          (*corpus)[r].app_id + "'");
            }
        }
        auto data = std::make_shared<Data>();
        data->store = std::move(store);
        data->corpus = std::move(corpus);
        const auto& s = *data->store;
        data->content_norms.reserve(s.size());
        data->style_norms.reserve(s.size());
        for (std::size_t r = 0; r < s.size(); ++r) {
            data->content_norms.push_back(std::sqrt(detail::sum_squares(s.content.row(r))));
            data->style_norms.push_back(std::sqrt(detail::sum_squares(s.style.row(r))));
        }
        data_ = std::move(data);
        check_metric(metric_);
    }

    /// Same data, different metric.
    Index with_metric(const MetricConfig& metric) const {
        check_metric(metric);
        Index copy = *this;
        copy.metric_ = metric;
        return copy;
    }

    const MetricConfig& metric() const noexcept { return metric_; }
    std::size_t size() const noexcept { return data_->store->size(); }
    const EmbeddingStore& store() const noexcept { return *data_->store; }
    const Corpus& corpus() const noexcept { return *data_->corpus; }
    std::optional<std::size_t> row_of(std::string_view app_id) const { return data_->corpus->row_of(app_id); }

    IconEmbedding embedding(std::string_view app_id) const {
        auto row = row_of(app_id);
        if (!row) throw Error(Errc::not_found, "app_id '" + std::string(app_id) + "' is not in the index");
        return data_->store->embedding(*row);
    }

    bool passes(std::size_t row, const QueryFilter& filter, std::string_view self_id) const {
        const auto& rec = (*data_->corpus)[row];
        if (filter.exclude_self && rec.app_id == self_id) return false;
        if (filter.exclude_developer && rec.developer == *filter.exclude_developer) return false;
        if (filter.require_category && rec.category != *filter.require_category) return false;
        return true;
    }

    /// Distance from `target` to row `r`; equals `distance()` bit for bit.
    double distance_to(const IconEmbedding& target, double target_content_norm, double target_style_norm,
                       std::size_t r) const {
        const auto& s = *data_->store;
        auto component = [&](std::span<const float> t, std::span<const float> x, double tn, double xn) {
            if (metric_.norm() == Norm::l2) return l2_distance(t, x);
            return detail::cosine_from_parts(detail::dot(t, x), tn, xn);
        };
        switch (metric_.kind()) {
            case EmbeddingKind::content:
                return component(target.content, s.content.row(r), target_content_norm, data_->content_norms[r]);
            case EmbeddingKind::style:
                return component(target.style, s.style.row(r), target_style_norm, data_->style_norms[r]);
            case EmbeddingKind::combined:
                return component(target.content, s.content.row(r), target_content_norm, data_->content_norms[r]) +
                       *metric_.alpha() *
                           component(target.style, s.style.row(r), target_style_norm, data_->style_norms[r]);
        }
        return 0.0;
    }

private:
    struct Data {
        std::shared_ptr<const EmbeddingStore> store;
        std::shared_ptr<const Corpus> corpus;
        std::vector<double> content_norms;
        std::vector<double> style_norms;
    };

    void check_metric(const MetricConfig& m) const {
        const auto& h = data_->store->header;
        if (m.uses_content() && h.content_dim == 0) {
            throw Error(Errc::dimension_mismatch, "metric " + m.name() + " needs content vectors");
        }
        if (m.uses_style() && h.style_dim == 0) {
            throw Error(Errc::dimension_mismatch, "metric " + m.name() + " needs style vectors");
        }
    }

    std::shared_ptr<const Data> data_;
    MetricConfig metric_;
};

inline Index build_index(const EmbeddingStore& store, const Corpus& corpus, const MetricConfig& metric) {
    return Index(std::make_shared<const EmbeddingStore>(store), std::make_shared<const Corpus>(corpus), metric);
}

/// The k nearest rows passing `filter`, ascending by distance with ties broken
/// by app_id. With `max_normalized_distance`, farther results are dropped.
inline std::vector<RetrievalResult> query_top_k(const Index& index, const IconEmbedding& target, std::size_t k,
                                                const QueryFilter& filter = {},
                                                std::optional<double> max_normalized_distance = std::nullopt,
                                                const QueryOptions& opts = {}) {
    if (k < 1) throw Error(Errc::invalid_argument, "k must be at least 1");
    const auto& metric = index.metric();
    if (max_normalized_distance && metric.norm() != Norm::cosine) {
        throw Error(Errc::unsupported_normalization,
                    "a normalized distance threshold requires a cosine metric, got " + metric.name());
    }
    const auto& h = index.store().header;
    if ((metric.uses_content() && target.content.size() != h.content_dim) ||
        (metric.uses_style() && target.style.size() != h.style_dim)) {
        throw Error(Errc::dimension_mismatch, "target embedding does not match index dimensions");
    }

    const double tc = std::sqrt(detail::sum_squares(target.content));
    const double ts = std::sqrt(detail::sum_squares(target.style));
    const std::size_t n = index.size();
    std::vector<double> dist(n);
    std::vector<char> keep(n);
    auto scan = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            keep[r] = index.passes(r, filter, target.app_id);
            if (keep[r]) dist[r] = index.distance_to(target, tc, ts, r);
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(n / 256 + 1)));
    if (workers == 1) {
        scan(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
            pool.emplace_back(scan, b, e);
        }
    }

    std::vector<std::size_t> rows;
    rows.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (keep[r]) rows.push_back(r);
    }
    const auto& ids = index.store().app_ids;
    auto closer = [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return ids[a] < ids[b];
    };
    const std::size_t take = std::min(k, rows.size());
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end(), closer);

    std::vector<RetrievalResult> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t r = rows[i];
        RetrievalResult res{ids[r], r, dist[r], std::nullopt, i + 1};
        if (metric.norm() == Norm::cosine) res.normalized_distance = normalize_distance(dist[r], metric);
        if (max_normalized_distance && *res.normalized_distance > *max_normalized_distance) break;
        out.push_back(std::move(res));
    }
    return out;
}

struct CurvePoint {
    double threshold = 0.0;
    double rate = 0.0;
};

/// Kneedle (sensitivity 1) on a concave increasing curve: both axes are
/// min-max normalized and the knee is the threshold maximizing y_n − x_n.
/// Returns nullopt when the curve never rises above the diagonal.
inline std::optional<double> knee_threshold(std::span<const CurvePoint> curve) {
    if (curve.size() < 3) throw Error(Errc::invalid_argument, "knee detection needs at least 3 points");
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (!(curve[i].threshold > curve[i - 1].threshold)) {
            throw Error(Errc::invalid_argument, "thresholds must be strictly increasing");
        }
        if (curve[i].rate < curve[i - 1].rate) {
            throw Error(Errc::invalid_argument, "retrieval rates must be non-decreasing");
        }
    }
    const double x0 = curve.front().threshold, x1 = curve.back().threshold;
    const double y0 = curve.front().rate, y1 = curve.back().rate;
    if (y1 == y0) return std::nullopt;

    std::size_t best = 0;
    double best_diff = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double xn = (curve[i].threshold - x0) / (x1 - x0);
        const double yn = (curve[i].rate - y0) / (y1 - y0);
        const double diff = yn - xn;
        if (diff > best_diff) {
            best_diff = diff;
            best = i;
        }
    }
    if (best_diff <= 1e-12) return std::nullopt;
    return curve[best].threshold;
}

}  // namespace iconsim
