#pragma once
// Shared fixtures for the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "iconsim/iconsim.hpp"

namespace testing_support {

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("iconsim_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

inline iconsim::FeatureMap random_feature_map(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    return {n, m, random_vector(rng, n * m, 0.0f, 4.0f)};
}

inline cv::Mat random_rgb(std::mt19937_64& rng, int rows, int cols) {
    cv::Mat img(rows, cols, CV_8UC3);
    std::uniform_int_distribution<int> d(0, 255);
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x)
            for (int c = 0; c < 3; ++c) img.at<cv::Vec3b>(y, x)[c] = static_cast<unsigned char>(d(rng));
    return img;
}

/// Store + corpus built directly from embeddings, one developer per app unless given.
struct SyntheticIndex {
    std::vector<iconsim::IconRecord> records;
    std::vector<iconsim::IconEmbedding> embeddings;

    void add(iconsim::IconEmbedding e, std::string developer = {}, std::string category = "GAME",
             std::string name = {}, std::uint64_t downloads = 1000) {
        iconsim::IconRecord r;
        r.app_id = e.app_id;
        r.icon_path = e.app_id + ".png";
        r.app_name = name.empty() ? e.app_id : name;
        r.developer = developer.empty() ? "dev." + e.app_id : developer;
        r.category = std::move(category);
        r.downloads = downloads;
        records.push_back(std::move(r));
        embeddings.push_back(std::move(e));
    }

    iconsim::Index build(const iconsim::MetricConfig& metric) const {
        iconsim::PipelineConfig cfg;
        const std::size_t cdim = embeddings.empty() ? 0 : embeddings.front().content.size();
        const std::size_t sdim = embeddings.empty() ? 0 : embeddings.front().style.size();
        auto store = iconsim::make_store(cfg, cdim, sdim);
        for (const auto& e : embeddings) iconsim::append(store, e);
        return iconsim::Index(std::make_shared<const iconsim::EmbeddingStore>(std::move(store)),
                              std::make_shared<const iconsim::Corpus>(records), metric);
    }
};

inline std::vector<iconsim::MetricConfig> six_metrics(double alpha = 6.0) {
    using iconsim::MetricConfig;
    using iconsim::Norm;
    return {MetricConfig::content(Norm::l2),          MetricConfig::style(Norm::l2),
            MetricConfig::combined(Norm::l2, alpha),  MetricConfig::content(Norm::cosine),
            MetricConfig::style(Norm::cosine),        MetricConfig::combined(Norm::cosine, alpha)};
}

/// Brute-force top-k via distance(): sort everything by (distance, app_id).
inline std::vector<std::pair<std::string, double>> naive_top_k(const SyntheticIndex& s, std::size_t target,
                                                                std::size_t k, const iconsim::MetricConfig& m) {
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t r = 0; r < s.embeddings.size(); ++r) {
        if (r == target) continue;
        all.emplace_back(iconsim::distance(s.embeddings[target], s.embeddings[r], m), s.embeddings[r].app_id);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.emplace_back(all[i].second, all[i].first);
    return out;
}

}  // namespace testing_support
