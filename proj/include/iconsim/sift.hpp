#pragma once
// SIFT baseline: per-icon descriptor sets, the closest-pair aggregate
// distance, and the per-corpus descriptor cache.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/features2d.hpp>
#include <opencv2/imgproc.hpp>

#include "iconsim/backbone.hpp"
#include "iconsim/binary_io.hpp"
#include "iconsim/error.hpp"
#include "iconsim/matrix.hpp"

namespace iconsim {

inline constexpr std::size_t kSiftDim = 128;

struct SiftParams {
    int octave_layers = 3;
    double contrast_threshold = 0.04;
    double edge_threshold = 10.0;
    double sigma = 1.6;
};

/// t × 128 descriptors, rows in lexicographic order so equal sets compare equal.
struct SiftDescriptorSet {
    Matrix<float> descriptors{0, kSiftDim};

    std::size_t size() const noexcept { return descriptors.rows(); }
    bool empty() const noexcept { return descriptors.rows() == 0; }
    bool operator==(const SiftDescriptorSet&) const = default;
};

inline SiftDescriptorSet sift_descriptors(const cv::Mat& rgb, const SiftParams& params = {}) {
    cv::Mat gray;
    cv::cvtColor(to_rgb8(rgb, /*bgr=*/false), gray, cv::COLOR_RGB2GRAY);
    auto sift = cv::SIFT::create(0, params.octave_layers, params.contrast_threshold, params.edge_threshold,
                                 params.sigma);
    std::vector<cv::KeyPoint> keypoints;
    cv::Mat desc;
    sift->detectAndCompute(gray, cv::noArray(), keypoints, desc);

    std::vector<std::vector<float>> rows;
    rows.reserve(static_cast<std::size_t>(desc.rows));
    for (int r = 0; r < desc.rows; ++r) {
        const float* p = desc.ptr<float>(r);
        rows.emplace_back(p, p + kSiftDim);
    }
    std::sort(rows.begin(), rows.end());

    SiftDescriptorSet out;
    for (const auto& row : rows) out.descriptors.push_row(row);
    return out;
}

/// Σ over query descriptors of the L2 distance to the nearest candidate
/// descriptor. Not symmetric.
inline double sift_distance(const SiftDescriptorSet& query, const SiftDescriptorSet& candidate) {
    if (query.empty() || candidate.empty()) {
        throw Error(Errc::incomparable, "SIFT distance needs at least one descriptor on each side");
    }
    if (query.descriptors.cols() != candidate.descriptors.cols()) {
        throw Error(Errc::dimension_mismatch, "SIFT descriptor widths differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        const auto q = query.descriptors.row(i);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < candidate.size(); ++j) {
            const auto c = candidate.descriptors.row(j);
            double acc = 0.0;
            for (std::size_t d = 0; d < q.size(); ++d) {
                const double diff = static_cast<double>(q[d]) - c[d];
                acc += diff * diff;
                if (acc >= best) break;
            }
            best = std::min(best, acc);
        }
        total += std::sqrt(best);
    }
    return total;
}

// Descriptor cache: "ICSF", version u32, config hash u64, icon count u64,
// then per icon: t u32 followed by t×128 little-endian float32.
inline constexpr std::uint32_t kSiftCacheVersion = 1;

struct SiftCache {
    std::uint64_t config_hash = 0;
    std::vector<SiftDescriptorSet> sets;  // corpus row order
};

inline void write_sift_cache(const std::filesystem::path& path, const SiftCache& cache) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out.write("ICSF", 4);
    binio::put_u32(out, kSiftCacheVersion);
    binio::put_u64(out, cache.config_hash);
    binio::put_u64(out, cache.sets.size());
    for (const auto& s : cache.sets) {
        binio::put_u32(out, static_cast<std::uint32_t>(s.size()));
        for (float v : s.descriptors.data()) binio::put_f32(out, v);
    }
    if (!out) throw Error(Errc::io, "write failure on " + path.string());
}

inline SiftCache read_sift_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    char magic[4];
    binio::read_exact(in, magic, 4);
    if (std::string(magic, 4) != "ICSF") throw Error(Errc::format, path.string() + " is not a SIFT descriptor cache");
    if (auto v = binio::get_u32(in); v != kSiftCacheVersion) {
        throw Error(Errc::format, "unsupported SIFT cache version " + std::to_string(v));
    }
    SiftCache cache;
    cache.config_hash = binio::get_u64(in);
    const auto count = binio::get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto t = binio::get_u32(in);
        std::vector<float> values(static_cast<std::size_t>(t) * kSiftDim);
        for (float& v : values) v = binio::get_f32(in);
        cache.sets.push_back(SiftDescriptorSet{Matrix<float>(t, kSiftDim, std::move(values))});
    }
    return cache;
}

}  // namespace iconsim
