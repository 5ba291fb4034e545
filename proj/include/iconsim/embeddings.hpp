#pragma once
// Style and content embeddings: Gram matrix of conv filter responses,
// upper-triangle flattening, and very sparse random projection.

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iconsim/backbone.hpp"
#include "iconsim/corpus.hpp"
#include "iconsim/error.hpp"
#include "iconsim/matrix.hpp"
#include "iconsim/philox.hpp"

namespace iconsim {

/// Symmetric N×N matrix of filter co-activations, row-major.
struct GramMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// G = F·Fᵀ. Only the upper triangle is computed; the lower one is mirrored,
/// so the result is exactly symmetric.
inline GramMatrix gram(const FeatureMap& f) {
    for (float v : f.values) {
        if (!std::isfinite(v)) throw Error(Errc::non_finite, "non-finite feature map entry");
    }
    const std::size_t n = f.filters;
    GramMatrix g{n, std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto ri = f.row(i);
        for (std::size_t j = i; j < n; ++j) {
            const auto rj = f.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < f.positions; ++k) acc += static_cast<double>(ri[k]) * rj[k];
            g.values[i * n + j] = acc;
            g.values[j * n + i] = acc;
        }
    }
    return g;
}

constexpr std::size_t style_dimension(std::size_t filters) noexcept { return filters * (filters + 1) / 2; }

/// Row-major traversal of (i, j) with j ≥ i.
inline std::vector<double> flatten_upper(const GramMatrix& g) {
    if (g.values.size() != g.n * g.n) throw Error(Errc::dimension_mismatch, "gram matrix is not square");
    std::vector<double> out;
    out.reserve(style_dimension(g.n));
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = i; j < g.n; ++j) {
            const double a = g(i, j);
            const double b = g(j, i);
            if (a != b && std::abs(a - b) > 1e-9 * std::max(std::abs(a), std::abs(b))) {
                throw Error(Errc::invalid_argument, "gram matrix is not symmetric at (" + std::to_string(i) +
                                                        ", " + std::to_string(j) + ")");
            }
            out.push_back(a);
        }
    }
    return out;
}

/// Sparse D×k matrix with entries D^{1/4}·{+1, 0, −1}, drawn i.i.d. with
/// P(±1) = 1/(2√D). Every entry is a pure function of (seed, i, j), so the
/// matrix is regenerated from the seed instead of being stored.
class ProjectionMatrix {
public:
    static constexpr const char* generator_name = "philox4x32-10/v1";

    ProjectionMatrix(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed)
        : input_dim_(input_dim), output_dim_(output_dim), seed_(seed) {
        if (input_dim == 0 || output_dim == 0) {
            throw Error(Errc::invalid_argument, "projection dimensions must be at least 1");
        }
        magnitude_ = std::pow(static_cast<double>(input_dim), 0.25);
        row_start_.reserve(input_dim + 1);
        row_start_.push_back(0);
        const double expected = static_cast<double>(output_dim) / std::sqrt(static_cast<double>(input_dim));
        cols_.reserve(static_cast<std::size_t>(expected * static_cast<double>(input_dim) * 1.1) + 16);
        signs_.reserve(cols_.capacity());
        for (std::size_t i = 0; i < input_dim; ++i) {
            for (std::size_t j = 0; j < output_dim; j += 2) {
                const auto pair = draw_pair(seed, input_dim, i, j);
                for (std::size_t t = 0; t < 2 && j + t < output_dim; ++t) {
                    if (pair[t] != 0) {
                        cols_.push_back(static_cast<std::uint32_t>(j + t));
                        signs_.push_back(pair[t]);
                    }
                }
            }
            row_start_.push_back(cols_.size());
        }
    }

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    double magnitude() const noexcept { return magnitude_; }
    std::size_t nonzeros() const noexcept { return cols_.size(); }

    /// Sign pattern (−1, 0, +1) of entry (i, j), computed from the seed alone.
    static int sign_at(std::uint64_t seed, std::size_t input_dim, std::size_t i, std::size_t j) {
        return draw_pair(seed, input_dim, i, j & ~std::size_t{1})[j & 1];
    }

    /// Entry r_ij of the stored matrix.
    double value(std::size_t i, std::size_t j) const {
        const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_start_.at(i));
        const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_start_.at(i + 1));
        auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
        if (it == end || *it != j) return 0.0;
        return magnitude_ * signs_[static_cast<std::size_t>(it - cols_.begin())];
    }

    /// Nonzero columns and signs of input row i.
    std::span<const std::uint32_t> row_cols(std::size_t i) const {
        return {cols_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
    }
    std::span<const std::int8_t> row_signs(std::size_t i) const {
        return {signs_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
    }

private:
    // Entries (i, j) and (i, j+1) share one Philox block, 64 bits each.
    static std::array<std::int8_t, 2> draw_pair(std::uint64_t seed, std::size_t input_dim, std::size_t i,
                                                std::size_t j) {
        const double p = 1.0 / std::sqrt(static_cast<double>(input_dim));
        const auto r = Philox4x32::generate(
            {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), static_cast<std::uint32_t>(j >> 1),
             static_cast<std::uint32_t>(j >> 33)},
            Philox4x32::key_from_seed(seed));
        auto pick = [p](std::uint64_t bits) -> std::int8_t {
            const double u = uniform01(bits);
            if (u < 0.5 * p) return 1;
            if (u < p) return -1;
            return 0;
        };
        return {pick(join64(r[0], r[1])), pick(join64(r[2], r[3]))};
    }

    std::size_t input_dim_;
    std::size_t output_dim_;
    std::uint64_t seed_;
    double magnitude_ = 0.0;
    std::vector<std::size_t> row_start_;
    std::vector<std::uint32_t> cols_;
    std::vector<std::int8_t> signs_;
};

inline ProjectionMatrix make_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed) {
    return ProjectionMatrix(input_dim, output_dim, seed);
}

/// Projects a single row: (1/√k)·a·R.
inline std::vector<double> project_row(std::span<const double> a, const ProjectionMatrix& r) {
    if (a.size() != r.input_dim()) {
        throw Error(Errc::dimension_mismatch, "projection input has " + std::to_string(a.size()) +
                                                  " columns, expected " + std::to_string(r.input_dim()));
    }
    std::vector<double> out(r.output_dim(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const auto cols = r.row_cols(i);
        const auto signs = r.row_signs(i);
        for (std::size_t t = 0; t < cols.size(); ++t) out[cols[t]] += signs[t] > 0 ? ai : -ai;
    }
    const double scale = r.magnitude() / std::sqrt(static_cast<double>(r.output_dim()));
    for (double& v : out) v *= scale;
    return out;
}

/// B = (1/√k)·A·R for an n×D batch. Rows are independent, so the result does
/// not depend on how a corpus is split into batches.
inline Matrix<double> project(const Matrix<double>& batch, const ProjectionMatrix& r) {
    if (batch.cols() != r.input_dim()) {
        throw Error(Errc::dimension_mismatch, "projection input has " + std::to_string(batch.cols()) +
                                                  " columns, expected " + std::to_string(r.input_dim()));
    }
    Matrix<double> out(batch.rows(), r.output_dim());
    for (std::size_t row = 0; row < batch.rows(); ++row) {
        const auto projected = project_row(batch.row(row), r);
        std::copy(projected.begin(), projected.end(), out.row(row).begin());
    }
    return out;
}

struct IconEmbedding {
    std::string app_id;
    std::vector<float> content;
    std::vector<float> style;

    bool operator==(const IconEmbedding&) const = default;
};

/// Style vector S' of one feature map: gram → flatten_upper → project.
inline std::vector<float> style_embedding(const FeatureMap& f, const ProjectionMatrix& r) {
    const auto s = flatten_upper(gram(f));
    const auto projected = project_row(s, r);
    return {projected.begin(), projected.end()};
}

inline IconEmbedding encode_image(std::string app_id, const cv::Mat& rgb, const Backbone& backbone,
                                  const ProjectionMatrix& r) {
    const auto& info = backbone.info();
    if (r.input_dim() != style_dimension(info.style_filters)) {
        throw Error(Errc::dimension_mismatch, "projection expects D=" + std::to_string(r.input_dim()) +
                                                  " but the style tap yields D=" +
                                                  std::to_string(style_dimension(info.style_filters)));
    }
    auto out = backbone.extract(preprocess(rgb, info.preprocess_options()));
    return {std::move(app_id), std::move(out.content), style_embedding(out.style, r)};
}

/// Whole encoding pipeline for one record: decode → preprocess → extract → (content, S').
inline IconEmbedding encode_icon(const IconRecord& record, const Backbone& backbone, const ProjectionMatrix& r) {
    return encode_image(record.app_id, decode_image(record.icon_path), backbone, r);
}

}  // namespace iconsim
