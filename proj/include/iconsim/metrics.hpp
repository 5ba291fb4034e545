#pragma once
// The six icon distance metrics: content / style / combined, each under L2
// or cosine distance, plus normalization of cosine distances to [0, 1].

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>

#include "iconsim/embeddings.hpp"
#include "iconsim/error.hpp"

namespace iconsim {

enum class EmbeddingKind { content, style, combined };
enum class Norm { l2, cosine };

inline const char* to_string(EmbeddingKind kind) {
    switch (kind) {
        case EmbeddingKind::content: return "content";
        case EmbeddingKind::style: return "style";
        case EmbeddingKind::combined: return "combined";
    }
    return "?";
}

inline const char* to_string(Norm norm) { return norm == Norm::l2 ? "l2" : "cos"; }

inline EmbeddingKind parse_embedding_kind(const std::string& s) {
    if (s == "content") return EmbeddingKind::content;
    if (s == "style") return EmbeddingKind::style;
    if (s == "combined") return EmbeddingKind::combined;
    throw Error(Errc::invalid_argument, "unknown metric '" + s + "' (expected content, style or combined)");
}

inline Norm parse_norm(const std::string& s) {
    if (s == "l2" || s == "L2") return Norm::l2;
    if (s == "cos" || s == "cosine") return Norm::cosine;
    throw Error(Errc::invalid_argument, "unknown norm '" + s + "' (expected l2 or cos)");
}

class MetricConfig {
public:
    static MetricConfig content(Norm norm) { return MetricConfig(EmbeddingKind::content, norm, std::nullopt); }
    static MetricConfig style(Norm norm) { return MetricConfig(EmbeddingKind::style, norm, std::nullopt); }
    static MetricConfig combined(Norm norm, double alpha) { return MetricConfig(EmbeddingKind::combined, norm, alpha); }

    /// `alpha` is required for combined metrics and rejected otherwise.
    MetricConfig(EmbeddingKind kind, Norm norm, std::optional<double> alpha) : kind_(kind), norm_(norm), alpha_(alpha) {
        if (kind == EmbeddingKind::combined) {
            if (!alpha) throw Error(Errc::invalid_argument, "combined metric requires alpha");
            if (!(*alpha >= 0.0) || !std::isfinite(*alpha)) {
                throw Error(Errc::invalid_argument, "alpha must be a finite non-negative number");
            }
        } else if (alpha) {
            throw Error(Errc::invalid_argument, "alpha is only meaningful for the combined metric");
        }
    }

    EmbeddingKind kind() const noexcept { return kind_; }
    Norm norm() const noexcept { return norm_; }
    std::optional<double> alpha() const noexcept { return alpha_; }
    bool uses_content() const noexcept { return kind_ != EmbeddingKind::style; }
    bool uses_style() const noexcept { return kind_ != EmbeddingKind::content; }

    /// e.g. "content_cos", "combined_l2(alpha=1e+06)".
    std::string name() const {
        std::ostringstream os;
        os << to_string(kind_) << '_' << to_string(norm_);
        if (alpha_) os << "(alpha=" << *alpha_ << ')';
        return os.str();
    }

    bool operator==(const MetricConfig&) const = default;

private:
    EmbeddingKind kind_;
    Norm norm_;
    std::optional<double> alpha_;
};

namespace detail {

inline void check_same_size(std::span<const float> a, std::span<const float> b, const char* what) {
    if (a.size() != b.size()) {
        throw Error(Errc::dimension_mismatch, std::string(what) + " dimensions differ (" + std::to_string(a.size()) +
                                                  " vs " + std::to_string(b.size()) + ")");
    }
}

inline double sum_squares(std::span<const float> a) {
    double acc = 0.0;
    for (float v : a) acc += static_cast<double>(v) * v;
    return acc;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

// Shared by `distance` and the index scan so both agree bit for bit.
inline double cosine_from_parts(double dot, double norm_a, double norm_b) {
    if (norm_a == 0.0 && norm_b == 0.0) return 0.0;
    if (norm_a == 0.0 || norm_b == 0.0) return 1.0;
    return std::max(0.0, 1.0 - dot / (norm_a * norm_b));
}

}  // namespace detail

inline double l2_distance(std::span<const float> a, std::span<const float> b) {
    detail::check_same_size(a, b, "vector");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// 1 − a·b / (|a||b|). Zero-norm convention: both zero → 0, exactly one → 1.
inline double cosine_distance(std::span<const float> a, std::span<const float> b) {
    detail::check_same_size(a, b, "vector");
    return detail::cosine_from_parts(detail::dot(a, b), std::sqrt(detail::sum_squares(a)),
                                     std::sqrt(detail::sum_squares(b)));
}

inline double component_distance(std::span<const float> a, std::span<const float> b, Norm norm) {
    return norm == Norm::l2 ? l2_distance(a, b) : cosine_distance(a, b);
}

inline double distance(const IconEmbedding& a, const IconEmbedding& b, const MetricConfig& cfg) {
    switch (cfg.kind()) {
        case EmbeddingKind::content: return component_distance(a.content, b.content, cfg.norm());
        case EmbeddingKind::style: return component_distance(a.style, b.style, cfg.norm());
        case EmbeddingKind::combined:
            return component_distance(a.content, b.content, cfg.norm()) +
                   *cfg.alpha() * component_distance(a.style, b.style, cfg.norm());
    }
    return 0.0;
}

/// Largest distance a cosine metric can produce on non-negative embeddings.
inline double max_cosine_distance(const MetricConfig& cfg) {
    return cfg.kind() == EmbeddingKind::combined ? 1.0 + *cfg.alpha() : 1.0;
}

/// Maps a cosine-metric distance onto [0, 1] (combined: divide by 1 + alpha).
/// L2 distances are unbounded and cannot be normalized.
inline double normalize_distance(double d, const MetricConfig& cfg) {
    if (cfg.norm() != Norm::cosine) {
        throw Error(Errc::unsupported_normalization, "distance normalization requires a cosine metric, got " +
                                                         cfg.name());
    }
    if (!(d >= 0.0)) throw Error(Errc::invalid_argument, "distance must be non-negative");
    return std::min(1.0, d / max_cosine_distance(cfg));
}

}  // namespace iconsim
