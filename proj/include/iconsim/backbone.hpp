#pragma once
// Image decoding, preprocessing, and the convolutional backbone interface.
// A backbone exposes two taps: a content vector (last fully connected
// activation) and a style feature map (post-ReLU conv activations).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "iconsim/error.hpp"
#include "iconsim/philox.hpp"

namespace iconsim {

/// Per-channel RGB means on the 0..255 scale (ImageNet, as used by VGG).
inline constexpr std::array<float, 3> kImageNetMeans{123.68f, 116.779f, 103.939f};

/// Converts a decoded image to 8-bit, 3-channel RGB. Input channel order is
/// taken to be OpenCV's (BGR / BGRA) when `bgr` is set, RGB otherwise.
inline cv::Mat to_rgb8(const cv::Mat& image, bool bgr) {
    if (image.empty()) throw Error(Errc::invalid_argument, "empty image");
    cv::Mat src = image;
    if (src.depth() == CV_16U) {
        src.convertTo(src, CV_8U, 1.0 / 257.0);
    } else if (src.depth() != CV_8U) {
        throw Error(Errc::invalid_argument, "unsupported pixel depth; expected 8 or 16 bit");
    }
    cv::Mat rgb;
    switch (src.channels()) {
        case 1: cv::cvtColor(src, rgb, cv::COLOR_GRAY2RGB); break;
        case 3:
            if (bgr) cv::cvtColor(src, rgb, cv::COLOR_BGR2RGB);
            else rgb = src.clone();
            break;
        case 4: cv::cvtColor(src, rgb, bgr ? cv::COLOR_BGRA2RGB : cv::COLOR_RGBA2RGB); break;
        default:
            throw Error(Errc::invalid_argument,
                        "cannot convert " + std::to_string(src.channels()) + "-channel image to RGB");
    }
    return rgb;
}

/// Decodes a PNG/JPEG file to 8-bit RGB.
inline cv::Mat decode_image(const std::filesystem::path& path) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw Error(Errc::io, "cannot decode image " + path.string());
    return to_rgb8(raw, /*bgr=*/true);
}

struct PreprocessOptions {
    int input_size = 224;
    std::array<float, 3> means = kImageNetMeans;
};

/// Channel-first (3, size, size) tensor with the channel means subtracted.
struct PreprocessedImage {
    int size = 0;
    std::array<float, 3> means{};
    std::vector<float> data;

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * size + y) * size + x]; }
};

/// Bilinear resize to input_size², then per-channel mean subtraction.
/// `rgb` must be RGB ordered; 1- and 4-channel images are converted.
inline PreprocessedImage preprocess(const cv::Mat& rgb, const PreprocessOptions& opts) {
    if (opts.input_size < 1) throw Error(Errc::invalid_argument, "input_size must be positive");
    cv::Mat img = to_rgb8(rgb, /*bgr=*/false);
    cv::Mat f32;
    img.convertTo(f32, CV_32FC3);
    if (f32.rows != opts.input_size || f32.cols != opts.input_size) {
        cv::Mat resized;
        cv::resize(f32, resized, cv::Size(opts.input_size, opts.input_size), 0, 0, cv::INTER_LINEAR);
        f32 = resized;
    }

    PreprocessedImage out;
    out.size = opts.input_size;
    out.means = opts.means;
    out.data.resize(3 * static_cast<std::size_t>(out.size) * out.size);
    for (int y = 0; y < out.size; ++y) {
        const auto* px = f32.ptr<cv::Vec3f>(y);
        for (int x = 0; x < out.size; ++x) {
            for (int c = 0; c < 3; ++c) out.at(c, y, x) = px[x][c] - opts.means[c];
        }
    }
    return out;
}

/// Conv-layer filter responses, row-major (filters × positions).
struct FeatureMap {
    std::size_t filters = 0;
    std::size_t positions = 0;
    std::vector<float> values;

    FeatureMap() = default;
    FeatureMap(std::size_t n, std::size_t m, std::vector<float> v) : filters(n), positions(m), values(std::move(v)) {
        if (values.size() != n * m) throw Error(Errc::dimension_mismatch, "feature map size does not match shape");
    }

    std::span<const float> row(std::size_t i) const { return {values.data() + i * positions, positions}; }
    float operator()(std::size_t i, std::size_t j) const { return values[i * positions + j]; }
    bool operator==(const FeatureMap&) const = default;
};

using ContentVector = std::vector<float>;

struct BackboneOutputs {
    ContentVector content;
    FeatureMap style;
};

struct BackboneInfo {
    std::string kind;
    int input_size = 0;
    std::array<float, 3> means{};
    std::size_t content_dim = 0;
    std::size_t style_filters = 0;
    std::size_t style_positions = 0;
    std::string content_tap;
    std::string style_tap;

    PreprocessOptions preprocess_options() const { return {input_size, means}; }
};

/// A loaded backbone is immutable; `extract` may be called concurrently.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual const BackboneInfo& info() const noexcept = 0;
    virtual BackboneOutputs extract(const PreprocessedImage& img) const = 0;
};

using BackboneHandle = std::shared_ptr<const Backbone>;

namespace detail {

inline void check_input(const BackboneInfo& info, const PreprocessedImage& img) {
    if (img.size != info.input_size ||
        img.data.size() != 3 * static_cast<std::size_t>(img.size) * static_cast<std::size_t>(img.size)) {
        throw Error(Errc::dimension_mismatch, "preprocessed image is " + std::to_string(img.size) +
                                                  "px but backbone expects " + std::to_string(info.input_size));
    }
    for (float v : img.data) {
        if (!std::isfinite(v)) throw Error(Errc::non_finite, "non-finite input pixel");
    }
}

inline void check_outputs(const BackboneInfo& info, const BackboneOutputs& out) {
    if (out.content.size() != info.content_dim) {
        throw Error(Errc::model, "content tap has " + std::to_string(out.content.size()) + " values, expected " +
                                     std::to_string(info.content_dim));
    }
    if (out.style.filters != info.style_filters || out.style.positions != info.style_positions) {
        throw Error(Errc::model, "style tap has shape (" + std::to_string(out.style.filters) + ", " +
                                     std::to_string(out.style.positions) + "), expected (" +
                                     std::to_string(info.style_filters) + ", " +
                                     std::to_string(info.style_positions) + ")");
    }
    for (float v : out.content) {
        if (!std::isfinite(v)) throw Error(Errc::non_finite, "non-finite content activation");
    }
    for (float v : out.style.values) {
        if (!std::isfinite(v)) throw Error(Errc::non_finite, "non-finite style activation");
    }
}

}  // namespace detail

struct StubOptions {
    std::uint64_t seed = 7;
    int input_size = 64;
    bool zero_weights = false;
    std::array<float, 3> means = kImageNetMeans;
};

/// Small fixed-seed network with the same tap structure as the real backbone:
///   conv 4x4/4 (3→8) + ReLU → maxpool 2x2/2 → conv 2x2/2 (8→8) + ReLU  [style tap]
///   → fully connected (8·M → 32) + ReLU                               [content tap]
/// Every style-tap position depends only on its own 16x16 input block.
class StubBackbone final : public Backbone {
public:
    static constexpr std::size_t kFilters = 8;
    static constexpr std::size_t kContentDim = 32;

    explicit StubBackbone(const StubOptions& opts = {}) {
        if (opts.input_size < 16 || opts.input_size % 16 != 0) {
            throw Error(Errc::invalid_argument, "stub backbone input size must be a positive multiple of 16");
        }
        grid_ = opts.input_size / 16;
        info_.kind = "stub";
        info_.input_size = opts.input_size;
        info_.means = opts.means;
        info_.content_dim = kContentDim;
        info_.style_filters = kFilters;
        info_.style_positions = static_cast<std::size_t>(grid_) * grid_;
        info_.content_tap = "stub_fc";
        info_.style_tap = "stub_conv2";

        const std::size_t fc_in = kFilters * info_.style_positions;
        conv1_ = weights(opts, 1, kFilters * 3 * 4 * 4, 3 * 4 * 4);
        conv2_ = weights(opts, 2, kFilters * kFilters * 2 * 2, kFilters * 2 * 2);
        fc_ = weights(opts, 3, kContentDim * fc_in, fc_in);
    }

    const BackboneInfo& info() const noexcept override { return info_; }

    BackboneOutputs extract(const PreprocessedImage& img) const override {
        detail::check_input(info_, img);
        const int s1 = info_.input_size / 4;
        std::vector<float> a1(kFilters * s1 * s1);
        for (std::size_t f = 0; f < kFilters; ++f) {
            for (int oy = 0; oy < s1; ++oy) {
                for (int ox = 0; ox < s1; ++ox) {
                    float acc = 0.0f;
                    for (int c = 0; c < 3; ++c)
                        for (int ky = 0; ky < 4; ++ky)
                            for (int kx = 0; kx < 4; ++kx)
                                acc += conv1_[((f * 3 + c) * 4 + ky) * 4 + kx] * img.at(c, 4 * oy + ky, 4 * ox + kx);
                    a1[(f * s1 + oy) * s1 + ox] = std::max(acc, 0.0f);
                }
            }
        }

        const int s2 = s1 / 2;
        std::vector<float> a2(kFilters * s2 * s2);
        for (std::size_t f = 0; f < kFilters; ++f)
            for (int y = 0; y < s2; ++y)
                for (int x = 0; x < s2; ++x) {
                    float m = a1[(f * s1 + 2 * y) * s1 + 2 * x];
                    m = std::max(m, a1[(f * s1 + 2 * y) * s1 + 2 * x + 1]);
                    m = std::max(m, a1[(f * s1 + 2 * y + 1) * s1 + 2 * x]);
                    m = std::max(m, a1[(f * s1 + 2 * y + 1) * s1 + 2 * x + 1]);
                    a2[(f * s2 + y) * s2 + x] = m;
                }

        const int s3 = grid_;
        std::vector<float> style(kFilters * s3 * s3);
        for (std::size_t f = 0; f < kFilters; ++f)
            for (int oy = 0; oy < s3; ++oy)
                for (int ox = 0; ox < s3; ++ox) {
                    float acc = 0.0f;
                    for (std::size_t c = 0; c < kFilters; ++c)
                        for (int ky = 0; ky < 2; ++ky)
                            for (int kx = 0; kx < 2; ++kx)
                                acc += conv2_[((f * kFilters + c) * 2 + ky) * 2 + kx] *
                                       a2[(c * s2 + 2 * oy + ky) * s2 + 2 * ox + kx];
                    style[(f * s3 + oy) * s3 + ox] = std::max(acc, 0.0f);
                }

        const std::size_t fc_in = style.size();
        ContentVector content(kContentDim);
        for (std::size_t o = 0; o < kContentDim; ++o) {
            float acc = 0.0f;
            for (std::size_t i = 0; i < fc_in; ++i) acc += fc_[o * fc_in + i] * style[i];
            content[o] = std::max(acc, 0.0f);
        }

        BackboneOutputs out{std::move(content), FeatureMap(kFilters, info_.style_positions, std::move(style))};
        detail::check_outputs(info_, out);
        return out;
    }

private:
    // He-uniform weights drawn from Philox with counter (layer, index).
    static std::vector<float> weights(const StubOptions& opts, std::uint32_t layer, std::size_t count,
                                      std::size_t fan_in) {
        std::vector<float> w(count, 0.0f);
        if (opts.zero_weights) return w;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        const auto key = Philox4x32::key_from_seed(opts.seed);
        for (std::size_t i = 0; i < count; ++i) {
            const auto r = Philox4x32::generate({layer, static_cast<std::uint32_t>(i), 0x57ABu, 0u}, key);
            const double u = uniform01(join64(r[0], r[1]));
            w[i] = static_cast<float>((2.0 * u - 1.0) * bound);
        }
        return w;
    }

    BackboneInfo info_;
    int grid_ = 0;
    std::vector<float> conv1_, conv2_, fc_;
};

}  // namespace iconsim
