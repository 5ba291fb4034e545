#pragma once
// Exported-model bundles: metadata.json + serialized inference graph + a
// reference pack of inputs and expected tap outputs. The ONNX backbone runs
// the graph through OpenCV's dnn module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/dnn.hpp>

#include "iconsim/backbone.hpp"
#include "iconsim/binary_io.hpp"
#include "iconsim/error.hpp"

namespace iconsim {

struct ModelMetadata {
    std::string graph = "model.onnx";
    std::string variant = "vgg16";
    std::string content_tap = "fc7";
    std::string style_tap = "conv5_1";
    int input_size = 224;
    std::array<double, 3> means{123.68, 116.779, 103.939};
    std::size_t content_dim = 4096;
    std::size_t style_filters = 512;
    std::size_t style_positions = 196;
    std::string weights;
    std::string refpack = "refpack";
};

inline void from_json(const nlohmann::json& j, ModelMetadata& m) {
    m.graph = j.value("graph", m.graph);
    m.variant = j.value("variant", m.variant);
    m.content_tap = j.value("content_tap", m.content_tap);
    m.style_tap = j.value("style_tap", m.style_tap);
    m.input_size = j.value("input_size", m.input_size);
    m.means = j.value("means", m.means);
    m.content_dim = j.value("content_dim", m.content_dim);
    m.style_filters = j.value("style_filters", m.style_filters);
    m.style_positions = j.value("style_positions", m.style_positions);
    m.weights = j.value("weights", m.weights);
    m.refpack = j.value("refpack", m.refpack);
}

inline ModelMetadata read_model_metadata(const std::filesystem::path& bundle_dir) {
    const auto path = bundle_dir / "metadata.json";
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in).get<ModelMetadata>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse, path.string() + ": " + e.what());
    }
}

/// Backbone backed by a serialized ONNX graph with two named outputs.
class OnnxBackbone final : public Backbone {
public:
    explicit OnnxBackbone(const std::filesystem::path& bundle_dir)
        : OnnxBackbone(bundle_dir, read_model_metadata(bundle_dir)) {}

    OnnxBackbone(const std::filesystem::path& bundle_dir, ModelMetadata meta) : meta_(std::move(meta)) {
        const auto graph = bundle_dir / meta_.graph;
        try {
            net_ = cv::dnn::readNetFromONNX(graph.string());
        } catch (const cv::Exception& e) {
            throw Error(Errc::model, "cannot load " + graph.string() + ": " + e.what());
        }
        if (net_.empty()) throw Error(Errc::model, "empty network in " + graph.string());
        net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
        net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

        info_.kind = "onnx:" + meta_.variant;
        info_.input_size = meta_.input_size;
        for (int c = 0; c < 3; ++c) info_.means[c] = static_cast<float>(meta_.means[c]);
        info_.content_dim = meta_.content_dim;
        info_.style_filters = meta_.style_filters;
        info_.style_positions = meta_.style_positions;
        info_.content_tap = meta_.content_tap;
        info_.style_tap = meta_.style_tap;
    }

    const BackboneInfo& info() const noexcept override { return info_; }
    const ModelMetadata& metadata() const noexcept { return meta_; }

    BackboneOutputs extract(const PreprocessedImage& img) const override {
        detail::check_input(info_, img);
        const int shape[] = {1, 3, img.size, img.size};
        cv::Mat blob(4, shape, CV_32F, const_cast<float*>(img.data.data()));

        std::vector<cv::Mat> outs;
        {
            std::lock_guard lock(mutex_);
            try {
                net_.setInput(blob.clone());
                net_.forward(outs, std::vector<cv::String>{meta_.content_tap, meta_.style_tap});
            } catch (const cv::Exception& e) {
                throw Error(Errc::model, std::string("inference failed: ") + e.what());
            }
        }
        if (outs.size() != 2) throw Error(Errc::model, "expected two tap outputs");

        BackboneOutputs out;
        const cv::Mat content = outs[0].isContinuous() ? outs[0] : outs[0].clone();
        out.content.assign(content.ptr<float>(), content.ptr<float>() + content.total());

        const cv::Mat style = outs[1].isContinuous() ? outs[1] : outs[1].clone();
        if (style.dims < 2 || style.size[0] != 1) throw Error(Errc::model, "style tap must have batch size 1");
        const auto filters = static_cast<std::size_t>(style.size[1]);
        const std::size_t positions = filters == 0 ? 0 : style.total() / filters;
        out.style = FeatureMap(filters, positions,
                               std::vector<float>(style.ptr<float>(), style.ptr<float>() + style.total()));
        detail::check_outputs(info_, out);
        return out;
    }

private:
    ModelMetadata meta_;
    BackboneInfo info_;
    mutable cv::dnn::Net net_;
    mutable std::mutex mutex_;
};

/// Float array with a shape header: ndim u32, dims u32[ndim], then
/// little-endian float32 data.
struct RefArray {
    std::vector<std::uint32_t> shape;
    std::vector<float> values;
};

inline RefArray read_ref_array(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    RefArray a;
    const auto ndim = binio::get_u32(in);
    if (ndim > 8) throw Error(Errc::format, path.string() + ": implausible rank " + std::to_string(ndim));
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        a.shape.push_back(binio::get_u32(in));
        count *= a.shape.back();
    }
    a.values.resize(count);
    for (float& v : a.values) v = binio::get_f32(in);
    return a;
}

inline void write_ref_array(const std::filesystem::path& path, const RefArray& a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    binio::put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) binio::put_u32(out, d);
    for (float v : a.values) binio::put_f32(out, v);
}

struct RefCaseResult {
    std::string name;
    bool shapes_ok = false;
    double content_max_abs = 0.0;
    double style_max_abs = 0.0;
};

struct RefpackReport {
    double tolerance = 0.0;
    std::vector<RefCaseResult> cases;

    bool passed() const {
        return !cases.empty() && std::all_of(cases.begin(), cases.end(), [&](const RefCaseResult& c) {
                   return c.shapes_ok && c.content_max_abs <= tolerance && c.style_max_abs <= tolerance;
               });
    }
};

/// Runs `backbone` on every refpack input (input_NN.bin) and compares with
/// content_NN.bin / style_NN.bin.
inline RefpackReport verify_refpack(const std::filesystem::path& refpack_dir, const Backbone& backbone,
                                    double tolerance) {
    RefpackReport report{tolerance, {}};
    std::vector<std::filesystem::path> inputs;
    for (const auto& entry : std::filesystem::directory_iterator(refpack_dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("input_", 0) == 0 && entry.path().extension() == ".bin") inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw Error(Errc::not_found, "no reference inputs in " + refpack_dir.string());

    const auto& info = backbone.info();
    for (const auto& input_path : inputs) {
        const auto suffix = input_path.filename().string().substr(6);
        const auto input = read_ref_array(input_path);
        const auto want_content = read_ref_array(refpack_dir / ("content_" + suffix));
        const auto want_style = read_ref_array(refpack_dir / ("style_" + suffix));

        RefCaseResult res;
        res.name = input_path.stem().string();
        const std::size_t side = static_cast<std::size_t>(info.input_size);
        if (input.values.size() != 3 * side * side) {
            throw Error(Errc::dimension_mismatch, input_path.string() + " does not match the backbone input size");
        }
        PreprocessedImage img{info.input_size, info.means, input.values};
        const auto got = backbone.extract(img);

        res.shapes_ok = want_content.values.size() == got.content.size() &&
                        want_style.values.size() == got.style.values.size() &&
                        got.content.size() == info.content_dim && got.style.filters == info.style_filters &&
                        got.style.positions == info.style_positions;
        if (res.shapes_ok) {
            for (std::size_t i = 0; i < got.content.size(); ++i) {
                res.content_max_abs =
                    std::max(res.content_max_abs, std::abs(static_cast<double>(got.content[i]) - want_content.values[i]));
            }
            for (std::size_t i = 0; i < got.style.values.size(); ++i) {
                res.style_max_abs = std::max(
                    res.style_max_abs, std::abs(static_cast<double>(got.style.values[i]) - want_style.values[i]));
            }
        }
        report.cases.push_back(res);
    }
    return report;
}

}  // namespace iconsim
