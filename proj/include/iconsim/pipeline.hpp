#pragma once
// Corpus-level encoding: backbone construction from a config and a worker
// pool that fills the embedding store / SIFT cache in corpus row order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "iconsim/backbone.hpp"
#include "iconsim/bundle.hpp"
#include "iconsim/config.hpp"
#include "iconsim/corpus.hpp"
#include "iconsim/embeddings.hpp"
#include "iconsim/sift.hpp"
#include "iconsim/store.hpp"

namespace iconsim {

/// Stub or ONNX backbone per `cfg`. Bundle metadata must agree with the
/// config's input size and channel means.
inline BackboneHandle make_backbone(const PipelineConfig& cfg) {
    if (cfg.backbone == BackboneKind::stub) {
        StubOptions opts;
        opts.seed = cfg.stub_seed;
        opts.input_size = cfg.input_size;
        opts.means = cfg.preprocess_options().means;
        return std::make_shared<const StubBackbone>(opts);
    }
    if (cfg.model.empty()) throw Error(Errc::invalid_argument, "onnx backbone needs a model bundle directory");
    auto meta = read_model_metadata(cfg.model);
    if (meta.input_size != cfg.input_size) {
        throw Error(Errc::config_mismatch, "bundle input size " + std::to_string(meta.input_size) +
                                               " differs from config input size " + std::to_string(cfg.input_size));
    }
    for (int c = 0; c < 3; ++c) {
        if (std::abs(meta.means[c] - cfg.means[c]) > 1e-6) {
            throw Error(Errc::config_mismatch, "bundle preprocessing means differ from the config");
        }
    }
    return std::make_shared<const OnnxBackbone>(cfg.model, std::move(meta));
}

struct ProgressEvent {
    std::size_t done = 0;
    std::size_t total = 0;
    double seconds = 0.0;
};

using ProgressFn = std::function<void(const ProgressEvent&)>;

namespace detail {

// Runs fn(i) for i in [0, n) on `jobs` workers; rethrows the first failure.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn,
                         const ProgressFn& progress) {
    const auto start = std::chrono::steady_clock::now();
    std::atomic<std::size_t> next{0}, done{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(mu);
                progress({d, n, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
            }
        }
    };
    jobs = std::max(1u, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Encodes every record; row i of the store is corpus record i regardless of
/// the worker count.
inline EmbeddingStore encode_corpus(const Corpus& corpus, const Backbone& backbone, const PipelineConfig& cfg,
                                    unsigned jobs = 1, const ProgressFn& progress = {}) {
    const auto& info = backbone.info();
    const auto projection = make_projection(style_dimension(info.style_filters), cfg.projection_dim, cfg.projection_seed);
    std::vector<IconEmbedding> rows(corpus.size());
    detail::parallel_for(
        corpus.size(), jobs, [&](std::size_t i) { rows[i] = encode_icon(corpus[i], backbone, projection); }, progress);

    auto store = make_store(cfg, info.content_dim, cfg.projection_dim);
    for (const auto& e : rows) append(store, e);
    return store;
}

inline SiftCache compute_sift_cache(const Corpus& corpus, const PipelineConfig& cfg, unsigned jobs = 1,
                                    const ProgressFn& progress = {}) {
    SiftCache cache;
    cache.config_hash = cfg.hash();
    cache.sets.resize(corpus.size());
    detail::parallel_for(
        corpus.size(), jobs,
        [&](std::size_t i) { cache.sets[i] = sift_descriptors(decode_image(corpus[i].icon_path), cfg.sift); },
        progress);
    return cache;
}

}  // namespace iconsim
