#include "metasel/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace metasel {

std::vector<int> sample_checkpoints(const CheckpointStore& store, std::size_t k,
                                    CheckpointSampling mode, std::uint64_t seed) {
    if (store.best_epoch < 0) throw std::invalid_argument("sample_checkpoints: empty store");
    std::vector<int> avail;
    for (const auto& e : store.entries)
        if (e.epoch > store.best_epoch) avail.push_back(e.epoch);
    if (avail.empty()) throw std::invalid_argument("sample_checkpoints: no epochs after t*");
    if (k > avail.size()) throw std::invalid_argument("sample_checkpoints: K exceeds available epochs");

    std::vector<int> chosen;
    if (mode == CheckpointSampling::Strided) {
        // Evenly strided over (t*, T], keeping the last checkpoint reachable.
        double step = double(avail.size()) / double(k);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t idx = std::size_t(std::floor(double(i + 1) * step)) - 1;
            chosen.push_back(avail[std::min(idx, avail.size() - 1)]);
        }
    } else {
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> order(avail.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < k; ++i) chosen.push_back(avail[order[i]]);
    }
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    return chosen;
}

Vec rbc_feature(const NetworkParams& params, const Vec& x, int label, GradMode mode) {
    ForwardTrace tr = forward(params, x);
    Vec delta = last_layer_delta(tr.logits(), label, mode);
    const Vec& xt = tr.last_input();
    Vec block(delta.size() * xt.size());
    for (std::size_t r = 0; r < delta.size(); ++r)
        for (std::size_t c = 0; c < xt.size(); ++c) block[r * xt.size() + c] = delta[r] * xt[c];
    return block;
}

LayerImportance layer_importance(const NetworkParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& indices, GradMode mode) {
    if (indices.empty()) throw std::invalid_argument("layer_importance: empty dataset");
    std::vector<Layer> mean(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        mean[l].w = Mat(params.layers[l].w.rows, params.layers[l].w.cols);
        mean[l].b = Vec(params.layers[l].b.size(), 0.0);
    }
    double inv_n = 1.0 / double(indices.size());
    for (std::size_t j : indices) {
        LayeredGradient g = per_sample_gradient(params, ds.sample_vec(j), ds.observed_labels[j], mode);
        for (std::size_t l = 0; l < mean.size(); ++l) {
            for (std::size_t i = 0; i < mean[l].w.a.size(); ++i) mean[l].w.a[i] += inv_n * g.layers[l].w.a[i];
            for (std::size_t i = 0; i < mean[l].b.size(); ++i) mean[l].b[i] += inv_n * g.layers[l].b[i];
        }
    }
    LayerImportance imp;
    for (const auto& m : mean) {
        double a = frobenius_norm_sq(m.w);
        for (double v : m.b) a += v * v;
        imp.masses.push_back(a);
        imp.total += a;
    }
    if (imp.total <= 0.0) throw std::runtime_error("layer_importance: all-zero masses");
    return imp;
}

LayerSamplingPlan build_sampling_plan(const LayerImportance& imp, std::size_t r, std::uint64_t seed,
                                      bool scaled) {
    if (r < 1) throw std::invalid_argument("build_sampling_plan: R >= 1");
    LayerSamplingPlan plan;
    plan.importance = imp;
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(imp.masses.begin(), imp.masses.end());
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t l = pick(rng);
        plan.draws.push_back(l);
        plan.scales.push_back(scaled ? std::sqrt(imp.total / (double(r) * imp.masses[l])) : 1.0);
    }
    return plan;
}

Vec gbc_feature(const NetworkParams& params, const LayerSamplingPlan& plan, const Vec& x, int label,
                GradMode mode) {
    if (plan.importance.masses.size() != params.layers.size())
        throw std::invalid_argument("gbc_feature: plan/params mismatch");
    LayeredGradient g = per_sample_gradient(params, x, label, mode);
    Vec out;
    for (std::size_t d = 0; d < plan.draws.size(); ++d) {
        const Layer& gl = g.layers[plan.draws[d]];
        double s = plan.scales[d];
        for (double v : gl.w.a) out.push_back(s * v);
        for (double v : gl.b) out.push_back(s * v);
    }
    return out;
}

std::size_t FeatureLayout::dim() const {
    std::size_t d = 0;
    for (std::size_t b : block_dims) d += b;
    return d;
}

double FeatureSet::row_norm(std::size_t i) const {
    const double* r = row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) s += r[k] * r[k];
    return std::sqrt(s);
}

std::vector<LayerSamplingPlan> build_feature_plans(const Dataset& ds,
                                                   const std::vector<std::size_t>& indices,
                                                   const CheckpointStore& store,
                                                   const std::vector<int>& epochs,
                                                   const FeatureConfig& cfg) {
    std::vector<LayerSamplingPlan> plans;
    if (cfg.method != FeatureMethod::Gbc) return plans;
    for (std::size_t k = 0; k < epochs.size(); ++k) {
        LayerImportance imp = layer_importance(store.at_epoch(epochs[k]).params, ds, indices, cfg.mode);
        plans.push_back(build_sampling_plan(imp, cfg.layer_draws, cfg.seed + k, cfg.scaled));
    }
    return plans;
}

FeatureSet assemble_features(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const CheckpointStore& store, const std::vector<int>& epochs,
                             const FeatureConfig& cfg) {
    return assemble_features(ds, indices, store, epochs, cfg,
                             build_feature_plans(ds, indices, store, epochs, cfg));
}

FeatureSet assemble_features(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const CheckpointStore& store, const std::vector<int>& epochs,
                             const FeatureConfig& cfg,
                             const std::vector<LayerSamplingPlan>& plans) {
    if (epochs.empty()) throw std::invalid_argument("assemble_features: no checkpoints");
    FeatureSet fs;
    fs.layout.method = cfg.method;
    fs.layout.mode = cfg.mode;
    fs.layout.checkpoint_epochs = epochs;
    fs.sample_ids = indices;

    if (cfg.method == FeatureMethod::Gbc && plans.size() != epochs.size())
        throw std::invalid_argument("assemble_features: one plan per checkpoint required");
    for (std::size_t k = 0; k < epochs.size(); ++k) {
        const Checkpoint& cp = store.at_epoch(epochs[k]);
        if (cfg.method == FeatureMethod::Gbc) {
            std::size_t bdim = 0;
            for (std::size_t l : plans[k].draws)
                bdim += cp.params.layers[l].w.size() + cp.params.layers[l].b.size();
            fs.layout.block_dims.push_back(bdim);
        } else {
            fs.layout.block_dims.push_back(cp.params.output_dim() * cp.params.layers.back().w.cols);
        }
    }

    fs.values.reserve(indices.size() * fs.layout.dim());
    for (std::size_t j : indices) {
        Vec x = ds.sample_vec(j);
        for (std::size_t k = 0; k < epochs.size(); ++k) {
            const Checkpoint& cp = store.at_epoch(epochs[k]);
            Vec block = cfg.method == FeatureMethod::Rbc
                            ? rbc_feature(cp.params, x, ds.observed_labels[j], cfg.mode)
                            : gbc_feature(cp.params, plans[k], x, ds.observed_labels[j], cfg.mode);
            if (block.size() != fs.layout.block_dims[k])
                throw std::runtime_error("assemble_features: block layout mismatch");
            fs.values.insert(fs.values.end(), block.begin(), block.end());
        }
    }
    return fs;
}

double feature_dot(const FeatureSet& a, std::size_t i, const FeatureSet& b, std::size_t j) {
    if (a.layout != b.layout) throw std::invalid_argument("feature_dot: layout mismatch");
    const double* x = a.row(i);
    const double* y = b.row(j);
    double s = 0.0;
    for (std::size_t k = 0; k < a.dim(); ++k) s += x[k] * y[k];
    return s;
}

}  // namespace metasel
