#include "metasel/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace metasel {

void TrainConfig::check() const {
    if (lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
    if (weight_lr < 0.0) throw std::invalid_argument("train config: weight_lr must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train config: momentum in [0,1)");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size >= 1");
    if (epochs < 1) throw std::invalid_argument("train config: epochs >= 1");
}

NetworkParams virtual_update(const NetworkParams& params, const std::vector<LayeredGradient>& batch_grads,
                             const std::vector<double>& weights, double alpha) {
    if (batch_grads.size() != weights.size())
        throw std::invalid_argument("virtual_update: weight per batch member required");
    NetworkParams out = params;
    double scale = alpha / double(batch_grads.size());
    for (std::size_t j = 0; j < batch_grads.size(); ++j) {
        const auto& g = batch_grads[j];
        for (std::size_t l = 0; l < out.layers.size(); ++l) {
            if (!all_finite(g.layers[l].w) || !all_finite(g.layers[l].b))
                throw std::runtime_error("virtual_update: non-finite gradient");
            for (std::size_t i = 0; i < out.layers[l].w.a.size(); ++i)
                out.layers[l].w.a[i] -= scale * weights[j] * g.layers[l].w.a[i];
            for (std::size_t i = 0; i < out.layers[l].b.size(); ++i)
                out.layers[l].b[i] -= scale * weights[j] * g.layers[l].b[i];
        }
    }
    return out;
}

std::vector<double> meta_weight_gradient(const std::vector<LayeredGradient>& meta_grads,
                                         const std::vector<LayeredGradient>& batch_grads,
                                         double eta, double alpha) {
    if (meta_grads.empty()) throw std::invalid_argument("meta_weight_gradient: empty meta set");
    double scale = eta * alpha / (double(batch_grads.size()) * double(meta_grads.size()));
    std::vector<double> delta(batch_grads.size(), 0.0);
    for (std::size_t j = 0; j < batch_grads.size(); ++j) {
        double s = 0.0;
        for (const auto& mg : meta_grads) s += layered_dot(mg, batch_grads[j]);
        delta[j] = scale * s;
    }
    return delta;
}

void apply_weight_update_shu(std::vector<double>& weights, const std::vector<double>& delta) {
    if (weights.size() != delta.size()) throw std::invalid_argument("weight update: size mismatch");
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (!std::isfinite(delta[j])) throw std::runtime_error("weight update: non-finite delta");
        weights[j] = std::clamp(weights[j] + delta[j], 0.0, 1.0);
    }
}

std::vector<double> apply_weight_update_ren(const std::vector<double>& delta) {
    if (delta.empty()) throw std::invalid_argument("weight update: empty batch");
    std::vector<double> w(delta.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < delta.size(); ++j) {
        w[j] = std::max(delta[j], 0.0);
        sum += w[j];
    }
    if (sum <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0 / double(w.size()));
    } else {
        for (double& v : w) v /= sum;
    }
    return w;
}

void weighted_step(NetworkParams& params, const std::vector<LayeredGradient>& batch_grads,
                   const std::vector<double>& weights, double alpha, double momentum,
                   double weight_decay, SgdState& state) {
    if (batch_grads.empty()) throw std::invalid_argument("weighted_step: empty batch");
    if (batch_grads.size() != weights.size())
        throw std::invalid_argument("weighted_step: weight per batch member required");
    LayeredGradient mean;
    mean.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        mean.layers[l].w = Mat(params.layers[l].w.rows, params.layers[l].w.cols);
        mean.layers[l].b = Vec(params.layers[l].b.size(), 0.0);
    }
    double inv_n = 1.0 / double(batch_grads.size());
    for (std::size_t j = 0; j < batch_grads.size(); ++j) {
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            const auto& g = batch_grads[j].layers[l];
            for (std::size_t i = 0; i < g.w.a.size(); ++i)
                mean.layers[l].w.a[i] += inv_n * weights[j] * g.w.a[i];
            for (std::size_t i = 0; i < g.b.size(); ++i)
                mean.layers[l].b[i] += inv_n * weights[j] * g.b[i];
        }
    }
    sgd_step(params, mean, alpha, momentum, weight_decay, state);
}

double accuracy_on(const NetworkParams& params, const Dataset& ds, Split split) {
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.splits[i] != split) continue;
        ++total;
        ForwardTrace tr = forward(params, ds.sample_vec(i));
        const Vec& z = tr.logits();
        std::size_t pred = std::size_t(std::max_element(z.begin(), z.end()) - z.begin());
        if (int(pred) == ds.clean_labels[i]) ++correct;
    }
    if (total == 0) throw std::invalid_argument("accuracy_on: empty split");
    return double(correct) / double(total);
}

RunArtifacts run_meta_reweighting(const ArchConfig& arch, const TrainConfig& cfg, const Dataset& ds,
                                  const std::vector<std::size_t>& meta_indices) {
    cfg.check();
    ds.check();
    for (std::size_t m : meta_indices)
        if (ds.splits[m] != Split::Train)
            throw std::invalid_argument("meta sample must come from the train split");

    std::vector<bool> is_meta(ds.size(), false);
    for (std::size_t m : meta_indices) is_meta[m] = true;

    std::vector<std::size_t> pool;
    for (std::size_t i : ds.indices_of(Split::Train))
        if (!is_meta[i]) pool.push_back(i);
    if (pool.empty() && !cfg.finetune_only)
        throw std::invalid_argument("no training samples remain outside the meta set");

    std::vector<std::size_t> dims;
    dims.push_back(ds.dim);
    for (std::size_t h : arch.hidden) dims.push_back(h);
    dims.push_back(std::size_t(ds.class_count));
    NetworkParams params = make_network(dims, arch.act, cfg.seed);

    std::vector<double> weights(ds.size(), 0.0);
    for (std::size_t i : pool) weights[i] = cfg.rule == WeightRule::Shu ? cfg.weight_init : 0.0;

    RunArtifacts art;
    SgdState opt;
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::size_t batch_size = cfg.full_batch ? pool.size() : cfg.batch_size;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t loss_count = 0;

        if (cfg.finetune_only) {
            if (meta_indices.empty()) throw std::invalid_argument("finetune mode: empty meta set");
            std::vector<LayeredGradient> grads;
            grads.reserve(meta_indices.size());
            for (std::size_t m : meta_indices) {
                grads.push_back(per_sample_gradient(params, ds.sample_vec(m), ds.clean_labels[m], GradMode::Full));
                loss_sum += cross_entropy(forward(params, ds.sample_vec(m)).logits(), ds.clean_labels[m]);
                ++loss_count;
            }
            std::vector<double> ones(grads.size(), 1.0);
            weighted_step(params, grads, ones, cfg.lr, cfg.momentum, cfg.weight_decay, opt);
        } else {
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t start = 0; start < pool.size(); start += batch_size) {
                std::size_t end = std::min(start + batch_size, pool.size());
                std::vector<std::size_t> batch(pool.begin() + long(start), pool.begin() + long(end));

                std::vector<LayeredGradient> batch_grads;
                batch_grads.reserve(batch.size());
                std::vector<double> batch_weights(batch.size());
                for (std::size_t k = 0; k < batch.size(); ++k) {
                    std::size_t j = batch[k];
                    ForwardTrace tr = forward(params, ds.sample_vec(j));
                    double loss = cross_entropy(tr.logits(), ds.observed_labels[j]);
                    if (!std::isfinite(loss) || loss > cfg.divergence_limit)
                        throw std::runtime_error("meta re-weighting diverged at epoch " +
                                                 std::to_string(epoch));
                    loss_sum += loss;
                    ++loss_count;
                    batch_grads.push_back(
                        per_sample_gradient(params, ds.sample_vec(j), ds.observed_labels[j], GradMode::Full));
                    batch_weights[k] = weights[j];
                }

                if (cfg.weight_lr > 0.0 && !meta_indices.empty()) {
                    NetworkParams virt = virtual_update(params, batch_grads, batch_weights, cfg.lr);
                    std::vector<LayeredGradient> meta_grads;
                    meta_grads.reserve(meta_indices.size());
                    for (std::size_t m : meta_indices)
                        meta_grads.push_back(
                            per_sample_gradient(virt, ds.sample_vec(m), ds.clean_labels[m], GradMode::Full));
                    std::vector<double> delta =
                        meta_weight_gradient(meta_grads, batch_grads, cfg.weight_lr, cfg.lr);
                    if (cfg.rule == WeightRule::Shu) {
                        apply_weight_update_shu(batch_weights, delta);
                    } else {
                        batch_weights = apply_weight_update_ren(delta);
                    }
                    for (std::size_t k = 0; k < batch.size(); ++k) weights[batch[k]] = batch_weights[k];
                }

                weighted_step(params, batch_grads, batch_weights, cfg.lr, cfg.momentum, cfg.weight_decay, opt);
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.mean_loss = loss_count == 0 ? 0.0 : loss_sum / double(loss_count);
        em.train_acc = accuracy_on(params, ds, Split::Train);
        em.val_acc = accuracy_on(params, ds, Split::Validation);
        em.test_acc = accuracy_on(params, ds, Split::Test);
        art.metrics.push_back(em);
        art.weight_history.push_back(weights);
        art.checkpoints.add(epoch, params, em.val_acc);
    }

    art.final_params = std::move(params);
    return art;
}

WarmupResult warmup(const ArchConfig& arch, const TrainConfig& cfg, const Dataset& ds, std::size_t m0,
                    std::uint64_t seed) {
    if (m0 < 1) throw std::invalid_argument("warmup: M0 >= 1");
    auto train = ds.indices_of(Split::Train);
    if (m0 >= train.size())
        throw std::invalid_argument("warmup: M0 must leave training samples outside the meta set");
    std::mt19937_64 rng(seed);
    std::shuffle(train.begin(), train.end(), rng);
    std::vector<std::size_t> meta(train.begin(), train.begin() + long(m0));
    std::sort(meta.begin(), meta.end());
    WarmupResult res;
    res.meta_indices = meta;
    res.artifacts = run_meta_reweighting(arch, cfg, ds, meta);
    return res;
}

}  // namespace metasel
