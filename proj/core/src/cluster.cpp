#include "metasel/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace metasel {

double weighted_similarity(const Vec& g, const Vec& c) {
    if (g.size() != c.size()) throw std::invalid_argument("weighted_similarity: dimension mismatch");
    double cn = norm(c);
    if (cn == 0.0) throw std::invalid_argument("weighted_similarity: zero centroid");
    double gn = norm(g);
    if (gn == 0.0) return 0.0;
    return std::abs(dot(g, c)) / gn;  // ||C|| |cos| = |<g,C>| / ||g||
}

std::vector<std::size_t> kmeans_assign(const FeatureSet& features, const std::vector<Vec>& centroids) {
    if (centroids.empty()) throw std::invalid_argument("kmeans_assign: need at least one centroid");
    std::vector<std::size_t> assignment(features.size(), 0);
    for (std::size_t j = 0; j < features.size(); ++j) {
        Vec g = features.row_vec(j);
        if (norm(g) == 0.0) {
            assignment[j] = 0;  // degenerate gradient, parked on cluster 0
            continue;
        }
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < centroids.size(); ++i) {
            double s = weighted_similarity(g, centroids[i]);
            if (s > best) {
                best = s;
                best_i = i;
            }
        }
        assignment[j] = best_i;
    }
    return assignment;
}

std::vector<Vec> kmeans_update(const FeatureSet& features, const std::vector<std::size_t>& assignment,
                               const std::vector<Vec>& previous, std::vector<bool>& empty) {
    if (assignment.size() != features.size()) throw std::invalid_argument("kmeans_update: assignment size");
    std::vector<Vec> centroids(previous.size(), Vec(features.dim(), 0.0));
    std::vector<double> norm_sums(previous.size(), 0.0);
    std::vector<std::size_t> counts(previous.size(), 0);
    for (std::size_t j = 0; j < features.size(); ++j) {
        double gn = features.row_norm(j);
        if (gn == 0.0) continue;  // excluded from centroid sums
        std::size_t i = assignment[j];
        const double* g = features.row(j);
        for (std::size_t k = 0; k < features.dim(); ++k) centroids[i][k] += g[k];
        norm_sums[i] += gn;
        ++counts[i];
    }
    empty.assign(previous.size(), false);
    for (std::size_t i = 0; i < previous.size(); ++i) {
        if (counts[i] == 0) {
            empty[i] = true;
            centroids[i] = previous[i];
        } else {
            if (norm_sums[i] == 0.0) throw std::runtime_error("kmeans_update: cluster of zero-norm members");
            for (double& v : centroids[i]) v /= norm_sums[i];
        }
    }
    return centroids;
}

double clustering_objective(const FeatureSet& features, const std::vector<Vec>& centroids,
                            const std::vector<std::size_t>& assignment) {
    double obj = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
        double gn = features.row_norm(j);
        if (gn == 0.0) continue;
        obj += gn * weighted_similarity(features.row_vec(j), centroids[assignment[j]]);
    }
    return obj;
}

ClusterModel weighted_kmeans(const FeatureSet& features, std::size_t m, std::uint64_t seed,
                             std::size_t max_iters, double tol) {
    if (m < 1 || m > features.size()) throw std::invalid_argument("weighted_kmeans: need 1 <= M <= N");
    for (double v : features.values)
        if (!std::isfinite(v)) throw std::invalid_argument("weighted_kmeans: non-finite features");

    // M distinct nonzero features, normalized like a single-member update step.
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Vec> centroids;
    for (std::size_t j : order) {
        double gn = features.row_norm(j);
        if (gn == 0.0) continue;
        Vec c = features.row_vec(j);
        for (double& v : c) v /= gn;
        centroids.push_back(std::move(c));
        if (centroids.size() == m) break;
    }
    if (centroids.empty()) throw std::invalid_argument("weighted_kmeans: all features have zero norm");

    ClusterModel model;
    model.centroids = std::move(centroids);
    model.assignment = kmeans_assign(features, model.centroids);
    double prev_obj = clustering_objective(features, model.centroids, model.assignment);
    model.objective_trace.push_back(prev_obj);

    for (std::size_t it = 0; it < max_iters; ++it) {
        std::vector<bool> empty;
        std::vector<Vec> updated = kmeans_update(features, model.assignment, model.centroids, empty);
        std::vector<std::size_t> next = kmeans_assign(features, updated);
        double obj = clustering_objective(features, updated, next);
        bool fixed = next == model.assignment;
        model.centroids = std::move(updated);
        model.assignment = std::move(next);
        model.iterations = it + 1;
        model.objective_trace.push_back(obj);
        if (fixed || std::abs(obj - prev_obj) < tol) {
            prev_obj = obj;
            break;
        }
        prev_obj = obj;
    }
    model.objective = prev_obj;
    return model;
}

namespace {

std::size_t count_empty(const ClusterModel& model) {
    std::vector<bool> used(model.centroids.size(), false);
    for (std::size_t j = 0; j < model.assignment.size(); ++j) used[model.assignment[j]] = true;
    std::size_t n = 0;
    for (bool u : used)
        if (!u) ++n;
    return n;
}

}  // namespace

ClusterModel kmeans_with_restart(const FeatureSet& features, std::size_t m, std::uint64_t seed,
                                 std::size_t max_iters, double tol) {
    if (m < 1) throw std::invalid_argument("kmeans_with_restart: M >= 1");
    std::size_t cur = std::min(m, features.size());
    std::uint64_t round_seed = seed;
    while (true) {
        ClusterModel model = weighted_kmeans(features, cur, round_seed, max_iters, tol);
        std::size_t n_empty = count_empty(model);
        if (n_empty == 0) return model;
        if (n_empty >= cur) throw std::runtime_error("kmeans_with_restart: M reached 0");
        cur -= n_empty;
        ++round_seed;
    }
}

std::vector<std::size_t> extract_meta_samples(const ClusterModel& model, const FeatureSet& features) {
    std::size_t m = model.centroids.size();
    std::vector<double> best(m, -1.0);
    std::vector<std::size_t> best_pos(m, std::size_t(-1));
    for (std::size_t j = 0; j < features.size(); ++j) {
        std::size_t i = model.assignment[j];
        double s = weighted_similarity(features.row_vec(j), model.centroids[i]);
        if (s > best[i]) {
            best[i] = s;
            best_pos[i] = j;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m; ++i) {
        if (best_pos[i] == std::size_t(-1)) throw std::invalid_argument("extract_meta_samples: empty cluster");
        out.push_back(features.sample_ids[best_pos[i]]);
    }
    return out;
}

std::vector<std::size_t> prune_near_existing(const FeatureSet& candidates, const FeatureSet& existing_meta,
                                             double keep_fraction) {
    if (keep_fraction <= 0.0 || keep_fraction > 1.0)
        throw std::invalid_argument("prune_near_existing: keep_fraction in (0,1]");
    std::size_t n = candidates.size();
    std::vector<double> score(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        Vec g = candidates.row_vec(j);
        double best = 0.0;
        for (std::size_t i = 0; i < existing_meta.size(); ++i) {
            Vec c = existing_meta.row_vec(i);
            if (norm(c) == 0.0) continue;
            best = std::max(best, weighted_similarity(g, c));
        }
        score[j] = best;
    }
    std::size_t n_keep = std::size_t(std::llround(keep_fraction * double(n)));
    if (n_keep == 0) throw std::runtime_error("prune_near_existing: empty survivor set");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    std::vector<std::size_t> keep(order.begin(), order.begin() + long(n_keep));
    std::sort(keep.begin(), keep.end());
    return keep;
}

std::vector<std::size_t> baseline_select(BaselineKind kind, const Dataset& ds,
                                         const NetworkParams* model, const FeatureSet* features,
                                         const std::vector<std::size_t>& candidates, std::size_t budget,
                                         std::uint64_t seed) {
    if (budget > candidates.size()) throw std::invalid_argument("baseline_select: budget exceeds candidates");
    switch (kind) {
        case BaselineKind::Random: {
            std::vector<std::size_t> pool = candidates;
            std::mt19937_64 rng(seed);
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(budget);
            std::sort(pool.begin(), pool.end());
            return pool;
        }
        case BaselineKind::Certain:
        case BaselineKind::Uncertain: {
            if (model == nullptr) throw std::invalid_argument("baseline_select: model required");
            std::vector<double> entropy(candidates.size());
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                Vec p = softmax(forward(*model, ds.sample_vec(candidates[k])).logits());
                double h = 0.0;
                for (double v : p)
                    if (v > 0.0) h -= v * std::log(v);
                entropy[k] = h;
            }
            std::vector<std::size_t> order(candidates.size());
            std::iota(order.begin(), order.end(), 0);
            bool ascending = kind == BaselineKind::Certain;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return ascending ? entropy[a] < entropy[b] : entropy[a] > entropy[b];
            });
            std::vector<std::size_t> out;
            for (std::size_t k = 0; k < budget; ++k) out.push_back(candidates[order[k]]);
            std::sort(out.begin(), out.end());
            return out;
        }
        case BaselineKind::PlainKmeans: {
            if (features == nullptr) throw std::invalid_argument("baseline_select: features required");
            if (features->size() != candidates.size())
                throw std::invalid_argument("baseline_select: features/candidates mismatch");
            // Standard Euclidean K-means, nearest member per centroid.
            std::size_t n = features->size(), d = features->dim();
            std::mt19937_64 rng(seed);
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<Vec> centroids;
            for (std::size_t k = 0; k < std::min(budget, n); ++k)
                centroids.push_back(features->row_vec(order[k]));
            std::vector<std::size_t> assign(n, 0);
            for (std::size_t it = 0; it < 200; ++it) {
                std::vector<std::size_t> next(n, 0);
                for (std::size_t j = 0; j < n; ++j) {
                    double best = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < centroids.size(); ++i) {
                        double dist = 0.0;
                        const double* g = features->row(j);
                        for (std::size_t c = 0; c < d; ++c) {
                            double diff = g[c] - centroids[i][c];
                            dist += diff * diff;
                        }
                        if (dist < best) {
                            best = dist;
                            next[j] = i;
                        }
                    }
                }
                std::vector<Vec> sums(centroids.size(), Vec(d, 0.0));
                std::vector<std::size_t> counts(centroids.size(), 0);
                for (std::size_t j = 0; j < n; ++j) {
                    const double* g = features->row(j);
                    for (std::size_t c = 0; c < d; ++c) sums[next[j]][c] += g[c];
                    ++counts[next[j]];
                }
                for (std::size_t i = 0; i < centroids.size(); ++i)
                    if (counts[i] > 0)
                        for (std::size_t c = 0; c < d; ++c) centroids[i][c] = sums[i][c] / double(counts[i]);
                if (next == assign) break;
                assign = std::move(next);
            }
            std::vector<double> best_dist(centroids.size(), std::numeric_limits<double>::infinity());
            std::vector<std::size_t> best_pos(centroids.size(), std::size_t(-1));
            for (std::size_t j = 0; j < n; ++j) {
                std::size_t i = assign[j];
                double dist = 0.0;
                const double* g = features->row(j);
                for (std::size_t c = 0; c < d; ++c) {
                    double diff = g[c] - centroids[i][c];
                    dist += diff * diff;
                }
                if (dist < best_dist[i]) {
                    best_dist[i] = dist;
                    best_pos[i] = j;
                }
            }
            std::vector<std::size_t> out;
            for (std::size_t i = 0; i < centroids.size(); ++i)
                if (best_pos[i] != std::size_t(-1)) out.push_back(candidates[best_pos[i]]);
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            // Empty clusters can leave the pick short; top up at random.
            std::vector<std::size_t> pool = candidates;
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t p : pool) {
                if (out.size() >= budget) break;
                if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
            }
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    throw std::logic_error("unknown baseline kind");
}

SelectionResult run_selection_pipeline(const ArchConfig& arch, const TrainConfig& train_cfg,
                                       const Dataset& ds, const SelectionConfig& sel) {
    if (sel.budget < sel.warmup_size)
        throw std::invalid_argument("selection pipeline: budget must cover the warm-up size");

    SelectionResult res;
    WarmupResult wu = warmup(arch, train_cfg, ds, sel.warmup_size, sel.seed);
    res.meta_indices = wu.meta_indices;
    res.warmup_artifacts = wu.artifacts;
    res.final_artifacts = wu.artifacts;

    const CheckpointStore* store = &res.warmup_artifacts.checkpoints;
    std::uint64_t round_seed = sel.seed + 1;

    while (res.meta_indices.size() < sel.budget) {
        std::vector<bool> is_meta(ds.size(), false);
        for (std::size_t m : res.meta_indices) is_meta[m] = true;
        std::vector<std::size_t> candidates;
        for (std::size_t i : ds.indices_of(Split::Train))
            if (!is_meta[i]) candidates.push_back(i);
        std::size_t want = sel.budget - res.meta_indices.size();
        if (sel.clusters_per_round > 0) want = std::min(want, sel.clusters_per_round);
        if (candidates.size() < want)
            throw std::runtime_error("selection pipeline: budget unreachable, too few candidates");

        std::size_t avail = 0;
        for (const auto& e : store->entries)
            if (e.epoch > store->best_epoch) ++avail;
        std::vector<int> epochs;
        if (avail == 0) {
            epochs.push_back(store->last_epoch());  // best model is the last one, nothing after t*
        } else {
            epochs = sample_checkpoints(*store, std::min(sel.checkpoints, avail), sel.checkpoint_mode,
                                        round_seed);
        }
        FeatureConfig fcfg = sel.feature;
        fcfg.seed = round_seed;
        std::vector<LayerSamplingPlan> plans =
            build_feature_plans(ds, candidates, *store, epochs, fcfg);
        FeatureSet cand_features = assemble_features(ds, candidates, *store, epochs, fcfg, plans);
        FeatureSet meta_features =
            assemble_features(ds, res.meta_indices, *store, epochs, fcfg, plans);

        std::vector<std::size_t> surviving_pos =
            prune_near_existing(cand_features, meta_features, sel.keep_fraction);
        if (surviving_pos.size() < want) surviving_pos.resize(0);  // fall through to unpruned set
        FeatureSet pruned;
        if (surviving_pos.empty()) {
            pruned = cand_features;
        } else {
            pruned.layout = cand_features.layout;
            for (std::size_t p : surviving_pos) {
                pruned.sample_ids.push_back(cand_features.sample_ids[p]);
                const double* r = cand_features.row(p);
                pruned.values.insert(pruned.values.end(), r, r + cand_features.dim());
            }
        }

        ClusterModel model = kmeans_with_restart(pruned, want, round_seed);
        std::vector<std::size_t> chosen = extract_meta_samples(model, pruned);
        std::sort(chosen.begin(), chosen.end());
        chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());

        SelectionRound round;
        round.surviving = pruned.sample_ids;
        round.chosen = chosen;
        res.meta_indices.insert(res.meta_indices.end(), chosen.begin(), chosen.end());
        std::sort(res.meta_indices.begin(), res.meta_indices.end());
        res.meta_indices.erase(std::unique(res.meta_indices.begin(), res.meta_indices.end()),
                               res.meta_indices.end());
        round.cumulative = res.meta_indices;
        res.rounds.push_back(round);
        if (chosen.empty()) throw std::runtime_error("selection pipeline: round added no samples");

        res.final_artifacts = run_meta_reweighting(arch, train_cfg, ds, res.meta_indices);
        store = &res.final_artifacts.checkpoints;
        ++round_seed;
    }
    return res;
}

}  // namespace metasel
