#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "metasel/cluster.hpp"

using namespace metasel;

namespace {

FeatureSet make_features(const std::vector<Vec>& rows) {
    FeatureSet fs;
    fs.layout.checkpoint_epochs = {1};
    fs.layout.block_dims = {rows.front().size()};
    for (std::size_t j = 0; j < rows.size(); ++j) {
        fs.sample_ids.push_back(j);
        fs.values.insert(fs.values.end(), rows[j].begin(), rows[j].end());
    }
    return fs;
}

FeatureSet random_features(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Vec> rows(n, Vec(dim));
    for (auto& r : rows)
        for (double& v : r) v = nd(rng);
    return make_features(rows);
}

}  // namespace

TEST_CASE("weighted similarity equals |<g,C>| / ||g||") {
    Vec g{3.0, 4.0};
    Vec c{-1.0, 2.0};
    CHECK(weighted_similarity(g, c) == doctest::Approx(std::fabs(3.0 * -1 + 4.0 * 2) / 5.0).epsilon(1e-14));
    CHECK(weighted_similarity(Vec{0.0, 0.0}, c) == 0.0);
    CHECK_THROWS(weighted_similarity(g, Vec{0.0, 0.0}));
    CHECK_THROWS(weighted_similarity(g, Vec{1.0, 2.0, 3.0}));
}

TEST_CASE("assignment maximizes the weighted similarity, ties to the lowest index") {
    FeatureSet fs = make_features({{1.0, 0.0}, {0.0, 2.0}, {1.0, 1.0}});
    std::vector<Vec> cents{{1.0, 0.0}, {0.0, 1.0}};
    std::vector<std::size_t> a = kmeans_assign(fs, cents);
    CHECK(a[0] == 0);
    CHECK(a[1] == 1);
    CHECK(a[2] == 0);  // exact tie, lowest index wins

    FeatureSet with_zero = make_features({{0.0, 0.0}, {0.0, 1.0}});
    std::vector<std::size_t> z = kmeans_assign(with_zero, cents);
    CHECK(z[0] == 0);  // zero-norm parked on cluster 0
    CHECK(z[1] == 1);
}

TEST_CASE("centroid update is sum(G) / sum(||G||) per cluster") {
    FeatureSet fs = make_features({{2.0, 0.0}, {0.0, 2.0}, {6.0, 8.0}});
    std::vector<std::size_t> assign{0, 0, 1};
    std::vector<Vec> prev{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    std::vector<bool> empty;
    std::vector<Vec> up = kmeans_update(fs, assign, prev, empty);
    // cluster 0: (2,2)/(2+2) = (0.5, 0.5); cluster 1: (6,8)/10 = (0.6, 0.8); cluster 2 empty
    CHECK(up[0][0] == doctest::Approx(0.5));
    CHECK(up[0][1] == doctest::Approx(0.5));
    CHECK(up[1][0] == doctest::Approx(0.6));
    CHECK(up[1][1] == doctest::Approx(0.8));
    CHECK(up[2] == prev[2]);
    CHECK(empty == std::vector<bool>{false, false, true});
}

TEST_CASE("clustering objective is the norm-weighted similarity sum") {
    FeatureSet fs = make_features({{3.0, 0.0}, {0.0, 4.0}});
    std::vector<Vec> cents{{1.0, 0.0}};
    std::vector<std::size_t> assign{0, 0};
    // j0: 3 * |3|/3 = 3; j1: 4 * 0/4 = 0
    CHECK(clustering_objective(fs, cents, assign) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("assignment step never decreases the objective (50 seeded runs)") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        FeatureSet fs = random_features(30, 6, seed);
        std::size_t m = 1 + std::size_t(seed % 5);
        std::vector<std::size_t> assign = kmeans_assign(fs, weighted_kmeans(fs, m, seed, 0).centroids);
        std::vector<Vec> cents = weighted_kmeans(fs, m, seed, 0).centroids;
        for (int it = 0; it < 25; ++it) {
            std::vector<bool> empty;
            std::vector<Vec> updated = kmeans_update(fs, assign, cents, empty);
            double before = clustering_objective(fs, updated, assign);
            std::vector<std::size_t> next = kmeans_assign(fs, updated);
            double after = clustering_objective(fs, updated, next);
            CHECK(after >= before - 1e-12 * std::max(1.0, std::fabs(before)));
            if (next == assign) break;
            assign = std::move(next);
            cents = std::move(updated);
        }
    }
}

TEST_CASE("weighted kmeans: determinism, trace, M=N degenerate objective") {
    FeatureSet fs = random_features(25, 5, 77);
    ClusterModel a = weighted_kmeans(fs, 4, 3);
    ClusterModel b = weighted_kmeans(fs, 4, 3);
    CHECK(a.assignment == b.assignment);
    CHECK(a.objective == b.objective);
    CHECK(a.objective_trace.size() >= 2);
    CHECK(a.objective == doctest::Approx(a.objective_trace.back()));
    CHECK(a.iterations <= 200);

    // M = N: every sample is its own centroid, objective = sum of norms
    ClusterModel full = weighted_kmeans(fs, 25, 5);
    double norms = 0.0;
    for (std::size_t j = 0; j < fs.size(); ++j) norms += fs.row_norm(j);
    CHECK(full.objective == doctest::Approx(norms).epsilon(1e-9));

    CHECK_THROWS(weighted_kmeans(fs, 0, 1));
    CHECK_THROWS(weighted_kmeans(fs, 26, 1));
}

TEST_CASE("restart collapses the forced-duplicate fixture without empty clusters") {
    // All rows parallel: a single direction can hold them all.
    std::vector<Vec> rows;
    for (int j = 0; j < 12; ++j) rows.push_back({double(j + 1), 2.0 * double(j + 1)});
    FeatureSet fs = make_features(rows);
    ClusterModel model = kmeans_with_restart(fs, 5, 11);
    std::set<std::size_t> used(model.assignment.begin(), model.assignment.end());
    CHECK(used.size() == model.centroids.size());
    CHECK(model.centroids.size() <= 5);
}

TEST_CASE("extract_meta_samples picks the most similar member per cluster") {
    FeatureSet fs = make_features({{1.0, 0.1}, {2.0, 0.0}, {0.1, 1.0}, {0.0, 3.0}});
    ClusterModel model;
    model.centroids = {{1.0, 0.0}, {0.0, 1.0}};
    model.assignment = kmeans_assign(fs, model.centroids);
    std::vector<std::size_t> meta = extract_meta_samples(model, fs);
    REQUIRE(meta.size() == 2);
    // ws = ||C|| |cos|; row 1 is perfectly aligned with centroid 0, row 3 with centroid 1
    CHECK(meta[0] == 1);
    CHECK(meta[1] == 3);
}

TEST_CASE("pruning drops the candidates closest to the existing meta set") {
    FeatureSet cand = make_features({{1.0, 0.0}, {0.9, 0.1}, {0.0, 1.0}, {-0.1, 0.9}});
    FeatureSet meta = make_features({{1.0, 0.0}});
    std::vector<std::size_t> keep = prune_near_existing(cand, meta, 0.5);
    CHECK(keep == std::vector<std::size_t>{2, 3});
    CHECK_THROWS(prune_near_existing(cand, meta, 0.0));
    std::vector<std::size_t> all = prune_near_existing(cand, meta, 1.0);
    CHECK(all.size() == 4);
}

TEST_CASE("baseline selectors: size, membership, determinism") {
    GaussianMixtureConfig gm;
    gm.n = 200;
    gm.seed = 5;
    Dataset ds = gen_gaussian_mixture(gm);
    std::vector<std::size_t> cand = ds.indices_of(Split::Train);
    NetworkParams model = make_network({2, 6, 2}, Activation::Tanh, 3);

    std::vector<std::size_t> r1 = baseline_select(BaselineKind::Random, ds, nullptr, nullptr, cand, 10, 4);
    std::vector<std::size_t> r2 = baseline_select(BaselineKind::Random, ds, nullptr, nullptr, cand, 10, 4);
    CHECK(r1 == r2);
    CHECK(r1.size() == 10);
    for (std::size_t i : r1) CHECK(std::find(cand.begin(), cand.end(), i) != cand.end());

    std::vector<std::size_t> cert =
        baseline_select(BaselineKind::Certain, ds, &model, nullptr, cand, 10, 4);
    std::vector<std::size_t> unc =
        baseline_select(BaselineKind::Uncertain, ds, &model, nullptr, cand, 10, 4);
    auto entropy_of = [&](std::size_t i) {
        Vec p = softmax(forward(model, ds.sample_vec(i)).logits());
        double h = 0.0;
        for (double v : p)
            if (v > 0.0) h -= v * std::log(v);
        return h;
    };
    double max_cert = 0.0, min_unc = 1e9;
    for (std::size_t i : cert) max_cert = std::max(max_cert, entropy_of(i));
    for (std::size_t i : unc) min_unc = std::min(min_unc, entropy_of(i));
    std::size_t outside_low = 0;
    for (std::size_t i : cand)
        if (std::find(cert.begin(), cert.end(), i) == cert.end() && entropy_of(i) < max_cert)
            ++outside_low;
    CHECK(outside_low == 0);  // certain = the lowest-entropy block
    CHECK(min_unc >= max_cert);

    FeatureSet fs = random_features(cand.size(), 4, 9);
    fs.sample_ids = cand;
    std::vector<std::size_t> pk =
        baseline_select(BaselineKind::PlainKmeans, ds, nullptr, &fs, cand, 8, 4);
    CHECK(pk.size() == 8);
    CHECK(std::is_sorted(pk.begin(), pk.end()));
    CHECK(std::adjacent_find(pk.begin(), pk.end()) == pk.end());

    CHECK_THROWS(baseline_select(BaselineKind::Certain, ds, nullptr, nullptr, cand, 5, 1));
    CHECK_THROWS(baseline_select(BaselineKind::Random, ds, nullptr, nullptr, cand, cand.size() + 1, 1));
}

TEST_CASE("selection pipeline reaches the budget with train-split meta samples") {
    GaussianMixtureConfig gm;
    gm.n = 160;
    gm.seed = 8;
    Dataset ds = gen_gaussian_mixture(gm);
    inject_uniform_noise(ds, 30.0, 2);

    ArchConfig arch;
    arch.hidden = {6};
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.seed = 1;

    SelectionConfig sel;
    sel.budget = 6;
    sel.warmup_size = 2;
    sel.checkpoints = 2;
    sel.seed = 1;

    SelectionResult res = run_selection_pipeline(arch, cfg, ds, sel);
    CHECK(res.meta_indices.size() == 6);
    CHECK(std::is_sorted(res.meta_indices.begin(), res.meta_indices.end()));
    CHECK(std::adjacent_find(res.meta_indices.begin(), res.meta_indices.end()) == res.meta_indices.end());
    for (std::size_t m : res.meta_indices) CHECK(ds.splits[m] == Split::Train);
    CHECK(!res.rounds.empty());
    CHECK(res.final_artifacts.metrics.size() == 5);

    SelectionResult again = run_selection_pipeline(arch, cfg, ds, sel);
    CHECK(res.meta_indices == again.meta_indices);

    SelectionConfig bad = sel;
    bad.budget = 1;
    CHECK_THROWS(run_selection_pipeline(arch, cfg, ds, bad));
}
