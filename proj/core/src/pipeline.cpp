#include "metasel/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace metasel {

namespace {

void require_file(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw std::runtime_error("missing " + path + "; run the '" + producer + "' stage first");
}

std::vector<std::size_t> merge_sorted_unique(std::vector<std::size_t> a,
                                             const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::vector<std::size_t> train_minus(const Dataset& ds, const std::vector<std::size_t>& meta) {
    std::set<std::size_t> taken(meta.begin(), meta.end());
    std::vector<std::size_t> out;
    for (std::size_t i : ds.indices_of(Split::Train))
        if (!taken.count(i)) out.push_back(i);
    return out;
}

// Checkpoints strictly after the best-validation epoch; when training peaked at
// the final epoch, fall back to that last checkpoint alone.
std::vector<int> pick_epochs(const CheckpointStore& store, std::size_t k, CheckpointSampling mode,
                             std::uint64_t seed) {
    std::size_t avail = 0;
    for (const auto& e : store.entries)
        if (e.epoch > store.best_epoch) ++avail;
    if (avail == 0) return {store.last_epoch()};
    return sample_checkpoints(store, std::min(k, avail), mode, seed);
}

Dataset load_working_dataset(const StagePaths& p) {
    if (fs::exists(p.corrupted())) return load_dataset(p.corrupted());
    require_file(p.dataset(), "gen-data");
    return load_dataset(p.dataset());
}

std::vector<std::size_t> load_current_meta(const StagePaths& p) {
    if (fs::exists(p.meta())) return load_indices(p.meta());
    require_file(p.warmup_meta(), "warmup");
    return load_indices(p.warmup_meta());
}

void refresh_manifest(const StagePaths& p) {
    Manifest m;
    const std::string flat[] = {p.config_snapshot(), p.dataset(),   p.corrupted(),
                                p.warmup_meta(),     p.warmup_metrics(), p.features(),
                                p.meta_features(),   p.meta(),      p.selection(),
                                p.final_net(),       p.weights(),   p.metrics(),
                                p.eval_report(),     p.verify_report()};
    for (const auto& f : flat)
        if (fs::exists(f)) m.record(f, fs::relative(f, p.root).string());
    for (const auto& dir : {p.warmup_dir(), p.final_dir()}) {
        if (!fs::exists(dir)) continue;
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) names.push_back(e.path().string());
        std::sort(names.begin(), names.end());
        for (const auto& n : names) m.record(n, fs::relative(n, p.root).string());
    }
    m.save(p.manifest());
}

FeatureConfig feature_config_for(const ExperimentConfig& cfg, SelectionMethod method,
                                 std::uint64_t seed) {
    FeatureConfig fc;
    fc.method = method == SelectionMethod::Gbc ? FeatureMethod::Gbc : FeatureMethod::Rbc;
    fc.mode = cfg.feature_mode();
    fc.layer_draws = cfg.layer_draws;
    fc.seed = seed;
    return fc;
}

SelectionMethod primary_feature_method(const ExperimentConfig& cfg) {
    for (SelectionMethod m : cfg.methods)
        if (m == SelectionMethod::Rbc || m == SelectionMethod::Gbc) return m;
    return SelectionMethod::Rbc;
}

std::vector<double> last_epoch_weights(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> w(n, 0.0);
    std::string header;
    std::getline(in, header);  // "epoch sample_id weight"
    int best_epoch = -1;
    int epoch;
    std::size_t id;
    double value;
    while (in >> epoch >> id >> value) {
        if (epoch < best_epoch) continue;
        if (epoch > best_epoch) best_epoch = epoch;
        if (id < n) w[id] = value;
    }
    if (best_epoch < 0) throw std::runtime_error("no weight records in " + path);
    return w;
}

}  // namespace

StagePaths::StagePaths(const std::string& out_dir, std::uint64_t seed)
    : root(out_dir + "/seed_" + std::to_string(seed)) {
    fs::create_directories(root);
}

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.dataset_kind == DatasetKind::Toy) {
        GaussianMixtureConfig gm;
        gm.n = cfg.toy_n;
        gm.sigma = cfg.toy_sigma;
        gm.fractions = cfg.fractions;
        gm.seed = seed;
        return gen_gaussian_mixture(gm);
    }
    Dataset ds = load_idx(cfg.idx_images, cfg.idx_labels);
    if (cfg.idx_limit > 0 && cfg.idx_limit < ds.size()) {
        Dataset cut;
        cut.dim = ds.dim;
        cut.class_count = ds.class_count;
        cut.features.assign(ds.features.begin(),
                            ds.features.begin() + std::ptrdiff_t(cfg.idx_limit * ds.dim));
        cut.observed_labels.assign(ds.observed_labels.begin(),
                                   ds.observed_labels.begin() + std::ptrdiff_t(cfg.idx_limit));
        cut.clean_labels.assign(ds.clean_labels.begin(),
                                ds.clean_labels.begin() + std::ptrdiff_t(cfg.idx_limit));
        cut.splits.assign(cfg.idx_limit, Split::Train);
        ds = std::move(cut);
    }
    assign_splits(ds, cfg.fractions, seed);
    return ds;
}

CorruptionReport corrupt_dataset(const ExperimentConfig& cfg, Dataset& ds, std::uint64_t seed) {
    CorruptionReport rep;
    if (cfg.noise_kind == "uniform") {
        rep = inject_uniform_noise(ds, cfg.noise_percent, seed);
    } else if (cfg.noise_kind == "adversarial") {
        rep = inject_adversarial_noise(ds, cfg.noise_percent, cyclic_mapping(ds.class_count), seed);
    } else {
        rep.clean_flag.assign(ds.size(), true);
        rep.realized_fraction = 0.0;
    }
    if (cfg.imbalance_factor > 1.0) {
        ds = build_imbalanced(ds, cfg.imbalance_factor, seed + 1);
        rep.clean_flag = clean_flags_for(ds);
    }
    return rep;
}

std::vector<bool> clean_flags_for(const Dataset& ds) {
    std::vector<bool> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        out[i] = ds.observed_labels[i] == ds.clean_labels[i];
    return out;
}

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    Dataset ds = build_dataset(cfg, seed);
    save_dataset(ds, p.dataset());
    std::ofstream snap(p.config_snapshot());
    snap << serialize_config(cfg);
    refresh_manifest(p);
}

void cmd_corrupt(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    require_file(p.dataset(), "gen-data");
    Dataset ds = load_dataset(p.dataset());
    corrupt_dataset(cfg, ds, seed);
    save_dataset(ds, p.corrupted());
    refresh_manifest(p);
}

void cmd_warmup(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    Dataset ds = load_working_dataset(p);
    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    WarmupResult wr = warmup(cfg.arch, tcfg, ds, cfg.warmup_size, seed);
    save_checkpoint_store(wr.artifacts.checkpoints, p.warmup_dir());
    save_indices(wr.meta_indices, p.warmup_meta());
    save_metrics(wr.artifacts.metrics, p.warmup_metrics());
    refresh_manifest(p);
}

void cmd_featurize(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    Dataset ds = load_working_dataset(p);
    require_file(p.warmup_dir() + "/index.txt", "warmup");
    CheckpointStore store = load_checkpoint_store(p.warmup_dir());
    std::vector<std::size_t> meta = load_current_meta(p);
    std::vector<int> epochs = pick_epochs(store, cfg.checkpoints, CheckpointSampling::Strided, seed);
    FeatureConfig fc = feature_config_for(cfg, primary_feature_method(cfg), seed);
    std::vector<std::size_t> candidates = train_minus(ds, meta);
    std::vector<LayerSamplingPlan> plans = build_feature_plans(ds, candidates, store, epochs, fc);
    FeatureSet cand = assemble_features(ds, candidates, store, epochs, fc, plans);
    FeatureSet metaf = assemble_features(ds, meta, store, epochs, fc, plans);
    save_features(cand, p.features());
    save_features(metaf, p.meta_features());
    refresh_manifest(p);
}

void cmd_select(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    require_file(p.features(), "featurize");
    require_file(p.meta_features(), "featurize");
    FeatureSet cand = load_features(p.features());
    FeatureSet metaf = load_features(p.meta_features());
    std::vector<std::size_t> meta = load_current_meta(p);
    if (cfg.budget <= meta.size())
        throw std::runtime_error("selection budget already satisfied by the current meta set");
    std::size_t want = cfg.budget - meta.size();

    std::vector<std::size_t> survivors = prune_near_existing(cand, metaf, cfg.keep_fraction);
    FeatureSet pool = cand;
    if (survivors.size() >= want) {
        pool.sample_ids.clear();
        pool.values.clear();
        for (std::size_t pos : survivors) {
            pool.sample_ids.push_back(cand.sample_ids[pos]);
            const double* r = cand.row(pos);
            pool.values.insert(pool.values.end(), r, r + cand.dim());
        }
    }
    ClusterModel model = kmeans_with_restart(pool, want, seed);
    std::vector<std::size_t> chosen = extract_meta_samples(model, pool);
    save_indices(chosen, p.selection());
    save_indices(merge_sorted_unique(meta, chosen), p.meta());
    refresh_manifest(p);
}

void cmd_reweight(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    Dataset ds = load_working_dataset(p);
    std::vector<std::size_t> meta = load_current_meta(p);
    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    RunArtifacts art = run_meta_reweighting(cfg.arch, tcfg, ds, meta);
    save_network(art.final_params, p.final_net());
    save_checkpoint_store(art.checkpoints, p.final_dir());
    save_weight_history(art.weight_history, p.weights());
    save_metrics(art.metrics, p.metrics());
    refresh_manifest(p);
}

void cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    Dataset ds = load_working_dataset(p);
    require_file(p.final_dir() + "/index.txt", "reweight");
    CheckpointStore store = load_checkpoint_store(p.final_dir());
    const NetworkParams& params = store.at_epoch(store.best_epoch).params;

    std::ofstream out(p.eval_report());
    out.precision(17);
    out << "best_epoch " << store.best_epoch << "\n";
    out << "train_accuracy " << accuracy_on(params, ds, Split::Train) << "\n";
    out << "validation_accuracy " << accuracy_on(params, ds, Split::Validation) << "\n";
    out << "test_accuracy " << accuracy_on(params, ds, Split::Test) << "\n";
    if (fs::exists(p.weights()) && fs::exists(p.corrupted())) {
        std::vector<double> w = last_epoch_weights(p.weights(), ds.size());
        std::vector<bool> flags = clean_flags_for(ds);
        std::vector<double> tw;
        std::vector<bool> tf;
        std::vector<std::size_t> meta = load_current_meta(p);
        std::set<std::size_t> taken(meta.begin(), meta.end());
        for (std::size_t i : ds.indices_of(Split::Train)) {
            if (taken.count(i)) continue;
            tw.push_back(w[i]);
            tf.push_back(flags[i]);
        }
        bool both = std::find(tf.begin(), tf.end(), true) != tf.end() &&
                    std::find(tf.begin(), tf.end(), false) != tf.end();
        if (both) out << "weight_auc " << auc_weights_vs_clean(tw, tf) << "\n";
    }
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + p.eval_report());
    refresh_manifest(p);
}

void cmd_verify(const ExperimentConfig& cfg, std::uint64_t seed) {
    StagePaths p(cfg.out_dir, seed);
    require_file(p.features(), "featurize");
    FeatureSet cand = load_features(p.features());
    std::size_t m = std::min<std::size_t>(std::max<std::size_t>(cfg.budget, 1), cand.size());
    ClusterModel model = kmeans_with_restart(cand, m, seed);
    Theorem1Report t1 = verify_theorem1(cand, model.centroids);
    DStatistics ds = d_statistics(cand, model.centroids);

    std::ofstream out(p.verify_report());
    out.precision(17);
    out << "clusters " << model.centroids.size() << "\n";
    out << "iterations " << model.iterations << "\n";
    out << "objective " << model.objective << "\n";
    out << "msso " << t1.msso << "\n";
    out << "mco " << t1.mco << "\n";
    out << "ratio " << t1.ratio << "\n";
    out << "dominance " << t1.d << "\n";
    out << "lower_bound " << t1.lower_bound << "\n";
    out << "bound_holds " << (t1.holds ? "true" : "false") << "\n";
    out << "d_quantile_5pct " << ds.quantile_5pct << "\n";
    out << "d_min_finite " << ds.min_finite << "\n";
    out << "d_infinite " << ds.infinite_count << "\n";
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + p.verify_report());
    if (!t1.holds) throw std::runtime_error("overlap bound violated; see " + p.verify_report());
    refresh_manifest(p);
}

MethodRunResult run_method(const ExperimentConfig& cfg, const Dataset& ds, SelectionMethod method,
                           std::uint64_t seed) {
    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    MethodRunResult out;

    if (method == SelectionMethod::Rbc || method == SelectionMethod::Gbc) {
        SelectionConfig sel;
        sel.feature = feature_config_for(cfg, method, seed);
        sel.budget = cfg.budget;
        sel.warmup_size = cfg.warmup_size;
        sel.checkpoints = cfg.checkpoints;
        sel.keep_fraction = cfg.keep_fraction;
        sel.seed = seed;
        SelectionResult res = run_selection_pipeline(cfg.arch, tcfg, ds, sel);
        out.meta_indices = res.meta_indices;
        out.artifacts = std::move(res.final_artifacts);
    } else if (method == SelectionMethod::Finetune) {
        std::vector<std::size_t> pool = ds.indices_of(Split::Train);
        std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ULL);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min(cfg.budget, pool.size()));
        std::sort(pool.begin(), pool.end());
        TrainConfig ft = tcfg;
        ft.finetune_only = true;
        out.meta_indices = pool;
        out.artifacts = run_meta_reweighting(cfg.arch, ft, ds, pool);
    } else {
        WarmupResult wr = warmup(cfg.arch, tcfg, ds, cfg.warmup_size, seed);
        std::vector<std::size_t> meta = wr.meta_indices;
        if (cfg.budget > meta.size()) {
            std::size_t extra = cfg.budget - meta.size();
            std::vector<std::size_t> candidates = train_minus(ds, meta);
            const CheckpointStore& store = wr.artifacts.checkpoints;
            const NetworkParams* model = nullptr;
            const FeatureSet* fsp = nullptr;
            NetworkParams best;
            FeatureSet fset;
            BaselineKind kind = BaselineKind::Random;
            if (method == SelectionMethod::Certain || method == SelectionMethod::Uncertain) {
                kind = method == SelectionMethod::Certain ? BaselineKind::Certain
                                                          : BaselineKind::Uncertain;
                best = store.at_epoch(store.best_epoch).params;
                model = &best;
            } else if (method == SelectionMethod::PlainKmeans) {
                kind = BaselineKind::PlainKmeans;
                std::vector<int> epochs =
                    pick_epochs(store, cfg.checkpoints, CheckpointSampling::Strided, seed);
                fset = assemble_features(ds, candidates, store, epochs,
                                         feature_config_for(cfg, SelectionMethod::Rbc, seed));
                fsp = &fset;
            }
            std::vector<std::size_t> chosen =
                baseline_select(kind, ds, model, fsp, candidates, extra, seed);
            meta = merge_sorted_unique(meta, chosen);
        }
        out.meta_indices = meta;
        out.artifacts = run_meta_reweighting(cfg.arch, tcfg, ds, meta);
    }

    const CheckpointStore& store = out.artifacts.checkpoints;
    const NetworkParams& eval_params =
        store.empty() ? out.artifacts.final_params : store.at_epoch(store.best_epoch).params;
    out.test_acc = accuracy_on(eval_params, ds, Split::Test);

    if (!out.artifacts.weight_history.empty()) {
        const std::vector<double>& w = out.artifacts.weight_history.back();
        std::vector<bool> flags = clean_flags_for(ds);
        std::set<std::size_t> taken(out.meta_indices.begin(), out.meta_indices.end());
        std::vector<double> tw;
        std::vector<bool> tf;
        for (std::size_t i : ds.indices_of(Split::Train)) {
            if (taken.count(i)) continue;
            tw.push_back(w[i]);
            tf.push_back(flags[i]);
        }
        bool both = std::find(tf.begin(), tf.end(), true) != tf.end() &&
                    std::find(tf.begin(), tf.end(), false) != tf.end();
        if (both) out.weight_auc = auc_weights_vs_clean(tw, tf);
    }
    return out;
}

std::vector<double> ExperimentReport::accuracies(SelectionMethod m) const {
    std::vector<double> out;
    for (const auto& c : cells)
        if (c.method == m && c.ok) out.push_back(c.test_acc);
    return out;
}

SummaryStat ExperimentReport::summary(SelectionMethod m) const { return summarize(accuracies(m)); }

ExperimentReport cmd_experiment(const ExperimentConfig& cfg, std::size_t threads) {
    ExperimentReport rep;
    for (std::uint64_t seed : cfg.seeds)
        for (SelectionMethod m : cfg.methods) {
            ExperimentCell cell;
            cell.method = m;
            cell.seed = seed;
            rep.cells.push_back(cell);
        }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= rep.cells.size()) return;
            ExperimentCell& cell = rep.cells[i];
            try {
                Dataset ds = build_dataset(cfg, cell.seed);
                corrupt_dataset(cfg, ds, cell.seed);
                MethodRunResult r = run_method(cfg, ds, cell.method, cell.seed);
                cell.ok = true;
                cell.test_acc = r.test_acc;
                cell.weight_auc = r.weight_auc;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, rep.cells.size()); ++t)
            pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    fs::create_directories(cfg.out_dir);
    write_experiment_report(rep, cfg, cfg.out_dir + "/experiment.txt");
    return rep;
}

void write_experiment_report(const ExperimentReport& rep, const ExperimentConfig& cfg,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(10);
    out << "# method seed status test_accuracy weight_auc\n";
    for (const auto& c : rep.cells) {
        out << selection_method_name(c.method) << " " << c.seed << " ";
        if (!c.ok) {
            out << "failed - - # " << c.error << "\n";
            continue;
        }
        out << "ok " << c.test_acc << " ";
        if (c.weight_auc)
            out << *c.weight_auc;
        else
            out << "-";
        out << "\n";
    }
    out << "# method mean stddev runs\n";
    for (SelectionMethod m : cfg.methods) {
        SummaryStat s = rep.summary(m);
        out << "summary " << selection_method_name(m) << " " << s.mean << " " << s.stddev << " "
            << s.n << "\n";
    }
    Manifest mf;
    out.flush();
    mf.record(path);
    mf.save(path + ".manifest");
}

}  // namespace metasel
