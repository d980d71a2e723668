#include "metasel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace metasel {

namespace {

double row_dot(const FeatureSet& fs, std::size_t j, const Vec& c) {
    if (fs.dim() != c.size()) throw std::invalid_argument("inner product: layout mismatch");
    const double* g = fs.row(j);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += g[k] * c[k];
    return s;
}

}  // namespace

double msso_value(const FeatureSet& features, const FeatureSet& meta_features) {
    if (features.layout != meta_features.layout) throw std::invalid_argument("msso: layout mismatch");
    double total = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
        double inner = 0.0;
        for (std::size_t i = 0; i < meta_features.size(); ++i) inner += feature_dot(features, j, meta_features, i);
        total += std::abs(inner);
    }
    return total;
}

double mco_value(const FeatureSet& features, const std::vector<Vec>& centroids) {
    double total = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j)
        for (const Vec& c : centroids) total += std::abs(row_dot(features, j, c));
    return total;
}

double mco_value_weighted_form(const FeatureSet& features, const std::vector<Vec>& centroids) {
    double total = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
        double gn = features.row_norm(j);
        if (gn == 0.0) continue;
        Vec g = features.row_vec(j);
        double inner = 0.0;
        for (const Vec& c : centroids) {
            double cn = norm(c);
            if (cn == 0.0) continue;
            inner += cn * std::abs(dot(g, c)) / (gn * cn);
        }
        total += gn * inner;
    }
    return total;
}

DStatistics d_statistics(const FeatureSet& features, const std::vector<Vec>& centroids) {
    DStatistics st;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> finite;
    for (std::size_t j = 0; j < features.size(); ++j) {
        double pos = 0.0, neg = 0.0;
        for (const Vec& c : centroids) {
            double ip = row_dot(features, j, c);
            if (ip > 0.0)
                pos += ip;
            else
                neg += -ip;
        }
        double hi = std::max(pos, neg), lo = std::min(pos, neg);
        double d = lo == 0.0 ? inf : hi / lo;
        st.per_sample.push_back(d);
        if (std::isinf(d))
            ++st.infinite_count;
        else
            finite.push_back(d);
    }
    st.finite_count = finite.size();
    if (!finite.empty()) {
        std::sort(finite.begin(), finite.end());
        st.min_finite = finite.front();
        // Nearest-rank 5% quantile.
        std::size_t rank = std::size_t(std::ceil(0.05 * double(finite.size())));
        rank = std::max<std::size_t>(rank, 1);
        st.quantile_5pct = finite[rank - 1];
    }
    return st;
}

Theorem1Report verify_theorem1(const FeatureSet& features, const std::vector<Vec>& centroids) {
    Theorem1Report rep;
    rep.msso = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j) {
        double inner = 0.0;
        for (const Vec& c : centroids) inner += row_dot(features, j, c);
        rep.msso += std::abs(inner);
    }
    rep.mco = mco_value(features, centroids);
    if (rep.mco == 0.0) throw std::invalid_argument("verify_theorem1: MCO is zero");
    rep.ratio = rep.msso / rep.mco;

    DStatistics st = d_statistics(features, centroids);
    rep.d = std::numeric_limits<double>::infinity();
    for (double d : st.per_sample) rep.d = std::min(rep.d, d);
    rep.lower_bound = std::isinf(rep.d) ? 1.0 : (rep.d - 1.0) / (rep.d + 1.0);
    rep.holds = rep.ratio >= rep.lower_bound - 1e-12 && rep.ratio <= 1.0 + 1e-12;
    return rep;
}

StableSampleReport stable_sample_count(const FeatureSet& label_free, const FeatureSet& label_aware,
                                       const std::vector<Vec>& centroids) {
    if (label_free.size() != label_aware.size())
        throw std::invalid_argument("stable_sample_count: sample count mismatch");
    if (label_free.dim() != label_aware.dim())
        throw std::invalid_argument("stable_sample_count: dimension mismatch");

    StableSampleReport rep;
    for (std::size_t j = 0; j < label_free.size(); ++j) {
        double best_free = -1.0, best_aware = -1.0;
        std::size_t arg_free = 0, arg_aware = 0;
        double alpha = 0.0, beta = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t i = 0; i < centroids.size(); ++i) {
            double sf = std::abs(row_dot(label_free, j, centroids[i]));
            double sa = std::abs(row_dot(label_aware, j, centroids[i]));
            if (sf > best_free) {
                best_free = sf;
                arg_free = i;
            }
            if (sa > best_aware) {
                best_aware = sa;
                arg_aware = i;
            }
            if (sa > 0.0) {
                double ratio = sf / sa;
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
        }
        for (std::size_t i = 0; i < centroids.size(); ++i) {
            double sf = std::abs(row_dot(label_free, j, centroids[i]));
            if (i == arg_free)
                alpha = sf;
            else
                beta = std::max(beta, sf);
        }
        rep.label_free_assignment.push_back(arg_free);
        rep.label_aware_assignment.push_back(arg_aware);
        rep.alpha.push_back(alpha);
        rep.beta.push_back(beta);
        rep.ratio_lower.push_back(std::isinf(lo) ? 0.0 : lo);
        rep.ratio_upper.push_back(hi);
        if (arg_free == arg_aware) ++rep.stable_count;
    }
    return rep;
}

double auc_weights_vs_clean(const std::vector<double>& weights, const std::vector<bool>& clean_flags) {
    if (weights.size() != clean_flags.size()) throw std::invalid_argument("auc: length mismatch");
    std::size_t n_clean = 0, n_noisy = 0;
    for (bool f : clean_flags) (f ? n_clean : n_noisy)++;
    if (n_clean == 0 || n_noisy == 0) throw std::invalid_argument("auc: need both clean and noisy samples");

    double wins = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!clean_flags[i]) continue;
        for (std::size_t j = 0; j < weights.size(); ++j) {
            if (clean_flags[j]) continue;
            if (weights[i] > weights[j])
                wins += 1.0;
            else if (weights[i] == weights[j])
                wins += 0.5;
        }
    }
    return wins / (double(n_clean) * double(n_noisy));
}

std::vector<std::size_t> boundary_subset(const NetworkParams& model, const Dataset& ds,
                                         const std::vector<std::size_t>& indices, std::size_t k) {
    if (k > indices.size()) throw std::invalid_argument("boundary_subset: k exceeds sample count");
    std::vector<double> margin(indices.size());
    for (std::size_t p = 0; p < indices.size(); ++p) {
        Vec x = ds.sample_vec(indices[p]);
        Vec z = forward(model, x).logits();
        std::size_t top1 = 0, top2 = 0;
        for (std::size_t i = 1; i < z.size(); ++i)
            if (z[i] > z[top1]) top1 = i;
        top2 = top1 == 0 ? 1 : 0;
        for (std::size_t i = 0; i < z.size(); ++i)
            if (i != top1 && z[i] > z[top2]) top2 = i;
        Vec seed(z.size(), 0.0);
        seed[top1] = 1.0;
        seed[top2] = -1.0;
        Vec grad = input_gradient(model, x, seed);
        double gn = norm(grad);
        margin[p] = gn == 0.0 ? std::numeric_limits<double>::infinity() : (z[top1] - z[top2]) / gn;
    }
    std::vector<std::size_t> order(indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return margin[a] < margin[b]; });
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < k; ++p) out.push_back(indices[order[p]]);
    std::sort(out.begin(), out.end());
    return out;
}

SummaryStat summarize(const std::vector<double>& values) {
    SummaryStat st;
    st.n = values.size();
    if (st.n == 0) return st;
    st.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(st.n);
    if (st.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(ss / double(st.n - 1));
    }
    return st;
}

}  // namespace metasel
