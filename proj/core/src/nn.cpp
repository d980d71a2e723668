#include "metasel/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace metasel {

namespace {

double act_apply(Activation act, double z) {
    switch (act) {
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
    }
    throw std::logic_error("unknown activation");
}

double act_deriv(Activation act, double z) {
    switch (act) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            double t = std::tanh(z);
            return 1.0 - t * t;
        }
    }
    throw std::logic_error("unknown activation");
}

}  // namespace

std::size_t NetworkParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

void NetworkParams::check() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.w.rows != layer.b.size())
            throw std::invalid_argument("layer " + std::to_string(l) + ": bias size mismatch");
        if (l > 0 && layers[l - 1].w.rows != layer.w.cols)
            throw std::invalid_argument("layer " + std::to_string(l) + ": dimension chain broken");
        if (!all_finite(layer.w) || !all_finite(layer.b))
            throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite parameter");
    }
}

NetworkParams make_network(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_network: need at least input and output dims");
    std::mt19937_64 rng(seed);
    NetworkParams net;
    net.act = act;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.w = Mat(dims[l + 1], dims[l]);
        layer.b = Vec(dims[l + 1], 0.0);
        double bound = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : layer.w.a) v = u(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

ForwardTrace forward(const NetworkParams& params, const Vec& x) {
    if (x.size() != params.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
    ForwardTrace tr;
    tr.input = x;
    const Vec* cur = &tr.input;
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        Vec z = affine(params.layers[l].w, *cur, params.layers[l].b);
        tr.pre.push_back(z);
        if (l == last) {
            tr.post.push_back(std::move(z));
        } else {
            Vec a(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = act_apply(params.act, z[i]);
            tr.post.push_back(std::move(a));
        }
        cur = &tr.post.back();
    }
    return tr;
}

Vec softmax(const Vec& z) {
    if (z.empty()) throw std::invalid_argument("softmax: empty input");
    double zmax = *std::max_element(z.begin(), z.end());
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double cross_entropy(const Vec& logits, int label) {
    if (label < 0 || std::size_t(label) >= logits.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    return std::log(sum) - (logits[std::size_t(label)] - zmax);
}

Vec last_layer_delta(const Vec& logits, int label, GradMode mode) {
    if (mode != GradMode::LabelFree && (label < 0 || std::size_t(label) >= logits.size()))
        throw std::invalid_argument("last_layer_delta: label required and in range");
    switch (mode) {
        case GradMode::Full: {
            Vec d = softmax(logits);
            d[std::size_t(label)] -= 1.0;
            return d;
        }
        case GradMode::LabelFree: return softmax(logits);
        case GradMode::LabelDependent: {
            Vec d(logits.size(), 0.0);
            d[std::size_t(label)] = 1.0;
            return d;
        }
    }
    throw std::logic_error("unknown grad mode");
}

LayeredGradient per_sample_gradient(const NetworkParams& params, const Vec& x, int label, GradMode mode) {
    ForwardTrace tr = forward(params, x);
    if (!all_finite(tr.logits())) throw std::runtime_error("per_sample_gradient: non-finite forward trace");

    LayeredGradient g;
    g.mode = mode;
    g.layers.resize(params.layers.size());

    Vec delta = last_layer_delta(tr.logits(), label, mode);
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const Vec& below = li == 0 ? tr.input : tr.post[li - 1];
        Layer& gl = g.layers[li];
        gl.w = Mat(params.layers[li].w.rows, params.layers[li].w.cols);
        for (std::size_t r = 0; r < gl.w.rows; ++r)
            for (std::size_t c = 0; c < gl.w.cols; ++c) gl.w(r, c) = delta[r] * below[c];
        gl.b = delta;
        if (li > 0) {
            Vec back = transpose_apply(params.layers[li].w, delta);
            for (std::size_t i = 0; i < back.size(); ++i)
                back[i] *= act_deriv(params.act, tr.pre[li - 1][i]);
            delta = std::move(back);
        }
    }
    return g;
}

Vec input_gradient(const NetworkParams& params, const Vec& x, const Vec& logit_seed) {
    ForwardTrace tr = forward(params, x);
    if (logit_seed.size() != tr.logits().size())
        throw std::invalid_argument("input_gradient: seed size mismatch");
    Vec delta = logit_seed;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        Vec back = transpose_apply(params.layers[li].w, delta);
        if (li > 0) {
            for (std::size_t i = 0; i < back.size(); ++i)
                back[i] *= act_deriv(params.act, tr.pre[li - 1][i]);
        }
        delta = std::move(back);
    }
    return delta;
}

double layered_dot(const LayeredGradient& a, const LayeredGradient& b) {
    if (a.layers.size() != b.layers.size()) throw std::invalid_argument("layered_dot: layer count mismatch");
    double s = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        s += frobenius_dot(a.layers[l].w, b.layers[l].w);
        s += dot(a.layers[l].b, b.layers[l].b);
    }
    return s;
}

double layered_norm_sq(const LayeredGradient& g) { return layered_dot(g, g); }

void sgd_step(NetworkParams& params, const LayeredGradient& grad, double lr, double momentum,
              double weight_decay, SgdState& state) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("sgd_step: momentum in [0,1)");
    if (grad.layers.size() != params.layers.size())
        throw std::invalid_argument("sgd_step: gradient shape mismatch");

    if (state.velocity.empty()) {
        state.velocity.resize(params.layers.size());
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            state.velocity[l].w = Mat(params.layers[l].w.rows, params.layers[l].w.cols);
            state.velocity[l].b = Vec(params.layers[l].b.size(), 0.0);
        }
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        Layer& p = params.layers[l];
        const Layer& g = grad.layers[l];
        if (g.w.rows != p.w.rows || g.w.cols != p.w.cols || g.b.size() != p.b.size())
            throw std::invalid_argument("sgd_step: gradient shape mismatch");
        if (!all_finite(g.w) || !all_finite(g.b)) throw std::runtime_error("sgd_step: non-finite gradient");
        Layer& v = state.velocity[l];
        for (std::size_t i = 0; i < p.w.a.size(); ++i) {
            double eff = g.w.a[i] + weight_decay * p.w.a[i];
            v.w.a[i] = momentum * v.w.a[i] + eff;
            p.w.a[i] -= lr * v.w.a[i];
        }
        for (std::size_t i = 0; i < p.b.size(); ++i) {
            double eff = g.b[i] + weight_decay * p.b[i];
            v.b[i] = momentum * v.b[i] + eff;
            p.b[i] -= lr * v.b[i];
        }
    }
}

void CheckpointStore::add(int epoch, const NetworkParams& params, double val_acc) {
    if (!entries.empty() && epoch <= entries.back().epoch)
        throw std::invalid_argument("checkpoint: epoch must be strictly increasing");
    entries.push_back({epoch, params, val_acc});
    if (best_epoch < 0 || val_acc > at_epoch(best_epoch).val_acc) best_epoch = epoch;
}

const Checkpoint& CheckpointStore::at_epoch(int epoch) const {
    for (const auto& e : entries)
        if (e.epoch == epoch) return e;
    throw std::out_of_range("checkpoint: epoch not found");
}

}  // namespace metasel
