#pragma once

#include <cstdint>
#include <vector>

#include "metasel/linalg.hpp"

namespace metasel {

enum class Activation { Relu, Tanh };

// full = label_free - label_dependent, entrywise, at every layer.
enum class GradMode { Full, LabelFree, LabelDependent };

struct Layer {
    Mat w;  // out x in
    Vec b;  // out
};

struct NetworkParams {
    std::vector<Layer> layers;
    Activation act = Activation::Relu;

    std::size_t input_dim() const { return layers.front().w.cols; }
    std::size_t output_dim() const { return layers.back().w.rows; }
    std::size_t layer_count() const { return layers.size(); }
    std::size_t param_count() const;
    void check() const;  // throws on broken dimension chain or non-finite entries
};

// Glorot-uniform initialization, seeded.
NetworkParams make_network(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed);

struct ForwardTrace {
    std::vector<Vec> pre;   // pre-activation z_l per layer
    std::vector<Vec> post;  // activation a_l per layer; post.back() == logits (identity on last layer)
    Vec input;

    const Vec& logits() const { return post.back(); }
    // Activation feeding the last linear layer.
    const Vec& last_input() const { return post.size() >= 2 ? post[post.size() - 2] : input; }
};

ForwardTrace forward(const NetworkParams& params, const Vec& x);

Vec softmax(const Vec& z);
double cross_entropy(const Vec& logits, int label);

// full: softmax(z) - onehot(y); label_free: softmax(z); label_dependent: onehot(y).
Vec last_layer_delta(const Vec& logits, int label, GradMode mode);

struct LayeredGradient {
    std::vector<Layer> layers;  // same shapes as NetworkParams
    GradMode mode = GradMode::Full;

    std::size_t layer_count() const { return layers.size(); }
};

LayeredGradient per_sample_gradient(const NetworkParams& params, const Vec& x, int label, GradMode mode);

// Gradient of seed . logits with respect to the input x.
Vec input_gradient(const NetworkParams& params, const Vec& x, const Vec& logit_seed);

double layered_dot(const LayeredGradient& a, const LayeredGradient& b);
double layered_norm_sq(const LayeredGradient& g);

struct SgdState {
    std::vector<Layer> velocity;  // lazily sized on first step
};

void sgd_step(NetworkParams& params, const LayeredGradient& grad, double lr, double momentum,
              double weight_decay, SgdState& state);

struct Checkpoint {
    int epoch = 0;
    NetworkParams params;
    double val_acc = 0.0;
};

struct CheckpointStore {
    std::vector<Checkpoint> entries;  // epochs strictly increasing
    int best_epoch = -1;              // argmax val_acc, ties keep the earlier epoch

    void add(int epoch, const NetworkParams& params, double val_acc);
    const Checkpoint& at_epoch(int epoch) const;
    bool empty() const { return entries.empty(); }
    int last_epoch() const { return entries.empty() ? -1 : entries.back().epoch; }
};

}  // namespace metasel
