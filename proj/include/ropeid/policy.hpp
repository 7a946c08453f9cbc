#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ropeid/errors.hpp"
#include "ropeid/material.hpp"
#include "ropeid/rng.hpp"

namespace ropeid {

// Which material features the policy sees; masked features are zeroed after
// normalization (the ablation axis).
struct FeatureMask {
    bool youngs = true;
    bool poisson = true;

    static FeatureMask from_string(const std::string& s) {
        if (s == "both") return {true, true};
        if (s == "youngs") return {true, false};
        if (s == "poisson") return {false, true};
        if (s == "none") return {false, false};
        throw precondition_error("unknown feature mask '" + s +
                                 "' (expected both|youngs|poisson|none)");
    }
    std::string to_string() const {
        if (youngs && poisson) return "both";
        if (youngs) return "youngs";
        if (poisson) return "poisson";
        return "none";
    }
};

struct PolicyInput {
    double goal = 0.0;          // m, x-axis reach target
    double youngs_norm = 0.0;   // normalized over the training range
    double poisson_norm = 0.0;
};

// Dense layer parameters for the input-3 -> hidden -> hidden -> output-2
// network, softplus on hidden layers, identity on the output.  Normalization
// statistics and the output clamp box are stored with the weights.
struct PolicyWeights {
    int hidden = 128;
    // Row-major: w1 is hidden x 3, w2 hidden x hidden, w3 2 x hidden.
    std::vector<double> w1, b1, w2, b2, w3, b3;
    // Min/max per input feature (goal, youngs, poisson).
    std::array<double, 3> in_lo{0.0, 0.0, 0.0};
    std::array<double, 3> in_hi{1.0, 1.0, 1.0};
    std::array<double, 2> release_lo{0.05, 0.14};  // workspace box, m
    std::array<double, 2> release_hi{0.15, 0.18};
    FeatureMask mask;
    bool prepared = false;  // normalization statistics are valid

    static PolicyWeights zeros(int hidden_units) {
        PolicyWeights w;
        w.hidden = hidden_units;
        w.w1.assign(static_cast<std::size_t>(hidden_units) * 3, 0.0);
        w.b1.assign(hidden_units, 0.0);
        w.w2.assign(static_cast<std::size_t>(hidden_units) * hidden_units, 0.0);
        w.b2.assign(hidden_units, 0.0);
        w.w3.assign(static_cast<std::size_t>(2) * hidden_units, 0.0);
        w.b3.assign(2, 0.0);
        return w;
    }

    std::size_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
    }

    void check_finite() const {
        for (const auto* v : {&w1, &b1, &w2, &b2, &w3, &b3})
            for (double x : *v)
                if (!std::isfinite(x)) throw numeric_error("PolicyWeights: corrupted weights");
    }
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

struct ForwardTrace {
    std::array<double, 3> in;
    std::vector<double> z1, a1, z2, a2;
    std::array<double, 2> out;
};

inline void mlp_trace(const PolicyWeights& w, const PolicyInput& input, ForwardTrace& t) {
    const int h = w.hidden;
    t.in = {input.goal, w.mask.youngs ? input.youngs_norm : 0.0,
            w.mask.poisson ? input.poisson_norm : 0.0};
    t.z1.resize(h); t.a1.resize(h); t.z2.resize(h); t.a2.resize(h);
    for (int i = 0; i < h; ++i) {
        double z = w.b1[i];
        for (int j = 0; j < 3; ++j) z += w.w1[3 * i + j] * t.in[j];
        t.z1[i] = z;
        t.a1[i] = softplus(z);
    }
    for (int i = 0; i < h; ++i) {
        double z = w.b2[i];
        for (int j = 0; j < h; ++j) z += w.w2[static_cast<std::size_t>(h) * i + j] * t.a1[j];
        t.z2[i] = z;
        t.a2[i] = softplus(z);
    }
    for (int o = 0; o < 2; ++o) {
        double z = w.b3[o];
        for (int j = 0; j < h; ++j) z += w.w3[static_cast<std::size_t>(h) * o + j] * t.a2[j];
        t.out[o] = z;
    }
}

}  // namespace detail

inline std::array<double, 2> mlp_forward(const PolicyWeights& w, const PolicyInput& input) {
    w.check_finite();
    detail::ForwardTrace t;
    detail::mlp_trace(w, input, t);
    return t.out;
}

struct TrainHyper {
    double learning_rate = 1e-3;
    int batch_size = 256;
    double grad_norm_clip = 0.1;
    int epochs = 200;
    std::uint64_t seed = 0;
    FeatureMask feature_mask;
    int hidden = 128;
    double validation_fraction = 0.1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw precondition_error("TrainHyper: learning_rate must be > 0");
        if (batch_size < 1) throw precondition_error("TrainHyper: batch_size must be >= 1");
        if (!(grad_norm_clip > 0.0))
            throw precondition_error("TrainHyper: grad_norm_clip must be > 0");
        if (epochs < 1) throw precondition_error("TrainHyper: epochs must be >= 1");
        if (hidden < 1) throw precondition_error("TrainHyper: hidden must be >= 1");
    }
};

struct DatasetRow {
    double youngs = 0.0;
    double poisson = 0.0;
    std::array<double, 2> release{0.0, 0.0};  // (x, z) in the vertical casting plane, m
    double goal = 0.0;                        // m
};

struct TrainResult {
    PolicyWeights weights;
    std::vector<double> epoch_loss;       // mean train loss per epoch
    std::vector<double> validation_loss;  // per epoch (empty if no split)
    double max_clipped_norm = 0.0;        // largest post-clip gradient norm seen
};

namespace detail {

struct PolicyGrads {
    std::vector<double> w1, b1, w2, b2, w3, b3;

    explicit PolicyGrads(const PolicyWeights& w)
        : w1(w.w1.size(), 0.0), b1(w.b1.size(), 0.0), w2(w.w2.size(), 0.0),
          b2(w.b2.size(), 0.0), w3(w.w3.size(), 0.0), b3(w.b3.size(), 0.0) {}

    void zero() {
        for (auto* v : {&w1, &b1, &w2, &b2, &w3, &b3}) std::fill(v->begin(), v->end(), 0.0);
    }
    double norm() const {
        double s = 0.0;
        for (const auto* v : {&w1, &b1, &w2, &b2, &w3, &b3})
            for (double x : *v) s += x * x;
        return std::sqrt(s);
    }
    void scale(double s) {
        for (auto* v : {&w1, &b1, &w2, &b2, &w3, &b3})
            for (double& x : *v) x *= s;
    }
};

// Accumulates d(residual^2)/d(weights) for one sample into g.
inline double backprop_sample(const PolicyWeights& w, const PolicyInput& input,
                              const std::array<double, 2>& target, PolicyGrads& g,
                              ForwardTrace& t) {
    const int h = w.hidden;
    mlp_trace(w, input, t);
    double loss = 0.0;
    std::array<double, 2> dout;
    for (int o = 0; o < 2; ++o) {
        const double r = t.out[o] - target[o];
        loss += r * r;
        dout[o] = 2.0 * r;
    }
    std::vector<double> da2(h, 0.0);
    for (int o = 0; o < 2; ++o) {
        g.b3[o] += dout[o];
        for (int j = 0; j < h; ++j) {
            g.w3[static_cast<std::size_t>(h) * o + j] += dout[o] * t.a2[j];
            da2[j] += dout[o] * w.w3[static_cast<std::size_t>(h) * o + j];
        }
    }
    std::vector<double> da1(h, 0.0);
    for (int i = 0; i < h; ++i) {
        const double dz2 = da2[i] * softplus_grad(t.z2[i]);
        g.b2[i] += dz2;
        for (int j = 0; j < h; ++j) {
            g.w2[static_cast<std::size_t>(h) * i + j] += dz2 * t.a1[j];
            da1[j] += dz2 * w.w2[static_cast<std::size_t>(h) * i + j];
        }
    }
    for (int i = 0; i < h; ++i) {
        const double dz1 = da1[i] * softplus_grad(t.z1[i]);
        g.b1[i] += dz1;
        for (int j = 0; j < 3; ++j) g.w1[3 * i + j] += dz1 * t.in[j];
    }
    return loss;
}

struct AdamVec {
    std::vector<double> m, v;
    int t = 0;

    explicit AdamVec(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& w, const std::vector<double>& g, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

}  // namespace detail

inline PolicyInput normalize_input(const PolicyWeights& w, double goal, double youngs,
                                   double poisson) {
    auto norm01 = [&](int f, double x) {
        const double range = w.in_hi[f] - w.in_lo[f];
        return range > 0.0 ? (x - w.in_lo[f]) / range : 0.0;
    };
    return {norm01(0, goal), norm01(1, youngs), norm01(2, poisson)};
}

// Minibatch Adam on the mean-squared release error, global gradient-norm
// clipping, seeded epoch shuffling.  Normalization statistics come from the
// dataset min/max per feature and are stored in the returned weights.
inline TrainResult train_policy(const std::vector<DatasetRow>& dataset, const TrainHyper& hyper) {
    if (dataset.empty()) throw precondition_error("train_policy: empty dataset");
    hyper.validate();

    PolicyWeights w = PolicyWeights::zeros(hyper.hidden);
    w.mask = hyper.feature_mask;
    for (int f = 0; f < 3; ++f) {
        w.in_lo[f] = std::numeric_limits<double>::infinity();
        w.in_hi[f] = -std::numeric_limits<double>::infinity();
    }
    std::array<double, 2> out_mean{0.0, 0.0};
    for (const auto& row : dataset) {
        const double feats[3] = {row.goal, row.youngs, row.poisson};
        for (int f = 0; f < 3; ++f) {
            w.in_lo[f] = std::min(w.in_lo[f], feats[f]);
            w.in_hi[f] = std::max(w.in_hi[f], feats[f]);
        }
        out_mean[0] += row.release[0];
        out_mean[1] += row.release[1];
    }
    out_mean[0] /= dataset.size();
    out_mean[1] /= dataset.size();

    // He-style init; the output bias starts at the target mean.
    Rng rng(hyper.seed);
    const int h = hyper.hidden;
    auto init = [&](std::vector<double>& v, int fan_in) {
        const double sd = std::sqrt(2.0 / fan_in);
        for (double& x : v) x = rng.normal(0.0, sd);
    };
    init(w.w1, 3);
    init(w.w2, h);
    init(w.w3, h);
    w.b3[0] = out_mean[0];
    w.b3[1] = out_mean[1];
    w.prepared = true;

    // Seeded 90/10 train/validation split.
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    std::size_t n_val = static_cast<std::size_t>(dataset.size() * hyper.validation_fraction);
    if (dataset.size() - n_val < 1) n_val = 0;
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    auto input_of = [&](const DatasetRow& row) {
        return normalize_input(w, row.goal, row.youngs, row.poisson);
    };

    detail::PolicyGrads grads(w);
    detail::ForwardTrace trace;
    detail::AdamVec adam_w1(w.w1.size()), adam_b1(w.b1.size()), adam_w2(w.w2.size()),
        adam_b2(w.b2.size()), adam_w3(w.w3.size()), adam_b3(w.b3.size());

    TrainResult result;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle(train_idx, rng);
        double epoch_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += hyper.batch_size) {
            const std::size_t end = std::min(train_idx.size(),
                                             start + static_cast<std::size_t>(hyper.batch_size));
            grads.zero();
            double batch_sum = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& row = dataset[train_idx[i]];
                batch_sum += detail::backprop_sample(w, input_of(row), row.release, grads, trace);
            }
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            grads.scale(inv_batch);
            epoch_sum += batch_sum;
            seen += end - start;

            double gnorm = grads.norm();
            if (gnorm > hyper.grad_norm_clip) grads.scale(hyper.grad_norm_clip / gnorm);
            result.max_clipped_norm = std::max(result.max_clipped_norm, grads.norm());

            const int t = ++adam_w1.t;
            adam_b1.t = adam_w2.t = adam_b2.t = adam_w3.t = adam_b3.t = t;
            adam_w1.step(w.w1, grads.w1, hyper.learning_rate);
            adam_b1.step(w.b1, grads.b1, hyper.learning_rate);
            adam_w2.step(w.w2, grads.w2, hyper.learning_rate);
            adam_b2.step(w.b2, grads.b2, hyper.learning_rate);
            adam_w3.step(w.w3, grads.w3, hyper.learning_rate);
            adam_b3.step(w.b3, grads.b3, hyper.learning_rate);
        }
        const double mean_loss = epoch_sum / static_cast<double>(seen);
        if (!std::isfinite(mean_loss))
            throw numeric_error("train_policy: diverged at epoch " + std::to_string(epoch));
        result.epoch_loss.push_back(mean_loss);

        if (!val_idx.empty()) {
            double val_sum = 0.0;
            for (const std::size_t i : val_idx) {
                const auto& row = dataset[i];
                const auto out = mlp_forward(w, input_of(row));
                const double r0 = out[0] - row.release[0];
                const double r1 = out[1] - row.release[1];
                val_sum += r0 * r0 + r1 * r1;
            }
            result.validation_loss.push_back(val_sum / static_cast<double>(val_idx.size()));
        }
    }
    result.weights = std::move(w);
    return result;
}

// Normalizes with the stored statistics, runs the network and clamps the
// proposal to the workspace box.
inline std::array<double, 2> predict_release(const PolicyWeights& w, double goal,
                                             const MaterialParams& params) {
    if (!w.prepared)
        throw precondition_error("predict_release: weights lack normalization statistics");
    const double range = w.in_hi[0] - w.in_lo[0];
    const double slack = 0.2 * (range > 0.0 ? range : 1.0);
    if (goal < w.in_lo[0] - slack || goal > w.in_hi[0] + slack)
        throw precondition_error("predict_release: goal " + std::to_string(goal) +
                                 " outside the trained goal range +-20%");
    auto out = mlp_forward(w, normalize_input(w, goal, params.youngs_modulus, params.poissons_ratio));
    for (int i = 0; i < 2; ++i) out[i] = std::clamp(out[i], w.release_lo[i], w.release_hi[i]);
    return out;
}

}  // namespace ropeid
