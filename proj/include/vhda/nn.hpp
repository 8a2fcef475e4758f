#pragma once

#include <string>
#include <vector>

#include "vhda/graph.hpp"

namespace vhda {

// y = W x + b, on column vectors.
struct Linear {
    Parameter* W = nullptr;
    Parameter* b = nullptr;

    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
        W = &ps.create_xavier(name + ".W", out, in, rng);
        b = &ps.create(name + ".b", out, 1);
    }

    Ex operator()(Graph& g, Ex x) const {
        return g.add(g.matmul(g.param(*W), x), g.param(*b));
    }
};

// Single-hidden-layer feedforward map with tanh nonlinearity.
struct Mlp {
    Linear hidden;
    Linear out;

    Mlp() = default;
    Mlp(ParamStore& ps, const std::string& name, int in, int hid, int out_dim, Rng& rng)
        : hidden(ps, name + ".hidden", in, hid, rng), out(ps, name + ".out", hid, out_dim, rng) {}

    Ex operator()(Graph& g, Ex x) const { return out(g, tanh(hidden(g, x))); }
};

struct LstmState {
    Ex h;
    Ex c;
};

// Plain LSTM cell. Gate layout in the fused weight: [i; f; o; g].
struct LstmCell {
    Parameter* Wx = nullptr;
    Parameter* Wh = nullptr;
    Parameter* b = nullptr;
    int hid = 0;

    LstmCell() = default;
    LstmCell(ParamStore& ps, const std::string& name, int in, int hidden, Rng& rng)
        : hid(hidden) {
        Wx = &ps.create_xavier(name + ".Wx", 4 * hidden, in, rng);
        Wh = &ps.create_xavier(name + ".Wh", 4 * hidden, hidden, rng);
        b = &ps.create(name + ".b", 4 * hidden, 1);
        // forget-gate bias starts at 1
        for (int i = hidden; i < 2 * hidden; ++i) b->value(i, 0) = 1.0;
    }

    LstmState zero_state(Graph& g) const {
        return {g.zeros(hid, 1), g.zeros(hid, 1)};
    }

    LstmState step(Graph& g, Ex x, const LstmState& s) const {
        Ex gates = g.add(g.add(g.matmul(g.param(*Wx), x), g.matmul(g.param(*Wh), s.h)),
                         g.param(*b));
        Ex i = sigmoid(g.slice_rows(gates, 0, hid));
        Ex f = sigmoid(g.slice_rows(gates, hid, 2 * hid));
        Ex o = sigmoid(g.slice_rows(gates, 2 * hid, 3 * hid));
        Ex u = tanh(g.slice_rows(gates, 3 * hid, 4 * hid));
        Ex c = f * s.c + i * u;
        Ex h = o * tanh(c);
        return {h, c};
    }
};

// Adam with global-norm gradient clipping.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;
};

class Adam {
public:
    int64_t t = 0;

    void step(ParamStore& ps, const AdamConfig& cfg) {
        double norm_sq = 0.0;
        for (auto& p : ps.all())
            for (double gr : p->grad.a) norm_sq += gr * gr;
        double scale = 1.0;
        const double norm = std::sqrt(norm_sq);
        if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale = cfg.clip_norm / norm;

        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (auto& p : ps.all()) {
            for (size_t i = 0; i < p->value.size(); ++i) {
                const double gr = p->grad.a[i] * scale;
                p->m.a[i] = cfg.beta1 * p->m.a[i] + (1.0 - cfg.beta1) * gr;
                p->v.a[i] = cfg.beta2 * p->v.a[i] + (1.0 - cfg.beta2) * gr * gr;
                const double mhat = p->m.a[i] / bc1;
                const double vhat = p->v.a[i] / bc2;
                p->value.a[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

}  // namespace vhda
