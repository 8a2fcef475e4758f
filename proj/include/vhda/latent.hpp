#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vhda/errors.hpp"
#include "vhda/nn.hpp"

namespace vhda {

// Diagonal Gaussian parameters as plain doubles (diagnostics, probes).
struct GaussianMoments {
    std::vector<double> mean;
    std::vector<double> stddev;

    int dim() const { return static_cast<int>(mean.size()); }
};

// Closed-form KL( N(mq, sq) || N(mp, sp) ) for diagonal Gaussians.
inline double gaussian_kl(const GaussianMoments& q, const GaussianMoments& p) {
    if (q.dim() != p.dim()) throw std::invalid_argument("gaussian_kl width mismatch");
    double kl = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        const double vq = q.stddev[i] * q.stddev[i];
        const double vp = p.stddev[i] * p.stddev[i];
        const double dm = q.mean[i] - p.mean[i];
        kl += 0.5 * (vq / vp + dm * dm / vp - 1.0 + std::log(vp / vq));
    }
    return kl;
}

inline double gaussian_log_density(const std::vector<double>& z, const GaussianMoments& m) {
    if (static_cast<int>(z.size()) != m.dim())
        throw std::invalid_argument("gaussian_log_density width mismatch");
    double lp = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        const double s = m.stddev[i];
        const double d = (z[i] - m.mean[i]) / s;
        lp += -0.5 * std::log(2.0 * M_PI) - std::log(s) - 0.5 * d * d;
    }
    return lp;
}

inline std::vector<double> sample_gaussian(const GaussianMoments& m, Rng& rng) {
    std::vector<double> z(m.mean.size());
    for (size_t i = 0; i < z.size(); ++i) z[i] = m.mean[i] + m.stddev[i] * rng.normal();
    return z;
}

// Differentiable Gaussian parameter pair on the graph.
struct GaussianEx {
    Ex mean;
    Ex stddev;
    int dim = 0;

    GaussianMoments moments(const Graph& g) const {
        GaussianMoments m;
        m.mean = g.val(mean).a;
        m.stddev = g.val(stddev).a;
        return m;
    }
};

// Reparameterized sample: z = mu + sigma .* eps, eps ~ N(0, I).
inline Ex sample_gaussian(Graph& g, const GaussianEx& p, Rng& rng) {
    Mat eps(p.dim, 1);
    for (double& x : eps.a) x = rng.normal();
    return g.add(p.mean, g.mul(p.stddev, g.constant(std::move(eps))));
}

inline Ex gaussian_kl(Graph& g, const GaussianEx& q, const GaussianEx& p) {
    if (q.dim != p.dim) throw std::invalid_argument("gaussian_kl width mismatch");
    Ex lsq = log(q.stddev);
    Ex lsp = log(p.stddev);
    Ex vq = q.stddev * q.stddev;
    Ex vp = p.stddev * p.stddev;
    Ex dm = q.mean - p.mean;
    Ex ratio = (vq + dm * dm) / vp;
    Ex per_dim = g.add_scalar(g.add(g.sub(lsp, lsq), g.scale(ratio, 0.5)), -0.5);
    return sum(per_dim);
}

// KL against the standard normal prior.
inline Ex gaussian_kl_std(Graph& g, const GaussianEx& q) {
    Ex vq = q.stddev * q.stddev;
    Ex per_dim = g.add_scalar(g.scale(g.sub(g.add(vq, q.mean * q.mean), log(vq)), 0.5), -0.5);
    return sum(per_dim);
}

inline Ex gaussian_log_density(Graph& g, Ex z, const GaussianEx& m) {
    Ex d = (z - m.mean) / m.stddev;
    Ex per_dim = g.add_scalar(g.sub(g.scale(d * d, -0.5), log(m.stddev)),
                              -0.5 * std::log(2.0 * M_PI));
    return sum(per_dim);
}

// Fully-connected Gaussian parameter estimator: one tanh hidden layer,
// softplus stddev head with a small positive floor.
struct GaussianHead {
    Linear hidden;
    Linear mean_out;
    Linear std_out;
    double sigma_floor = 1e-4;
    int out_dim = 0;

    GaussianHead() = default;
    GaussianHead(ParamStore& ps, const std::string& name, int in, int latent, double floor,
                 Rng& rng)
        : hidden(ps, name + ".hidden", in, latent, rng),
          mean_out(ps, name + ".mean", latent, latent, rng),
          std_out(ps, name + ".std", latent, latent, rng),
          sigma_floor(floor),
          out_dim(latent) {}

    GaussianEx operator()(Graph& g, Ex x) const {
        Ex h = tanh(hidden(g, x));
        Ex mu = mean_out(g, h);
        Ex sigma = g.add_scalar(softplus(std_out(g, h)), sigma_floor);
        return {mu, sigma, out_dim};
    }
};

}  // namespace vhda
