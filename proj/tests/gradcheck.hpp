#pragma once

#include <functional>
#include <vector>

#include "vhda/graph.hpp"

namespace vhda::testing {

// Compares analytic gradients against central finite differences at
// randomly sampled parameter coordinates. `loss_fn` must rebuild its
// graph from scratch on every call (so perturbed parameters take effect)
// and must be deterministic given the parameters (fix any noise seeds).
// When `backprop` is true the call must also accumulate gradients.
struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

inline GradCheckResult grad_check(ParamStore& params,
                                  const std::function<double(bool backprop)>& loss_fn,
                                  int n_coords, Rng& rng, double eps_scale = 1e-5) {
    params.zero_grad();
    loss_fn(true);

    // flat index over all parameter coordinates
    std::vector<std::pair<Parameter*, size_t>> coords;
    for (auto& p : params.all())
        for (size_t i = 0; i < p->value.size(); ++i) coords.push_back({p.get(), i});

    GradCheckResult res;
    for (int k = 0; k < n_coords; ++k) {
        auto [p, i] = coords[static_cast<size_t>(rng.uniform_int(static_cast<int>(coords.size())))];
        const double orig = p->value.a[i];
        const double h = eps_scale * std::max(1.0, std::abs(orig));
        p->value.a[i] = orig + h;
        const double lp = loss_fn(false);
        p->value.a[i] = orig - h;
        const double lm = loss_fn(false);
        p->value.a[i] = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = p->grad.a[i];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
        res.max_rel_err = std::max(res.max_rel_err, std::abs(numeric - analytic) / denom);
        ++res.checked;
    }
    return res;
}

}  // namespace vhda::testing
