#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "vhda/latent.hpp"
#include "vhda/model.hpp"

namespace vhda {

struct LossBreakdown {
    double recon_speaker = 0.0;
    double recon_goal = 0.0;
    double recon_state = 0.0;
    double recon_utterance = 0.0;
    std::map<std::string, double> kl_per_level;  // c, r, g, s, u
    double kl_total = 0.0;
    double mi_estimate = 0.0;
    double anneal_weight = 1.0;
    double total = 0.0;

    double recon_total() const {
        return recon_speaker + recon_goal + recon_state + recon_utterance;
    }

    json to_json() const {
        json j{{"recon_speaker", recon_speaker},
               {"recon_goal", recon_goal},
               {"recon_state", recon_state},
               {"recon_utterance", recon_utterance},
               {"kl_total", kl_total},
               {"mi_estimate", mi_estimate},
               {"anneal_weight", anneal_weight},
               {"total", total}};
        for (const auto& [k, v] : kl_per_level) j["kl_" + k] = v;
        return j;
    }
};

// Linear ramp min(step / horizon, 1).
inline double anneal_weight(int64_t step, int64_t horizon) {
    if (horizon <= 0) throw std::invalid_argument("anneal horizon must be positive");
    if (step <= 0) return 0.0;
    if (step >= horizon) return 1.0;
    return static_cast<double>(step) / static_cast<double>(horizon);
}

// Batch Monte-Carlo mutual-information estimate with one latent sample
// per data point:
//   I ~= (1/N) sum_i [ log q(z_i|x_i) - log sum_j q(z_i|x_j) + log N ].
inline double estimate_mi(const std::vector<GaussianMoments>& posteriors,
                          const std::vector<std::vector<double>>& samples) {
    const size_t n = posteriors.size();
    if (n == 0) throw std::invalid_argument("estimate_mi: empty batch");
    if (samples.size() != n) throw std::invalid_argument("estimate_mi: sample count mismatch");
    const double log_n = std::log(static_cast<double>(n));
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double own = gaussian_log_density(samples[i], posteriors[i]);
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> lps(n);
        for (size_t j = 0; j < n; ++j) {
            lps[j] = gaussian_log_density(samples[i], posteriors[j]);
            mx = std::max(mx, lps[j]);
        }
        double z = 0.0;
        for (size_t j = 0; j < n; ++j) z += std::exp(lps[j] - mx);
        // grouped so identical posteriors cancel term by term to exactly 0
        acc += (own - mx) - std::log(z) + log_n;
    }
    return acc / static_cast<double>(n);
}

// Differentiable version over graph nodes.
inline Ex estimate_mi(Graph& g, const std::vector<GaussianEx>& posteriors,
                      const std::vector<Ex>& samples) {
    const size_t n = posteriors.size();
    if (n == 0) throw std::invalid_argument("estimate_mi: empty batch");
    const double log_n = std::log(static_cast<double>(n));
    Ex acc = g.scalar_const(0.0);
    for (size_t i = 0; i < n; ++i) {
        std::vector<Ex> lps(n);
        for (size_t j = 0; j < n; ++j) lps[j] = gaussian_log_density(g, samples[i], posteriors[j]);
        Ex own = lps[i];
        Ex lse = logsumexp(g.concat_rows(lps));
        acc = acc + g.add_scalar(own - lse, log_n);
    }
    return g.scale(acc, 1.0 / static_cast<double>(n));
}

// Monte-Carlo decomposition of the mean per-datum KL into
// KL(aggregate posterior || prior) + MI, plus the residual against the
// closed-form mean KL. The identity is exact only in expectation.
struct KlDecomposition {
    double aggregate_posterior_kl = 0.0;
    double mi_estimate = 0.0;
    double mean_kl = 0.0;  // closed form
    double residual = 0.0;  // mean_kl - (aggregate + mi)
};

inline KlDecomposition kl_decomposition_probe(const std::vector<GaussianMoments>& posteriors,
                                              const std::vector<std::vector<double>>& samples) {
    const size_t n = posteriors.size();
    if (n == 0) throw std::invalid_argument("kl_decomposition_probe: empty batch");
    KlDecomposition out;
    GaussianMoments prior;
    prior.mean.assign(posteriors[0].mean.size(), 0.0);
    prior.stddev.assign(posteriors[0].mean.size(), 1.0);
    const double log_n = std::log(static_cast<double>(n));
    double agg = 0.0, mi = 0.0, mean_kl = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean_kl += gaussian_kl(posteriors[i], prior);
        std::vector<double> lps(n);
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < n; ++j) {
            lps[j] = gaussian_log_density(samples[i], posteriors[j]);
            mx = std::max(mx, lps[j]);
        }
        double z = 0.0;
        for (size_t j = 0; j < n; ++j) z += std::exp(lps[j] - mx);
        const double log_prior = gaussian_log_density(samples[i], prior);
        const double log_own = lps[i];
        // log_qbar = mx + log(z) - log_n, grouped for exact cancellation
        // when all posteriors coincide
        agg += (mx - log_prior) + std::log(z) - log_n;
        mi += (log_own - mx) - std::log(z) + log_n;
    }
    out.aggregate_posterior_kl = agg / static_cast<double>(n);
    out.mi_estimate = mi / static_cast<double>(n);
    out.mean_kl = mean_kl / static_cast<double>(n);
    out.residual = out.mean_kl - (out.aggregate_posterior_kl + out.mi_estimate);
    return out;
}

struct ObjectiveConfig {
    double mi_weight = 1.0;
    int64_t anneal_horizon = 1000;
    bool anneal_enabled = true;
    const std::vector<double>* dropout = nullptr;  // hierarchical schedule or null
};

struct ElboResult {
    LossBreakdown breakdown;
    Ex total_node;                     // valid until the graph is cleared
    std::vector<DialogNodes> dialogs;  // per-dialog graph handles
    KlDecomposition decomposition;     // probe over the batch's global latents
};

// Factorized ELBO over a batch, one posterior sample per latent site,
// with the annealed KL and the batch MI term on the global latents.
inline ElboResult elbo(Graph& g, const VhdaModel& model, Ex emb, const std::vector<Ex>& ont_acts,
                       Ex empty_act, const std::vector<DialogObs>& batch, int64_t step,
                       const ObjectiveConfig& ocfg, Rng& rng, bool sample_latents = true) {
    if (batch.empty()) throw std::invalid_argument("elbo: empty batch");
    ElboResult res;
    ForwardOptions opt;
    opt.sample_latents = sample_latents;
    opt.dropout = ocfg.dropout;
    opt.rng = &rng;

    Ex recon_spk = g.scalar_const(0.0);
    Ex recon_goal = recon_spk, recon_state = recon_spk, recon_utt = recon_spk;
    Ex kl_c = g.scalar_const(0.0);
    Ex kl_r = kl_c, kl_g = kl_c, kl_s = kl_c, kl_u = kl_c;

    std::vector<GaussianEx> q_cs;
    std::vector<Ex> z_cs;
    for (const auto& d : batch) {
        DialogNodes dn = model.run_dialog(g, emb, ont_acts, empty_act, d, opt);
        recon_spk = recon_spk + dn.recon_speaker;
        recon_goal = recon_goal + dn.recon_goal;
        recon_state = recon_state + dn.recon_state;
        recon_utt = recon_utt + dn.recon_utt;
        kl_c = kl_c + dn.kl_c;
        kl_r = kl_r + dn.kl_r_sum;
        kl_g = kl_g + dn.kl_g_sum;
        kl_s = kl_s + dn.kl_s_sum;
        kl_u = kl_u + dn.kl_u_sum;
        q_cs.push_back(dn.q_c);
        z_cs.push_back(dn.z_c);
        res.dialogs.push_back(std::move(dn));
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    recon_spk = g.scale(recon_spk, inv_n);
    recon_goal = g.scale(recon_goal, inv_n);
    recon_state = g.scale(recon_state, inv_n);
    recon_utt = g.scale(recon_utt, inv_n);
    kl_c = g.scale(kl_c, inv_n);
    kl_r = g.scale(kl_r, inv_n);
    kl_g = g.scale(kl_g, inv_n);
    kl_s = g.scale(kl_s, inv_n);
    kl_u = g.scale(kl_u, inv_n);

    Ex kl_total = kl_c + kl_r + kl_g + kl_s + kl_u;
    Ex recon_total = recon_spk + recon_goal + recon_state + recon_utt;

    const double aw = ocfg.anneal_enabled ? anneal_weight(step, ocfg.anneal_horizon) : 1.0;

    Ex mi = g.scalar_const(0.0);
    if (ocfg.mi_weight != 0.0 && batch.size() > 1) mi = estimate_mi(g, q_cs, z_cs);

    Ex total = recon_total + g.scale(kl_total, aw) - g.scale(mi, ocfg.mi_weight);
    res.total_node = total;

    LossBreakdown& b = res.breakdown;
    b.recon_speaker = g.scalar(recon_spk);
    b.recon_goal = g.scalar(recon_goal);
    b.recon_state = g.scalar(recon_state);
    b.recon_utterance = g.scalar(recon_utt);
    b.kl_per_level["c"] = g.scalar(kl_c);
    b.kl_per_level["r"] = g.scalar(kl_r);
    b.kl_per_level["g"] = g.scalar(kl_g);
    b.kl_per_level["s"] = g.scalar(kl_s);
    b.kl_per_level["u"] = g.scalar(kl_u);
    b.kl_total = g.scalar(kl_total);
    b.mi_estimate = g.scalar(mi);
    b.anneal_weight = aw;
    b.total = g.scalar(total);

    // decomposition probe over the global latents (plain doubles)
    std::vector<GaussianMoments> moments;
    std::vector<std::vector<double>> zs;
    for (size_t i = 0; i < q_cs.size(); ++i) {
        moments.push_back(q_cs[i].moments(g));
        zs.push_back(g.val(z_cs[i]).a);
    }
    res.decomposition = kl_decomposition_probe(moments, zs);
    return res;
}

}  // namespace vhda
