#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "vhda/checkpoint.hpp"
#include "vhda/config.hpp"
#include "vhda/corpus.hpp"
#include "vhda/dropout.hpp"
#include "vhda/objective.hpp"
#include "vhda/toy.hpp"

namespace vhda {

struct StepRecord {
    int64_t step = 0;
    LossBreakdown loss;
    KlDecomposition decomp;

    json to_json() const {
        json j = loss.to_json();
        j["step"] = step;
        j["agg_posterior_kl"] = decomp.aggregate_posterior_kl;
        j["mi_probe"] = decomp.mi_estimate;
        j["decomp_residual"] = decomp.residual;
        return j;
    }
};

struct TrainLog {
    std::vector<StepRecord> steps;

    void save_jsonl(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write train log: " + path);
        for (const auto& r : steps) os << r.to_json().dump() << "\n";
    }
};

// Everything bound to one training corpus: vocabulary, ontology, the
// model, optimizer state, and cached tensorized dialogs.
struct Session {
    RunConfig cfg;
    DialogCorpus corpus;
    ActOntology ontology;
    OntologyTokens ont_tokens;
    Vocabulary vocab;
    VhdaModel model;
    Adam opt;
    std::vector<DialogObs> obs;  // with training sentinel

    static Session create(DialogCorpus corpus, RunConfig cfg) {
        ActOntology ont = build_ontology(corpus);
        Vocabulary vocab = Vocabulary::build(corpus, ont);
        cfg.model.n_speakers = static_cast<int>(corpus.speakers.size());
        VhdaModel model(cfg.model, vocab.size(), cfg.train.seed);
        Session s{std::move(cfg),    std::move(corpus), std::move(ont), OntologyTokens{},
                  std::move(vocab),  std::move(model),  Adam{},         {}};
        s.ont_tokens = OntologyTokens::build(s.ontology, s.vocab);
        for (const auto& d : s.corpus.dialogs)
            s.obs.push_back(tensorize(d, s.vocab, s.ontology, true));
        return s;
    }

    uint64_t effective_config_hash() const { return config_hash(cfg); }
    uint64_t model_hash() const {
        return mix_seed(effective_config_hash(), mix_seed(vocab.hash(), ontology_hash(ontology)));
    }
};

struct TrainResult {
    TrainLog log;
    CheckpointMeta meta;
    std::string checkpoint_dir;
};

namespace train_detail {

inline std::vector<int> epoch_permutation(size_t n, uint64_t seed, int64_t epoch) {
    std::vector<int> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    Rng rng(mix_seed(seed, 0xE90C0000ULL + static_cast<uint64_t>(epoch)));
    rng.shuffle(perm);
    return perm;
}

}  // namespace train_detail

// Deterministic single-threaded training. Per-step noise (batch order,
// act-order shuffling, dropout, reparameterization) is a pure function
// of (seed, step), which also makes resume-equivalence exact.
inline TrainResult train(Session& s, const std::string& out_dir = "") {
    const TrainConfig& tc = s.cfg.train;
    TrainResult result;

    std::vector<double> schedule;
    if (tc.hierarchical_dropout && s.cfg.model.dropout_base > 0.0)
        schedule = dropout_schedule(s.cfg.model.dropout_base, s.cfg.model.dropout_ratio, 5);

    AdamConfig acfg;
    acfg.lr = tc.lr;
    acfg.clip_norm = tc.clip_norm;

    ObjectiveConfig ocfg;
    ocfg.mi_weight = tc.mi_weight;
    ocfg.anneal_horizon = tc.anneal_horizon;
    ocfg.anneal_enabled = tc.anneal_enabled;
    ocfg.dropout = schedule.empty() ? nullptr : &schedule;

    const size_t n_dialogs = s.obs.size();
    const int64_t steps_per_epoch =
        std::max<int64_t>(1, static_cast<int64_t>((n_dialogs + tc.batch_size - 1) / tc.batch_size));

    auto write_ckpt = [&](const std::string& dir, int64_t step) {
        CheckpointMeta meta;
        meta.step = step;
        meta.config_hash = s.effective_config_hash();
        meta.vocab_hash = s.vocab.hash();
        meta.ontology_hash = ontology_hash(s.ontology);
        save_checkpoint(dir, s.model.params, s.opt, meta);
        return meta;
    };

    Graph g;
    for (int64_t step = s.opt.t; step < tc.max_steps; ++step) {
        const int64_t epoch = step / steps_per_epoch;
        const int64_t pos = step % steps_per_epoch;
        std::vector<int> perm = train_detail::epoch_permutation(n_dialogs, tc.seed, epoch);

        std::vector<DialogObs> batch;
        for (int64_t k = pos * tc.batch_size;
             k < std::min<int64_t>((pos + 1) * tc.batch_size, static_cast<int64_t>(n_dialogs));
             ++k)
            batch.push_back(s.obs[perm[k]]);

        Rng step_rng(mix_seed(tc.seed, 0x57E90000ULL + static_cast<uint64_t>(step)));
        for (auto& d : batch)
            for (auto& t : d.turns) {
                step_rng.shuffle(t.goal_ids);
                step_rng.shuffle(t.state_ids);
            }

        g.clear();
        Ex emb = g.param(*s.model.enc.tok_emb);
        std::vector<Ex> ont_acts = s.model.encode_ontology(g, emb, s.ont_tokens);
        Ex empty_act = s.model.empty_act_vec(g, emb);

        s.model.params.zero_grad();
        ElboResult er = elbo(g, s.model, emb, ont_acts, empty_act, batch, step, ocfg, step_rng);

        if (!std::isfinite(er.breakdown.total)) {
            if (!out_dir.empty()) {
                write_ckpt(out_dir + "/last_good", step);
                json report{{"step", step},
                            {"total", er.breakdown.total},
                            {"kl_total", er.breakdown.kl_total},
                            {"recon", er.breakdown.recon_total()}};
                std::ofstream os(out_dir + "/divergence_report.json");
                os << report.dump(2) << "\n";
            }
            throw DivergenceError("non-finite loss at step " + std::to_string(step));
        }

        g.backward(er.total_node);
        s.opt.step(s.model.params, acfg);

        StepRecord rec;
        rec.step = step + 1;
        rec.loss = er.breakdown;
        rec.decomp = er.decomposition;
        result.log.steps.push_back(rec);

        if (!out_dir.empty() && tc.ckpt_every > 0 && (step + 1) % tc.ckpt_every == 0)
            write_ckpt(out_dir + "/step_" + std::to_string(step + 1), step + 1);
    }

    result.meta.step = s.opt.t;
    result.meta.config_hash = s.effective_config_hash();
    result.meta.vocab_hash = s.vocab.hash();
    result.meta.ontology_hash = ontology_hash(s.ontology);
    if (!out_dir.empty()) {
        result.checkpoint_dir = out_dir + "/final";
        write_ckpt(result.checkpoint_dir, s.opt.t);
        result.log.save_jsonl(out_dir + "/train_log.jsonl");
    }
    return result;
}

// Teacher-forced reconstruction quality in evaluation mode: latents at
// posterior means, dropout off, sentinel turns excluded from metrics.
struct ReconReport {
    double token_accuracy = 0.0;
    double speaker_accuracy = 0.0;
    double goal_f1 = 0.0;
    double state_f1 = 0.0;
    double goal_exact_user = 0.0;  // exact set match over user turns
    double state_exact = 0.0;      // exact set match over all turns
    double kl_c = 0.0;             // mean per-dialog KL of the global latent
    std::map<std::string, double> kl_per_level;
};

inline ReconReport evaluate_reconstruction(const Session& s) {
    ReconReport rep;
    int64_t tok_ok = 0, tok_all = 0, spk_ok = 0, spk_all = 0;
    int64_t goal_tp = 0, goal_fp = 0, goal_fn = 0;
    int64_t state_tp = 0, state_fp = 0, state_fn = 0;
    int64_t goal_exact = 0, user_turns = 0, state_exact_n = 0, turns_n = 0;
    double kl_c_sum = 0.0;
    std::map<std::string, double> kl_sums;

    Graph g;
    for (const auto& d : s.obs) {
        g.clear();
        Ex emb = g.param(*s.model.enc.tok_emb);
        std::vector<Ex> ont_acts = s.model.encode_ontology(g, emb, s.ont_tokens);
        Ex empty_act = s.model.empty_act_vec(g, emb);
        ForwardOptions opt;
        opt.sample_latents = false;
        DialogNodes dn = s.model.run_dialog(g, emb, ont_acts, empty_act, d, opt);

        kl_c_sum += g.scalar(dn.kl_c);
        kl_sums["r"] += g.scalar(dn.kl_r_sum);
        kl_sums["g"] += g.scalar(dn.kl_g_sum);
        kl_sums["s"] += g.scalar(dn.kl_s_sum);
        kl_sums["u"] += g.scalar(dn.kl_u_sum);

        for (const auto& tn : dn.turns) {
            if (tn.obs->sentinel) continue;
            ++turns_n;
            // speaker
            const Mat& sl = g.val(tn.spk_logits);
            int best = 0;
            for (int i = 1; i < sl.rows; ++i)
                if (sl(i, 0) > sl(best, 0)) best = i;
            spk_ok += (best == tn.obs->speaker);
            ++spk_all;
            // tokens
            for (size_t i = 0; i < tn.word_logits.size(); ++i) {
                const Mat& wl = g.val(tn.word_logits[i]);
                int arg = 0;
                for (int v = 1; v < wl.rows; ++v)
                    if (wl(v, 0) > wl(arg, 0)) arg = v;
                tok_ok += (arg == tn.word_targets[i]);
                ++tok_all;
            }
            // act sets at threshold 0.5 (logit > 0)
            auto tally = [&](const std::vector<Ex>& scores, const std::vector<int>& gold,
                             int64_t& tp, int64_t& fp, int64_t& fn, bool& exact) {
                std::vector<int> pred;
                for (size_t i = 0; i < scores.size(); ++i)
                    if (g.scalar(scores[i]) > 0.0) pred.push_back(tn.cand_ids[i]);
                std::vector<int> gold_sorted(gold);
                std::sort(gold_sorted.begin(), gold_sorted.end());
                std::sort(pred.begin(), pred.end());
                exact = (pred == gold_sorted);
                for (int p : pred)
                    if (std::binary_search(gold_sorted.begin(), gold_sorted.end(), p))
                        ++tp;
                    else
                        ++fp;
                for (int q : gold_sorted)
                    if (!std::binary_search(pred.begin(), pred.end(), q)) ++fn;
            };
            bool gexact = false, sexact = false;
            tally(tn.goal_scores, tn.obs->goal_ids, goal_tp, goal_fp, goal_fn, gexact);
            tally(tn.state_scores, tn.obs->state_ids, state_tp, state_fp, state_fn, sexact);
            state_exact_n += sexact;
            if (tn.obs->speaker == 0) {
                ++user_turns;
                goal_exact += gexact;
            }
        }
    }

    auto f1 = [](int64_t tp, int64_t fp, int64_t fn) {
        const double denom = 2.0 * tp + fp + fn;
        return denom == 0.0 ? 1.0 : 2.0 * tp / denom;
    };
    const double nd = static_cast<double>(s.obs.size());
    rep.token_accuracy = tok_all ? static_cast<double>(tok_ok) / tok_all : 1.0;
    rep.speaker_accuracy = spk_all ? static_cast<double>(spk_ok) / spk_all : 1.0;
    rep.goal_f1 = f1(goal_tp, goal_fp, goal_fn);
    rep.state_f1 = f1(state_tp, state_fp, state_fn);
    rep.goal_exact_user = user_turns ? static_cast<double>(goal_exact) / user_turns : 1.0;
    rep.state_exact = turns_n ? static_cast<double>(state_exact_n) / turns_n : 1.0;
    rep.kl_c = kl_c_sum / nd;
    for (auto& [k, v] : kl_sums) rep.kl_per_level[k] = v / nd;
    rep.kl_per_level["c"] = rep.kl_c;
    return rep;
}

}  // namespace vhda
