#pragma once

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "vhda/trainer.hpp"

namespace vhda {

struct SampleOptions {
    int max_turns = 20;
    bool stochastic_priors = false;  // default: turn latents at the prior mean
    bool sample_zc = true;           // global latent sampled from the posterior
};

struct SampledDialog {
    Dialog dialog;
    bool truncated = false;  // hit max_turns without the end-of-dialog sentinel
};

namespace sampler_detail {

inline int argmax_masked(const Mat& logits, const std::vector<int>& forbidden) {
    int best = -1;
    for (int i = 0; i < logits.rows; ++i) {
        if (std::find(forbidden.begin(), forbidden.end(), i) != forbidden.end()) continue;
        if (best < 0 || logits(i, 0) > logits(best, 0)) best = i;
    }
    return best;
}

}  // namespace sampler_detail

// Posterior moments of the global latent for an anchor dialog.
inline GaussianMoments posterior_zc_moments(const Session& s, const DialogObs& anchor) {
    Graph g;
    Ex emb = g.param(*s.model.enc.tok_emb);
    std::vector<Ex> utt(anchor.turns.size());
    for (size_t t = 0; t < anchor.turns.size(); ++t)
        utt[t] = s.model.enc.encode_utterance(g, emb, anchor.turns[t].utt, Ex{});
    Ex conv = s.model.enc.conv.encode(g, utt);
    GaussianEx q = s.model.post_c(g, conv);
    return q.moments(g);
}

// Greedy likelihood-seeking decode of a full dialog from a fixed global
// latent: per turn, chain latents at their conditional prior means (or
// sampled when stochastic), features decoded greedily and fed back into
// the context recurrence. Stops at the end-of-dialog sentinel.
inline SampledDialog decode_dialog(const Session& s, const std::vector<double>& zc_value,
                                   Rng& rng, const SampleOptions& opt,
                                   const std::string& dialog_id) {
    const VhdaModel& m = s.model;
    const ModelConfig& cfg = m.cfg;
    SampledDialog out;
    out.dialog.id = dialog_id;

    Graph g;
    Ex emb = g.param(*m.enc.tok_emb);
    std::vector<Ex> ont_acts = m.encode_ontology(g, emb, s.ont_tokens);
    Ex empty_act = m.empty_act_vec(g, emb);
    Ex zc = g.constant(Mat::column(zc_value));

    LstmState st{g.param(*m.ctx_h0), g.param(*m.ctx_c0)};
    st = m.ctx_cell.step(g, g.zeros(cfg.spk_emb + 3 * cfg.feat_width, 1), st);

    bool terminated = false;
    for (int t = 0; t < opt.max_turns && !terminated; ++t) {
        Ex h_t = st.h;
        auto draw = [&](const GaussianEx& p) {
            return opt.stochastic_priors ? sample_gaussian(g, p, rng) : p.mean;
        };

        GaussianEx p_r = m.prior_r(g, g.concat_rows({h_t, zc}));
        Ex z_r = draw(p_r);
        const Mat& spk_logits = g.val(m.dec_spk(g, g.concat_rows({h_t, zc, z_r})));
        int speaker = 0;
        for (int i = 1; i < spk_logits.rows; ++i)
            if (spk_logits(i, 0) > spk_logits(speaker, 0)) speaker = i;

        GaussianEx p_g = m.prior_g(g, g.concat_rows({h_t, zc, z_r}));
        Ex z_g = draw(p_g);
        Ex o_g = m.goal_head(g, g.concat_rows({h_t, zc, z_r, z_g}));
        std::vector<int> goal_ids;
        for (size_t i = 0; i < ont_acts.size(); ++i)
            if (g.scalar(dot(o_g, ont_acts[i])) > 0.0) goal_ids.push_back(static_cast<int>(i));

        GaussianEx p_s = m.prior_s(g, g.concat_rows({h_t, zc, z_r, z_g}));
        Ex z_s = draw(p_s);
        Ex o_s = m.state_head(g, g.concat_rows({h_t, zc, z_r, z_g, z_s}));
        std::vector<int> state_ids;
        for (size_t i = 0; i < ont_acts.size(); ++i)
            if (g.scalar(dot(o_s, ont_acts[i])) > 0.0) state_ids.push_back(static_cast<int>(i));

        GaussianEx p_u = m.prior_u(g, g.concat_rows({h_t, zc, z_r, z_g, z_s}));
        Ex z_u = draw(p_u);
        Ex cond = g.concat_rows({h_t, zc, z_r, z_g, z_s, z_u});

        // greedy utterance rollout
        Ex init = m.udec_init(g, cond);
        LstmState us{tanh(g.slice_rows(init, 0, cfg.dec_hidden)),
                     g.slice_rows(init, cfg.dec_hidden, 2 * cfg.dec_hidden)};
        std::vector<int> tokens;
        int prev = Vocabulary::kBou;
        for (int k = 0; k < cfg.max_decode_len; ++k) {
            Ex x = g.concat_rows({g.pick_row(emb, prev), cond});
            us = m.udec.step(g, x, us);
            const Mat& logits = g.val(m.udec_out(g, us.h));
            std::vector<int> forbidden = {Vocabulary::kPad, Vocabulary::kBou,
                                          Vocabulary::kEmptySet};
            if (k == 0) forbidden.push_back(Vocabulary::kEou);
            const int tok = sampler_detail::argmax_masked(logits, forbidden);
            if (tok == Vocabulary::kEou) break;
            tokens.push_back(tok);
            prev = tok;
        }
        if (!tokens.empty() && tokens.front() == Vocabulary::kEod) {
            terminated = true;
            break;
        }

        Turn turn;
        turn.speaker = s.vocab.speaker_label(speaker);
        for (int idx : goal_ids) turn.goal.push_back(s.ontology.triples[idx]);
        for (int idx : state_ids) turn.state.push_back(s.ontology.triples[idx]);
        turn.goal = make_act_set(std::move(turn.goal));
        turn.state = make_act_set(std::move(turn.state));
        for (int tok : tokens) turn.utterance.push_back(s.vocab.token(tok));
        out.dialog.turns.push_back(std::move(turn));

        // realized features feed the context recurrence
        Ex h_r = m.enc.embed_speaker(g, speaker);
        std::vector<Ex> gacts, sacts;
        for (int idx : goal_ids) gacts.push_back(ont_acts[idx]);
        for (int idx : state_ids) sacts.push_back(ont_acts[idx]);
        Ex h_g = m.enc.encode_act_set(g, m.enc.goal, gacts, empty_act, zc);
        Ex h_s = m.enc.encode_act_set(g, m.enc.state, sacts, empty_act, zc);
        std::vector<int> enc_tokens = tokens.empty() ? std::vector<int>{Vocabulary::kUnk} : tokens;
        Ex h_u = m.enc.encode_utterance(g, emb, enc_tokens, zc);
        st = m.ctx_cell.step(g, g.concat_rows({h_r, h_g, h_s, h_u}), st);
    }
    out.truncated = !terminated;
    return out;
}

// Ancestral sampling anchored on a real dialog: z_c from the anchor's
// posterior, then a greedy decode through the conditional prior chain.
inline SampledDialog posterior_sample(const Session& s, const DialogObs& anchor, Rng& rng,
                                      const SampleOptions& opt = {},
                                      const std::string& dialog_id = "sample") {
    GaussianMoments q = posterior_zc_moments(s, anchor);
    std::vector<double> zc = opt.sample_zc ? sample_gaussian(q, rng) : q.mean;
    return decode_dialog(s, zc, rng, opt, dialog_id);
}

// Equidistant interior points on the segment between two anchors' global
// posterior means; optionally includes both endpoints.
inline std::vector<SampledDialog> interpolate(const Session& s, const DialogObs& anchor1,
                                              const DialogObs& anchor2, int n_points,
                                              bool include_endpoints = false) {
    if (n_points < 1) throw std::invalid_argument("interpolate: n_points must be >= 1");
    GaussianMoments q1 = posterior_zc_moments(s, anchor1);
    GaussianMoments q2 = posterior_zc_moments(s, anchor2);
    std::vector<std::vector<double>> zs;
    auto lerp = [&](double alpha) {
        std::vector<double> z(q1.mean.size());
        for (size_t i = 0; i < z.size(); ++i)
            z[i] = q1.mean[i] + alpha * (q2.mean[i] - q1.mean[i]);
        return z;
    };
    if (include_endpoints) zs.push_back(lerp(0.0));
    for (int i = 1; i <= n_points; ++i)
        zs.push_back(lerp(static_cast<double>(i) / (n_points + 1)));
    if (include_endpoints) zs.push_back(lerp(1.0));

    std::vector<SampledDialog> out;
    Rng rng(0);  // unused in deterministic mode
    SampleOptions opt;
    opt.stochastic_priors = false;
    for (size_t i = 0; i < zs.size(); ++i)
        out.push_back(decode_dialog(s, zs[i], rng, opt, "interp" + std::to_string(i)));
    return out;
}

struct AugmentationSample {
    std::string anchor_id;
    std::string synthetic_id;
    bool novel = false;
    bool valid = false;
    bool truncated = false;
};

struct AugmentationReport {
    std::vector<AugmentationSample> samples;
    double requested_ratio = 0.0;
    double achieved_ratio = 0.0;
    double novelty_rate = 0.0;
    double validity_rate = 0.0;
    // auxiliary user-simulation style measures over generated user turns
    double act_accuracy = 0.0;  // exact state-set match against the anchor, aligned user turns
    double act_entropy = 0.0;   // mean -ln p_train(triple) of generated user-turn triples

    json to_json() const {
        json arr = json::array();
        for (const auto& s : samples)
            arr.push_back(json{{"anchor_id", s.anchor_id},
                               {"synthetic_id", s.synthetic_id},
                               {"novel", s.novel},
                               {"valid", s.valid},
                               {"truncated", s.truncated}});
        return json{{"samples", arr},
                    {"requested_ratio", requested_ratio},
                    {"achieved_ratio", achieved_ratio},
                    {"novelty_rate", novelty_rate},
                    {"validity_rate", validity_rate},
                    {"act_accuracy", act_accuracy},
                    {"act_entropy", act_entropy}};
    }
};

namespace sampler_detail {

inline bool dialogs_differ(const Dialog& a, const Dialog& b) {
    if (a.turns.size() != b.turns.size()) return true;
    for (size_t t = 0; t < a.turns.size(); ++t) {
        const Turn &ta = a.turns[t], &tb = b.turns[t];
        if (ta.speaker != tb.speaker || ta.utterance != tb.utterance ||
            !act_set_equal(ta.goal, tb.goal) || !act_set_equal(ta.state, tb.state))
            return true;
    }
    return false;
}

}  // namespace sampler_detail

// Draws ceil(ratio * N) synthetic dialogs from anchors sampled uniformly
// with replacement. Original dialogs are never touched; synthetics carry
// a provenance record. Per-sample RNGs are derived from (seed, index) so
// results do not depend on worker scheduling.
inline std::pair<DialogCorpus, AugmentationReport> augment(const Session& s, double ratio,
                                                           uint64_t seed, int workers = 1,
                                                           const SampleOptions& opt = {}) {
    const size_t n = s.corpus.dialogs.size();
    const size_t n_synth = static_cast<size_t>(std::ceil(ratio * static_cast<double>(n)));
    AugmentationReport report;
    report.requested_ratio = ratio;

    Rng anchor_rng(mix_seed(seed, 0xA0C480ULL));
    std::vector<size_t> anchors(n_synth);
    for (size_t k = 0; k < n_synth; ++k) anchors[k] = static_cast<size_t>(anchor_rng.uniform_int(static_cast<int>(n)));

    std::vector<SampledDialog> sampled(n_synth);
    auto run_range = [&](size_t begin, size_t stride) {
        for (size_t k = begin; k < n_synth; k += stride) {
            Rng rng(mix_seed(seed, 0x5A3B1E00ULL + static_cast<uint64_t>(k)));
            sampled[k] = posterior_sample(s, s.obs[anchors[k]], rng, opt,
                                          s.corpus.dialogs[anchors[k]].id + "-syn" +
                                              std::to_string(k));
        }
    };
    if (workers <= 1) {
        run_range(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(run_range, static_cast<size_t>(w), static_cast<size_t>(workers));
        for (auto& th : pool) th.join();
    }

    DialogCorpus augmented = s.corpus;
    size_t novel = 0, valid = 0;
    int64_t act_match = 0, act_turns = 0;
    std::vector<ActTriple> gen_triples;
    for (size_t k = 0; k < n_synth; ++k) {
        const Dialog& anchor = s.corpus.dialogs[anchors[k]];
        Dialog synth = sampled[k].dialog;
        synth.provenance = json{{"anchor_id", anchor.id},
                                {"seed", seed},
                                {"model_hash", s.model_hash()}};
        AugmentationSample rec;
        rec.anchor_id = anchor.id;
        rec.synthetic_id = synth.id;
        rec.truncated = sampled[k].truncated;
        rec.novel = sampler_detail::dialogs_differ(anchor, synth);
        DialogValidity v = validate_dialog(synth, s.corpus.speakers);
        rec.valid = v.ok;
        novel += rec.novel;
        valid += rec.valid;

        // aligned user turns against the anchor
        const std::string& user = s.corpus.speakers.front();
        for (size_t t = 0; t < std::min(anchor.turns.size(), synth.turns.size()); ++t) {
            if (anchor.turns[t].speaker != user) continue;
            ++act_turns;
            act_match += (synth.turns[t].speaker == user &&
                          act_set_equal(synth.turns[t].state, anchor.turns[t].state));
        }
        for (const auto& turn : synth.turns)
            if (turn.speaker == user)
                for (const auto& a : turn.state) gen_triples.push_back(a);

        report.samples.push_back(std::move(rec));
        augmented.dialogs.push_back(std::move(synth));
    }

    // entropy of generated act triples w.r.t. the training distribution
    std::map<ActTriple, int64_t> counts;
    int64_t total = 0;
    for (const auto& d : s.corpus.dialogs)
        for (const auto& t : d.turns)
            if (t.speaker == s.corpus.speakers.front())
                for (const auto& a : t.state) {
                    ++counts[a];
                    ++total;
                }
    const double vsize = static_cast<double>(s.ontology.size());
    double ent = 0.0;
    for (const auto& a : gen_triples) {
        const auto it = counts.find(a);
        const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        ent += -std::log((c + 1.0) / (static_cast<double>(total) + vsize));
    }

    report.achieved_ratio = n ? static_cast<double>(n_synth) / static_cast<double>(n) : 0.0;
    report.novelty_rate = n_synth ? static_cast<double>(novel) / n_synth : 0.0;
    report.validity_rate = n_synth ? static_cast<double>(valid) / n_synth : 0.0;
    report.act_accuracy = act_turns ? static_cast<double>(act_match) / act_turns : 0.0;
    report.act_entropy = gen_triples.empty() ? 0.0 : ent / static_cast<double>(gen_triples.size());
    return {std::move(augmented), std::move(report)};
}

}  // namespace vhda
