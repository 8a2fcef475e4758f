#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "vhda/config.hpp"
#include "vhda/corpus.hpp"
#include "vhda/dropout.hpp"
#include "vhda/encoders.hpp"
#include "vhda/latent.hpp"
#include "vhda/nn.hpp"
#include "vhda/vocab.hpp"

namespace vhda {

// Token-id views of the ontology triples, precomputed once.
struct OntologyTokens {
    std::vector<std::array<int, 3>> tok_ids;

    static OntologyTokens build(const ActOntology& ont, const Vocabulary& vocab) {
        OntologyTokens ot;
        ot.tok_ids.reserve(ont.size());
        for (const auto& t : ont.triples)
            ot.tok_ids.push_back({vocab.id(t.act), vocab.id(t.slot), vocab.id(t.value)});
        return ot;
    }
};

// A dialog turned into ids. Goal and state are ontology indices in the
// order they will be fed to the set encoders.
struct TurnObs {
    int speaker = 0;
    std::vector<int> goal_ids;
    std::vector<int> state_ids;
    std::vector<int> utt;
    bool sentinel = false;
};

struct DialogObs {
    std::string id;
    std::vector<TurnObs> turns;
};

// The end-of-dialog sentinel continues speaker alternation and carries
// the end-of-dialog token as its sole utterance. It is appended for
// training only and never serialized.
inline DialogObs tensorize(const Dialog& d, const Vocabulary& vocab, const ActOntology& ont,
                           bool add_sentinel) {
    DialogObs obs;
    obs.id = d.id;
    for (const auto& t : d.turns) {
        TurnObs to;
        to.speaker = vocab.speaker_id(t.speaker);
        for (const auto& a : t.goal) {
            int idx = ont.index_of(a);
            if (idx >= 0) to.goal_ids.push_back(idx);
        }
        for (const auto& a : t.state) {
            int idx = ont.index_of(a);
            if (idx >= 0) to.state_ids.push_back(idx);
        }
        to.utt = vocab.encode(t.utterance);
        obs.turns.push_back(std::move(to));
    }
    if (add_sentinel && !obs.turns.empty()) {
        TurnObs s;
        s.speaker = 1 - (obs.turns.back().speaker % 2);
        if (vocab.n_speakers() == 1) s.speaker = 0;
        s.utt = {Vocabulary::kEod};
        s.sentinel = true;
        obs.turns.push_back(std::move(s));
    }
    return obs;
}

// Per-turn graph handles produced by the shared forward pass.
struct TurnNodes {
    const TurnObs* obs = nullptr;
    Ex spk_logits;                 // n_speakers x 1
    std::vector<Ex> goal_scores;   // logits per candidate (ontology order)
    std::vector<Ex> state_scores;  // logits per candidate
    std::vector<int> cand_ids;     // candidate ontology indices (full or sampled)
    std::vector<Ex> word_logits;   // one per decode step
    std::vector<int> word_targets;
    Ex kl_r, kl_g, kl_s, kl_u;
    GaussianEx q_r, q_g, q_s, q_u;
    GaussianEx p_r, p_g, p_s, p_u;
};

struct DialogNodes {
    GaussianEx q_c;
    Ex z_c;
    Ex kl_c;
    std::vector<TurnNodes> turns;
    Ex recon_speaker, recon_goal, recon_state, recon_utt;  // sums over turns
    Ex kl_r_sum, kl_g_sum, kl_s_sum, kl_u_sum;
    int n_words = 0;
};

struct ForwardOptions {
    bool sample_latents = true;                  // false: use posterior means
    const std::vector<double>* dropout = nullptr;  // null: no decoder-input dropout
    Rng* rng = nullptr;                          // required when sampling or dropping
};

// Thresholded set decoding over candidate logits: indices whose sigmoid
// score strictly exceeds the threshold. Lowering the threshold never
// removes a candidate.
inline std::vector<int> decode_act_set(const std::vector<double>& logits, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("decode_act_set: threshold outside [0,1]");
    std::vector<int> out;
    for (size_t i = 0; i < logits.size(); ++i)
        if (stable_sigmoid(logits[i]) > threshold) out.push_back(static_cast<int>(i));
    return out;
}

class VhdaModel {
public:
    ModelConfig cfg;
    ParamStore params;
    FeatureEncoders enc;
    LstmCell ctx_cell;
    Parameter* ctx_h0 = nullptr;
    Parameter* ctx_c0 = nullptr;
    GaussianHead prior_r, prior_g, prior_s, prior_u;
    GaussianHead post_c, post_r, post_g, post_s, post_u;
    Mlp dec_spk;
    Mlp goal_head;
    Mlp state_head;
    LstmCell udec;
    Linear udec_init;
    Linear udec_out;
    int vocab_size = 0;

    VhdaModel(const ModelConfig& config, int vocab_sz, uint64_t init_seed)
        : cfg(config), vocab_size(vocab_sz) {
        Rng rng(mix_seed(0x1017a11ULL, init_seed));
        const int kc = cfg.latent_global;
        const int kt = cfg.latent_turn;
        const int ctx = cfg.ctx_width;
        const int feat = cfg.feat_width;
        const double floor = cfg.sigma_floor;

        enc = FeatureEncoders(params, cfg, vocab_sz, rng);
        ctx_cell = LstmCell(params, "ctx.cell", cfg.spk_emb + 3 * feat, ctx, rng);
        ctx_h0 = &params.create_uniform("ctx.h0", ctx, 1, -0.1, 0.1, rng);
        ctx_c0 = &params.create_uniform("ctx.c0", ctx, 1, -0.1, 0.1, rng);

        prior_r = GaussianHead(params, "prior.r", ctx + kc, kt, floor, rng);
        prior_g = GaussianHead(params, "prior.g", ctx + kc + kt, kt, floor, rng);
        prior_s = GaussianHead(params, "prior.s", ctx + kc + 2 * kt, kt, floor, rng);
        prior_u = GaussianHead(params, "prior.u", ctx + kc + 3 * kt, kt, floor, rng);

        post_c = GaussianHead(params, "post.c", feat, kc, floor, rng);
        post_r = GaussianHead(params, "post.r", ctx + kc + cfg.spk_emb, kt, floor, rng);
        post_g = GaussianHead(params, "post.g", ctx + kc + kt + feat, kt, floor, rng);
        post_s = GaussianHead(params, "post.s", ctx + kc + 2 * kt + feat, kt, floor, rng);
        post_u = GaussianHead(params, "post.u", ctx + kc + 3 * kt + feat, kt, floor, rng);

        dec_spk = Mlp(params, "dec.spk", ctx + kc + kt, cfg.dec_hidden, cfg.n_speakers, rng);
        goal_head = Mlp(params, "dec.goal", ctx + kc + 2 * kt, cfg.act_width, cfg.act_width, rng);
        state_head = Mlp(params, "dec.state", ctx + kc + 3 * kt, cfg.act_width, cfg.act_width, rng);

        const int cond = ctx + kc + 4 * kt;
        udec = LstmCell(params, "dec.utt", cfg.word_emb + cond, cfg.dec_hidden, rng);
        udec_init = Linear(params, "dec.utt_init", cond, 2 * cfg.dec_hidden, rng);
        udec_out = Linear(params, "dec.utt_out", cfg.dec_hidden, vocab_sz, rng);
    }

    // One act vector per ontology triple; shared across a whole batch.
    std::vector<Ex> encode_ontology(Graph& g, Ex emb, const OntologyTokens& ont) const {
        std::vector<Ex> out;
        out.reserve(ont.tok_ids.size());
        for (const auto& ids : ont.tok_ids) out.push_back(enc.encode_act_tokens(g, emb, ids));
        return out;
    }

    Ex empty_act_vec(Graph& g, Ex emb) const {
        return enc.encode_act_tokens(
            g, emb, {Vocabulary::kEmptySet, Vocabulary::kEmptySet, Vocabulary::kEmptySet});
    }

    // Shared recognition + reconstruction pass over one dialog. All
    // latent-chain conditioning follows the generative order r->g->s->u
    // under the global latent.
    DialogNodes run_dialog(Graph& g, Ex emb, const std::vector<Ex>& ont_acts, Ex empty_act,
                           const DialogObs& d, const ForwardOptions& opt) const {
        if ((opt.sample_latents || opt.dropout) && opt.rng == nullptr)
            throw std::invalid_argument("run_dialog: rng required");
        DialogNodes out;
        const size_t T = d.turns.size();

        // Pass 1: infer q(z_c) from the linguistic features alone,
        // encoded with a null query.
        std::vector<Ex> utt_pass1(T);
        for (size_t t = 0; t < T; ++t)
            utt_pass1[t] = enc.encode_utterance(g, emb, d.turns[t].utt, Ex{});
        Ex conv = enc.conv.encode(g, utt_pass1);
        out.q_c = post_c(g, conv);
        out.z_c = opt.sample_latents ? sample_gaussian(g, out.q_c, *opt.rng) : out.q_c.mean;
        out.kl_c = gaussian_kl_std(g, out.q_c);

        // Pass 2: evidence encodings conditioned on the sampled global
        // latent via the attention query.
        std::vector<Ex> h_r(T), h_g(T), h_s(T), h_u(T);
        for (size_t t = 0; t < T; ++t) {
            const TurnObs& turn = d.turns[t];
            h_r[t] = enc.embed_speaker(g, turn.speaker);
            std::vector<Ex> gacts, sacts;
            for (int idx : turn.goal_ids) gacts.push_back(ont_acts[idx]);
            for (int idx : turn.state_ids) sacts.push_back(ont_acts[idx]);
            h_g[t] = enc.encode_act_set(g, enc.goal, gacts, empty_act, out.z_c);
            h_s[t] = enc.encode_act_set(g, enc.state, sacts, empty_act, out.z_c);
            h_u[t] = enc.encode_utterance(g, emb, turn.utt, out.z_c);
        }

        Ex zero = g.scalar_const(0.0);
        out.recon_speaker = zero;
        out.recon_goal = zero;
        out.recon_state = zero;
        out.recon_utt = zero;
        Ex kl_r_sum = zero, kl_g_sum = zero, kl_s_sum = zero, kl_u_sum = zero;

        LstmState ctx{g.param(*ctx_h0), g.param(*ctx_c0)};
        Ex v_zero = g.zeros(cfg.spk_emb + 3 * cfg.feat_width, 1);
        LstmState st = ctx_cell.step(g, v_zero, ctx);

        for (size_t t = 0; t < T; ++t) {
            const TurnObs& turn = d.turns[t];
            Ex h_t = st.h;
            TurnNodes tn;
            tn.obs = &turn;

            // posterior chain with cascading samples; priors evaluated at
            // the same samples
            tn.q_r = post_r(g, g.concat_rows({h_t, out.z_c, h_r[t]}));
            tn.p_r = prior_r(g, g.concat_rows({h_t, out.z_c}));
            Ex z_r = opt.sample_latents ? sample_gaussian(g, tn.q_r, *opt.rng) : tn.q_r.mean;
            tn.kl_r = gaussian_kl(g, tn.q_r, tn.p_r);

            tn.q_g = post_g(g, g.concat_rows({h_t, out.z_c, z_r, h_g[t]}));
            tn.p_g = prior_g(g, g.concat_rows({h_t, out.z_c, z_r}));
            Ex z_g = opt.sample_latents ? sample_gaussian(g, tn.q_g, *opt.rng) : tn.q_g.mean;
            tn.kl_g = gaussian_kl(g, tn.q_g, tn.p_g);

            tn.q_s = post_s(g, g.concat_rows({h_t, out.z_c, z_r, z_g, h_s[t]}));
            tn.p_s = prior_s(g, g.concat_rows({h_t, out.z_c, z_r, z_g}));
            Ex z_s = opt.sample_latents ? sample_gaussian(g, tn.q_s, *opt.rng) : tn.q_s.mean;
            tn.kl_s = gaussian_kl(g, tn.q_s, tn.p_s);

            tn.q_u = post_u(g, g.concat_rows({h_t, out.z_c, z_r, z_g, z_s, h_u[t]}));
            tn.p_u = prior_u(g, g.concat_rows({h_t, out.z_c, z_r, z_g, z_s}));
            Ex z_u = opt.sample_latents ? sample_gaussian(g, tn.q_u, *opt.rng) : tn.q_u.mean;
            tn.kl_u = gaussian_kl(g, tn.q_u, tn.p_u);

            kl_r_sum = kl_r_sum + tn.kl_r;
            kl_g_sum = kl_g_sum + tn.kl_g;
            kl_s_sum = kl_s_sum + tn.kl_s;
            kl_u_sum = kl_u_sum + tn.kl_u;

            // realization: speaker
            tn.spk_logits = dec_spk(g, g.concat_rows({h_t, out.z_c, z_r}));
            Ex spk_nll = -g.pick(log_softmax(tn.spk_logits), turn.speaker);
            out.recon_speaker = out.recon_speaker + spk_nll;

            // realization: goal and state as per-candidate binary scores
            Ex o_g = goal_head(g, g.concat_rows({h_t, out.z_c, z_r, z_g}));
            Ex o_s = state_head(g, g.concat_rows({h_t, out.z_c, z_r, z_g, z_s}));
            tn.cand_ids = candidate_ids(turn, static_cast<int>(ont_acts.size()), opt);
            Ex goal_bce = score_set(g, o_g, ont_acts, tn.cand_ids, turn.goal_ids, &tn.goal_scores);
            Ex state_bce = score_set(g, o_s, ont_acts, tn.cand_ids, turn.state_ids, &tn.state_scores);
            out.recon_goal = out.recon_goal + goal_bce;
            out.recon_state = out.recon_state + state_bce;

            // realization: utterance, teacher-forced
            TurnDropoutMask mask =
                opt.dropout ? draw_dropout_mask(*opt.dropout, turn.utt.size(), *opt.rng)
                            : no_dropout(turn.utt.size());
            Ex cond = g.concat_rows({h_t, out.z_c, z_r, z_g, z_s, z_u});
            Ex utt_nll = decode_utterance_tf(g, emb, cond, turn.utt, mask.drop_words, &tn);
            out.recon_utt = out.recon_utt + utt_nll;
            out.n_words += static_cast<int>(tn.word_targets.size());

            // context recurrence on (dropout-masked) realized features
            Ex f_r = mask.drop_speaker ? g.zeros(cfg.spk_emb, 1) : h_r[t];
            Ex f_g = mask.drop_goal ? g.zeros(cfg.feat_width, 1) : h_g[t];
            Ex f_s = mask.drop_state ? g.zeros(cfg.feat_width, 1) : h_s[t];
            Ex f_u = mask.drop_utterance ? g.zeros(cfg.feat_width, 1) : h_u[t];
            st = ctx_cell.step(g, g.concat_rows({f_r, f_g, f_s, f_u}), st);

            out.turns.push_back(std::move(tn));
        }

        out.kl_r_sum = kl_r_sum;
        out.kl_g_sum = kl_g_sum;
        out.kl_s_sum = kl_s_sum;
        out.kl_u_sum = kl_u_sum;
        return out;
    }

    // Greedy teacher-forced utterance decoding; returns the summed NLL.
    Ex decode_utterance_tf(Graph& g, Ex emb, Ex cond, const std::vector<int>& words,
                           const std::vector<bool>& drop_words, TurnNodes* tn) const {
        Ex init = udec_init(g, cond);
        LstmState s{tanh(g.slice_rows(init, 0, cfg.dec_hidden)),
                    g.slice_rows(init, cfg.dec_hidden, 2 * cfg.dec_hidden)};
        std::vector<int> inputs;
        inputs.push_back(Vocabulary::kBou);
        for (size_t i = 0; i < words.size(); ++i)
            inputs.push_back(drop_words[i] ? Vocabulary::kUnk : words[i]);
        std::vector<int> targets(words);
        targets.push_back(Vocabulary::kEou);

        Ex nll = g.scalar_const(0.0);
        for (size_t i = 0; i < inputs.size(); ++i) {
            Ex x = g.concat_rows({g.pick_row(emb, inputs[i]), cond});
            s = udec.step(g, x, s);
            Ex logits = udec_out(g, s.h);
            nll = nll + -g.pick(log_softmax(logits), targets[i]);
            if (tn) {
                tn->word_logits.push_back(logits);
                tn->word_targets.push_back(targets[i]);
            }
        }
        return nll;
    }

private:
    std::vector<int> candidate_ids(const TurnObs& turn, int n_ont,
                                   const ForwardOptions& opt) const {
        std::vector<int> ids;
        if (cfg.neg_samples <= 0 || opt.rng == nullptr) {
            ids.resize(n_ont);
            for (int i = 0; i < n_ont; ++i) ids[i] = i;
            return ids;
        }
        // positives plus k uniform negatives per positive
        std::set<int> chosen(turn.goal_ids.begin(), turn.goal_ids.end());
        chosen.insert(turn.state_ids.begin(), turn.state_ids.end());
        const int want = static_cast<int>(chosen.size()) * (1 + cfg.neg_samples) + cfg.neg_samples;
        int guard = 0;
        while (static_cast<int>(chosen.size()) < std::min(want, n_ont) && guard++ < 10 * n_ont)
            chosen.insert(opt.rng->uniform_int(n_ont));
        ids.assign(chosen.begin(), chosen.end());
        return ids;
    }

    Ex score_set(Graph& g, Ex o, const std::vector<Ex>& ont_acts, const std::vector<int>& cands,
                 const std::vector<int>& positives, std::vector<Ex>* scores_out) const {
        std::vector<Ex> scores;
        scores.reserve(cands.size());
        for (int idx : cands) scores.push_back(dot(o, ont_acts[idx]));
        if (scores_out) *scores_out = scores;
        Ex s = g.concat_rows(scores);
        Mat y(static_cast<int>(cands.size()), 1);
        for (size_t i = 0; i < cands.size(); ++i)
            y(static_cast<int>(i), 0) =
                std::find(positives.begin(), positives.end(), cands[i]) != positives.end() ? 1.0
                                                                                           : 0.0;
        // sum_j softplus(s_j) - y_j s_j  ==  -sum_j log p(y_j | s_j)
        return sum(softplus(s) - g.constant(std::move(y)) * s);
    }
};

}  // namespace vhda
