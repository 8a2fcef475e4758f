#pragma once

#include <string>
#include <vector>

#include "vhda/metrics.hpp"
#include "vhda/model.hpp"
#include "vhda/nn.hpp"
#include "vhda/vocab.hpp"

namespace vhda {

// Downstream state tracker: a biLSTM utterance encoder with final-state
// pooling (no self-attention), a unidirectional context LSTM over turn
// representations, and per-candidate sigmoid scoring of ontology triples.
// Goals are derived from predicted informs by the accumulation rule.
struct TrackerConfig {
    int word_emb = 32;
    int utt_hidden = 48;
    int ctx_hidden = 48;
    int cand_dim = 48;
    double lr = 3e-3;
    int64_t steps = 600;
    int batch_size = 8;
    double clip_norm = 5.0;

    json to_json() const {
        return json{{"word_emb", word_emb},   {"utt_hidden", utt_hidden},
                    {"ctx_hidden", ctx_hidden}, {"cand_dim", cand_dim},
                    {"lr", lr},               {"steps", steps},
                    {"batch_size", batch_size}, {"clip_norm", clip_norm}};
    }
    static TrackerConfig from_json(const json& j) {
        TrackerConfig c;
        c.word_emb = j.value("word_emb", c.word_emb);
        c.utt_hidden = j.value("utt_hidden", c.utt_hidden);
        c.ctx_hidden = j.value("ctx_hidden", c.ctx_hidden);
        c.cand_dim = j.value("cand_dim", c.cand_dim);
        c.lr = j.value("lr", c.lr);
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        return c;
    }
};

class Tracker {
public:
    TrackerConfig cfg;
    Vocabulary vocab;
    ActOntology ontology;
    OntologyTokens ont_tokens;
    ParamStore params;
    Parameter* tok_emb = nullptr;
    LstmCell fwd, bwd, ctx;
    Linear cand_proj;   // 3*word_emb -> cand_dim
    Linear query_proj;  // ctx_hidden + 2*utt_hidden -> cand_dim
    std::string user_label = "user";

    Tracker(const DialogCorpus& corpus, const TrackerConfig& config, uint64_t seed)
        : cfg(config) {
        ontology = build_ontology(corpus);
        vocab = Vocabulary::build(corpus, ontology);
        ont_tokens = OntologyTokens::build(ontology, vocab);
        user_label = corpus.speakers.front();
        Rng rng(mix_seed(0x7dac4e5ULL, seed));
        tok_emb = &params.create_uniform("trk.emb", vocab.size(), cfg.word_emb, -0.1, 0.1, rng);
        fwd = LstmCell(params, "trk.fwd", cfg.word_emb, cfg.utt_hidden, rng);
        bwd = LstmCell(params, "trk.bwd", cfg.word_emb, cfg.utt_hidden, rng);
        ctx = LstmCell(params, "trk.ctx", 2 * cfg.utt_hidden, cfg.ctx_hidden, rng);
        cand_proj = Linear(params, "trk.cand", 3 * cfg.word_emb, cfg.cand_dim, rng);
        query_proj = Linear(params, "trk.query", cfg.ctx_hidden + 2 * cfg.utt_hidden,
                            cfg.cand_dim, rng);
    }

    Ex encode_utterance(Graph& g, Ex emb, const std::vector<int>& toks) const {
        std::vector<int> ids = toks.empty() ? std::vector<int>{Vocabulary::kUnk} : toks;
        LstmState f = fwd.zero_state(g);
        for (int id : ids) f = fwd.step(g, g.pick_row(emb, id), f);
        LstmState b = bwd.zero_state(g);
        for (size_t i = ids.size(); i-- > 0;) b = bwd.step(g, g.pick_row(emb, ids[i]), b);
        return g.concat_rows({f.h, b.h});
    }

    std::vector<Ex> candidate_vectors(Graph& g, Ex emb) const {
        std::vector<Ex> out;
        out.reserve(ont_tokens.tok_ids.size());
        for (const auto& ids : ont_tokens.tok_ids) {
            Ex cat = g.concat_rows(
                {g.pick_row(emb, ids[0]), g.pick_row(emb, ids[1]), g.pick_row(emb, ids[2])});
            out.push_back(cand_proj(g, cat));
        }
        return out;
    }

    // Per-user-turn candidate logits for one dialog.
    std::vector<std::vector<Ex>> score_dialog(Graph& g, Ex emb, const std::vector<Ex>& cands,
                                              const Dialog& d) const {
        std::vector<std::vector<Ex>> out;
        LstmState c = ctx.zero_state(g);
        for (const auto& turn : d.turns) {
            Ex utt = encode_utterance(g, emb, vocab.encode(turn.utterance));
            c = ctx.step(g, utt, c);
            if (turn.speaker != user_label) continue;
            Ex q = tanh(query_proj(g, g.concat_rows({c.h, utt})));
            std::vector<Ex> scores;
            scores.reserve(cands.size());
            for (const auto& cand : cands) scores.push_back(dot(q, cand));
            out.push_back(std::move(scores));
        }
        return out;
    }

    TrackerPrediction predict(const Dialog& d) const {
        Graph g;
        Ex emb = g.param(*tok_emb);
        std::vector<Ex> cands = candidate_vectors(g, emb);
        auto turn_scores = score_dialog(g, emb, cands, d);
        TrackerPrediction pred;
        ActSet goal;
        for (const auto& scores : turn_scores) {
            ActSet state;
            for (size_t i = 0; i < scores.size(); ++i)
                if (g.scalar(scores[i]) > 0.0) state.push_back(ontology.triples[i]);
            state = make_act_set(std::move(state));
            ActSet requests, informs;
            for (const auto& a : state) {
                if (a.act == "request") requests.push_back(a);
                if (a.act == "inform") informs.push_back(a);
            }
            goal = accumulate_goal(goal, state);
            pred.goals.push_back(goal);
            pred.requests.push_back(make_act_set(std::move(requests)));
            pred.informs.push_back(make_act_set(std::move(informs)));
        }
        return pred;
    }
};

inline Tracker train_tracker(const DialogCorpus& corpus, const TrackerConfig& cfg,
                             uint64_t seed) {
    Tracker trk(corpus, cfg, seed);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    acfg.clip_norm = cfg.clip_norm;
    Adam opt;

    const size_t n = corpus.dialogs.size();
    const int64_t steps_per_epoch =
        std::max<int64_t>(1, static_cast<int64_t>((n + cfg.batch_size - 1) / cfg.batch_size));

    // gold candidate targets per dialog, user turns only
    std::vector<std::vector<std::vector<int>>> gold;  // dialog -> user turn -> positive ids
    for (const auto& d : corpus.dialogs) {
        std::vector<std::vector<int>> per_turn;
        for (const auto& t : d.turns) {
            if (t.speaker != trk.user_label) continue;
            std::vector<int> pos;
            for (const auto& a : t.state) {
                int idx = trk.ontology.index_of(a);
                if (idx >= 0) pos.push_back(idx);
            }
            per_turn.push_back(std::move(pos));
        }
        gold.push_back(std::move(per_turn));
    }

    Graph g;
    for (int64_t step = 0; step < cfg.steps; ++step) {
        const int64_t epoch = step / steps_per_epoch;
        const int64_t pos = step % steps_per_epoch;
        std::vector<int> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
        Rng shuffle_rng(mix_seed(seed, 0x7C0E0000ULL + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(perm);

        g.clear();
        Ex emb = g.param(*trk.tok_emb);
        std::vector<Ex> cands = trk.candidate_vectors(g, emb);
        Ex loss = g.scalar_const(0.0);
        int count = 0;
        for (int64_t k = pos * cfg.batch_size;
             k < std::min<int64_t>((pos + 1) * cfg.batch_size, static_cast<int64_t>(n)); ++k) {
            const int di = perm[k];
            auto turn_scores = trk.score_dialog(g, emb, cands, corpus.dialogs[di]);
            for (size_t t = 0; t < turn_scores.size(); ++t) {
                Ex s = g.concat_rows(turn_scores[t]);
                Mat y(static_cast<int>(cands.size()), 1);
                for (int idx : gold[di][t]) y(idx, 0) = 1.0;
                loss = loss + sum(softplus(s) - g.constant(std::move(y)) * s);
            }
            ++count;
        }
        if (count == 0) continue;
        loss = g.scale(loss, 1.0 / count);
        trk.params.zero_grad();
        g.backward(loss);
        opt.step(trk.params, acfg);
    }
    return trk;
}

// Tracking metrics over a test corpus, user turns only.
inline MetricReport evaluate_tracker(const Tracker& trk, const DialogCorpus& test) {
    MetricReport rep;
    double goal_acc = 0.0, req_acc = 0.0, inf_acc = 0.0;
    size_t n_turns = 0, goal_ok = 0, req_ok = 0, inf_ok = 0;
    for (const auto& d : test.dialogs) {
        TrackerPrediction pred = trk.predict(d);
        std::vector<ActSet> gg = gold_goals(d, trk.user_label);
        std::vector<ActSet> gs = gold_states(d, trk.user_label);
        for (size_t t = 0; t < gg.size(); ++t) {
            ++n_turns;
            goal_ok += act_set_equal(pred.goals[t], gg[t]);
            req_ok += act_set_equal(pred.requests[t], metric_detail::filter_act(gs[t], "request"));
            inf_ok += act_set_equal(pred.informs[t], metric_detail::filter_act(gs[t], "inform"));
        }
    }
    if (n_turns) {
        goal_acc = static_cast<double>(goal_ok) / n_turns;
        req_acc = static_cast<double>(req_ok) / n_turns;
        inf_acc = static_cast<double>(inf_ok) / n_turns;
    }
    rep.joint_goal_acc = goal_acc;
    rep.request_acc = req_acc;
    rep.inform_acc = inf_acc;
    return rep;
}

}  // namespace vhda
