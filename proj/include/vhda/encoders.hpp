#pragma once

#include <array>
#include <string>
#include <vector>

#include "vhda/config.hpp"
#include "vhda/errors.hpp"
#include "vhda/nn.hpp"
#include "vhda/vocab.hpp"

namespace vhda {

// Self-attention over bidirectional LSTM outputs. The two directions are
// concatenated and projected back to the hidden width, and the attention
// can optionally be queried by one external vector per element.
struct SeqEncoder {
    LstmCell fwd;
    LstmCell bwd;
    Parameter* proj = nullptr;    // hid x 2hid
    Parameter* attn_w = nullptr;  // 1 x (hid + q_dim)
    Parameter* attn_b = nullptr;  // 1 x 1
    int hid = 0;
    int q_dim = 0;

    SeqEncoder() = default;
    SeqEncoder(ParamStore& ps, const std::string& name, int in, int hidden, int query_dim,
               Rng& rng)
        : fwd(ps, name + ".fwd", in, hidden, rng),
          bwd(ps, name + ".bwd", in, hidden, rng),
          hid(hidden),
          q_dim(query_dim) {
        proj = &ps.create_xavier(name + ".proj", hidden, 2 * hidden, rng);
        attn_w = &ps.create_xavier(name + ".attn_w", 1, hidden + query_dim, rng);
        attn_b = &ps.create(name + ".attn_b", 1, 1);
    }

    // xs: one column vector per element. qs: empty, or one query vector
    // per element (a single query may be broadcast by the caller).
    Ex encode(Graph& g, const std::vector<Ex>& xs, const std::vector<Ex>& qs = {}) const {
        const size_t n = xs.size();
        if (n == 0) throw std::invalid_argument("SeqEncoder: empty sequence");
        if (!qs.empty() && qs.size() != n)
            throw std::invalid_argument("SeqEncoder: query count mismatch");

        std::vector<Ex> hf(n), hb(n);
        LstmState sf = fwd.zero_state(g);
        for (size_t i = 0; i < n; ++i) {
            sf = fwd.step(g, xs[i], sf);
            hf[i] = sf.h;
        }
        LstmState sb = bwd.zero_state(g);
        for (size_t i = n; i-- > 0;) {
            sb = bwd.step(g, xs[i], sb);
            hb[i] = sb.h;
        }

        Ex pw = g.param(*proj);
        std::vector<Ex> hs(n);
        for (size_t i = 0; i < n; ++i)
            hs[i] = g.matmul(pw, g.concat_rows({hf[i], hb[i]}));

        Ex aw = g.param(*attn_w);
        Ex ab = g.param(*attn_b);
        std::vector<Ex> scores(n);
        for (size_t i = 0; i < n; ++i) {
            Ex in = hs[i];
            if (q_dim > 0) {
                Ex q = qs.empty() ? g.zeros(q_dim, 1) : qs[i];
                in = g.concat_rows({hs[i], q});
            }
            scores[i] = g.add(g.matmul(aw, in), ab);
        }
        Ex attn = softmax(g.concat_rows(scores));
        return g.matmul(g.hstack(hs), attn);
    }

    // Attention weights, for inspection and tests.
    Ex attention(Graph& g, const std::vector<Ex>& xs, const std::vector<Ex>& qs = {}) const {
        const size_t n = xs.size();
        if (n == 0) throw std::invalid_argument("SeqEncoder: empty sequence");
        std::vector<Ex> hf(n), hb(n);
        LstmState sf = fwd.zero_state(g);
        for (size_t i = 0; i < n; ++i) {
            sf = fwd.step(g, xs[i], sf);
            hf[i] = sf.h;
        }
        LstmState sb = bwd.zero_state(g);
        for (size_t i = n; i-- > 0;) {
            sb = bwd.step(g, xs[i], sb);
            hb[i] = sb.h;
        }
        Ex pw = g.param(*proj);
        Ex aw = g.param(*attn_w);
        Ex ab = g.param(*attn_b);
        std::vector<Ex> scores(n);
        for (size_t i = 0; i < n; ++i) {
            Ex h = g.matmul(pw, g.concat_rows({hf[i], hb[i]}));
            Ex in = h;
            if (q_dim > 0) {
                Ex q = qs.empty() ? g.zeros(q_dim, 1) : qs[i];
                in = g.concat_rows({h, q});
            }
            scores[i] = g.add(g.matmul(aw, in), ab);
        }
        return softmax(g.concat_rows(scores));
    }
};

// The five sequence encoders plus the speaker embedding matrix. The act
// encoder is query-free; the turn- and dialog-level encoders take the
// global latent as query.
struct FeatureEncoders {
    Parameter* tok_emb = nullptr;  // V x word_emb
    Parameter* spk_emb = nullptr;  // n_speakers x spk_emb
    SeqEncoder act;
    SeqEncoder goal;
    SeqEncoder state;
    SeqEncoder utt;
    SeqEncoder conv;

    FeatureEncoders() = default;
    FeatureEncoders(ParamStore& ps, const ModelConfig& cfg, int vocab_size, Rng& rng) {
        tok_emb = &ps.create_uniform("enc.tok_emb", vocab_size, cfg.word_emb, -0.1, 0.1, rng);
        spk_emb = &ps.create_uniform("enc.spk_emb", cfg.n_speakers, cfg.spk_emb, -0.1, 0.1, rng);
        act = SeqEncoder(ps, "enc.act", cfg.word_emb, cfg.act_width, 0, rng);
        goal = SeqEncoder(ps, "enc.goal", cfg.act_width, cfg.feat_width, cfg.latent_global, rng);
        state = SeqEncoder(ps, "enc.state", cfg.act_width, cfg.feat_width, cfg.latent_global, rng);
        utt = SeqEncoder(ps, "enc.utt", cfg.word_emb, cfg.feat_width, cfg.latent_global, rng);
        conv = SeqEncoder(ps, "enc.conv", cfg.feat_width, cfg.feat_width, cfg.latent_global, rng);
    }

    Ex embed_token(Graph& g, Ex emb_node, int token_id) const {
        return g.pick_row(emb_node, token_id);
    }

    Ex embed_speaker(Graph& g, int speaker_id) const {
        if (speaker_id < 0 || speaker_id >= spk_emb->value.rows)
            throw std::out_of_range("speaker id out of range");
        return g.pick_row(g.param(*spk_emb), speaker_id);
    }

    // Act triples are encoded as 3-token sequences [act, slot, value].
    Ex encode_act_tokens(Graph& g, Ex emb_node, const std::array<int, 3>& tok_ids) const {
        std::vector<Ex> xs;
        xs.reserve(3);
        for (int id : tok_ids) xs.push_back(g.pick_row(emb_node, id));
        return act.encode(g, xs);
    }

    // Encodes a set from precomputed act vectors; an empty set encodes the
    // reserved empty-set token. The global latent is broadcast as query.
    Ex encode_act_set(Graph& g, const SeqEncoder& set_enc, const std::vector<Ex>& act_vecs,
                      Ex empty_act_vec, Ex zc) const {
        const std::vector<Ex>& items =
            act_vecs.empty() ? std::vector<Ex>{empty_act_vec} : act_vecs;
        std::vector<Ex> qs;
        if (zc.valid()) qs.assign(items.size(), zc);
        return set_enc.encode(g, items, qs);
    }

    Ex encode_utterance(Graph& g, Ex emb_node, const std::vector<int>& token_ids, Ex zc) const {
        if (token_ids.empty()) throw std::invalid_argument("empty utterance");
        std::vector<Ex> xs;
        xs.reserve(token_ids.size());
        for (int id : token_ids) xs.push_back(g.pick_row(emb_node, id));
        std::vector<Ex> qs;
        if (zc.valid()) qs.assign(xs.size(), zc);
        return utt.encode(g, xs, qs);
    }
};

}  // namespace vhda
