#pragma once

#include <vector>

#include "vhda/errors.hpp"
#include "vhda/rng.hpp"

namespace vhda {

// Geometric dropout schedule p_k = base * ratio^k over the feature
// hierarchy [speaker, goal, state, utterance, word].
inline std::vector<double> dropout_schedule(double base, double ratio, int n_levels) {
    if (base <= 0.0 || base >= 1.0) throw ConfigError("dropout base must be in (0,1)");
    if (ratio < 1.0) throw ConfigError("dropout ratio must be >= 1");
    if (n_levels < 1) throw ConfigError("dropout schedule needs at least one level");
    std::vector<double> p(n_levels);
    double cur = base;
    for (int k = 0; k < n_levels; ++k) {
        if (cur >= 1.0) throw ConfigError("dropout schedule exceeds 1 at level " + std::to_string(k));
        p[k] = cur;
        cur *= ratio;
    }
    return p;
}

// Per-turn dropout decisions for the decoder-input path. Dropped feature
// encodings are replaced by zero vectors; dropped decoder-input words are
// replaced by the unknown token.
struct TurnDropoutMask {
    bool drop_speaker = false;
    bool drop_goal = false;
    bool drop_state = false;
    bool drop_utterance = false;
    std::vector<bool> drop_words;
};

inline TurnDropoutMask draw_dropout_mask(const std::vector<double>& schedule, size_t n_words,
                                         Rng& rng) {
    if (schedule.size() != 5) throw ConfigError("hierarchical dropout expects 5 levels");
    TurnDropoutMask m;
    m.drop_speaker = rng.bernoulli(schedule[0]);
    m.drop_goal = rng.bernoulli(schedule[1]);
    m.drop_state = rng.bernoulli(schedule[2]);
    m.drop_utterance = rng.bernoulli(schedule[3]);
    m.drop_words.resize(n_words);
    for (size_t i = 0; i < n_words; ++i) m.drop_words[i] = rng.bernoulli(schedule[4]);
    return m;
}

inline TurnDropoutMask no_dropout(size_t n_words) {
    TurnDropoutMask m;
    m.drop_words.assign(n_words, false);
    return m;
}

}  // namespace vhda
