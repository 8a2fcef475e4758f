#pragma once

#include <set>
#include <string>
#include <vector>

#include "vhda/corpus.hpp"
#include "vhda/errors.hpp"

namespace vhda {

// Deterministic request/inform grammar over a small closed ontology.
// User turns inform slot values and ask requests; the wizard answers.
// Goals accumulate inform-type acts with slot override.
struct ToySpec {
    int n_dialogs = 8;
    int n_slots = 3;
    int n_values = 4;
    int max_turns = 8;
    uint64_t seed = 0;
};

namespace toy_detail {

inline std::vector<std::string> slot_names(int n) {
    static const std::vector<std::string> base = {"food", "area",  "price", "name",
                                                  "day",  "stars", "time",  "type"};
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i)
        out.push_back(i < static_cast<int>(base.size()) ? base[i]
                                                        : "slot" + std::to_string(i));
    return out;
}

inline std::string value_name(const std::string& slot, int j) {
    return slot + std::to_string(j);
}

}  // namespace toy_detail

inline DialogCorpus generate_toy_corpus(const ToySpec& spec) {
    if (spec.n_dialogs < 1 || spec.n_slots < 1 || spec.n_values < 1 || spec.max_turns < 1)
        throw ConfigError("toy spec counts must be >= 1");
    const auto slots = toy_detail::slot_names(spec.n_slots);
    const std::string requestable_extra = "phone";

    Rng rng(mix_seed(0x7079c0e5ULL, spec.seed));
    DialogCorpus corpus;
    corpus.goal_consistent = true;

    for (int di = 0; di < spec.n_dialogs; ++di) {
        Dialog d;
        d.id = "toy" + std::to_string(di);

        // Plan: 1..min(3, n_slots) informed slots, round-robin start so the
        // corpus covers the whole slot/value grid; optionally one request.
        const int n_inform = 1 + rng.uniform_int(std::min(3, spec.n_slots));
        std::vector<int> slot_order(spec.n_slots);
        for (int i = 0; i < spec.n_slots; ++i) slot_order[i] = (di + i) % spec.n_slots;
        rng.shuffle(slot_order);
        std::vector<std::pair<std::string, std::string>> informs;
        for (int i = 0; i < n_inform; ++i) {
            const std::string& slot = slots[slot_order[i]];
            int j = (di + rng.uniform_int(spec.n_values)) % spec.n_values;
            informs.push_back({slot, toy_detail::value_name(slot, j)});
        }
        const bool with_request = rng.bernoulli(0.5);
        std::string req_slot;
        if (with_request)
            req_slot = rng.bernoulli(0.5) ? requestable_extra : slots[rng.uniform_int(spec.n_slots)];

        ActSet goal;
        std::vector<Turn> turns;
        size_t next_inform = 0;
        while (next_inform < informs.size()) {
            // user informs one or two pairs
            int take = 1;
            if (informs.size() - next_inform >= 2 && rng.bernoulli(0.5)) take = 2;
            Turn user;
            user.speaker = "user";
            std::vector<ActTriple> st;
            std::vector<std::string> toks = {"i", "want"};
            for (int k = 0; k < take; ++k) {
                const auto& [slot, value] = informs[next_inform + k];
                if (k > 0) toks.push_back("and");
                toks.push_back(slot);
                toks.push_back(value);
                st.push_back({"inform", slot, value});
            }
            toks.push_back("please");
            next_inform += take;
            user.utterance = toks;
            user.state = make_act_set(st);
            goal = accumulate_goal(goal, user.state);
            user.goal = goal;
            turns.push_back(std::move(user));

            Turn wiz;
            wiz.speaker = "wizard";
            const auto& [eslot, evalue] = informs[next_inform - 1];
            wiz.utterance = {"the", "place", "has", eslot, evalue, "."};
            turns.push_back(std::move(wiz));
        }
        if (with_request) {
            Turn user;
            user.speaker = "user";
            user.utterance = {"what", "is", "the", req_slot, "?"};
            user.state = make_act_set({{"request", "slot", req_slot}});
            user.goal = goal;
            turns.push_back(std::move(user));

            Turn wiz;
            wiz.speaker = "wizard";
            wiz.utterance = {"the", req_slot, "is", toy_detail::value_name(req_slot, 0), "."};
            turns.push_back(std::move(wiz));
        }
        Turn bye;
        bye.speaker = "user";
        bye.utterance = {"thank", "you", "goodbye", "."};
        bye.goal = goal;
        turns.push_back(std::move(bye));

        if (static_cast<int>(turns.size()) > spec.max_turns)
            turns.resize(spec.max_turns);
        d.turns = std::move(turns);
        corpus.dialogs.push_back(std::move(d));
    }
    return corpus;
}

// Independent enumeration of the triples the generator emits, for
// checking ontology construction against the generator.
inline std::set<ActTriple> toy_emitted_triples(const ToySpec& spec) {
    std::set<ActTriple> out;
    DialogCorpus c = generate_toy_corpus(spec);
    for (const auto& d : c.dialogs)
        for (const auto& t : d.turns) {
            for (const auto& a : t.goal) out.insert(a);
            for (const auto& a : t.state) out.insert(a);
        }
    return out;
}

}  // namespace vhda
