#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vhda/errors.hpp"
#include "vhda/rng.hpp"

namespace vhda {

using json = nlohmann::json;

// Smallest unit of dialog act annotation, serialized as act(slot=value).
struct ActTriple {
    std::string act;
    std::string slot;
    std::string value;

    auto operator<=>(const ActTriple&) const = default;

    std::string str() const { return act + "(" + slot + "=" + value + ")"; }

    static ActTriple parse(const std::string& s) {
        const auto lp = s.find('(');
        const auto eq = s.find('=', lp == std::string::npos ? 0 : lp);
        const auto rp = s.rfind(')');
        if (lp == std::string::npos || eq == std::string::npos || rp == std::string::npos ||
            !(lp < eq && eq < rp))
            throw ParseError("malformed act triple: " + s);
        return {s.substr(0, lp), s.substr(lp + 1, eq - lp - 1), s.substr(eq + 1, rp - eq - 1)};
    }
};

using ActSet = std::vector<ActTriple>;  // kept sorted and deduplicated

inline ActSet make_act_set(std::vector<ActTriple> triples) {
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    return triples;
}

inline bool act_set_equal(const ActSet& a, const ActSet& b) { return a == b; }

struct Turn {
    std::string speaker;
    ActSet goal;
    ActSet state;
    std::vector<std::string> utterance;
};

struct Dialog {
    std::string id;
    std::vector<Turn> turns;
    json provenance;  // empty unless synthetic
};

struct DialogCorpus {
    std::vector<Dialog> dialogs;
    std::vector<std::string> speakers = {"user", "wizard"};
    bool goal_consistent = false;

    size_t total_turns() const {
        size_t n = 0;
        for (const auto& d : dialogs) n += d.turns.size();
        return n;
    }
};

// Lowercase, then detach trailing ., ! ? , from word ends. The corpus
// exhibits are already space-tokenized, so this only has to normalize.
inline std::vector<std::string> tokenize(const std::string& text) {
    auto is_detachable = [](char c) { return c == '.' || c == ',' || c == '?' || c == '!'; };
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string raw;
    while (is >> raw) {
        std::string tok;
        tok.reserve(raw.size());
        for (char c : raw)
            tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        size_t end = tok.size();
        std::string tail;
        while (end > 1 && is_detachable(tok[end - 1])) tail.push_back(tok[--end]);
        out.push_back(tok.substr(0, end));
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) out.emplace_back(1, *it);
    }
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s.push_back(' ');
        s += toks[i];
    }
    return s;
}

// Goal accumulation: union of inform-type triples seen so far, where a
// later inform for an already-present slot replaces the old value.
inline ActSet accumulate_goal(const ActSet& prev_goal, const ActSet& state) {
    std::map<std::pair<std::string, std::string>, std::string> by_key;  // (act, slot) -> value
    for (const auto& t : prev_goal) by_key[{t.act, t.slot}] = t.value;
    for (const auto& t : state)
        if (t.act == "inform") by_key[{t.act, t.slot}] = t.value;
    std::vector<ActTriple> out;
    out.reserve(by_key.size());
    for (const auto& [key, value] : by_key) out.push_back({key.first, key.second, value});
    return make_act_set(std::move(out));
}

namespace detail {

inline ActSet parse_act_array(const json& arr, const std::string& where) {
    std::vector<ActTriple> ts;
    for (const auto& e : arr) {
        if (e.is_string()) {
            ts.push_back(ActTriple::parse(e.get<std::string>()));
        } else if (e.is_object()) {
            if (!e.contains("act") || !e.contains("slot") || !e.contains("value"))
                throw ParseError("act triple missing field in " + where);
            ts.push_back({e["act"].get<std::string>(), e["slot"].get<std::string>(),
                          e["value"].get<std::string>()});
        } else {
            throw ParseError("bad act triple entry in " + where);
        }
    }
    return make_act_set(std::move(ts));
}

inline Dialog parse_dialog_json(const json& jd, size_t index,
                                const std::vector<std::string>& speakers) {
    Dialog d;
    d.id = jd.contains("id") ? jd["id"].get<std::string>() : ("d" + std::to_string(index));
    if (!jd.contains("turns") || !jd["turns"].is_array())
        throw ParseError("dialog " + d.id + ": missing turns array");
    size_t ti = 0;
    for (const auto& jt : jd["turns"]) {
        const std::string where = "dialog " + d.id + " turn " + std::to_string(ti);
        Turn t;
        if (!jt.contains("speaker")) throw ParseError(where + ": missing speaker");
        t.speaker = jt["speaker"].get<std::string>();
        if (std::find(speakers.begin(), speakers.end(), t.speaker) == speakers.end())
            throw SchemaError(where + ": unknown speaker label '" + t.speaker + "'");
        if (!jt.contains("utterance")) throw ParseError(where + ": missing utterance");
        t.utterance = tokenize(jt["utterance"].get<std::string>());
        if (jt.contains("goal")) t.goal = parse_act_array(jt["goal"], where);
        if (jt.contains("state")) t.state = parse_act_array(jt["state"], where);
        d.turns.push_back(std::move(t));
        ++ti;
    }
    if (d.turns.empty()) throw ParseError("dialog " + d.id + ": no turns");
    if (jd.contains("provenance")) d.provenance = jd["provenance"];
    return d;
}

inline json dialog_to_json(const Dialog& d) {
    json jd;
    jd["id"] = d.id;
    jd["turns"] = json::array();
    for (const auto& t : d.turns) {
        json jt;
        jt["speaker"] = t.speaker;
        jt["utterance"] = join_tokens(t.utterance);
        json goal = json::array();
        for (const auto& a : t.goal)
            goal.push_back({{"act", a.act}, {"slot", a.slot}, {"value", a.value}});
        json state = json::array();
        for (const auto& a : t.state)
            state.push_back({{"act", a.act}, {"slot", a.slot}, {"value", a.value}});
        jt["goal"] = std::move(goal);
        jt["state"] = std::move(state);
        jd["turns"].push_back(std::move(jt));
    }
    if (!d.provenance.is_null()) jd["provenance"] = d.provenance;
    return jd;
}

}  // namespace detail

enum class CorpusFormat { WozJson, Jsonl };

inline DialogCorpus parse_corpus_json(const json& root) {
    DialogCorpus corpus;
    if (root.contains("speakers")) {
        corpus.speakers.clear();
        for (const auto& s : root["speakers"]) corpus.speakers.push_back(s.get<std::string>());
    }
    if (root.contains("goal_consistent")) corpus.goal_consistent = root["goal_consistent"].get<bool>();
    if (!root.contains("dialogs") || !root["dialogs"].is_array())
        throw ParseError("corpus: missing dialogs array");
    size_t i = 0;
    for (const auto& jd : root["dialogs"])
        corpus.dialogs.push_back(detail::parse_dialog_json(jd, i++, corpus.speakers));
    return corpus;
}

inline json corpus_to_json(const DialogCorpus& corpus) {
    json root;
    root["speakers"] = corpus.speakers;
    root["goal_consistent"] = corpus.goal_consistent;
    root["dialogs"] = json::array();
    for (const auto& d : corpus.dialogs) root["dialogs"].push_back(detail::dialog_to_json(d));
    return root;
}

inline void validate_goal_consistency(const DialogCorpus& corpus) {
    for (const auto& d : corpus.dialogs) {
        ActSet goal;
        for (size_t t = 0; t < d.turns.size(); ++t) {
            const Turn& turn = d.turns[t];
            if (turn.speaker != corpus.speakers.front()) continue;  // user turns only
            goal = accumulate_goal(goal, turn.state);
            if (!act_set_equal(goal, turn.goal))
                throw SchemaError("dialog " + d.id + " turn " + std::to_string(t) +
                                  ": goal is not the accumulation of prior informs");
        }
    }
}

inline DialogCorpus load_corpus(const std::string& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    DialogCorpus corpus;
    if (format == CorpusFormat::WozJson) {
        json root;
        try {
            in >> root;
        } catch (const json::exception& e) {
            throw ParseError("corpus " + path + ": " + e.what());
        }
        corpus = parse_corpus_json(root);
    } else {
        std::string line;
        size_t i = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json jd;
            try {
                jd = json::parse(line);
            } catch (const json::exception& e) {
                throw ParseError("corpus " + path + " line " + std::to_string(i) + ": " + e.what());
            }
            corpus.dialogs.push_back(detail::parse_dialog_json(jd, i++, corpus.speakers));
        }
    }
    if (corpus.goal_consistent) validate_goal_consistency(corpus);
    return corpus;
}

inline void save_corpus(const DialogCorpus& corpus, const std::string& path, CorpusFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    if (format == CorpusFormat::WozJson) {
        out << corpus_to_json(corpus).dump(2) << "\n";
    } else {
        for (const auto& d : corpus.dialogs) out << detail::dialog_to_json(d).dump() << "\n";
    }
}

inline bool corpus_equal(const DialogCorpus& a, const DialogCorpus& b) {
    if (a.dialogs.size() != b.dialogs.size()) return false;
    for (size_t i = 0; i < a.dialogs.size(); ++i) {
        const Dialog &da = a.dialogs[i], &db = b.dialogs[i];
        if (da.id != db.id || da.turns.size() != db.turns.size()) return false;
        for (size_t t = 0; t < da.turns.size(); ++t) {
            const Turn &ta = da.turns[t], &tb = db.turns[t];
            if (ta.speaker != tb.speaker || ta.utterance != tb.utterance ||
                !act_set_equal(ta.goal, tb.goal) || !act_set_equal(ta.state, tb.state))
                return false;
        }
    }
    return true;
}

// Training-time act-order randomization. Sets keep multiset equality;
// speaker and utterance are untouched.
inline Turn shuffle_act_order(const Turn& turn, Rng& rng) {
    Turn out = turn;
    rng.shuffle(out.goal);
    rng.shuffle(out.state);
    return out;
}

struct DialogValidity {
    bool ok = true;
    std::string reason;
};

inline DialogValidity validate_dialog(const Dialog& d, const std::vector<std::string>& speakers) {
    if (d.turns.empty()) return {false, "empty dialog"};
    for (size_t t = 0; t < d.turns.size(); ++t) {
        const Turn& turn = d.turns[t];
        if (std::find(speakers.begin(), speakers.end(), turn.speaker) == speakers.end())
            return {false, "turn " + std::to_string(t) + ": unknown speaker"};
        if (turn.utterance.empty())
            return {false, "turn " + std::to_string(t) + ": empty utterance"};
    }
    return {};
}

}  // namespace vhda
