#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vhda/corpus.hpp"
#include "vhda/errors.hpp"

namespace vhda {

// Candidate set for binary act classification: every triple observed in
// the corpus, in lexicographic order.
struct ActOntology {
    std::vector<ActTriple> triples;
    std::vector<std::string> acts, slots, values;

    int index_of(const ActTriple& t) const {
        auto it = std::lower_bound(triples.begin(), triples.end(), t);
        if (it == triples.end() || !(*it == t)) return -1;
        return static_cast<int>(it - triples.begin());
    }

    size_t size() const { return triples.size(); }

    json to_json() const {
        json j;
        j["acts"] = acts;
        j["slots"] = slots;
        j["values"] = values;
        j["triples"] = json::array();
        for (const auto& t : triples) j["triples"].push_back(t.str());
        return j;
    }
};

inline ActOntology build_ontology(const DialogCorpus& corpus) {
    if (corpus.dialogs.empty()) throw SchemaError("build_ontology: empty corpus");
    std::set<ActTriple> uniq;
    std::set<std::string> acts, slots, values;
    for (const auto& d : corpus.dialogs)
        for (const auto& t : d.turns) {
            for (const auto* s : {&t.goal, &t.state})
                for (const auto& a : *s) {
                    uniq.insert(a);
                    acts.insert(a.act);
                    slots.insert(a.slot);
                    values.insert(a.value);
                }
        }
    ActOntology ont;
    ont.triples.assign(uniq.begin(), uniq.end());
    ont.acts.assign(acts.begin(), acts.end());
    ont.slots.assign(slots.begin(), slots.end());
    ont.values.assign(values.begin(), values.end());
    return ont;
}

// Shared token table for utterance words and act/slot/value tokens.
// Reserved tokens occupy the lowest indices; the rest are sorted, so the
// mapping is independent of dialog order.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBou = 2;  // begin of utterance
    static constexpr int kEou = 3;  // end of utterance
    static constexpr int kEod = 4;  // end of dialog
    static constexpr int kEmptySet = 5;
    static constexpr int kNumReserved = 6;

    Vocabulary() {
        for (const char* t : {"<pad>", "<unk>", "<bou>", "<eou>", "<eod>", "<empty>"})
            push(t);
    }

    static Vocabulary build(const DialogCorpus& corpus, const ActOntology& ont) {
        Vocabulary v;
        std::set<std::string> toks;
        for (const auto& d : corpus.dialogs)
            for (const auto& t : d.turns)
                for (const auto& w : t.utterance) toks.insert(w);
        for (const auto& t : ont.triples) {
            toks.insert(t.act);
            toks.insert(t.slot);
            toks.insert(t.value);
        }
        for (const auto& t : toks)
            if (!v.index_.count(t)) v.push(t);
        v.speakers_ = corpus.speakers;
        return v;
    }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const { return tokens_.at(id); }
    int size() const { return static_cast<int>(tokens_.size()); }

    int speaker_id(const std::string& label) const {
        for (size_t i = 0; i < speakers_.size(); ++i)
            if (speakers_[i] == label) return static_cast<int>(i);
        throw SchemaError("unknown speaker label: " + label);
    }
    const std::string& speaker_label(int id) const { return speakers_.at(id); }
    int n_speakers() const { return static_cast<int>(speakers_.size()); }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) ids.push_back(id(t));
        return ids;
    }

    json to_json() const {
        json j;
        json m = json::object();
        for (size_t i = 0; i < tokens_.size(); ++i) m[tokens_[i]] = i;
        j["tokens"] = std::move(m);
        j["speakers"] = speakers_;
        return j;
    }

    uint64_t hash() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            h ^= 0xff;
            h *= 0x100000001b3ULL;
        };
        for (const auto& t : tokens_) feed(t);
        for (const auto& s : speakers_) feed(s);
        return h;
    }

private:
    void push(const std::string& t) {
        index_[t] = static_cast<int>(tokens_.size());
        tokens_.push_back(t);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> speakers_ = {"user", "wizard"};
};

inline uint64_t ontology_hash(const ActOntology& ont) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : ont.triples)
        for (unsigned char c : t.str()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    return h;
}

}  // namespace vhda
