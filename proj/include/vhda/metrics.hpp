#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vhda/corpus.hpp"

namespace vhda {

// Per-user-turn tracker outputs, aligned with the gold dialog's user turns.
struct TrackerPrediction {
    std::vector<ActSet> goals;     // accumulated goal set per user turn
    std::vector<ActSet> requests;  // request-type triples per user turn
    std::vector<ActSet> informs;   // inform-type triples per user turn
};

struct MetricReport {
    double joint_goal_acc = 0.0;
    double request_acc = 0.0;
    double inform_acc = 0.0;
    double rouge_l_f1 = 0.0;
    double unigram_xent = 0.0;

    json to_json() const {
        return json{{"joint_goal_acc", joint_goal_acc},
                    {"request_acc", request_acc},
                    {"inform_acc", inform_acc},
                    {"rouge_l_f1", rouge_l_f1},
                    {"unigram_xent", unigram_xent}};
    }
};

namespace metric_detail {

inline ActSet filter_act(const ActSet& s, const std::string& act) {
    ActSet out;
    for (const auto& a : s)
        if (a.act == act) out.push_back(a);
    return out;
}

}  // namespace metric_detail

// Fraction of user turns whose predicted goal set equals gold exactly.
inline double joint_goal_accuracy(const std::vector<ActSet>& pred,
                                  const std::vector<ActSet>& gold) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("joint_goal_accuracy: misaligned turn counts");
    if (pred.empty()) return 1.0;
    size_t ok = 0;
    for (size_t i = 0; i < pred.size(); ++i) ok += act_set_equal(pred[i], gold[i]);
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline double request_accuracy(const std::vector<ActSet>& pred, const std::vector<ActSet>& gold) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("request_accuracy: misaligned turn counts");
    if (pred.empty()) return 1.0;
    size_t ok = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        ok += act_set_equal(metric_detail::filter_act(pred[i], "request"),
                            metric_detail::filter_act(gold[i], "request"));
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline double inform_accuracy(const std::vector<ActSet>& pred, const std::vector<ActSet>& gold) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("inform_accuracy: misaligned turn counts");
    if (pred.empty()) return 1.0;
    size_t ok = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        ok += act_set_equal(metric_detail::filter_act(pred[i], "inform"),
                            metric_detail::filter_act(gold[i], "inform"));
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

// F1 from the longest common subsequence: P = LCS/|hyp|, R = LCS/|ref|.
inline double rouge_l_f1(const std::vector<std::string>& hyp,
                         const std::vector<std::string>& ref) {
    const size_t n = hyp.size(), m = ref.size();
    if (n == 0 || m == 0) return 0.0;
    std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (hyp[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[m]);
    const double p = lcs / static_cast<double>(n);
    const double r = lcs / static_cast<double>(m);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

// Additively smoothed unigram distribution of a training corpus, over the
// training vocabulary plus one unknown bucket.
struct UnigramModel {
    std::map<std::string, int64_t> counts;
    int64_t total = 0;
    double alpha = 1.0;

    static UnigramModel build(const DialogCorpus& corpus, double alpha = 1.0) {
        UnigramModel m;
        m.alpha = alpha;
        for (const auto& d : corpus.dialogs)
            for (const auto& t : d.turns)
                for (const auto& w : t.utterance) {
                    ++m.counts[w];
                    ++m.total;
                }
        return m;
    }

    // vocabulary size includes the unknown bucket
    double vocab_size() const { return static_cast<double>(counts.size()) + 1.0; }

    double log_prob(const std::string& w) const {
        auto it = counts.find(w);
        const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((c + alpha) / (static_cast<double>(total) + alpha * vocab_size()));
    }
};

// Mean over utterances of the mean per-token -ln p_train(w), in nats.
inline double unigram_cross_entropy(const std::vector<std::vector<std::string>>& utterances,
                                    const UnigramModel& train) {
    if (utterances.empty()) return 0.0;
    double acc = 0.0;
    size_t counted = 0;
    for (const auto& u : utterances) {
        if (u.empty()) continue;
        double s = 0.0;
        for (const auto& w : u) s += -train.log_prob(w);
        acc += s / static_cast<double>(u.size());
        ++counted;
    }
    return counted ? acc / static_cast<double>(counted) : 0.0;
}

// Gold per-user-turn annotation views of a dialog.
inline std::vector<ActSet> gold_goals(const Dialog& d, const std::string& user = "user") {
    std::vector<ActSet> out;
    for (const auto& t : d.turns)
        if (t.speaker == user) out.push_back(t.goal);
    return out;
}

inline std::vector<ActSet> gold_states(const Dialog& d, const std::string& user = "user") {
    std::vector<ActSet> out;
    for (const auto& t : d.turns)
        if (t.speaker == user) out.push_back(t.state);
    return out;
}

}  // namespace vhda
