#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "vhda/sampler.hpp"
#include "vhda/tracker.hpp"

namespace vhda {

// Generative data augmentation protocol: several independent synthetic
// sets, each used to train the same tracker several times; aggregated
// against a multi-seed non-augmented baseline.
struct GdaOptions {
    int n_synthetic_sets = 3;
    int n_tracker_seeds = 3;
    int n_baseline_seeds = 10;
    double ratio = 1.0;
    uint64_t seed = 42;
    int workers = 1;
    TrackerConfig tracker;
};

struct GdaArm {
    std::vector<MetricReport> runs;

    MetricReport mean() const { return moment(false); }
    MetricReport stddev() const { return moment(true); }

    double median_goal() const {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.joint_goal_acc);
        std::sort(v.begin(), v.end());
        if (v.empty()) return 0.0;
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

private:
    MetricReport moment(bool dev) const {
        MetricReport m;
        if (runs.empty()) return m;
        auto agg = [&](auto getter) {
            double mu = 0.0;
            for (const auto& r : runs) mu += getter(r);
            mu /= static_cast<double>(runs.size());
            if (!dev) return mu;
            double var = 0.0;
            for (const auto& r : runs) {
                const double d = getter(r) - mu;
                var += d * d;
            }
            return std::sqrt(var / static_cast<double>(runs.size()));
        };
        m.joint_goal_acc = agg([](const MetricReport& r) { return r.joint_goal_acc; });
        m.request_acc = agg([](const MetricReport& r) { return r.request_acc; });
        m.inform_acc = agg([](const MetricReport& r) { return r.inform_acc; });
        return m;
    }
};

struct GdaComparison {
    GdaArm baseline;
    GdaArm augmented;
    std::vector<AugmentationReport> synth_reports;

    json to_json() const {
        auto arm_json = [](const GdaArm& a) {
            json runs = json::array();
            for (const auto& r : a.runs) runs.push_back(r.to_json());
            return json{{"runs", runs},
                        {"mean", a.mean().to_json()},
                        {"std", a.stddev().to_json()},
                        {"median_goal", a.median_goal()}};
        };
        json j{{"baseline", arm_json(baseline)}, {"augmented", arm_json(augmented)}};
        json sr = json::array();
        for (const auto& r : synth_reports) sr.push_back(r.to_json());
        j["synthetic_reports"] = sr;
        return j;
    }

    // goal / request / inform columns per arm, Table-1 style
    std::string to_tsv() const {
        std::ostringstream os;
        os << "gda\tmodel\tgoal\trequest\tinform\n";
        auto row = [&](const char* arm, const GdaArm& a) {
            const MetricReport mu = a.mean();
            const MetricReport sd = a.stddev();
            os << arm << "\tRNN\t";
            os.setf(std::ios::fixed);
            os.precision(3);
            os << mu.joint_goal_acc << "+-" << sd.joint_goal_acc << "\t"
               << mu.request_acc << "+-" << sd.request_acc << "\t"
               << mu.inform_acc << "+-" << sd.inform_acc << "\n";
        };
        row("-", baseline);
        row("VHDA", augmented);
        return os.str();
    }
};

inline uint64_t tracker_run_seed(uint64_t base, int run_index) {
    return mix_seed(base, 0x7C0B0000ULL + static_cast<uint64_t>(run_index));
}

// Baseline arm: n_baseline_seeds tracker runs on the original training
// corpus. Augmented arm: for each synthetic set (ratio-1 by default),
// n_tracker_seeds tracker runs. Equal run indices reuse equal tracker
// seeds, so a ratio-0 augmentation reproduces the baseline runs exactly.
inline GdaComparison evaluate_gda(const Session& trained, const DialogCorpus& test,
                                  const GdaOptions& opt) {
    GdaComparison cmp;
    for (int i = 0; i < opt.n_baseline_seeds; ++i) {
        Tracker trk = train_tracker(trained.corpus, opt.tracker, tracker_run_seed(opt.seed, i));
        cmp.baseline.runs.push_back(evaluate_tracker(trk, test));
    }
    for (int set = 0; set < opt.n_synthetic_sets; ++set) {
        auto [aug_corpus, report] =
            augment(trained, opt.ratio, mix_seed(opt.seed, 0xA6000000ULL + set), opt.workers);
        cmp.synth_reports.push_back(std::move(report));
        for (int k = 0; k < opt.n_tracker_seeds; ++k) {
            const int run_index = set * opt.n_tracker_seeds + k;
            Tracker trk =
                train_tracker(aug_corpus, opt.tracker, tracker_run_seed(opt.seed, run_index));
            cmp.augmented.runs.push_back(evaluate_tracker(trk, test));
        }
    }
    return cmp;
}

}  // namespace vhda
