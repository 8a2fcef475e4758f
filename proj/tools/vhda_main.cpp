#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "vhda/gda.hpp"
#include "vhda/manifest.hpp"
#include "vhda/sampler.hpp"
#include "vhda/toy.hpp"
#include "vhda/tracker.hpp"
#include "vhda/trainer.hpp"

namespace fs = std::filesystem;
using namespace vhda;

namespace {

// Tracks files created by a subcommand so partial outputs can be removed
// when the command fails.
struct OutputTracker {
    std::vector<std::string> created;

    std::string claim(const std::string& path) {
        created.push_back(path);
        return path;
    }
    void discard_all() {
        for (const auto& p : created) {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    }
};

CorpusFormat format_of(const std::string& path, const std::string& flag) {
    if (flag == "jsonl") return CorpusFormat::Jsonl;
    if (flag == "json") return CorpusFormat::WozJson;
    return path.ends_with(".jsonl") ? CorpusFormat::Jsonl : CorpusFormat::WozJson;
}

DialogCorpus load_any(const std::string& path) {
    return load_corpus(path, format_of(path, ""));
}

// A trained model directory is self-contained: resolved config, the
// training corpus, vocab/ontology dumps, and the final checkpoint.
Session load_session(const std::string& model_dir) {
    std::ifstream cfg_in(fs::path(model_dir) / "config.json");
    if (!cfg_in) throw ConfigError("no config.json in model dir: " + model_dir);
    json cfg_json;
    cfg_in >> cfg_json;
    RunConfig rc = RunConfig::from_json(cfg_json);
    DialogCorpus corpus = load_corpus((fs::path(model_dir) / "train_corpus.json").string(),
                                      CorpusFormat::WozJson);
    Session s = Session::create(std::move(corpus), rc);
    const uint64_t ch = s.effective_config_hash();
    const uint64_t vh = s.vocab.hash();
    const uint64_t oh = ontology_hash(s.ontology);
    load_checkpoint((fs::path(model_dir) / "final").string(), s.model.params, &s.opt, &ch, &vh,
                    &oh);
    return s;
}

void save_corpus_to(const DialogCorpus& c, const std::string& path) {
    save_corpus(c, path, format_of(path, ""));
}

int run_train_like(const std::string& corpus_path, const std::string& config_path,
                   const std::string& preset, const std::string& out_dir, int64_t steps_override,
                   uint64_t seed_override, bool seed_set, bool diagnose_mode, double mi_weight,
                   bool no_dropout, bool no_anneal, OutputTracker& outs) {
    RunConfig rc = load_run_config(config_path, preset);
    if (steps_override >= 0) rc.train.max_steps = steps_override;
    if (seed_set) rc.train.seed = seed_override;
    if (diagnose_mode) {
        rc.train.mi_weight = mi_weight;
        if (no_dropout) rc.train.hierarchical_dropout = false;
        if (no_anneal) rc.train.anneal_enabled = false;
    }

    RunManifest manifest;
    manifest.command = diagnose_mode ? "diagnose" : "train";
    manifest.config_path = config_path;
    manifest.config_hash = config_hash(rc);
    manifest.seed = rc.train.seed;
    manifest.inputs = {corpus_path};
    manifest.started_at = iso_timestamp();

    DialogCorpus corpus = load_any(corpus_path);
    Session s = Session::create(std::move(corpus), rc);

    fs::create_directories(out_dir);
    {
        std::ofstream os(outs.claim(out_dir + "/config.json"));
        os << s.cfg.to_json().dump(2) << "\n";
    }
    save_corpus(s.corpus, outs.claim(out_dir + "/train_corpus.json"), CorpusFormat::WozJson);
    {
        std::ofstream os(outs.claim(out_dir + "/vocab.json"));
        os << s.vocab.to_json().dump(2) << "\n";
    }
    {
        std::ofstream os(outs.claim(out_dir + "/ontology.json"));
        os << s.ontology.to_json().dump(2) << "\n";
    }

    outs.claim(out_dir + "/final");
    outs.claim(out_dir + "/train_log.jsonl");
    TrainResult result = train(s, out_dir);

    std::vector<std::string> outputs = {out_dir + "/train_log.jsonl", out_dir + "/config.json",
                                        out_dir + "/train_corpus.json"};
    if (diagnose_mode) {
        const std::string csv = outs.claim(out_dir + "/diagnose.csv");
        std::ofstream os(csv);
        os << "step,total,recon_total,kl_total,kl_c,anneal_weight,mi_estimate,"
              "agg_posterior_kl,mi_probe,decomp_residual\n";
        for (const auto& rec : result.log.steps) {
            os << rec.step << "," << rec.loss.total << "," << rec.loss.recon_total() << ","
               << rec.loss.kl_total << "," << rec.loss.kl_per_level.at("c") << ","
               << rec.loss.anneal_weight << "," << rec.loss.mi_estimate << ","
               << rec.decomp.aggregate_posterior_kl << "," << rec.decomp.mi_estimate << ","
               << rec.decomp.residual << "\n";
        }
        outputs.push_back(csv);
    }
    manifest.outputs = outputs;
    write_manifest(out_dir, manifest);
    std::cout << "trained " << result.meta.step << " steps -> " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"variational hierarchical dialog autoencoder"};
    app.require_subcommand(1);

    std::string out_dir, config_path, preset = "toy", corpus_path, model_dir, test_path;
    uint64_t seed = 0;
    bool seed_set = false;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "run seed")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    auto* gen = app.add_subcommand("gen-toy", "generate a deterministic toy corpus");
    ToySpec toy_spec;
    std::string gen_format = "json";
    gen->add_option("--dialogs", toy_spec.n_dialogs, "number of dialogs");
    gen->add_option("--slots", toy_spec.n_slots, "number of informable slots");
    gen->add_option("--values", toy_spec.n_values, "values per slot");
    gen->add_option("--max-turns", toy_spec.max_turns, "turn cap per dialog");
    gen->add_option("--format", gen_format, "json or jsonl");
    gen->add_option("--out", out_dir, "output directory")->required();
    add_seed(gen);

    auto* tr = app.add_subcommand("train", "train the generative model");
    int64_t steps_override = -1;
    tr->add_option("--corpus", corpus_path, "training corpus path")->required();
    tr->add_option("--config", config_path, "config JSON path");
    tr->add_option("--preset", preset, "toy or paper");
    tr->add_option("--steps", steps_override, "override max steps");
    tr->add_option("--out", out_dir, "output directory")->required();
    add_seed(tr);

    auto* sa = app.add_subcommand("sample", "posterior-sample synthetic dialogs");
    int n_samples = 1;
    bool stochastic_priors = false;
    int max_turns = 20;
    sa->add_option("--model", model_dir, "trained model directory")->required();
    sa->add_option("--n", n_samples, "number of samples");
    sa->add_flag("--stochastic-priors", stochastic_priors, "sample turn latents instead of means");
    sa->add_option("--max-turns", max_turns, "decoding turn cap");
    sa->add_option("--out", out_dir, "output directory")->required();
    add_seed(sa);

    auto* au = app.add_subcommand("augment", "emit an augmented corpus");
    double ratio = 1.0;
    int workers = 1;
    au->add_option("--model", model_dir, "trained model directory")->required();
    au->add_option("--ratio", ratio, "synthetic-to-original ratio");
    au->add_option("--workers", workers, "sampler workers");
    au->add_option("--out", out_dir, "output directory")->required();
    add_seed(au);

    auto* in = app.add_subcommand("interpolate", "decode dialogs between two anchors");
    std::string anchor1, anchor2;
    int n_points = 1;
    bool endpoints = false;
    in->add_option("--model", model_dir, "trained model directory")->required();
    in->add_option("--anchor1", anchor1, "first anchor dialog id")->required();
    in->add_option("--anchor2", anchor2, "second anchor dialog id")->required();
    in->add_option("--n", n_points, "number of interior points");
    in->add_flag("--endpoints", endpoints, "also decode both endpoints");
    in->add_option("--out", out_dir, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "annotation/language metrics of a corpus pair");
    std::string hyp_path, ref_path, train_path;
    ev->add_option("--hyp", hyp_path, "hypothesis corpus")->required();
    ev->add_option("--ref", ref_path, "reference corpus")->required();
    ev->add_option("--train", train_path, "training corpus for the unigram model");
    ev->add_option("--out", out_dir, "output directory")->required();

    auto* gd = app.add_subcommand("gda-eval", "augmentation-vs-baseline tracker comparison");
    GdaOptions gda_opt;
    std::string tracker_config_path;
    gd->add_option("--model", model_dir, "trained model directory")->required();
    gd->add_option("--test", test_path, "held-out test corpus")->required();
    gd->add_option("--ratio", gda_opt.ratio, "augmentation ratio");
    gd->add_option("--synthetic-sets", gda_opt.n_synthetic_sets, "independent synthetic sets");
    gd->add_option("--tracker-seeds", gda_opt.n_tracker_seeds, "tracker seeds per set");
    gd->add_option("--baseline-seeds", gda_opt.n_baseline_seeds, "baseline tracker seeds");
    gd->add_option("--tracker-steps", gda_opt.tracker.steps, "tracker training steps");
    gd->add_option("--tracker-config", tracker_config_path, "tracker config JSON");
    gd->add_option("--workers", gda_opt.workers, "sampler workers");
    gd->add_option("--out", out_dir, "output directory")->required();
    add_seed(gd);

    auto* di = app.add_subcommand("diagnose", "per-step KL/MI decomposition trace");
    double mi_weight = 1.0;
    bool no_dropout = false, no_anneal = false;
    di->add_option("--corpus", corpus_path, "training corpus path")->required();
    di->add_option("--config", config_path, "config JSON path");
    di->add_option("--preset", preset, "toy or paper");
    di->add_option("--steps", steps_override, "override max steps");
    di->add_option("--mi-weight", mi_weight, "mutual-information weight");
    di->add_flag("--no-dropout", no_dropout, "disable hierarchical dropout");
    di->add_flag("--no-anneal", no_anneal, "disable KL annealing (weight 1)");
    di->add_option("--out", out_dir, "output directory")->required();
    add_seed(di);

    CLI11_PARSE(app, argc, argv);

    OutputTracker outs;
    try {
        if (*gen) {
            if (seed_set) toy_spec.seed = seed;
            RunManifest m;
            m.command = "gen-toy";
            m.seed = toy_spec.seed;
            m.started_at = iso_timestamp();
            DialogCorpus c = generate_toy_corpus(toy_spec);
            fs::create_directories(out_dir);
            const std::string file =
                out_dir + (gen_format == "jsonl" ? "/corpus.jsonl" : "/corpus.json");
            save_corpus(c, outs.claim(file),
                        gen_format == "jsonl" ? CorpusFormat::Jsonl : CorpusFormat::WozJson);
            m.outputs = {file};
            write_manifest(out_dir, m);
            std::cout << "wrote " << c.dialogs.size() << " dialogs -> " << file << "\n";
        } else if (*tr) {
            return run_train_like(corpus_path, config_path, preset, out_dir, steps_override,
                                  seed, seed_set, false, 1.0, false, false, outs);
        } else if (*di) {
            return run_train_like(corpus_path, config_path, preset, out_dir, steps_override,
                                  seed, seed_set, true, mi_weight, no_dropout, no_anneal, outs);
        } else if (*sa) {
            Session s = load_session(model_dir);
            RunManifest m;
            m.command = "sample";
            m.seed = seed;
            m.inputs = {model_dir};
            m.started_at = iso_timestamp();
            SampleOptions opt;
            opt.max_turns = max_turns;
            opt.stochastic_priors = stochastic_priors;
            fs::create_directories(out_dir);
            DialogCorpus synth;
            synth.speakers = s.corpus.speakers;
            Rng anchor_rng(mix_seed(seed, 0xA0C480ULL));
            for (int k = 0; k < n_samples; ++k) {
                const int a = anchor_rng.uniform_int(static_cast<int>(s.obs.size()));
                Rng rng(mix_seed(seed, 0x5A3B1E00ULL + static_cast<uint64_t>(k)));
                SampledDialog d = posterior_sample(s, s.obs[a], rng, opt,
                                                   s.corpus.dialogs[a].id + "-syn" +
                                                       std::to_string(k));
                d.dialog.provenance = json{{"anchor_id", s.corpus.dialogs[a].id},
                                           {"seed", seed},
                                           {"model_hash", s.model_hash()}};
                synth.dialogs.push_back(std::move(d.dialog));
            }
            const std::string file = outs.claim(out_dir + "/samples.jsonl");
            save_corpus(synth, file, CorpusFormat::Jsonl);
            m.outputs = {file};
            write_manifest(out_dir, m);
            std::cout << "wrote " << synth.dialogs.size() << " samples -> " << file << "\n";
        } else if (*au) {
            Session s = load_session(model_dir);
            RunManifest m;
            m.command = "augment";
            m.seed = seed;
            m.inputs = {model_dir};
            m.started_at = iso_timestamp();
            auto [aug, report] = augment(s, ratio, seed, workers);
            fs::create_directories(out_dir);
            const std::string cf = outs.claim(out_dir + "/augmented.json");
            save_corpus_to(aug, cf);
            const std::string rf = outs.claim(out_dir + "/augmentation_report.json");
            {
                std::ofstream os(rf);
                os << report.to_json().dump(2) << "\n";
            }
            m.outputs = {cf, rf};
            write_manifest(out_dir, m);
            std::cout << "augmented " << s.corpus.dialogs.size() << " -> " << aug.dialogs.size()
                      << " dialogs (validity " << report.validity_rate << ")\n";
        } else if (*in) {
            Session s = load_session(model_dir);
            RunManifest m;
            m.command = "interpolate";
            m.inputs = {model_dir};
            m.started_at = iso_timestamp();
            auto find_obs = [&](const std::string& id) -> const DialogObs& {
                for (size_t i = 0; i < s.corpus.dialogs.size(); ++i)
                    if (s.corpus.dialogs[i].id == id) return s.obs[i];
                throw ConfigError("anchor dialog not found: " + id);
            };
            auto ds = interpolate(s, find_obs(anchor1), find_obs(anchor2), n_points, endpoints);
            DialogCorpus out_c;
            out_c.speakers = s.corpus.speakers;
            for (auto& d : ds) out_c.dialogs.push_back(std::move(d.dialog));
            fs::create_directories(out_dir);
            const std::string file = outs.claim(out_dir + "/interpolations.jsonl");
            save_corpus(out_c, file, CorpusFormat::Jsonl);
            m.outputs = {file};
            write_manifest(out_dir, m);
            std::cout << "wrote " << out_c.dialogs.size() << " interpolated dialogs -> " << file
                      << "\n";
        } else if (*ev) {
            RunManifest m;
            m.command = "evaluate";
            m.inputs = {hyp_path, ref_path};
            m.started_at = iso_timestamp();
            DialogCorpus hyp = load_any(hyp_path);
            DialogCorpus ref = load_any(ref_path);
            DialogCorpus trainc = train_path.empty() ? ref : load_any(train_path);
            if (hyp.dialogs.size() != ref.dialogs.size())
                throw SchemaError("evaluate: corpus sizes differ");

            MetricReport rep;
            std::vector<ActSet> pg, gg, ps, gs;
            double rouge = 0.0;
            size_t rouge_n = 0;
            std::vector<std::vector<std::string>> hyp_utts;
            const std::string user = ref.speakers.front();
            for (size_t i = 0; i < ref.dialogs.size(); ++i) {
                const Dialog& h = hyp.dialogs[i];
                const Dialog& r = ref.dialogs[i];
                for (size_t t = 0; t < std::min(h.turns.size(), r.turns.size()); ++t) {
                    rouge += rouge_l_f1(h.turns[t].utterance, r.turns[t].utterance);
                    ++rouge_n;
                }
                for (const auto& t : h.turns) {
                    hyp_utts.push_back(t.utterance);
                    if (t.speaker == user) {
                        pg.push_back(t.goal);
                        ps.push_back(t.state);
                    }
                }
                for (const auto& t : r.turns)
                    if (t.speaker == user) {
                        gg.push_back(t.goal);
                        gs.push_back(t.state);
                    }
            }
            if (pg.size() == gg.size()) {
                rep.joint_goal_acc = joint_goal_accuracy(pg, gg);
                rep.request_acc = request_accuracy(ps, gs);
                rep.inform_acc = inform_accuracy(ps, gs);
            }
            rep.rouge_l_f1 = rouge_n ? rouge / rouge_n : 0.0;
            rep.unigram_xent = unigram_cross_entropy(hyp_utts, UnigramModel::build(trainc));
            fs::create_directories(out_dir);
            const std::string file = outs.claim(out_dir + "/metrics.json");
            {
                std::ofstream os(file);
                os << rep.to_json().dump(2) << "\n";
            }
            m.outputs = {file};
            write_manifest(out_dir, m);
            std::cout << rep.to_json().dump(2) << "\n";
        } else if (*gd) {
            Session s = load_session(model_dir);
            RunManifest m;
            m.command = "gda-eval";
            m.seed = seed;
            m.inputs = {model_dir, test_path};
            m.started_at = iso_timestamp();
            if (seed_set) gda_opt.seed = seed;
            if (!tracker_config_path.empty()) {
                std::ifstream is(tracker_config_path);
                if (!is) throw ConfigError("cannot open tracker config: " + tracker_config_path);
                json j;
                is >> j;
                gda_opt.tracker = TrackerConfig::from_json(j);
            }
            DialogCorpus test = load_any(test_path);
            GdaComparison cmp = evaluate_gda(s, test, gda_opt);
            fs::create_directories(out_dir);
            const std::string jf = outs.claim(out_dir + "/gda.json");
            {
                std::ofstream os(jf);
                os << cmp.to_json().dump(2) << "\n";
            }
            const std::string tf = outs.claim(out_dir + "/gda.tsv");
            {
                std::ofstream os(tf);
                os << cmp.to_tsv();
            }
            m.outputs = {jf, tf};
            write_manifest(out_dir, m);
            std::cout << cmp.to_tsv();
        }
    } catch (const std::exception& e) {
        outs.discard_all();
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
