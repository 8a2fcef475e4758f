#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "fixtures.hpp"
#include "vhda/corpus.hpp"
#include "vhda/toy.hpp"
#include "vhda/vocab.hpp"

using namespace vhda;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("act triple parse and serialize") {
    ActTriple t = ActTriple::parse("inform(price range=cheap)");
    CHECK(t.act == "inform");
    CHECK(t.slot == "price range");
    CHECK(t.value == "cheap");
    CHECK(t.str() == "inform(price range=cheap)");
    CHECK_THROWS_AS(ActTriple::parse("garbage"), ParseError);
}

TEST_CASE("tokenize lowercases and detaches punctuation") {
    auto toks = tokenize("I want Cheap food.");
    CHECK(toks == std::vector<std::string>{"i", "want", "cheap", "food", "."});
    CHECK(tokenize("<place> 's number?") ==
          std::vector<std::string>{"<place>", "'s", "number", "?"});
    CHECK(tokenize("?") == std::vector<std::string>{"?"});
}

TEST_CASE("load single dialog round trip") {
    json root = {{"dialogs",
                  json::array({{{"id", "d0"},
                                {"turns", json::array({{{"speaker", "user"},
                                                        {"utterance", "hello there"}},
                                                       {{"speaker", "wizard"},
                                                        {"utterance", "hi ."}}})}}})}};
    const std::string path = temp_path("vhda_corpus_rt.json");
    {
        std::ofstream os(path);
        os << root.dump();
    }
    DialogCorpus c = load_corpus(path, CorpusFormat::WozJson);
    CHECK(c.dialogs.size() == 1);
    CHECK(c.total_turns() == 2);

    const std::string out = temp_path("vhda_corpus_rt2.json");
    save_corpus(c, out, CorpusFormat::WozJson);
    DialogCorpus c2 = load_corpus(out, CorpusFormat::WozJson);
    CHECK(corpus_equal(c, c2));

    const std::string jl = temp_path("vhda_corpus_rt3.jsonl");
    save_corpus(c, jl, CorpusFormat::Jsonl);
    DialogCorpus c3 = load_corpus(jl, CorpusFormat::Jsonl);
    CHECK(corpus_equal(c, c3));
}

TEST_CASE("interpolation exhibit parses with four goal-carrying user turns") {
    DialogCorpus c = testing::interpolation_corpus();
    REQUIRE(c.dialogs.size() == 1);
    const Dialog& d = c.dialogs[0];
    REQUIRE(d.turns.size() == 7);
    int user_with_goals = 0;
    for (const auto& t : d.turns)
        if (t.speaker == "user" && !t.goal.empty()) ++user_with_goals;
    CHECK(user_with_goals == 4);
    // goal accumulation holds for this exhibit
    validate_goal_consistency(c);
}

TEST_CASE("missing utterance is a parse error naming the turn") {
    json root = {{"dialogs", json::array({{{"id", "bad"},
                                           {"turns", json::array({{{"speaker", "user"}}})}}})}};
    const std::string path = temp_path("vhda_corpus_bad.json");
    {
        std::ofstream os(path);
        os << root.dump();
    }
    CHECK_THROWS_WITH_AS(load_corpus(path, CorpusFormat::WozJson),
                         doctest::Contains("turn 0"), ParseError);
}

TEST_CASE("unknown speaker label is a schema error") {
    json root = {{"speakers", json::array({"user", "wizard"})},
                 {"dialogs",
                  json::array({{{"turns", json::array({{{"speaker", "alien"},
                                                        {"utterance", "hi"}}})}}})}};
    const std::string path = temp_path("vhda_corpus_spk.json");
    {
        std::ofstream os(path);
        os << root.dump();
    }
    CHECK_THROWS_AS(load_corpus(path, CorpusFormat::WozJson), SchemaError);
}

TEST_CASE("goal accumulation overrides slot values") {
    ActSet goal;
    goal = accumulate_goal(goal, make_act_set({{"inform", "food", "thai"}}));
    CHECK(goal.size() == 1);
    goal = accumulate_goal(goal, make_act_set({{"inform", "food", "indian"},
                                               {"request", "slot", "phone"}}));
    REQUIRE(goal.size() == 1);
    CHECK(goal[0].value == "indian");  // replaced, requests ignored
    // idempotent
    ActSet again = accumulate_goal(goal, {});
    CHECK(act_set_equal(goal, again));
}

TEST_CASE("build_ontology dedupes and orders") {
    DialogCorpus c;
    Dialog d;
    d.id = "x";
    Turn t;
    t.speaker = "user";
    t.utterance = {"hi"};
    t.state = make_act_set({{"request", "slot", "phone"}, {"inform", "area", "north"}});
    t.goal = make_act_set({{"inform", "area", "north"}});
    d.turns.push_back(t);
    c.dialogs.push_back(d);
    c.dialogs.push_back(d);  // repeated content

    ActOntology ont = build_ontology(c);
    CHECK(ont.size() == 2);
    CHECK(ont.triples[0].act == "inform");
    CHECK(ont.index_of({"request", "slot", "phone"}) == 1);
    CHECK(ont.index_of({"inform", "food", "thai"}) == -1);

    // order independence: permuted corpus gives identical ontology
    DialogCorpus c2 = c;
    std::reverse(c2.dialogs.begin(), c2.dialogs.end());
    ActOntology ont2 = build_ontology(c2);
    CHECK(ont.triples == ont2.triples);
}

TEST_CASE("shuffle_act_order preserves the multiset") {
    Rng rng(3);
    Turn t;
    t.speaker = "user";
    t.utterance = {"hi"};
    SUBCASE("empty and singleton unchanged") {
        Turn p = shuffle_act_order(t, rng);
        CHECK(p.state.empty());
        t.goal = make_act_set({{"inform", "a", "b"}});
        Turn q = shuffle_act_order(t, rng);
        CHECK(act_set_equal(make_act_set(q.goal), t.goal));
    }
    SUBCASE("fixed seed gives a reproducible permutation") {
        t.goal = make_act_set({{"inform", "a", "1"}, {"inform", "b", "2"}, {"inform", "c", "3"}});
        Rng r1(99), r2(99);
        Turn p1 = shuffle_act_order(t, r1);
        Turn p2 = shuffle_act_order(t, r2);
        CHECK(p1.goal == p2.goal);
        // reference permutation pinned from the first run of seed 99
        REQUIRE(p1.goal.size() == 3);
        CHECK(p1.goal[0].slot == "c");
        CHECK(p1.goal[1].slot == "b");
        CHECK(p1.goal[2].slot == "a");
    }
    SUBCASE("property: multiset equality over random turns") {
        Rng gen(17);
        for (int trial = 0; trial < 50; ++trial) {
            Turn u;
            u.speaker = "user";
            u.utterance = {"x"};
            const int n = gen.uniform_int(6);
            std::vector<ActTriple> ts;
            for (int i = 0; i < n; ++i)
                ts.push_back({"inform", "s" + std::to_string(gen.uniform_int(4)),
                              "v" + std::to_string(gen.uniform_int(4))});
            u.state = make_act_set(ts);
            Turn perm = shuffle_act_order(u, gen);
            CHECK(act_set_equal(make_act_set(perm.state), u.state));
            CHECK(perm.utterance == u.utterance);
        }
    }
}

TEST_CASE("toy corpus determinism and schema") {
    ToySpec spec;
    spec.n_dialogs = 1;
    spec.n_slots = 1;
    spec.n_values = 1;
    spec.max_turns = 2;
    spec.seed = 0;
    DialogCorpus c = generate_toy_corpus(spec);
    CHECK(c.dialogs.size() == 1);
    CHECK(c.dialogs[0].turns.size() <= 2);

    DialogCorpus c2 = generate_toy_corpus(spec);
    CHECK(corpus_to_json(c).dump() == corpus_to_json(c2).dump());
}

TEST_CASE("toy corpus goals accumulate informs") {
    ToySpec spec;
    spec.n_dialogs = 8;
    spec.n_slots = 3;
    spec.n_values = 4;
    spec.max_turns = 8;
    spec.seed = 1;
    DialogCorpus c = generate_toy_corpus(spec);
    CHECK(c.dialogs.size() == 8);
    validate_goal_consistency(c);  // replays the accumulation rule

    for (const auto& d : c.dialogs) {
        auto v = validate_dialog(d, c.speakers);
        CHECK(v.ok);
    }
}

TEST_CASE("toy ontology matches the generator enumeration") {
    ToySpec spec;
    spec.seed = 7;
    DialogCorpus c = generate_toy_corpus(spec);
    ActOntology ont = build_ontology(c);
    auto declared = toy_emitted_triples(spec);
    CHECK(ont.size() == declared.size());
}

TEST_CASE("vocabulary reserves low indices and is stable") {
    ToySpec spec;
    DialogCorpus c = generate_toy_corpus(spec);
    ActOntology ont = build_ontology(c);
    Vocabulary v = Vocabulary::build(c, ont);
    CHECK(v.id("<pad>") == Vocabulary::kPad);
    CHECK(v.id("<unk>") == Vocabulary::kUnk);
    CHECK(v.token(Vocabulary::kEod) == "<eod>");
    CHECK(v.id("never-seen-token") == Vocabulary::kUnk);
    CHECK(v.speaker_id("user") == 0);
    CHECK(v.speaker_id("wizard") == 1);
    CHECK_THROWS_AS(v.speaker_id("alien"), SchemaError);

    Vocabulary v2 = Vocabulary::build(c, ont);
    CHECK(v.hash() == v2.hash());
    CHECK(v.size() == v2.size());

    // permuting dialogs leaves the mapping unchanged
    DialogCorpus cp = c;
    std::reverse(cp.dialogs.begin(), cp.dialogs.end());
    Vocabulary v3 = Vocabulary::build(cp, build_ontology(cp));
    CHECK(v.hash() == v3.hash());
}
