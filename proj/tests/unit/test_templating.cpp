#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "silicon/templating.hpp"

using namespace silicon;

namespace {

const char* kCodebook = R"({"variables": [
  {"name": "party", "levels": [["1", "Dem"], ["2", "Ind"], ["3", "Rep"]], "missing_codes": ["-9"]},
  {"name": "age", "kind": "integer", "min": 18, "max": 120, "missing_codes": ["-9"]},
  {"name": "state", "kind": "free_text", "missing_codes": ["-9"]},
  {"name": "voted", "levels": [["1", "yes"], ["0", "no"]], "missing_codes": ["-9"]},
  {"name": "choice", "levels": [["0", "none"], ["1", "A"], ["2", "B"]], "missing_codes": ["-9"]}
]})";

const char* kTemplate = R"({"name": "t", "fragments": [
  {"id": "party", "variable": "party", "text": "Politically, I am {value}.",
   "map": {"1": "a Democrat", "2": "an independent", "3": "a Republican"}},
  {"id": "age", "variable": "age", "text": "I am {value}.",
   "bins": [{"min": 18, "max": 24, "phrase": "young"}, {"min": 25, "max": 60, "phrase": "middle-aged"},
            {"min": 61, "phrase": "very old"}]},
  {"id": "state", "variable": "state", "text": "I live in {value}."},
  {"id": "note", "text": "I am a person."}
], "suffix": "About the {target} Party:"})";

SurveyDataset people(const std::string& rows) {
    auto dir = oracle::fresh_dir("tmpl");
    oracle::write_file(dir / "d.csv", "respondent_id,party,age,state,voted,choice\n" + rows);
    return load_dataset(dir / "d.csv", parse_codebook(kCodebook));
}

InterviewScript script() {
    return parse_script(R"({"items": [
      {"variable": "party", "question": "Party?", "options": [{"surface": "dem", "code": "1"},
        {"surface": "ind", "code": "2"}, {"surface": "rep", "code": "3"}]},
      {"variable": "age", "question": "Age?"},
      {"variable": "voted", "question": "Voted?", "options": [{"surface": "yes", "code": "1"}, {"surface": "no", "code": "0"}]},
      {"variable": "choice", "question": "Whom?", "options": [{"surface": "a", "code": "1"}, {"surface": "b", "code": "2"}],
       "conditional_on": {"variable": "voted", "levels": ["1"], "otherwise": "0"}}
    ]})");
}

}  // namespace

TEST_SUITE("templating") {
    TEST_CASE("bins map values to their interval") {
        PersonaTemplate t = parse_template(kTemplate);
        const BinMap& bins = t.fragments[1].bins;
        CHECK(bin_value(bins, 18) == "young");
        CHECK(bin_value(bins, 20) == "young");
        CHECK(bin_value(bins, 24) == "young");
        CHECK(bin_value(bins, 25) == "middle-aged");
        CHECK(bin_value(bins, 61) == "very old");
        CHECK(bin_value(bins, 67) == "very old");
        CHECK_THROWS(bin_value(bins, 17));
    }

    TEST_CASE("bin coverage is checked against the declared range") {
        PersonaTemplate t = parse_template(kTemplate);
        CHECK_NOTHROW(t.fragments[1].bins.check_covers(18, 120));
        CHECK_THROWS_AS(t.fragments[1].bins.check_covers(0, 120), ConfigError);
        CHECK_THROWS(parse_template(R"({"fragments": [{"id": "a", "variable": "age", "text": "{value}",
            "bins": [{"min": 18, "max": 30, "phrase": "x"}, {"min": 40, "phrase": "y"}]}]})"));
    }

    TEST_CASE("fragments render in order, joined by one space, suffix last") {
        PersonaTemplate t = parse_template(kTemplate);
        SurveyDataset d = people("r,3,22,Ohio,1,2\n");
        CHECK(render_backstory(t, d, d.at("r"), {{"target", "Democratic"}}) ==
              "Politically, I am a Republican. I am young. I live in Ohio. I am a person. About the Democratic Party:");
    }

    TEST_CASE("missing values drop the whole fragment") {
        PersonaTemplate t = parse_template(kTemplate);
        SurveyDataset d = people("full,1,70,Utah,1,1\nnoparty,-9,70,Utah,1,1\nnothing,-9,-9,-9,-9,-9\n");
        std::string full = render_backstory(t, d, d.at("full"), {{"target", "X"}});
        std::string less = render_backstory(t, d, d.at("noparty"), {{"target", "X"}});
        CHECK(full == "Politically, I am a Democrat. " + less);
        CHECK(render_backstory(t, d, d.at("nothing"), {{"target", "X"}}) == "I am a person. About the X Party:");
    }

    TEST_CASE("all variables missing leaves only the suffix") {
        PersonaTemplate t = parse_template(R"({"fragments": [{"id": "p", "variable": "party", "text": "P {value}.",
            "map": {"1": "d", "2": "i", "3": "r"}}], "suffix": "In 2016, I voted for"})");
        SurveyDataset d = people("x,-9,-9,-9,-9,-9\n");
        CHECK(render_backstory(t, d, d.at("x")) == "In 2016, I voted for");
    }

    TEST_CASE("unknown render parameter is an error") {
        CHECK(substitute("a {x} b", {{"x", "1"}}) == "a 1 b");
        CHECK_THROWS(substitute("a {y}", {{"x", "1"}}));
    }

    TEST_CASE("validation catches phrase gaps and unknown variables") {
        Codebook cb = parse_codebook(kCodebook);
        CHECK_NOTHROW(validate_template(parse_template(kTemplate), cb));
        auto gap = parse_template(R"({"fragments": [{"id": "p", "variable": "party", "text": "{value}",
            "map": {"1": "d", "3": "r"}}]})");
        CHECK_THROWS_AS(validate_template(gap, cb), ConfigError);
        auto unknown = parse_template(R"({"fragments": [{"id": "p", "variable": "color", "text": "{value}"}]})");
        CHECK_THROWS(validate_template(unknown, cb));
        CHECK_THROWS(parse_template(R"({"fragments": [{"id": "p", "variable": "party", "text": "{value} {value}"}]})"));
        CHECK_THROWS(parse_template(R"({"fragments": [{"id": "a", "text": "x"}, {"id": "a", "text": "y"}]})"));
    }

    TEST_CASE("compose_prompt skips empty parts") {
        CHECK(compose_prompt("A.", "In 2016, I voted for") == "A. In 2016, I voted for");
        CHECK(compose_prompt("", "In 2016, I voted for") == "In 2016, I voted for");
    }

    TEST_CASE("interview puts the target last with a dangling answer label") {
        SurveyDataset d = people("r,3,40,Ohio,1,2\n");
        auto text = render_interview(script(), d, d.at("r"), "party");
        REQUIRE(text);
        CHECK(*text ==
              "Interviewer: Age?\nMe: 40\nInterviewer: Voted?\nMe: yes\nInterviewer: Whom?\nMe: b\n"
              "Interviewer: Party?\nMe:");
        CHECK(text->find("rep") == std::string::npos);
    }

    TEST_CASE("interview omits missing answers and guarded items") {
        SurveyDataset d = people("n,1,-9,Ohio,0,0\n");
        auto text = render_interview(script(), d, d.at("n"), "party");
        REQUIRE(text);
        CHECK(*text == "Interviewer: Voted?\nMe: no\nInterviewer: Party?\nMe:");
        CHECK_FALSE(render_interview(script(), d, d.at("n"), "choice").has_value());
    }

    TEST_CASE("single-item script renders just the question") {
        auto s = parse_script(R"({"items": [{"variable": "age", "question": "Age?"}]})");
        SurveyDataset d = people("r,3,40,Ohio,1,2\n");
        CHECK(*render_interview(s, d, d.at("r"), "age") == "Interviewer: Age?\nMe:");
    }

    TEST_CASE("interview errors") {
        SurveyDataset d = people("r,2,40,Ohio,1,2\n");
        CHECK_THROWS(render_interview(script(), d, d.at("r"), "state"));
        auto gap = parse_script(R"({"items": [{"variable": "party", "question": "P?", "options": [{"surface": "dem", "code": "1"}]},
            {"variable": "age", "question": "A?"}]})");
        CHECK_THROWS_AS(render_interview(gap, d, d.at("r"), "age"), ValidationError);
        CHECK_THROWS(parse_script(R"({"items": [{"variable": "voted", "question": "V?", "options": [
            {"surface": "Yes", "code": "1"}, {"surface": "yes", "code": "0"}]}]})"));
    }

    TEST_CASE("speaker labels are configurable") {
        auto s = parse_script(R"({"interviewer": "Q:", "respondent": "A:", "items": [{"variable": "age", "question": "Age?"},
            {"variable": "state", "question": "State?"}]})");
        SurveyDataset d = people("r,3,40,Ohio,1,2\n");
        CHECK(*render_interview(s, d, d.at("r"), "state") == "Q: Age?\nA: 40\nQ: State?\nA:");
    }

    TEST_CASE("ablation variant counts and labels") {
        PersonaTemplate ten;
        for (int i = 0; i < 10; ++i) ten.fragments.push_back({"f" + std::to_string(i), "", "text", PhraseKind::fixed, {}, {}});
        auto all = ablation_variants(ten, AblationPolicy{});
        CHECK(all.size() == 67);
        std::set<std::string> labels;
        for (auto& v : all) labels.insert(v.label);
        CHECK(labels.size() == 67);
        CHECK(all.front().label == "full");
        CHECK(all.back().label == "none");
        CHECK(all.back().tmpl.fragments.empty());

        AblationPolicy only_full;
        only_full.include_leave_one_out = only_full.include_leave_two_out = false;
        only_full.include_singletons = only_full.include_empty = false;
        PersonaTemplate one;
        one.fragments.push_back({"a", "", "x", PhraseKind::fixed, {}, {}});
        auto single = ablation_variants(one, only_full);
        REQUIRE(single.size() == 1);
        CHECK(single[0].tmpl.fragments.size() == 1);
    }

    TEST_CASE("explicit ablation pairs") {
        PersonaTemplate t = parse_template(kTemplate);
        auto policy = parse_ablation_policy(R"({"full": false, "leave_one_out": false, "singletons": false, "empty": false,
            "pairs": [["party", "age"], ["state", "note"]]})");
        auto v = ablation_variants(t, policy);
        REQUIRE(v.size() == 2);
        CHECK(v[0].label == "without:party+age");
        CHECK(v[0].tmpl.fragments.size() == 2);
        auto bad = parse_ablation_policy(R"({"pairs": [["party", "ghost"]]})");
        CHECK_THROWS_AS(ablation_variants(t, bad), ConfigError);
        auto nothing = parse_ablation_policy(
            R"({"full": false, "leave_one_out": false, "leave_two_out": false, "singletons": false, "empty": false})");
        CHECK_THROWS(ablation_variants(t, nothing));
    }

    TEST_CASE("empty variant renders to the suffix for everyone") {
        PersonaTemplate t = parse_template(kTemplate);
        auto none = ablation_variants(t, AblationPolicy{}).back();
        SurveyDataset d = people("a,1,20,Ohio,1,1\nb,3,80,Utah,0,0\n");
        CHECK(render_backstory(none.tmpl, d, d.at("a"), {{"target", "R"}}) ==
              render_backstory(none.tmpl, d, d.at("b"), {{"target", "R"}}));
    }
}
