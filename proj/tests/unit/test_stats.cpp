#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "silicon/stats.hpp"

using namespace silicon;

namespace {

CodedColumn col(std::initializer_list<const char*> xs) {
    CodedColumn c;
    for (auto x : xs) c.push_back(x ? std::optional<std::string>(x) : std::nullopt);
    return c;
}

AssociationMatrix square(std::vector<std::string> vars, double base) {
    AssociationMatrix m;
    m.variables = vars;
    m.observations = 100;
    m.values.assign(vars.size(), std::vector<std::optional<double>>(vars.size()));
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t j = 0; j < vars.size(); ++j)
            if (i != j) m.values[i][j] = base + 0.01 * static_cast<double>(i + 3 * j);
    return m;
}

}  // namespace

TEST_SUITE("stats") {
    TEST_CASE("crosstab skips incomplete pairs") {
        auto t = crosstab(col({"1", "2", "1", nullptr, "2"}), col({"a", "a", "b", "b", nullptr}), {"1", "2"}, {"a", "b"});
        CHECK(t.total() == 3);
        CHECK(t.at(0, 0) == 1);
        CHECK(t.at(0, 1) == 1);
        CHECK(t.at(1, 0) == 1);
        CHECK(t.at(1, 1) == 0);
        CHECK_THROWS_AS(crosstab(col({"1", "3"}), col({"a", "b"}), {"1", "2"}, {"a", "b"}), ValidationError);
        CHECK_THROWS_AS(crosstab(col({"1", nullptr}), col({nullptr, "b"}), {"1"}, {"b"}), ValidationError);
        CHECK_THROWS_AS(crosstab(col({"1"}), col({"a", "b"}), {"1"}, {"a", "b"}), ValidationError);
    }

    TEST_CASE("inferred levels sort numerically") {
        auto t = crosstab(col({"10", "9", "10"}), col({"b", "a", "a"}));
        CHECK(t.row_levels() == std::vector<std::string>{"9", "10"});
        CHECK(t.col_levels() == std::vector<std::string>{"a", "b"});
        VariableSpec spec;
        spec.levels = {{"3", "x"}, {"1", "y"}};
        CHECK(level_order(spec, col({"1", "3"})) == std::vector<std::string>{"3", "1"});
    }

    TEST_CASE("agreement and kappa on a small table") {
        ContingencyTable t{{20, 5}, {10, 15}};
        CHECK(*proportion_agreement(t).value == doctest::Approx(0.7));
        CHECK(*cohens_kappa(t).value == doctest::Approx(0.4));
        CHECK_THROWS_AS(proportion_agreement(ContingencyTable{{1, 2, 3}, {4, 5, 6}}), ValidationError);
    }

    TEST_CASE("kappa is one exactly on a diagonal table") {
        CHECK(*cohens_kappa(ContingencyTable{{10, 0}, {0, 5}}).value == doctest::Approx(1.0));
        CHECK(*cohens_kappa(ContingencyTable{{10, 1}, {0, 5}}).value < 1.0);
        auto all_one = cohens_kappa(ContingencyTable{{0, 0}, {0, 7}});
        CHECK(all_one.degenerate);
        CHECK_FALSE(all_one.value.has_value());
    }

    TEST_CASE("tetrachoric basics") {
        CHECK(*tetrachoric(ContingencyTable{{25, 25}, {25, 25}}).value == doctest::Approx(0.0).epsilon(1e-6));
        ContingencyTable t{{40, 10}, {15, 35}};
        ContingencyTable flipped{{10, 40}, {35, 15}};
        double r = *tetrachoric(t).value;
        CHECK(*tetrachoric(flipped).value == doctest::Approx(-r).epsilon(1e-6));
        CHECK(r == doctest::Approx(oracle::tetrachoric_grid({40, 10, 15, 35})).epsilon(1e-3));
        CHECK_THROWS_AS(tetrachoric(ContingencyTable{{10, 0}, {5, 0}}), DegenerateError);
        auto zero = tetrachoric(ContingencyTable{{30, 0}, {5, 20}});
        CHECK(zero.corrected);
        CHECK(*zero.value > 0.9);
    }

    TEST_CASE("normal helpers") {
        CHECK(normal_cdf(0) == doctest::Approx(0.5));
        CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
        CHECK(bvn_cdf(0, 0, 0.5) == doctest::Approx(1.0 / 3.0));
        CHECK_THROWS(bvn_cdf(0, 0, 1.5));
    }

    TEST_CASE("ICC on perfectly matched ratings") {
        std::vector<double> x{1, 0, 1, 0, 1}, y = x;
        CHECK(*icc_pair(x, y).value == doctest::Approx(1.0));
        CHECK_THROWS(icc_pair({1, 0}, {1, 0}));
        CHECK_THROWS(icc_pair({1, 0, 1}, {1, 0}));
    }

    TEST_CASE("Cramer's V invariances") {
        ContingencyTable t{{10, 5, 2}, {3, 8, 12}};
        double v = *cramers_v(t).value;
        CHECK(v > 0);
        CHECK(v < 1);
        CHECK(*cramers_v(ContingencyTable{{3, 8, 12}, {10, 5, 2}}).value == doctest::Approx(v));
        CHECK(*cramers_v(ContingencyTable{{30, 15, 6}, {9, 24, 36}}).value == doctest::Approx(v));
        CHECK(*cramers_v(ContingencyTable{{10, 3}, {5, 8}, {2, 12}}).value == doctest::Approx(v));
        CHECK(*cramers_v(ContingencyTable{{10, 0}, {0, 10}}).value == doctest::Approx(1.0));
        CHECK(*cramers_v(ContingencyTable{{10, 10}, {10, 10}}).value == doctest::Approx(0.0));
        CHECK_THROWS_AS(cramers_v(ContingencyTable{{1, 2}, {0, 0}}), DegenerateError);
        CHECK_THROWS_AS(cramers_v(ContingencyTable{{1, 2}}), DegenerateError);
    }

    TEST_CASE("association matrix on independent variables") {
        Codebook cb = parse_codebook(R"({"variables": [
          {"name": "a", "levels": [["1", "x"], ["2", "y"], ["3", "z"]]},
          {"name": "b", "levels": [["1", "x"], ["2", "y"]]},
          {"name": "c", "levels": [["1", "x"], ["2", "y"], ["3", "z"], ["4", "w"]]}]})");
        std::mt19937_64 rng(11);
        std::string csv = "respondent_id,a,b,c\n";
        for (int i = 0; i < 10000; ++i)
            csv += std::to_string(i) + "," + std::to_string(1 + rng() % 3) + "," + std::to_string(1 + rng() % 2) + "," +
                   std::to_string(1 + rng() % 4) + "\n";
        auto dir = oracle::fresh_dir("assoc");
        oracle::write_file(dir / "d.csv", csv);
        SurveyDataset d = load_dataset(dir / "d.csv", cb);
        auto m = association_matrix(d, d, {"a", "b", "c"}, MatrixSource::human);
        CHECK(m.observations == 10000);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                if (i == j) {
                    CHECK_FALSE(m.values[i][j].has_value());
                    continue;
                }
                REQUIRE(m.values[i][j].has_value());
                CHECK(*m.values[i][j] < 0.05);
                CHECK(*m.values[i][j] == doctest::Approx(*m.values[j][i]));
            }
        CHECK(m.at("a", "b") == m.values[0][1]);
        CHECK_THROWS(m.at("a", "zz"));
    }

    TEST_CASE("comparing matrices") {
        auto h = square({"a", "b", "c"}, 0.2);
        auto s = square({"a", "b", "c"}, 0.3);
        auto cmp = compare_matrices(h, s);
        CHECK(cmp.cells.size() == 6);
        CHECK(cmp.summary.mean == doctest::Approx(0.1));
        CHECK(cmp.summary.sd == doctest::Approx(0.0));
        CHECK(cmp.summary.min == doctest::Approx(0.1));
        CHECK(cmp.summary.observations == 100);
        auto without = compare_matrices(h, s, {"c"});
        CHECK(without.cells.size() == 2);
        s.values[0][1].reset();
        CHECK(compare_matrices(h, s).cells.size() == 5);
        CHECK_THROWS_AS(compare_matrices(h, square({"a", "b"}, 0.3)), ValidationError);

        auto sum = summarize({1, 2, 3, 4}, 9);
        CHECK(sum.mean == doctest::Approx(2.5));
        CHECK(sum.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
        CHECK(summarize({}, 0).cells == 0);
    }

    TEST_CASE("fidelity row and subgroups") {
        std::vector<int> h{1, 1, 0, 0, 1, 0, 1, 0}, s{1, 1, 0, 0, 1, 0, 0, 1};
        auto row = fidelity_row("all", h, s);
        CHECK(row.n == 8);
        CHECK(*row.agreement.value == doctest::Approx(0.75));
        CHECK(*row.kappa.value == doctest::Approx(0.5));
        CHECK(row.tetrachoric.value.has_value());
        CHECK(row.icc.value.has_value());

        auto dir = oracle::fresh_dir("fid");
        oracle::write_file(dir / "d.csv", "respondent_id,g\na,1\nb,1\nc,2\nd,2\ne,1\n");
        SurveyDataset d = load_dataset(dir / "d.csv", parse_codebook(R"({"variables": [{"name": "g", "levels": [["1", "x"], ["2", "y"], ["3", "z"]]}]})"));
        auto groups = parse_subgroups(R"([{"name": "All", "clauses": []},
            {"name": "Z", "clauses": [{"variable": "g", "levels": ["3"]}]}])");
        std::vector<std::optional<int>> votes{1, 0, 1, std::nullopt, 0};
        std::vector<std::optional<double>> probs{0.9, 0.5, 0.2, 0.7, 0.1};
        auto rep = subgroup_fidelity_report(votes, probs, groups, d);
        REQUIRE(rep.rows.size() == 2);
        CHECK(rep.rows[0].n == 3);
        CHECK(rep.rows[0].ties == 1);
        CHECK(rep.rows[1].n == 0);
        CHECK_FALSE(rep.rows[1].agreement.value.has_value());
        auto tie_pos = subgroup_fidelity_report(votes, probs, groups, d, true);
        CHECK(tie_pos.rows[0].n == 4);
        CHECK_THROWS(subgroup_fidelity_report({1}, probs, groups, d));
    }
}
