#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "panelml/codebook.hpp"
#include "panelml/errors.hpp"
#include "panelml/rng.hpp"
#include "panelml/tables.hpp"

using namespace panelml;

namespace {

const char* kMiniCodebook =
    "name,role,kind,missing_codes,valid_values,year_suffixes,recode_ref,bin_edges\n"
    "pid,id,numeric,,,,,\n"
    "grade,feature,numeric,-4,,,,\n"
    "job,feature,nominal,,,2019;2021,,\n"
    "pay,target,numeric,,,2019;2021,,50000;100000\n";

Codebook mini_codebook() { return parse_codebook(kMiniCodebook, "mini"); }

}  // namespace

TEST_CASE("shipped survey codebook loads") {
    auto cb = load_codebook(std::string(PANELML_SOURCE_DIR) + "/data/nlsy97_codebook.csv");
    // 15 survey variables (14 features + income) plus the id column.
    CHECK(cb.variables.size() == 16);
    CHECK(cb.years == std::vector<int>{1997, 2003, 2015, 2017, 2019, 2021});
    CHECK(cb.repeated_years() == std::vector<int>{2015, 2017, 2019, 2021});
    CHECK(cb.variables[static_cast<std::size_t>(cb.target_index())].name == "income");
    CHECK(cb.variables[static_cast<std::size_t>(cb.target_index())].bin_edges ==
          std::vector<double>{50000.0, 100000.0});
    int repeated = 0;
    for (const auto& v : cb.variables) repeated += v.repeated();
    CHECK(repeated == 6);  // age, industry, occupation, work weeks, work hours, income
}

TEST_CASE("minimal codebook") {
    auto cb = mini_codebook();
    CHECK(cb.variables.size() == 4);
    CHECK(cb.id_index() == 0);
    CHECK(cb.target_index() == 3);
    CHECK(cb.years == std::vector<int>{2019, 2021});
}

TEST_CASE("codebook rejects two targets") {
    std::string bad =
        "name,role,kind,missing_codes,valid_values,year_suffixes,recode_ref,bin_edges\n"
        "pid,id,numeric,,,,,\n"
        "a,target,numeric,,,,,\n"
        "b,target,numeric,,,,,\n";
    CHECK_THROWS_AS(parse_codebook(bad, "bad"), DataError);
}

TEST_CASE("codebook rejects duplicate names and bad bin edges") {
    std::string dup =
        "name,role,kind,missing_codes,valid_values,year_suffixes,recode_ref,bin_edges\n"
        "pid,id,numeric,,,,,\n"
        "a,feature,numeric,,,,,\n"
        "a,feature,numeric,,,,,\n"
        "t,target,numeric,,,,,\n";
    CHECK_THROWS_AS(parse_codebook(dup, "dup"), DataError);
    std::string edges =
        "name,role,kind,missing_codes,valid_values,year_suffixes,recode_ref,bin_edges\n"
        "pid,id,numeric,,,,,\n"
        "t,target,numeric,,,,,100000;50000\n";
    CHECK_THROWS_AS(parse_codebook(edges, "edges"), DataError);
}

TEST_CASE("ingest wide csv") {
    auto cb = mini_codebook();
    std::string data =
        "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
        "1,12,3,4,40000,60000\n"
        "2,,5,,120000,\n";
    auto wide = ingest_wide_string(data, cb, "t");
    REQUIRE(wide.row_count() == 2);
    CHECK(wide.ids == std::vector<std::int64_t>{1, 2});
    int c = wide.column_of(cb.index_of("job"), 2021);
    CHECK(wide.rows[0][static_cast<std::size_t>(c)] == Cell::category(4));
    CHECK(wide.rows[1][static_cast<std::size_t>(c)].is_absent());

    SUBCASE("empty body is fine") {
        auto empty = ingest_wide_string("pid,grade,job#2019,job#2021,pay#2019,pay#2021\n", cb, "t");
        CHECK(empty.row_count() == 0);
    }
    SUBCASE("unknown column rejected") {
        CHECK_THROWS_AS(ingest_wide_string("pid,grade,bogus\n", cb, "t"), DataError);
    }
    SUBCASE("missing column rejected") {
        CHECK_THROWS_AS(ingest_wide_string("pid,grade\n", cb, "t"), DataError);
    }
    SUBCASE("non-integer token in nominal column") {
        std::string bad =
            "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
            "1,12,3.5,4,1,1\n";
        CHECK_THROWS_AS(ingest_wide_string(bad, cb, "t"), DataError);
    }
    SUBCASE("duplicate individual id") {
        std::string bad =
            "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
            "1,12,3,4,1,1\n"
            "1,13,3,4,1,1\n";
        CHECK_THROWS_AS(ingest_wide_string(bad, cb, "t"), DataError);
    }
}

TEST_CASE("unroll matches the two-year fixture") {
    // The worked example: one individual measured in 2019 and 2021.
    auto cb = mini_codebook();
    std::string data =
        "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
        "2,14,7,7,128400,115000\n";
    auto wide = ingest_wide_string(data, cb, "t");
    auto lt = unroll_longitudinal(wide);
    REQUIRE(lt.row_count() == 2);
    CHECK(lt.rows[0].id == 2);
    CHECK(lt.rows[0].year == 2019);
    CHECK(lt.rows[1].year == 2021);
    int grade = lt.col_of("grade");
    int job = lt.col_of("job");
    int pay = lt.col_of("pay");
    // Time-invariant cells are duplicated into each year's row.
    CHECK(lt.rows[0].cells[static_cast<std::size_t>(grade)] == Cell::numeric(14));
    CHECK(lt.rows[1].cells[static_cast<std::size_t>(grade)] == Cell::numeric(14));
    CHECK(lt.rows[0].cells[static_cast<std::size_t>(job)] == Cell::category(7));
    CHECK(lt.rows[0].cells[static_cast<std::size_t>(pay)] == Cell::numeric(128400));
    CHECK(lt.rows[1].cells[static_cast<std::size_t>(pay)] == Cell::numeric(115000));
}

namespace {

// Independent per-cell reshape oracle: looks each long cell up directly
// in the wide table by (id, variable, year) without going through
// unroll_longitudinal's layout bookkeeping.
Cell oracle_lookup(const WideTable& wide, std::int64_t id, const std::string& var, int year) {
    std::size_t row = 0;
    for (; row < wide.ids.size(); ++row) {
        if (wide.ids[row] == id) break;
    }
    REQUIRE(row < wide.ids.size());
    int vi = wide.codebook.index_of(var);
    const auto& spec = wide.codebook.variables[static_cast<std::size_t>(vi)];
    int col = wide.column_of(vi, spec.repeated() ? year : -1);
    if (col < 0) return Cell::absent();
    return wide.rows[row][static_cast<std::size_t>(col)];
}

std::string random_wide_csv(std::uint64_t seed, std::size_t individuals) {
    auto eng = substream(seed, "widegen");
    std::string out = "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n";
    for (std::size_t i = 0; i < individuals; ++i) {
        out += std::to_string(i + 1);
        for (int f = 0; f < 5; ++f) {
            out += ",";
            if (uniform_real(eng) < 0.3) continue;  // blank cell
            out += std::to_string(static_cast<int>(uniform_below(eng, 200)) - 50);
        }
        out += "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("unroll agrees with the per-cell reshape oracle") {
    auto cb = mini_codebook();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto wide = ingest_wide_string(random_wide_csv(seed, 3), cb, "t");
        auto lt = unroll_longitudinal(wide);
        CHECK(lt.row_count() == wide.row_count() * 2);  // cardinality
        for (const auto& row : lt.rows) {
            for (std::size_t i = 0; i < lt.var_indices.size(); ++i) {
                const auto& name = cb.variables[static_cast<std::size_t>(lt.var_indices[i])].name;
                CHECK(row.cells[i] == oracle_lookup(wide, row.id, name, row.year));
            }
        }
    }
}

TEST_CASE("unroll conserves values") {
    auto cb = mini_codebook();
    auto wide = ingest_wide_string(random_wide_csv(42, 20), cb, "t");
    auto lt = unroll_longitudinal(wide);
    // Per repeated variable and year: multisets of non-absent values match.
    for (const auto& var : {"pay", "job"}) {
        for (int year : {2019, 2021}) {
            std::multiset<double> from_wide, from_long;
            int col = wide.column_of(cb.index_of(var), year);
            for (const auto& r : wide.rows) {
                if (!r[static_cast<std::size_t>(col)].is_absent()) from_wide.insert(r[static_cast<std::size_t>(col)].as_double());
            }
            int lcol = lt.col_of(var);
            for (const auto& r : lt.rows) {
                if (r.year == year && !r.cells[static_cast<std::size_t>(lcol)].is_absent()) {
                    from_long.insert(r.cells[static_cast<std::size_t>(lcol)].as_double());
                }
            }
            CHECK(from_wide == from_long);
        }
    }
}

TEST_CASE("filter_invalid_target") {
    auto cb = mini_codebook();
    std::string data =
        "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
        "1,12,1,1,40000,-3\n"
        "2,13,1,1,-1,\n"
        "3,14,1,1,0,70000\n";
    auto lt = unroll_longitudinal(ingest_wide_string(data, cb, "t"));
    auto [kept, removed] = filter_invalid_target(lt);
    CHECK(lt.row_count() == 6);
    CHECK(removed == 3);  // -3, -1 and one absent
    CHECK(kept.row_count() == 3);
    int pay = kept.target_col();
    for (const auto& r : kept.rows) {
        CHECK(r.cells[static_cast<std::size_t>(pay)].as_double() >= 0);
    }

    SUBCASE("all valid leaves table unchanged") {
        auto [again, n] = filter_invalid_target(kept);
        CHECK(n == 0);
        CHECK(again.row_count() == kept.row_count());
        for (std::size_t i = 0; i < kept.row_count(); ++i) {
            CHECK(again.rows[i].cells == kept.rows[i].cells);
        }
    }
    SUBCASE("all negative incomes leaves empty table") {
        std::string neg =
            "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
            "9,12,1,1,-2,-5\n";
        auto [empty, n] = filter_invalid_target(unroll_longitudinal(ingest_wide_string(neg, cb, "t")));
        CHECK(empty.row_count() == 0);
        CHECK(n == 2);
    }
}

TEST_CASE("mark_missing replaces negative and declared codes") {
    auto cb = mini_codebook();  // grade declares -4 as missing
    std::string data =
        "pid,grade,job#2019,job#2021,pay#2019,pay#2021\n"
        "1,-4,-2,3,40000,-3\n"
        "2,17,1,1,50000,50000\n";
    auto lt = unroll_longitudinal(ingest_wide_string(data, cb, "t"));
    auto marked = mark_missing(lt);
    int grade = marked.col_of("grade");
    int job = marked.col_of("job");
    int pay = marked.target_col();
    CHECK(marked.rows[0].cells[static_cast<std::size_t>(grade)].is_absent());
    CHECK(marked.rows[0].cells[static_cast<std::size_t>(job)].is_absent());     // -2 in 2019
    CHECK_FALSE(marked.rows[1].cells[static_cast<std::size_t>(job)].is_absent());  // 3 in 2021
    // Target cells untouched, even negative ones.
    CHECK(marked.rows[1].cells[static_cast<std::size_t>(pay)] == Cell::numeric(-3));
    CHECK(marked.rows[2].cells[static_cast<std::size_t>(grade)] == Cell::numeric(17));

    SUBCASE("idempotent") {
        auto twice = mark_missing(marked);
        for (std::size_t i = 0; i < marked.row_count(); ++i) {
            CHECK(twice.rows[i].cells == marked.rows[i].cells);
        }
    }

    SUBCASE("absent count matches an independent scan") {
        auto wide = ingest_wide_string(random_wide_csv(7, 30), cb, "t");
        auto raw = unroll_longitudinal(wide);
        auto m = mark_missing(raw);
        std::size_t expected = 0, actual = 0;
        for (const auto& r : raw.rows) {
            for (std::size_t i = 0; i < raw.var_indices.size(); ++i) {
                const auto& var = cb.variables[static_cast<std::size_t>(raw.var_indices[i])];
                const Cell& c = r.cells[i];
                if (var.role == Role::Target) continue;
                bool absent = c.is_absent() || c.as_double() < 0 ||
                              var.missing_codes.count(static_cast<int>(c.as_double())) > 0;
                expected += absent;
            }
        }
        for (const auto& r : m.rows) {
            for (std::size_t i = 0; i < m.var_indices.size(); ++i) {
                if (cb.variables[static_cast<std::size_t>(m.var_indices[i])].role == Role::Target) continue;
                actual += r.cells[i].is_absent();
            }
        }
        CHECK(actual == expected);
    }
}

TEST_CASE("balanced_year_sample") {
    auto cb = mini_codebook();
    auto lt = unroll_longitudinal(ingest_wide_string(random_wide_csv(3, 50), cb, "t"));  // 50 per year

    SUBCASE("uniform histogram and determinism") {
        auto s1 = balanced_year_sample(lt, 40, 123);
        auto s2 = balanced_year_sample(lt, 40, 123);
        REQUIRE(s1.row_count() == 40);
        std::map<int, int> hist;
        for (const auto& r : s1.rows) ++hist[r.year];
        CHECK(hist[2019] == 20);
        CHECK(hist[2021] == 20);
        for (std::size_t i = 0; i < 40; ++i) {
            CHECK(s1.rows[i].id == s2.rows[i].id);
            CHECK(s1.rows[i].year == s2.rows[i].year);
        }
        auto s3 = balanced_year_sample(lt, 40, 124);
        bool differs = false;
        for (std::size_t i = 0; i < 40; ++i) {
            differs |= s1.rows[i].id != s3.rows[i].id || s1.rows[i].year != s3.rows[i].year;
        }
        CHECK(differs);
    }
    SUBCASE("indivisible total is an error") {
        CHECK_THROWS_AS(balanced_year_sample(lt, 41, 1), DataError);
    }
    SUBCASE("insufficient rows in a year is an error") {
        CHECK_THROWS_AS(balanced_year_sample(lt, 200, 1), DataError);
    }
    SUBCASE("full-size sample of a one-year table is the identity set") {
        auto one = filter_year(lt, 2019);
        auto s = balanced_year_sample(one, one.row_count(), 9);
        REQUIRE(s.row_count() == one.row_count());
        std::set<std::int64_t> a, b;
        for (const auto& r : one.rows) a.insert(r.id);
        for (const auto& r : s.rows) b.insert(r.id);
        CHECK(a == b);
    }
}
