#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "panelml/errors.hpp"
#include "panelml/rng.hpp"
#include "panelml/shap.hpp"

using namespace panelml;

namespace {

DesignMatrix numeric_matrix(const std::vector<std::vector<double>>& rows, std::vector<int> targets,
                            const std::vector<std::vector<std::uint8_t>>& miss = {}) {
    DesignMatrix m;
    std::size_t p = rows.empty() ? 0 : rows[0].size();
    for (std::size_t c = 0; c < p; ++c) {
        m.columns.push_back({"x" + std::to_string(c), ColumnDescriptor::Encoding::Numeric, 0});
    }
    m.n_rows = rows.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        m.values.insert(m.values.end(), rows[r].begin(), rows[r].end());
        if (miss.empty()) m.missing.insert(m.missing.end(), p, 0);
        else m.missing.insert(m.missing.end(), miss[r].begin(), miss[r].end());
        m.row_ids.emplace_back(static_cast<std::int64_t>(r), 0);
    }
    m.targets = std::move(targets);
    return m;
}

DesignMatrix random_matrix(std::size_t n_rows, std::size_t n_cols, std::uint64_t seed) {
    auto eng = substream(seed, "shap_fixture");
    std::vector<std::vector<double>> rows(n_rows, std::vector<double>(n_cols));
    std::vector<int> targets(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (auto& v : rows[r]) v = static_cast<double>(uniform_below(eng, 6));
        double signal = rows[r][0] * 2.0 + (n_cols > 1 ? rows[r][1] : 0.0);
        targets[r] = signal < 5 ? 1 : (signal < 10 ? 2 : 3);
        if (uniform_below(eng, 5) == 0) targets[r] = static_cast<int>(uniform_below(eng, 3)) + 1;
    }
    return numeric_matrix(rows, targets);
}

// Cover-weighted expectation of a tree's class score when only the
// columns in `keep` are pinned to the instance.
double expvalue(const DecisionTree& t, int node_id, std::span<const double> row,
                const std::vector<bool>& keep, int cls) {
    const TreeNode& n = t.nodes[static_cast<std::size_t>(node_id)];
    if (n.is_leaf()) {
        double tot = n.histogram[0] + n.histogram[1] + n.histogram[2];
        return tot > 0 ? n.histogram[static_cast<std::size_t>(cls - 1)] / tot : 1.0 / 3.0;
    }
    if (keep[static_cast<std::size_t>(n.column)]) {
        int next = row[static_cast<std::size_t>(n.column)] < n.threshold ? n.left : n.right;
        return expvalue(t, next, row, keep, cls);
    }
    double cl = t.nodes[static_cast<std::size_t>(n.left)].cover;
    double cr = t.nodes[static_cast<std::size_t>(n.right)].cover;
    return (cl * expvalue(t, n.left, row, keep, cls) + cr * expvalue(t, n.right, row, keep, cls)) /
           (cl + cr);
}

// 2^p subset enumeration of the exact Shapley values of the forest's
// cover-weighted expectation game.
std::pair<double, std::vector<double>> brute_force_shap(const ForestModel& forest,
                                                        std::span<const double> row, int cls) {
    std::size_t p = forest.columns().size();
    REQUIRE(p <= 12);
    std::size_t n_masks = std::size_t{1} << p;
    std::vector<double> v(n_masks, 0.0);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        std::vector<bool> keep(p, false);
        for (std::size_t c = 0; c < p; ++c) keep[c] = (mask >> c) & 1;
        for (const auto& t : forest.trees()) v[mask] += expvalue(t, 0, row, keep, cls);
        v[mask] /= static_cast<double>(forest.trees().size());
    }

    std::vector<double> fact(p + 1, 1.0);
    for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> phi(p, 0.0);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        auto s = static_cast<std::size_t>(std::popcount(mask));
        for (std::size_t c = 0; c < p; ++c) {
            if ((mask >> c) & 1) continue;
            double w = fact[s] * fact[p - s - 1] / fact[p];
            phi[c] += w * (v[mask | (std::size_t{1} << c)] - v[mask]);
        }
    }
    return {v[0], phi};
}

ForestModel single_tree_forest(DecisionTree tree, std::vector<ColumnDescriptor> columns) {
    ForestConfig cfg;
    cfg.trees = 1;
    return ForestModel({std::move(tree)}, cfg, std::move(columns));
}

}  // namespace

TEST_CASE("tree shap: depth-1 tree assigns the whole deviation to its split column") {
    auto m = numeric_matrix({{0.0, 5.0}, {1.0, 5.0}, {10.0, 5.0}, {11.0, 5.0}}, {1, 1, 3, 3});
    DecisionTree tree = fit_single_tree(m);
    REQUIRE(tree.nodes.size() == 3);
    REQUIRE(tree.nodes[0].column == 0);
    ForestModel forest = single_tree_forest(tree, m.columns);

    ShapRow row = tree_shap(forest, m.row(0), m.row_missing(0), 1);
    CHECK(row.base == doctest::Approx(0.5));                 // half the training rows are class 1
    CHECK(row.phi[0] == doctest::Approx(0.5).epsilon(1e-12));  // score 1.0 = base + phi
    CHECK(row.phi[1] == 0.0);
    CHECK(row.total() == doctest::Approx(forest.score(m.row(0), m.row_missing(0))[0]).epsilon(1e-12));
}

TEST_CASE("tree shap: unused column has exactly zero attribution") {
    DesignMatrix m = random_matrix(50, 3, 3);
    // Append a constant column that no split can use.
    DesignMatrix wide = m;
    wide.columns.push_back({"constant", ColumnDescriptor::Encoding::Numeric, 0});
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        values.insert(values.end(), m.row(r).begin(), m.row(r).end());
        values.push_back(7.0);
        auto rm = m.row_missing(r);
        missing.insert(missing.end(), rm.begin(), rm.end());
        missing.push_back(0);
    }
    wide.values = std::move(values);
    wide.missing = std::move(missing);

    ForestConfig cfg;
    cfg.trees = 10;
    cfg.mtry = 4;
    cfg.seed = 2;
    ForestModel forest = fit_forest(wide, cfg);
    for (std::size_t r = 0; r < 10; ++r) {
        for (int cls = 1; cls <= kNumClasses; ++cls) {
            ShapRow row = tree_shap(forest, wide.row(r), wide.row_missing(r), cls);
            CHECK(row.phi[3] == 0.0);
        }
    }
}

TEST_CASE("tree shap: matches exhaustive subset enumeration") {
    for (std::uint64_t seed : {5u, 6u}) {
        DesignMatrix m = random_matrix(60, 5, seed);
        ForestConfig cfg;
        cfg.trees = 8;
        cfg.mtry = 3;
        cfg.seed = seed;
        ForestModel forest = fit_forest(m, cfg);

        for (std::size_t r = 0; r < 10; ++r) {
            for (int cls = 1; cls <= kNumClasses; ++cls) {
                ShapRow got = tree_shap(forest, m.row(r), m.row_missing(r), cls);
                auto [base, phi] = brute_force_shap(forest, m.row(r), cls);
                CHECK(got.base == doctest::Approx(base).epsilon(1e-10));
                for (std::size_t c = 0; c < phi.size(); ++c) {
                    CHECK(std::abs(got.phi[c] - phi[c]) < 1e-8);
                }
            }
        }
    }
}

TEST_CASE("tree shap: local accuracy on every row, including missing values") {
    std::vector<std::vector<double>> rows;
    std::vector<int> targets;
    std::vector<std::vector<std::uint8_t>> miss;
    auto eng = substream(9, "shap_missing");
    for (int i = 0; i < 80; ++i) {
        rows.push_back({static_cast<double>(uniform_below(eng, 8)),
                        static_cast<double>(uniform_below(eng, 8)),
                        static_cast<double>(uniform_below(eng, 8))});
        targets.push_back(rows.back()[0] < 4 ? 1 : (rows.back()[1] < 4 ? 2 : 3));
        miss.push_back({static_cast<std::uint8_t>(uniform_below(eng, 6) == 0), 0,
                        static_cast<std::uint8_t>(uniform_below(eng, 6) == 0)});
    }
    DesignMatrix m = numeric_matrix(rows, targets, miss);
    ForestConfig cfg;
    cfg.trees = 12;
    cfg.seed = 4;
    ForestModel forest = fit_forest(m, cfg);

    for (std::size_t r = 0; r < m.n_rows; ++r) {
        Scores s = forest.score(m.row(r), m.row_missing(r));
        for (int cls = 1; cls <= kNumClasses; ++cls) {
            ShapRow row = tree_shap(forest, m.row(r), m.row_missing(r), cls);
            CHECK(std::abs(row.total() - s[static_cast<std::size_t>(cls - 1)]) < 1e-6);
        }
    }
}

TEST_CASE("tree shap: symmetric columns get equal attribution") {
    // Two mirror-image stumps: one splits column 0, the other column 1,
    // with identical thresholds and leaf histograms. The ensemble is
    // symmetric in the two columns.
    auto make_stump = [](int column) {
        DecisionTree t;
        t.nodes.resize(3);
        t.nodes[0].column = column;
        t.nodes[0].threshold = 0.5;
        t.nodes[0].left = 1;
        t.nodes[0].right = 2;
        t.nodes[0].cover = 10.0;
        t.nodes[0].histogram = {6.0, 4.0, 0.0};
        t.nodes[1].cover = 6.0;
        t.nodes[1].histogram = {6.0, 0.0, 0.0};
        t.nodes[2].cover = 4.0;
        t.nodes[2].histogram = {0.0, 4.0, 0.0};
        return t;
    };
    std::vector<ColumnDescriptor> cols{{"a", ColumnDescriptor::Encoding::Numeric, 0},
                                       {"b", ColumnDescriptor::Encoding::Numeric, 0}};
    ForestConfig cfg;
    cfg.trees = 2;
    ForestModel forest({make_stump(0), make_stump(1)}, cfg, cols);

    for (double v : {0.0, 1.0}) {
        std::vector<double> x{v, v};
        ShapRow row = tree_shap(forest, x, {}, 2);
        CHECK(row.phi[0] == doctest::Approx(row.phi[1]).epsilon(1e-12));
        auto [base, phi] = brute_force_shap(forest, x, 2);
        CHECK(row.phi[0] == doctest::Approx(phi[0]).epsilon(1e-12));
        CHECK(row.phi[1] == doctest::Approx(phi[1]).epsilon(1e-12));
        CHECK(row.base == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("sampling shap: constant function attributes nothing") {
    ScoreFn constant = [](std::span<const double>) { return 0.4; };
    std::vector<std::vector<double>> background{{0.0, 0.0}, {1.0, 2.0}};
    std::vector<double> x{5.0, -1.0};
    ShapRow row = sampling_shap(constant, x, background, 64, 1);
    CHECK(row.base == doctest::Approx(0.4));
    for (double p : row.phi) CHECK(p == doctest::Approx(0.0));
}

TEST_CASE("sampling shap: additive function recovers the closed form") {
    ScoreFn additive = [](std::span<const double> x) { return x[0] + x[1]; };
    auto eng = substream(15, "shap_bg");
    std::vector<std::vector<double>> background;
    double mean0 = 0.0, mean1 = 0.0;
    for (int i = 0; i < 50; ++i) {
        background.push_back({normal(eng), normal(eng)});
        mean0 += background.back()[0];
        mean1 += background.back()[1];
    }
    mean0 /= 50.0;
    mean1 /= 50.0;

    std::vector<double> x{2.0, -1.5};
    ShapRow row = sampling_shap(additive, x, background, 2000, 7);
    // For an additive function the permutation estimate is exact per
    // draw up to which background row was sampled.
    CHECK(row.phi[0] == doctest::Approx(x[0] - mean0).epsilon(0.15));
    CHECK(row.phi[1] == doctest::Approx(x[1] - mean1).epsilon(0.15));
    CHECK(std::abs(row.phi[0] - (x[0] - mean0)) < 4.0 * row.std_error[0] + 1e-9);
    CHECK(std::abs(row.phi[1] - (x[1] - mean1)) < 4.0 * row.std_error[1] + 1e-9);

    ShapRow again = sampling_shap(additive, x, background, 2000, 7);
    CHECK(row.phi == again.phi);
    ShapRow other = sampling_shap(additive, x, background, 2000, 8);
    CHECK(row.phi != other.phi);
}

TEST_CASE("sampling shap: agrees with the exact tree method within 3 standard errors") {
    DesignMatrix m = random_matrix(80, 4, 21);
    ForestConfig cfg;
    cfg.trees = 10;
    cfg.seed = 3;
    ForestModel forest = fit_forest(m, cfg);

    std::vector<std::vector<double>> background;
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        background.emplace_back(m.row(r).begin(), m.row(r).end());
    }
    int cls = 1;
    ScoreFn fn = [&](std::span<const double> x) { return forest.score(x, {})[static_cast<std::size_t>(cls - 1)]; };

    for (std::size_t r : {std::size_t{0}, std::size_t{40}}) {
        ShapRow exact = tree_shap(forest, m.row(r), {}, cls);
        ShapRow sampled = sampling_shap(fn, m.row(r), background, 600, 5);
        // Different removal conventions (cover-path vs background mixing)
        // agree only statistically; allow the sampling error band.
        for (std::size_t c = 0; c < exact.phi.size(); ++c) {
            CHECK(std::abs(exact.phi[c] - sampled.phi[c]) <= 3.0 * sampled.std_error[c] + 0.05);
        }
    }
}

TEST_CASE("sampling shap: input validation") {
    ScoreFn fn = [](std::span<const double>) { return 0.0; };
    std::vector<double> x{1.0};
    CHECK_THROWS_AS(sampling_shap(fn, x, {}, 10, 0), DataError);
    CHECK_THROWS_AS(sampling_shap(fn, x, {{1.0}}, 0, 0), UsageError);
}

TEST_CASE("aggregate: all-numeric rows pass through unchanged") {
    std::vector<ColumnDescriptor> cols{{"a", ColumnDescriptor::Encoding::Numeric, 0},
                                       {"b", ColumnDescriptor::Encoding::Numeric, 0}};
    ShapRow row;
    row.base = 0.3;
    row.phi = {0.1, -0.2};
    ShapRow agg = aggregate_onehot(row, cols);
    CHECK(agg.phi == row.phi);
    CHECK(agg.base == row.base);
}

TEST_CASE("aggregate: one-hot levels sum into their source variable") {
    std::vector<ColumnDescriptor> cols{
        {"occupation", ColumnDescriptor::Encoding::OneHot, 1},
        {"occupation", ColumnDescriptor::Encoding::OneHot, 2},
        {"occupation", ColumnDescriptor::Encoding::OneHot, 3},
        {"age", ColumnDescriptor::Encoding::Numeric, 0},
        {"occupation", ColumnDescriptor::Encoding::MissingLevel, 0},
    };
    ShapRow row;
    row.base = 0.5;
    row.phi = {0.1, -0.2, 0.05, 0.3, 0.01};
    ShapRow agg = aggregate_onehot(row, cols);
    REQUIRE(agg.phi.size() == 2);
    CHECK(source_variables(cols) == std::vector<std::string>{"occupation", "age"});
    CHECK(agg.phi[0] == doctest::Approx(0.1 - 0.2 + 0.05 + 0.01));
    CHECK(agg.phi[1] == doctest::Approx(0.3));
    CHECK(agg.total() == doctest::Approx(row.total()).epsilon(1e-15));

    ShapRow bad = row;
    bad.phi.pop_back();
    CHECK_THROWS_AS(aggregate_onehot(bad, cols), DataError);
}

TEST_CASE("ranking: single row orders by absolute value with name tie-break") {
    ShapMatrix m;
    m.names = {"c", "a", "b", "d"};
    ShapRow row;
    row.phi = {0.2, -0.5, 0.5, 0.1};
    m.rows.push_back(row);
    FeatureRanking r = mean_abs_ranking(m);
    REQUIRE(r.entries.size() == 4);
    CHECK(r.entries[0].first == "a");  // 0.5, tie with b broken by name
    CHECK(r.entries[1].first == "b");
    CHECK(r.entries[2].first == "c");
    CHECK(r.entries[3].first == "d");
}

TEST_CASE("ranking: matches a direct averaging loop") {
    auto eng = substream(27, "ranking_oracle");
    ShapMatrix m;
    m.names = {"v0", "v1", "v2"};
    for (int r = 0; r < 40; ++r) {
        ShapRow row;
        row.phi = {normal(eng), normal(eng), normal(eng)};
        m.rows.push_back(row);
    }
    FeatureRanking ranking = mean_abs_ranking(m);
    std::map<std::string, double> expect;
    for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (const auto& row : m.rows) acc += std::abs(row.phi[c]);
        expect[m.names[c]] = acc / 40.0;
    }
    double prev = 1e300;
    for (const auto& [name, value] : ranking.entries) {
        CHECK(value == doctest::Approx(expect[name]).epsilon(1e-12));
        CHECK(value <= prev);
        prev = value;
    }
    CHECK_THROWS_AS(mean_abs_ranking(ShapMatrix{}), DataError);
}

TEST_CASE("summary export: layout, round trip, absent values") {
    ShapMatrix m;
    m.names = {"age", "degree", "sex"};
    ShapRow r1;
    r1.instance_id = 101;
    r1.phi = {0.125, -0.25, 0.0625};
    ShapRow r2;
    r2.instance_id = 202;
    r2.phi = {-0.5, 0.75, 0.015625};
    m.rows = {r1, r2};
    std::vector<std::vector<Cell>> values{
        {Cell::numeric(34.0), Cell::category(2), Cell::absent()},
        {Cell::numeric(36.0), Cell::category(4), Cell::category(1)},
    };
    std::string csv = shap_summary_export(m, values);

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "instance_id,variable,shap_value,feature_value,feature_value_rank");
    std::vector<std::vector<std::string>> parsed;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        while (fields.size() < 5) fields.emplace_back();
        parsed.push_back(fields);
    }
    REQUIRE(parsed.size() == 6);  // 2 instances x 3 variables

    // Re-import reproduces every attribution exactly.
    std::size_t k = 0;
    for (const auto& row : m.rows) {
        for (std::size_t v = 0; v < m.names.size(); ++v, ++k) {
            CHECK(parsed[k][0] == std::to_string(row.instance_id));
            CHECK(parsed[k][1] == m.names[v]);
            CHECK(std::stod(parsed[k][2]) == row.phi[v]);
        }
    }
    CHECK(parsed[2][3].empty());  // absent sex value
    CHECK(parsed[2][4].empty());  // and no rank for it
    CHECK(parsed[5][3] == "1");   // observed category written as its code
    CHECK(std::stod(parsed[0][4]) == 0.0);  // age 34 ranks below age 36
    CHECK(std::stod(parsed[3][4]) == 1.0);

    std::vector<std::vector<Cell>> short_values{values[0]};
    CHECK_THROWS_AS(shap_summary_export(m, short_values), DataError);
}
