#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "ctxrec/error.hpp"
#include "ctxrec/forest.hpp"
#include "ctxrec/metrics.hpp"
#include "ctxrec/rng.hpp"
#include "ctxrec/synth.hpp"
#include "split_oracle.hpp"

using namespace ctxrec;

namespace {

Matrix make_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
    return m;
}

// Deterministic single tree: no bagging, every feature a candidate.
ForestParams single_tree(size_t width, int max_depth = 0) {
    ForestParams p;
    p.trees = 1;
    p.bootstrap = false;
    p.max_features = width;
    p.max_depth = max_depth;
    p.seed = 5;
    return p;
}

double train_accuracy(const RandomForest& f, const Matrix& x,
                      const std::vector<uint32_t>& y) {
    size_t correct = 0;
    for (size_t i = 0; i < x.rows; ++i)
        if (predict(f, x.row(i), x.cols).label == y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(x.rows);
}

// Four points on a diagonal, outer class flanking an inner pair: neither
// feature separates the classes with one threshold, but peeling one outer
// point has positive Gini gain, so a two-level tree fits exactly.
struct DiagonalSet {
    Matrix x = make_matrix({{0, 3}, {1, 2}, {2, 1}, {3, 0}});
    std::vector<uint32_t> y = {0, 1, 1, 0};
};

// Maps synth label strings onto dense indices (sorted order).
struct Encoded {
    Matrix x;
    std::vector<uint32_t> y;
    std::vector<std::string> vocab;
};

template <typename Field>
Encoded encode(const Dataset& ds, Field field) {
    Encoded e;
    std::set<std::string> seen;
    for (const Record& r : ds.records) seen.insert(r.*field);
    e.vocab.assign(seen.begin(), seen.end());
    e.x = Matrix(ds.records.size(), ds.width());
    e.y.reserve(ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i) {
        std::copy(ds.records[i].features.begin(), ds.records[i].features.end(),
                  e.x.row(i));
        const auto it = std::lower_bound(e.vocab.begin(), e.vocab.end(),
                                         ds.records[i].*field);
        e.y.push_back(static_cast<uint32_t>(it - e.vocab.begin()));
    }
    return e;
}

GeneratorParams forest_bench(double rho, uint64_t seed = 29) {
    GeneratorParams p;
    p.users = 6;
    p.records_per_user = 120;
    p.we_labels = 4;
    p.wa_labels = 5;
    p.wo_labels = 3;
    p.rho = rho;
    p.feature_width = 10;
    p.prototype_scale = 2.0;
    p.noise_scale = 1.0;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("gini impurity matches hand-computed values") {
    CHECK(gini({10, 0}) == 0.0);
    CHECK(gini({5, 5}) == 0.5);
    CHECK(gini({2, 2, 2}) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_WITH_AS(gini({}), doctest::Contains("gini"), Error);
    CHECK_THROWS_WITH_AS(gini({0, 0}), doctest::Contains("gini"), Error);
}

TEST_CASE("two separable points split at their midpoint") {
    const Matrix x = make_matrix({{0}, {1}});
    const TrainingData data = TrainingData::from_rows(x, {0, 1}, 2);
    const auto split = best_split(data, {0, 1}, {0});
    REQUIRE(split.has_value());
    CHECK(split->feature == 0);
    CHECK(split->threshold == 0.5);
    CHECK(split->weighted_impurity == 0.0);
}

TEST_CASE("identical feature rows with mixed labels admit no split") {
    const Matrix x = make_matrix({{3, 7}, {3, 7}, {3, 7}});
    const TrainingData data = TrainingData::from_rows(x, {0, 1, 0}, 2);
    CHECK_FALSE(best_split(data, {0, 1, 2}, {0, 1}).has_value());
}

TEST_CASE("equally good features tie toward the lower index") {
    // Column 1 duplicates column 0, so both yield the same impurity.
    const Matrix x = make_matrix({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
    const TrainingData data = TrainingData::from_rows(x, {0, 0, 1, 1}, 2);
    const auto split = best_split(data, {0, 1, 2, 3}, {0, 1});
    REQUIRE(split.has_value());
    CHECK(split->feature == 0);
    CHECK(split->threshold == 1.5);
}

TEST_CASE("a zero-gain split is declined, not taken") {
    // The symmetric two-by-two grid: every single-feature split leaves both
    // children at the parent's impurity, so the greedy grower stops at the
    // root rather than fitting the checkerboard.
    const Matrix x = make_matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    const std::vector<uint32_t> y = {0, 1, 1, 0};
    const RandomForest f = train_forest(x, y, {"A", "B"}, single_tree(2));
    REQUIRE(f.trees[0].nodes.size() == 1);
    CHECK(f.trees[0].nodes[0].counts == std::vector<uint32_t>{2, 2});
}

TEST_CASE("a diagonal class pattern fits exactly with a two-level tree") {
    const DiagonalSet s;
    const RandomForest f = train_forest(s.x, s.y, {"A", "B"}, single_tree(2));
    CHECK(train_accuracy(f, s.x, s.y) == 1.0);
    const DecisionTree& t = f.trees[0];
    CHECK(t.depth() == 2);
    // Hand-checked shape: peel the left outer point, then split off the pair.
    REQUIRE(t.nodes.size() == 5);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 0.5);
    CHECK(t.nodes[2].feature == 0);
    CHECK(t.nodes[2].threshold == 2.5);
}

TEST_CASE("a depth-1 stump cannot fit the diagonal pattern") {
    const DiagonalSet s;
    const RandomForest f = train_forest(s.x, s.y, {"A", "B"}, single_tree(2, 1));
    CHECK(f.trees[0].depth() <= 1);
    CHECK(train_accuracy(f, s.x, s.y) <= 0.75);
}

TEST_CASE("pure labels collapse to a single leaf") {
    const Matrix x = make_matrix({{0}, {1}, {2}});
    const RandomForest f = train_forest(x, {1, 1, 1}, {"A", "B"}, single_tree(1));
    REQUIRE(f.trees[0].nodes.size() == 1);
    CHECK(f.trees[0].nodes[0].is_leaf());
    CHECK(f.trees[0].nodes[0].counts == std::vector<uint32_t>{0, 3});
}

TEST_CASE("min_samples_split stops small nodes before the split search") {
    const Matrix x = make_matrix({{0}, {1}});
    ForestParams p = single_tree(1);
    p.min_samples_split = 3;
    const RandomForest f = train_forest(x, {0, 1}, {"A", "B"}, p);
    CHECK(f.trees[0].nodes.size() == 1);
}

TEST_CASE("training is deterministic across runs and worker counts") {
    const GeneratorParams gp = forest_bench(0.8);
    const Encoded e = encode(sample_dataset(gp), &Record::we);
    ForestParams p;
    p.trees = 12;
    p.seed = 99;
    const RandomForest a = train_forest(e.x, e.y, e.vocab, p, 1);
    const RandomForest b = train_forest(e.x, e.y, e.vocab, p, 3);
    CHECK(a == b);
    CHECK(serialize_forest(a) == serialize_forest(b));
    for (size_t t = 0; t < p.trees; ++t) CHECK(a.tree_seeds[t] == mix_seed(p.seed, t));

    ForestParams reseeded = p;
    reseeded.seed = 100;
    CHECK_FALSE(train_forest(e.x, e.y, e.vocab, reseeded) == a);
}

TEST_CASE("a bagged forest memorizes training data better than it generalizes") {
    // Low signal-to-noise keeps held-out accuracy well under the memorized
    // training score, so the gap cannot saturate away.
    GeneratorParams gp = forest_bench(0.8);
    gp.prototype_scale = 1.0;
    gp.noise_scale = 2.0;
    const Dataset ds = sample_dataset(gp);
    const Encoded e = encode(ds, &Record::we);

    // Shuffled 75/25 split of the encoded rows.
    std::vector<size_t> order(e.x.rows);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng(31).shuffle(order);
    const size_t n_train = order.size() * 3 / 4;

    Matrix train_x(n_train, e.x.cols), test_x(order.size() - n_train, e.x.cols);
    std::vector<uint32_t> train_y, test_y;
    for (size_t i = 0; i < order.size(); ++i) {
        const double* src = e.x.row(order[i]);
        if (i < n_train) {
            std::copy(src, src + e.x.cols, train_x.row(train_y.size()));
            train_y.push_back(e.y[order[i]]);
        } else {
            std::copy(src, src + e.x.cols, test_x.row(test_y.size()));
            test_y.push_back(e.y[order[i]]);
        }
    }

    ForestParams p;
    p.trees = 100;
    p.seed = 3;
    const RandomForest f = train_forest(train_x, train_y, e.vocab, p);
    const double train_f1 = micro_f1(train_y, predict_labels(f, train_x));
    const double test_f1 = micro_f1(test_y, predict_labels(f, test_x));
    CHECK(train_f1 > test_f1);
    CHECK(train_f1 > 0.8);  // unlimited depth all but memorizes
}

TEST_CASE("noise-free label prototypes are learned perfectly") {
    GeneratorParams gp = forest_bench(0.5);
    gp.noise_scale = 0.0;
    const Encoded e = encode(sample_dataset(gp), &Record::we);
    ForestParams p = single_tree(e.x.cols);
    p.trees = 3;
    const RandomForest f = train_forest(e.x, e.y, e.vocab, p);
    CHECK(train_accuracy(f, e.x, e.y) == 1.0);
}

TEST_CASE("distinct feature rows are always fit exactly by one unlimited tree") {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const size_t n = 5 + rng.next_below(40), d = 2;
        Matrix x(n, d);
        std::vector<uint32_t> y;
        for (size_t i = 0; i < n; ++i) {
            x.at(i, 0) = static_cast<double>(i);  // guarantees distinct rows
            x.at(i, 1) = static_cast<double>(rng.next_below(3));
            y.push_back(static_cast<uint32_t>(rng.next_below(3)));
        }
        const RandomForest f = train_forest(x, y, {"a", "b", "c"}, single_tree(d));
        CHECK(train_accuracy(f, x, y) == 1.0);
    }
}

TEST_CASE("prediction semantics: pure leaves, ties, widths, vote shares") {
    RandomForest f;
    f.vocab = {"a", "b"};
    f.feature_width = 1;
    TreeNode leaf_b;
    leaf_b.counts = {0, 3};
    f.trees.push_back(DecisionTree{{leaf_b}});

    const double x = 0.0;
    SUBCASE("a single pure leaf votes with fraction 1.0") {
        const Prediction pred = predict(f, &x, 1);
        CHECK(pred.label == 1);
        CHECK(pred.fractions == std::vector<double>{0.0, 1.0});
    }
    SUBCASE("an equal two-tree tie goes to the lower label index") {
        TreeNode leaf_a;
        leaf_a.counts = {5, 0};  // normalized, so 5 votes count like 3
        f.trees.push_back(DecisionTree{{leaf_a}});
        const Prediction pred = predict(f, &x, 1);
        CHECK(pred.label == 0);
        CHECK(pred.fractions == std::vector<double>{0.5, 0.5});
    }
    SUBCASE("a width mismatch is rejected") {
        CHECK_THROWS_WITH_AS(predict(f, &x, 2), doctest::Contains("width mismatch"),
                             Error);
    }
}

TEST_CASE("vote fractions always sum to one") {
    const Encoded e = encode(sample_dataset(forest_bench(0.8)), &Record::wa);
    ForestParams p;
    p.trees = 9;
    p.seed = 12;
    const RandomForest f = train_forest(e.x, e.y, e.vocab, p);
    for (size_t i = 0; i < std::min<size_t>(e.x.rows, 200); ++i) {
        const Prediction pred = predict(f, e.x.row(i), e.x.cols);
        double sum = 0.0;
        for (double v : pred.fractions) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("replicating every tree rescales votes without moving the argmax") {
    const Encoded e = encode(sample_dataset(forest_bench(0.8)), &Record::we);
    ForestParams p;
    p.trees = 7;
    p.seed = 4;
    RandomForest f = train_forest(e.x, e.y, e.vocab, p);
    RandomForest tripled = f;
    for (int copy = 0; copy < 2; ++copy)
        tripled.trees.insert(tripled.trees.end(), f.trees.begin(), f.trees.end());
    CHECK(predict_labels(f, e.x) == predict_labels(tripled, e.x));
}

TEST_CASE("a serialized forest survives the round trip") {
    const Encoded e = encode(sample_dataset(forest_bench(0.8)), &Record::wo);
    ForestParams p;
    p.trees = 8;
    p.max_depth = 6;
    p.bootstrap_fraction = 0.7;
    p.seed = 77;
    const RandomForest f = train_forest(e.x, e.y, e.vocab, p);

    const std::string text = serialize_forest(f);
    const RandomForest back = parse_forest(text);
    CHECK(back == f);
    CHECK(serialize_forest(back) == text);

    // Parsed and original model agree on inputs they never saw.
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> probe(e.x.cols);
        for (double& v : probe) v = 10.0 * rng.next_double() - 5.0;
        const Prediction a = predict(f, probe.data(), probe.size());
        const Prediction b = predict(back, probe.data(), probe.size());
        CHECK(a.label == b.label);
        CHECK(a.fractions == b.fractions);
    }
}

TEST_CASE("a model file from a different format version fails loudly") {
    const Matrix x = make_matrix({{0}, {1}});
    const RandomForest f = train_forest(x, {0, 1}, {"A", "B"}, single_tree(1));
    std::string text = serialize_forest(f);
    const size_t eol = text.find('\n');
    REQUIRE(eol != std::string::npos);
    text.replace(0, eol, "ctxrec-forest v2");
    CHECK_THROWS_WITH_AS(parse_forest(text), doctest::Contains("version mismatch"), Error);
}

TEST_CASE("depth tuning follows validation score with smallest-depth ties") {
    // Two well-separated clusters: any depth fits them, so everything ties.
    Matrix x(8, 1);
    std::vector<uint32_t> y;
    for (size_t i = 0; i < 8; ++i) {
        x.at(i, 0) = i < 4 ? 0.0 : 10.0;
        y.push_back(i < 4 ? 0 : 1);
    }
    ForestParams p;
    p.trees = 3;
    p.seed = 2;
    SUBCASE("all-tie grid returns its smallest depth") {
        CHECK(tune_depth(x, y, 2, {8, 2, 4}, p, 21) == 2);
    }
    SUBCASE("unlimited depth counts as the largest, so it loses ties") {
        CHECK(tune_depth(x, y, 2, {0, 4}, p, 21) == 4);
    }
    SUBCASE("a singleton grid needs no search") {
        CHECK(tune_depth(x, y, 2, {1}, p, 21) == 1);
    }
    SUBCASE("an empty grid is a configuration error") {
        CHECK_THROWS_WITH_AS(tune_depth(x, y, 2, {}, p, 21),
                             doctest::Contains("empty depth grid"), Error);
    }
    SUBCASE("fewer than four rows cannot be split 75/25") {
        Matrix tiny(3, 1);
        CHECK_THROWS_WITH_AS(tune_depth(tiny, {0, 1, 0}, 2, {2, 4}, p, 21),
                             doctest::Contains("at least 4 rows"), Error);
    }
}

TEST_CASE("depth tuning rejects stumps on structured three-aspect data") {
    const Encoded e = encode(sample_dataset(forest_bench(0.8)), &Record::wa);
    ForestParams p;
    p.trees = 15;
    p.seed = 6;
    CHECK(tune_depth(e.x, e.y, e.vocab.size(), {1, 2, 4, 8, 16}, p, 33) > 1);
}

TEST_CASE("the stock depth grid is ordered and ends with unlimited") {
    CHECK(kDefaultDepthGrid == std::vector<int>{2, 4, 6, 8, 12, 16, 24, 0});
}

TEST_CASE("parameter validation rejects out-of-range settings") {
    ForestParams p;
    SUBCASE("zero trees") {
        p.trees = 0;
        CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("at least 1"), Error);
    }
    SUBCASE("negative depth") {
        p.max_depth = -1;
        CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("max_depth"), Error);
    }
    SUBCASE("bootstrap fraction outside (0, 1]") {
        p.bootstrap_fraction = 0.0;
        CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("(0, 1]"), Error);
        p.bootstrap_fraction = 1.5;
        CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("(0, 1]"), Error);
    }
    SUBCASE("min samples below two") {
        p.min_samples_split = 1;
        CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("at least 2"), Error);
    }
}

TEST_CASE("grown trees match an exhaustive split search node for node") {
    Rng rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        const oracle::RandomCase c = oracle::random_case(rng, 40, 4);
        const RandomForest f = train_forest(
            c.x, c.y, std::vector<std::string>(c.classes, "-"), single_tree(c.x.cols));
        const TrainingData data = TrainingData::from_rows(c.x, c.y, c.classes);
        const std::string failure = oracle::check_tree(f.trees[0], data);
        CAPTURE(trial);
        CHECK_MESSAGE(failure.empty(), failure);
    }
}
