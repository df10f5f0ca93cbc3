#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "ctxrec/error.hpp"
#include "ctxrec/ingest.hpp"
#include "ctxrec/ontology.hpp"
#include "ctxrec/rng.hpp"
#include "ctxrec/sensors.hpp"
#include "test_support.hpp"

using namespace ctxrec;

namespace {

constexpr int64_t kMin = 60'000;  // one minute in ms

std::string acceleration_line(const std::string& user, int64_t ts, double x, double y,
                              double z) {
    return user + ",acceleration," + std::to_string(ts) + "," + std::to_string(x) + ";" +
           std::to_string(y) + ";" + std::to_string(z) + "\n";
}

// One annotation row per (user, t); header included.
std::string annotation_table(const std::vector<std::string>& rows) {
    std::string text = "user,ts_ms,we,wa,wo\n";
    for (const auto& r : rows) text += r + "\n";
    return text;
}

std::vector<SensorReading> accel_at(const std::string& user,
                                    const std::vector<int64_t>& stamps) {
    std::string log;
    for (int64_t ts : stamps) log += acceleration_line(user, ts, 0, 0, 0);
    return parse_sensor_log(log, default_catalog(), true);
}

}  // namespace

TEST_CASE("a well-formed acceleration line parses into one three-value reading") {
    const auto readings =
        parse_sensor_log("u0,acceleration,1000,0.1;9.8;0.2\n", default_catalog(), true);
    REQUIRE(readings.size() == 1);
    CHECK(readings[0].user == "u0");
    CHECK(readings[0].sensor == "acceleration");
    CHECK(readings[0].ts_ms == 1000);
    CHECK(readings[0].values == std::vector<double>{0.1, 9.8, 0.2});
    CHECK_FALSE(readings[0].symbolic);
}

TEST_CASE("a binary sensor rejects values outside 0/1") {
    CHECK_THROWS_WITH_AS(parse_sensor_log("u0,proximity,1000,2\n", default_catalog(), true),
                         doctest::Contains("arity/domain mismatch"), Error);
    // Same line in non-strict mode: skipped and counted, not fatal.
    ParseStats stats;
    const auto readings =
        parse_sensor_log("u0,proximity,1000,2\nu0,proximity,2000,1\n", default_catalog(),
                         false, &stats);
    CHECK(readings.size() == 1);
    CHECK(stats.skipped == 1);
}

TEST_CASE("unknown sensors are skipped and counted in non-strict mode") {
    const std::string log =
        "u0,acceleration,1000,0;0;0\n"
        "u0,flux_capacitor,1500,88\n"
        "u0,acceleration,2000,0;0;0\n";
    ParseStats stats;
    const auto readings = parse_sensor_log(log, default_catalog(), false, &stats);
    CHECK(readings.size() == 2);
    CHECK(stats.skipped == 1);
    CHECK_THROWS_WITH_AS(parse_sensor_log(log, default_catalog(), true),
                         doctest::Contains("unknown sensor"), Error);
}

TEST_CASE("malformed lines abort with their line number in any mode") {
    const std::string log = "u0,acceleration,1000,0;0;0\nu0,acceleration\n";
    CHECK_THROWS_WITH_AS(parse_sensor_log(log, default_catalog(), false),
                         doctest::Contains("line 2"), Error);
}

TEST_CASE("readings come back in timestamp order per user") {
    const std::string log =
        "u0,acceleration,3000,0;0;0\n"
        "u0,acceleration,1000,0;0;0\n"
        "u0,acceleration,2000,0;0;0\n";
    const auto readings = parse_sensor_log(log, default_catalog(), true);
    REQUIRE(readings.size() == 3);
    CHECK(readings[0].ts_ms == 1000);
    CHECK(readings[2].ts_ms == 3000);
}

TEST_CASE("one annotation claims the readings of its half-hour") {
    std::vector<int64_t> stamps;
    for (int64_t m = 0; m < 10; ++m) stamps.push_back(m * kMin);
    const auto readings = accel_at("u0", stamps);
    const auto annotations =
        read_annotations(annotation_table({"u0,0,home,study,alone"}));
    const auto windows = window_records(readings, annotations);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].readings.size() == 10);
    CHECK(windows[0].wa == "study");
}

TEST_CASE("a reading after the window is dropped") {
    const auto readings = accel_at("u0", {31 * kMin});
    const auto annotations =
        read_annotations(annotation_table({"u0,0,home,study,alone"}));
    WindowStats stats;
    const auto windows = window_records(readings, annotations, kDefaultWindowMs, &stats);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].readings.empty());
    CHECK(stats.dropped == 1);
}

TEST_CASE("a reading exactly on the right edge belongs to the next window") {
    const auto readings = accel_at("u0", {30 * kMin});
    const auto annotations = read_annotations(
        annotation_table({"u0,0,home,study,alone", "u0,1800000,home,work,alone"}));
    const auto windows = window_records(readings, annotations);
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].readings.empty());
    CHECK(windows[1].readings.size() == 1);
}

TEST_CASE("two adjacent annotations split an hour of readings evenly") {
    std::vector<int64_t> stamps;
    for (int64_t m = 0; m < 60; m += 5) stamps.push_back(m * kMin);  // 12 readings
    const auto readings = accel_at("u0", stamps);
    const auto annotations = read_annotations(
        annotation_table({"u0,0,home,study,alone", "u0,1800000,campus,lesson,classmate"}));
    const auto windows = window_records(readings, annotations);
    REQUIRE(windows.size() == 2);

    // Interval-assignment oracle: a reading goes to the window whose
    // half-open range contains it.
    for (const auto& w : windows) {
        for (const SensorReading* r : w.readings) {
            CHECK(w.start_ms <= r->ts_ms);
            CHECK(r->ts_ms < w.end_ms);
        }
    }
    CHECK(windows[0].readings.size() == 6);
    CHECK(windows[1].readings.size() == 6);
}

TEST_CASE("a closer next annotation truncates the window with a count") {
    const auto readings = accel_at("u0", {5 * kMin, 20 * kMin});
    const auto annotations = read_annotations(
        annotation_table({"u0,0,home,study,alone", "u0,900000,home,work,alone"}));
    WindowStats stats;
    const auto windows = window_records(readings, annotations, kDefaultWindowMs, &stats);
    REQUIRE(windows.size() == 2);
    CHECK(stats.truncated == 1);
    CHECK(windows[0].end_ms == 15 * kMin);
    CHECK(windows[0].readings.size() == 1);  // 5 min
    CHECK(windows[1].readings.size() == 1);  // 20 min, claimed by the later window
}

TEST_CASE("every reading lands in at most one window") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int64_t> stamps;
        for (int i = 0; i < 40; ++i)
            stamps.push_back(static_cast<int64_t>(rng.next_below(120)) * kMin);
        std::sort(stamps.begin(), stamps.end());
        const auto readings = accel_at("u0", stamps);

        std::vector<std::string> rows;
        int64_t t = 0;
        for (int a = 0; a < 4; ++a) {
            t += static_cast<int64_t>(1 + rng.next_below(40)) * kMin;
            rows.push_back("u0," + std::to_string(t) + ",home,study,alone");
        }
        const auto annotations = read_annotations(annotation_table(rows));
        WindowStats stats;
        const auto windows = window_records(readings, annotations, kDefaultWindowMs, &stats);

        size_t claimed = 0;
        for (const auto& w : windows) claimed += w.readings.size();
        CHECK(claimed + stats.dropped == readings.size());
        std::set<const SensorReading*> seen;
        for (const auto& w : windows)
            for (const SensorReading* r : w.readings) CHECK(seen.insert(r).second);
    }
}

TEST_CASE("annotations must be strictly increasing per user") {
    CHECK_THROWS_WITH_AS(
        read_annotations(annotation_table({"u0,1000,h,s,a", "u0,1000,h,s,a"})),
        doctest::Contains("strictly increasing"), Error);
    // Interleaved users are fine; only the per-user order matters.
    const auto events = read_annotations(
        annotation_table({"u0,1000,h,s,a", "u1,500,h,s,a", "u0,2000,h,s,a"}));
    CHECK(events.size() == 3);
}

TEST_CASE("annotations validate against the ontology when one is given") {
    const Ontology o = load_ontology_file(source_path("data/ontology.json"), true);
    CHECK(read_annotations(annotation_table({"u0,0,classroom,study,friend"}), &o).size() == 1);
    CHECK_THROWS_WITH_AS(
        read_annotations(annotation_table({"u0,0,classroom,swimming,friend"}), &o),
        doctest::Contains("not in WA vocabulary"), Error);
}

TEST_CASE("a constant channel yields zero standard deviation") {
    FeatureRecipe recipe;
    recipe.entries = {{"acceleration", 0, Aggregate::Std},
                      {"acceleration", 1, Aggregate::Std},
                      {"acceleration", 2, Aggregate::Std}};
    const auto readings = accel_at("u0", {0, kMin, 2 * kMin});
    Window w{"u0", 0, kDefaultWindowMs, {}, "h", "s", "a"};
    for (const auto& r : readings) w.readings.push_back(&r);

    std::vector<double> features;
    std::vector<uint8_t> missing;
    extract_features(w, default_catalog(), recipe, features, missing);
    CHECK(features == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(missing == std::vector<uint8_t>{0, 0, 0});
}

TEST_CASE("mean, min, max, and count aggregate a numeric channel") {
    FeatureRecipe recipe;
    recipe.entries = {{"temperature", 0, Aggregate::Mean},
                      {"temperature", 0, Aggregate::Min},
                      {"temperature", 0, Aggregate::Max},
                      {"temperature", 0, Aggregate::Count}};
    const auto readings = parse_sensor_log(
        "u0,temperature,0,1\nu0,temperature,60000,2\nu0,temperature,120000,3\n",
        default_catalog(), true);
    Window w{"u0", 0, kDefaultWindowMs, {}, "h", "s", "a"};
    for (const auto& r : readings) w.readings.push_back(&r);

    std::vector<double> features;
    std::vector<uint8_t> missing;
    extract_features(w, default_catalog(), recipe, features, missing);
    CHECK(features == std::vector<double>{2.0, 1.0, 3.0, 3.0});
}

TEST_CASE("an empty window masks every feature") {
    const FeatureRecipe recipe = default_recipe();
    Window w{"u0", 0, kDefaultWindowMs, {}, "h", "s", "a"};
    std::vector<double> features;
    std::vector<uint8_t> missing;
    extract_features(w, default_catalog(), recipe, features, missing);
    CHECK(features.size() == recipe.width());
    CHECK(std::all_of(missing.begin(), missing.end(), [](uint8_t m) { return m == 1; }));
}

TEST_CASE("order-free aggregates ignore reading order") {
    // Integer values keep the floating-point sums exact, so a reordered
    // window must reproduce every aggregate bit for bit.
    const FeatureRecipe recipe = default_recipe();
    auto readings = parse_sensor_log(
        "u0,temperature,0,5\nu0,temperature,60000,1\nu0,temperature,120000,9\n"
        "u0,acceleration,0,1;2;3\nu0,acceleration,60000,4;5;6\n",
        default_catalog(), true);

    Window w{"u0", 0, kDefaultWindowMs, {}, "h", "s", "a"};
    for (const auto& r : readings) w.readings.push_back(&r);
    std::vector<double> straight, shuffled;
    std::vector<uint8_t> missing;
    extract_features(w, default_catalog(), recipe, straight, missing);

    Rng rng(3);
    rng.shuffle(w.readings);
    extract_features(w, default_catalog(), recipe, shuffled, missing);
    CHECK(shuffled == straight);
}

TEST_CASE("the default recipe spans 122 feature columns") {
    const FeatureRecipe recipe = default_recipe();
    CHECK(recipe.width() == 122);
    CHECK(recipe.column_names().size() == 122);
    // The shipped recipe file matches the built-in definition.
    const FeatureRecipe from_file =
        load_recipe_file(source_path("data/recipe_default.json"), default_catalog());
    CHECK(from_file.column_names() == recipe.column_names());
}

TEST_CASE("recipes reject unknown sensors and misapplied aggregates") {
    SUBCASE("unknown sensor") {
        FeatureRecipe r;
        r.entries = {{"flux_capacitor", 0, Aggregate::Mean}};
        CHECK_THROWS_WITH_AS(r.validate(default_catalog()),
                             doctest::Contains("unknown sensor"), Error);
    }
    SUBCASE("numeric aggregate over a symbolic channel") {
        FeatureRecipe r;
        r.entries = {{"running_app", 0, Aggregate::Mean}};
        CHECK_THROWS_WITH_AS(r.validate(default_catalog()),
                             doctest::Contains("needs a numeric sensor"), Error);
    }
    SUBCASE("component out of range") {
        FeatureRecipe r;
        r.entries = {{"temperature", 1, Aggregate::Mean}};
        CHECK_THROWS_WITH_AS(r.validate(default_catalog()),
                             doctest::Contains("out of range"), Error);
    }
}

TEST_CASE("build_dataset keeps one fixed-width record per annotation") {
    std::string log;
    for (int64_t m = 0; m < 60; ++m) log += acceleration_line("u0", m * kMin, 0.1, 0.2, 0.3);
    const auto readings = parse_sensor_log(log, default_catalog(), true);
    const auto annotations = read_annotations(
        annotation_table({"u0,0,home,study,alone", "u0,1800000,campus,lesson,classmate"}));
    const Dataset ds = build_dataset(readings, annotations, default_catalog(),
                                     default_recipe());
    CHECK(ds.width() == 122);
    REQUIRE(ds.records.size() == 2);
    for (const Record& r : ds.records) {
        CHECK(r.features.size() == ds.width());
        CHECK(r.missing.size() == ds.width());
    }
    CHECK(ds.records[0].we == "home");
    CHECK(ds.records[1].wa == "lesson");
}

TEST_CASE("imputation fills a masked entry with the column median") {
    Dataset ds;
    ds.feature_names = {"a"};
    ds.records = {Record{"u0", 0, {1.0}, {0}, "h", "s", "a"},
                  Record{"u0", 1, {99.0}, {1}, "h", "s", "a"},
                  Record{"u0", 2, {3.0}, {0}, "h", "s", "a"}};
    const Imputer imp = fit_imputer(ds, {0, 1, 2});
    CHECK(imp.medians == std::vector<double>{2.0});  // median of {1, 3}
    const Dataset out = impute(ds, imp);
    CHECK(out.records[1].features[0] == 2.0);
    CHECK(out.records[0].features[0] == 1.0);  // unmasked values never change
    CHECK(out.records[2].features[0] == 3.0);
    for (const Record& r : out.records)
        CHECK(std::all_of(r.missing.begin(), r.missing.end(),
                          [](uint8_t m) { return m == 0; }));
}

TEST_CASE("imputing a gapless dataset changes nothing") {
    Dataset ds;
    ds.feature_names = {"a", "b"};
    ds.records = {Record{"u0", 0, {1.0, 2.0}, {0, 0}, "h", "s", "a"},
                  Record{"u0", 1, {3.0, 4.0}, {0, 0}, "h", "s", "a"}};
    CHECK(impute(ds, fit_imputer(ds, {0, 1})) == ds);
}

TEST_CASE("test rows take the median fitted on training rows") {
    Dataset ds;
    ds.feature_names = {"a"};
    // Rows 0-2 are the training split (median 20); row 3 is a masked test row.
    ds.records = {Record{"u0", 0, {10.0}, {0}, "h", "s", "a"},
                  Record{"u0", 1, {20.0}, {0}, "h", "s", "a"},
                  Record{"u0", 2, {30.0}, {0}, "h", "s", "a"},
                  Record{"u1", 3, {777.0}, {1}, "h", "s", "a"}};
    const Imputer imp = fit_imputer(ds, {0, 1, 2});
    CHECK(impute(ds, imp).records[3].features[0] == 20.0);
}

TEST_CASE("a column with no observed value in the fitting split names itself") {
    Dataset ds;
    ds.feature_names = {"a", "lonely"};
    ds.records = {Record{"u0", 0, {1.0, 0.0}, {0, 1}, "h", "s", "a"},
                  Record{"u0", 1, {2.0, 5.0}, {0, 0}, "h", "s", "a"}};
    CHECK_THROWS_WITH_AS(fit_imputer(ds, {0}), doctest::Contains("lonely"), Error);
    CHECK(fit_imputer(ds, {0, 1}).medians[1] == 5.0);  // row 1 makes it fittable
}

TEST_CASE("the mask can be kept as appended binary columns") {
    Dataset ds;
    ds.feature_names = {"a"};
    ds.records = {Record{"u0", 0, {1.0}, {1}, "h", "s", "a"},
                  Record{"u0", 1, {4.0}, {0}, "h", "s", "a"}};
    const Dataset out = impute(ds, fit_imputer(ds, {1}), ImputePolicy{true});
    REQUIRE(out.width() == 2);
    CHECK(out.feature_names[1] == "a_was_missing");
    CHECK(out.records[0].features == std::vector<double>{4.0, 1.0});
    CHECK(out.records[1].features == std::vector<double>{4.0, 0.0});
}
