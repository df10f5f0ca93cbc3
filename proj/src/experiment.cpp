#include "ctxrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "ctxrec/error.hpp"
#include "ctxrec/ingest.hpp"
#include "ctxrec/rng.hpp"

namespace ctxrec {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Protocol protocol) {
    switch (protocol) {
        case Protocol::Cv5:
            return "cv5";
        case Protocol::Nested:
            return "nested";
    }
    throw Error::internal("unknown protocol value");
}

Protocol parse_protocol(const std::string& text) {
    if (text == "cv5") {
        return Protocol::Cv5;
    }
    if (text == "nested") {
        return Protocol::Nested;
    }
    throw Error::config("unknown protocol '" + text + "' (expected cv5 or nested)");
}

namespace {

bool is_label_aspect(AspectId aspect) {
    return aspect == AspectId::We || aspect == AspectId::Wa || aspect == AspectId::Wo;
}

const std::string& record_label(const Record& record, AspectId aspect) {
    switch (aspect) {
        case AspectId::We:
            return record.we;
        case AspectId::Wa:
            return record.wa;
        case AspectId::Wo:
            return record.wo;
        default:
            throw Error::internal("aspect carries no dataset label column");
    }
}

std::vector<AspectId> normalized_inputs(const std::vector<AspectId>& inputs) {
    std::vector<AspectId> sorted(inputs);
    std::sort(sorted.begin(), sorted.end());
    return sorted;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (!is_label_aspect(target)) {
        throw Error::config("experiment: target must be one of WE, WA, WO");
    }
    for (AspectId aspect : inputs) {
        if (!is_label_aspect(aspect)) {
            throw Error::config("experiment: input aspects must be among WE, WA, WO");
        }
        if (aspect == target) {
            throw Error::config("experiment: target " + to_string(target) +
                                " cannot also be an input");
        }
    }
    std::vector<AspectId> sorted = normalized_inputs(inputs);
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error::config("experiment: duplicate input aspect");
    }
    if (depth_grid.empty()) {
        throw Error::config("experiment: empty depth grid");
    }
    for (int depth : depth_grid) {
        if (depth < 0) {
            throw Error::config("experiment: negative depth in grid");
        }
    }
    forest.validate();
}

bool ExperimentReport::operator==(const ExperimentReport& other) const {
    // runtime_seconds is informational and excluded on purpose: two runs of
    // the same spec are the same report.
    return spec == other.spec && micro == other.micro && user_mean == other.user_mean &&
           fold_f1 == other.fold_f1 && user_f1 == other.user_f1 &&
           label_f1 == other.label_f1 && depths == other.depths && digest == other.digest;
}

std::vector<double> one_hot(const std::string& label, const std::vector<std::string>& vocab) {
    const auto it = std::find(vocab.begin(), vocab.end(), label);
    if (it == vocab.end()) {
        throw Error::data("one-hot: label '" + label + "' not in vocabulary");
    }
    std::vector<double> encoded(vocab.size(), 0.0);
    encoded[static_cast<size_t>(it - vocab.begin())] = 1.0;
    return encoded;
}

std::vector<std::string> aspect_vocab(const Dataset& ds, AspectId aspect) {
    if (!is_label_aspect(aspect)) {
        throw Error::config("vocabulary: aspect " + to_string(aspect) +
                            " carries no recognition label");
    }
    std::vector<std::string> labels;
    for (size_t i = 0; i < ds.records.size(); ++i) {
        const std::string& label = record_label(ds.records[i], aspect);
        if (label.empty()) {
            throw Error::data("dataset: record " + std::to_string(i) + " has no " +
                              to_string(aspect) + " label");
        }
        labels.push_back(label);
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.empty()) {
        throw Error::data("dataset: no " + to_string(aspect) + " labels present");
    }
    return labels;
}

std::vector<double> augment(const Record& record, const std::vector<AspectId>& inputs,
                            const std::map<AspectId, std::vector<std::string>>& vocabs) {
    std::vector<double> features(record.features);
    for (AspectId aspect : normalized_inputs(inputs)) {
        const auto it = vocabs.find(aspect);
        if (it == vocabs.end()) {
            throw Error::internal("augment: no vocabulary for aspect " + to_string(aspect));
        }
        const std::vector<double> block = one_hot(record_label(record, aspect), it->second);
        features.insert(features.end(), block.begin(), block.end());
    }
    return features;
}

Matrix design_matrix(const Dataset& ds, const std::vector<AspectId>& inputs,
                     const std::map<AspectId, std::vector<std::string>>& vocabs) {
    size_t width = ds.width();
    const std::vector<AspectId> sorted = normalized_inputs(inputs);
    for (AspectId aspect : sorted) {
        const auto it = vocabs.find(aspect);
        if (it == vocabs.end()) {
            throw Error::internal("design matrix: no vocabulary for aspect " +
                                  to_string(aspect));
        }
        width += it->second.size();
    }
    Matrix x(ds.records.size(), width);
    for (size_t r = 0; r < ds.records.size(); ++r) {
        const std::vector<double> row = augment(ds.records[r], sorted, vocabs);
        if (row.size() != width) {
            throw Error::internal("design matrix: inconsistent row width");
        }
        std::copy(row.begin(), row.end(), x.row(r));
    }
    return x;
}

std::vector<uint32_t> kfold(size_t n, size_t k, uint64_t seed) {
    if (k < 2) {
        throw Error::config("kfold: need at least 2 folds");
    }
    if (n < k) {
        throw Error::data("kfold: fewer samples (" + std::to_string(n) + ") than folds (" +
                          std::to_string(k) + ")");
    }
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<uint32_t> fold(n, 0);
    const size_t base = n / k;
    const size_t remainder = n % k;
    size_t position = 0;
    for (size_t f = 0; f < k; ++f) {
        const size_t size = base + (f < remainder ? 1 : 0);
        for (size_t i = 0; i < size; ++i) {
            fold[order[position + i]] = static_cast<uint32_t>(f);
        }
        position += size;
    }
    return fold;
}

namespace {

constexpr size_t kFolds = 5;

Matrix gather_rows(const Matrix& x, const std::vector<uint32_t>& rows) {
    Matrix out(rows.size(), x.cols);
    for (size_t i = 0; i < rows.size(); ++i) {
        std::copy(x.row(rows[i]), x.row(rows[i]) + x.cols, out.row(i));
    }
    return out;
}

bool dataset_has_missing(const Dataset& ds) {
    for (const Record& record : ds.records) {
        for (uint8_t bit : record.missing) {
            if (bit) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

ExperimentReport run_experiment(const Dataset& ds, const ExperimentSpec& raw_spec,
                                int threads) {
    const auto started = std::chrono::steady_clock::now();

    ExperimentSpec spec = raw_spec;
    spec.inputs = normalized_inputs(spec.inputs);
    spec.validate();
    // The run seed is the single source of randomness; the forest seed is
    // normalized so the echoed spec describes what actually ran.
    spec.forest.seed = spec.seed;

    const size_t n = ds.records.size();
    if (n < 2 * kFolds) {
        throw Error::data("experiment: need at least " + std::to_string(2 * kFolds) +
                          " records, got " + std::to_string(n));
    }

    std::map<AspectId, std::vector<std::string>> vocabs;
    vocabs[spec.target] = aspect_vocab(ds, spec.target);
    for (AspectId aspect : spec.inputs) {
        vocabs[aspect] = aspect_vocab(ds, aspect);
    }
    const std::vector<std::string>& target_vocab = vocabs[spec.target];

    std::vector<uint32_t> y(n);
    std::vector<std::string> truth(n);
    for (size_t i = 0; i < n; ++i) {
        truth[i] = record_label(ds.records[i], spec.target);
        const auto it = std::lower_bound(target_vocab.begin(), target_vocab.end(), truth[i]);
        y[i] = static_cast<uint32_t>(it - target_vocab.begin());
    }

    const bool has_missing = dataset_has_missing(ds);
    const std::vector<uint32_t> fold_of = kfold(n, kFolds, mix_seed(spec.seed, "folds"));

    // Shared matrices for the common no-gaps case; with gaps each fold
    // rebuilds them from a dataset imputed on its own training split.
    Matrix shared_sensors;
    Matrix shared_augmented;
    if (!has_missing) {
        shared_sensors = design_matrix(ds, {}, {});
        shared_augmented = design_matrix(ds, spec.inputs, vocabs);
    }

    ForestParams tune_params = spec.forest;
    std::vector<int> depths;
    if (spec.protocol == Protocol::Cv5) {
        // One depth for every fold and arm of the study, picked on sensor
        // features alone so augmented and baseline runs stay comparable.
        Matrix tune_x;
        if (has_missing) {
            std::vector<size_t> all_rows(n);
            std::iota(all_rows.begin(), all_rows.end(), size_t{0});
            const Dataset imputed = impute(ds, fit_imputer(ds, all_rows));
            tune_x = design_matrix(imputed, {}, {});
        } else {
            tune_x = shared_sensors;
        }
        tune_params.seed = mix_seed(spec.seed, "tune");
        depths.push_back(tune_depth(tune_x, y, target_vocab.size(), spec.depth_grid,
                                    tune_params, mix_seed(spec.seed, "tune-split"), threads));
    }

    std::vector<uint32_t> predicted(n, 0);
    ExperimentReport report;
    report.fold_f1.resize(kFolds, 0.0);

    for (size_t f = 0; f < kFolds; ++f) {
        std::vector<uint32_t> train_rows;
        std::vector<uint32_t> test_rows;
        for (size_t i = 0; i < n; ++i) {
            (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<uint32_t>(i));
        }

        Matrix fold_sensors;
        Matrix fold_augmented;
        if (has_missing) {
            const std::vector<size_t> fit_rows(train_rows.begin(), train_rows.end());
            const Dataset imputed = impute(ds, fit_imputer(ds, fit_rows));
            if (spec.protocol == Protocol::Nested) {
                fold_sensors = design_matrix(imputed, {}, {});
            }
            fold_augmented = design_matrix(imputed, spec.inputs, vocabs);
        }
        const Matrix& sensors = has_missing ? fold_sensors : shared_sensors;
        const Matrix& augmented = has_missing ? fold_augmented : shared_augmented;

        std::vector<uint32_t> y_train(train_rows.size());
        for (size_t i = 0; i < train_rows.size(); ++i) {
            y_train[i] = y[train_rows[i]];
        }

        int fold_depth;
        if (spec.protocol == Protocol::Nested) {
            const uint64_t fold_seed = mix_seed(spec.seed, f);
            tune_params.seed = mix_seed(fold_seed, "tune");
            fold_depth = tune_depth(gather_rows(sensors, train_rows), y_train,
                                    target_vocab.size(), spec.depth_grid, tune_params,
                                    mix_seed(fold_seed, "tune-split"), threads);
            depths.push_back(fold_depth);
        } else {
            fold_depth = depths.front();
        }

        ForestParams fold_params = spec.forest;
        fold_params.max_depth = fold_depth;
        fold_params.seed = mix_seed(mix_seed(spec.seed, f), "forest");
        const RandomForest forest = train_forest(gather_rows(augmented, train_rows), y_train,
                                                 target_vocab, fold_params, threads);

        const std::vector<uint32_t> fold_predictions =
            predict_labels(forest, gather_rows(augmented, test_rows), threads);
        std::vector<uint32_t> y_test(test_rows.size());
        for (size_t i = 0; i < test_rows.size(); ++i) {
            y_test[i] = y[test_rows[i]];
            predicted[test_rows[i]] = fold_predictions[i];
        }
        report.fold_f1[f] = micro_f1(y_test, fold_predictions);
    }

    report.spec = spec;
    report.depths = depths;
    report.micro = micro_f1(y, predicted);

    std::vector<std::string> predicted_labels(n);
    for (size_t i = 0; i < n; ++i) {
        predicted_labels[i] = target_vocab[predicted[i]];
    }
    std::map<std::string, std::pair<std::vector<uint32_t>, std::vector<uint32_t>>> by_user;
    for (size_t i = 0; i < n; ++i) {
        auto& [u_truth, u_pred] = by_user[ds.records[i].user];
        u_truth.push_back(y[i]);
        u_pred.push_back(predicted[i]);
    }
    double sum = 0.0;
    for (const auto& [user, pair] : by_user) {
        const double score = micro_f1(pair.first, pair.second);
        report.user_f1.emplace(user, score);
        sum += score;
    }
    report.user_mean = sum / static_cast<double>(by_user.size());
    report.label_f1 = per_label_f1(truth, predicted_labels, target_vocab);
    report.digest = dataset_digest(ds);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string serialize_report(const ExperimentReport& report) {
    ordered_json spec;
    spec["target"] = to_string(report.spec.target);
    ordered_json inputs = ordered_json::array();
    for (AspectId aspect : report.spec.inputs) {
        inputs.push_back(to_string(aspect));
    }
    spec["inputs"] = inputs;
    spec["protocol"] = to_string(report.spec.protocol);
    spec["forest"] = {{"trees", report.spec.forest.trees},
                      {"max_depth", report.spec.forest.max_depth},
                      {"max_features", report.spec.forest.max_features},
                      {"bootstrap", report.spec.forest.bootstrap},
                      {"bootstrap_fraction", report.spec.forest.bootstrap_fraction},
                      {"min_samples_split", report.spec.forest.min_samples_split}};
    spec["depth_grid"] = report.spec.depth_grid;
    spec["seed"] = report.spec.seed;

    ordered_json j;
    j["spec"] = spec;
    j["micro_f1"] = report.micro;
    j["user_mean_f1"] = report.user_mean;
    j["fold_f1"] = report.fold_f1;
    j["user_f1"] = report.user_f1;
    ordered_json label_scores = ordered_json::object();
    ordered_json unsupported = ordered_json::array();
    for (const auto& [label, score] : report.label_f1) {
        label_scores[label] = score.f1;
        if (!score.supported) {
            unsupported.push_back(label);
        }
    }
    j["label_f1"] = {{"scores", label_scores}, {"unsupported", unsupported}};
    if (report.depths.size() == 1) {
        j["depth"] = report.depths.front();
    } else {
        j["depth"] = report.depths;
    }
    j["digest"] = report.digest;
    return j.dump(2) + "\n";
}

ExperimentReport parse_report(const std::string& text) {
    try {
        const ordered_json j = ordered_json::parse(text);
        ExperimentReport report;
        const ordered_json& spec = j.at("spec");
        report.spec.target = require_aspect(spec.at("target").get<std::string>());
        for (const auto& aspect : spec.at("inputs")) {
            report.spec.inputs.push_back(require_aspect(aspect.get<std::string>()));
        }
        report.spec.protocol = parse_protocol(spec.at("protocol").get<std::string>());
        const ordered_json& forest = spec.at("forest");
        report.spec.forest.trees = forest.at("trees").get<size_t>();
        report.spec.forest.max_depth = forest.at("max_depth").get<int>();
        report.spec.forest.max_features = forest.at("max_features").get<size_t>();
        report.spec.forest.bootstrap = forest.at("bootstrap").get<bool>();
        report.spec.forest.bootstrap_fraction = forest.at("bootstrap_fraction").get<double>();
        report.spec.forest.min_samples_split = forest.at("min_samples_split").get<size_t>();
        report.spec.depth_grid = spec.at("depth_grid").get<std::vector<int>>();
        report.spec.seed = spec.at("seed").get<uint64_t>();
        report.spec.forest.seed = report.spec.seed;

        report.micro = j.at("micro_f1").get<double>();
        report.user_mean = j.at("user_mean_f1").get<double>();
        report.fold_f1 = j.at("fold_f1").get<std::vector<double>>();
        for (const auto& [user, score] : j.at("user_f1").items()) {
            report.user_f1.emplace(user, score.get<double>());
        }
        const ordered_json& label_f1 = j.at("label_f1");
        for (const auto& [label, score] : label_f1.at("scores").items()) {
            LabelScore s;
            s.f1 = score.get<double>();
            report.label_f1.emplace(label, s);
        }
        for (const auto& label : label_f1.at("unsupported")) {
            report.label_f1.at(label.get<std::string>()).supported = false;
        }
        const ordered_json& depth = j.at("depth");
        if (depth.is_array()) {
            report.depths = depth.get<std::vector<int>>();
        } else {
            report.depths = {depth.get<int>()};
        }
        report.digest = j.at("digest").get<std::string>();
        report.spec.validate();
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw Error::data(std::string("report: ") + e.what());
    }
}

ExperimentReport load_report_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error::io("cannot open '" + path + "' for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_report(buffer.str());
}

namespace {

std::string inputs_name(const std::vector<AspectId>& inputs) {
    if (inputs.empty()) {
        return "sensors";
    }
    std::string name;
    for (AspectId aspect : normalized_inputs(inputs)) {
        if (!name.empty()) {
            name += "+";
        }
        name += to_string(aspect);
    }
    return name;
}

size_t column_of(AspectId aspect) {
    for (size_t c = 0; c < ImprovementTable::kColumns.size(); ++c) {
        if (ImprovementTable::kColumns[c] == aspect) {
            return c;
        }
    }
    throw Error::data("improvement table: unsupported target " + to_string(aspect));
}

}  // namespace

ImprovementTable improvement_table(const std::vector<ExperimentReport>& reports) {
    if (reports.empty()) {
        throw Error::data("improvement table: no reports");
    }

    // slot [column][arm]: arm 0 = sensors-only, 1..3 = +WA/+WE/+WO, 4 = both
    // non-target aspects.
    std::array<std::array<std::optional<double>, 5>, 3> mean_f1;
    const std::string& digest = reports.front().digest;
    const Protocol protocol = reports.front().spec.protocol;

    for (const ExperimentReport& report : reports) {
        if (report.digest != digest) {
            throw Error::data("improvement table: reports disagree on the dataset digest");
        }
        if (report.spec.protocol != protocol) {
            throw Error::data("improvement table: reports mix protocols");
        }
        const size_t column = column_of(report.spec.target);
        const std::vector<AspectId> inputs = normalized_inputs(report.spec.inputs);
        size_t arm;
        if (inputs.empty()) {
            arm = 0;
        } else if (inputs.size() == 1) {
            arm = 1 + column_of(inputs.front());
        } else if (inputs.size() == 2) {
            arm = 4;
        } else {
            throw Error::data("improvement table: more than two input aspects for target " +
                              to_string(report.spec.target));
        }
        if (mean_f1[column][arm].has_value()) {
            throw Error::data("improvement table: duplicate run for target " +
                              to_string(report.spec.target) + " with inputs " +
                              inputs_name(report.spec.inputs));
        }
        mean_f1[column][arm] = report.user_mean;
    }

    ImprovementTable table;
    for (size_t c = 0; c < 3; ++c) {
        const AspectId target = ImprovementTable::kColumns[c];
        for (size_t arm = 0; arm < 5; ++arm) {
            const bool expected = arm == 0 || arm == 4 || (arm - 1) != c;
            if (expected && !mean_f1[c][arm].has_value()) {
                std::string missing = arm == 0 ? "sensors"
                                     : arm == 4
                                         ? "both other aspects"
                                         : to_string(ImprovementTable::kColumns[arm - 1]);
                throw Error::data("improvement table: missing run for target " +
                                  to_string(target) + " with inputs " + missing);
            }
        }
        const double base = *mean_f1[c][0];
        table.baseline[c] = base;
        for (size_t r = 0; r < 3; ++r) {
            if (r == c) {
                continue;  // a target cannot be augmented with itself
            }
            table.delta[r][c] = 100.0 * (*mean_f1[c][1 + r] - base);
        }
        table.delta[3][c] = 100.0 * (*mean_f1[c][4] - base);
    }
    return table;
}

namespace {

constexpr int kNameWidth = 24;
constexpr int kCellWidth = 10;

void append_padded(std::string& out, const std::string& name) {
    out += name;
    out.append(static_cast<size_t>(kNameWidth) > name.size()
                   ? static_cast<size_t>(kNameWidth) - name.size()
                   : 0,
               ' ');
}

void append_cell(std::string& out, const std::string& cell) {
    if (cell.size() < static_cast<size_t>(kCellWidth)) {
        out.append(static_cast<size_t>(kCellWidth) - cell.size(), ' ');
    }
    out += cell;
}

std::string percent(double value, bool with_sign) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), with_sign ? "%+.2f%%" : "%.2f%%", value);
    return buffer;
}

const std::array<std::string, 4> kRowNames = {"Sensors + WA", "Sensors + WE", "Sensors + WO",
                                              "Sensors + Other Aspects"};

}  // namespace

// Mirrors the published layout: a header naming the predicted aspects and
// four augmentation rows with the diagonal absent.  The sensors-only
// baselines live in the CSV rendering, not the grid.
std::string render_grid(const ImprovementTable& table) {
    std::string out;
    append_padded(out, "Inputs");
    for (AspectId column : ImprovementTable::kColumns) {
        append_cell(out, to_string(column));
    }
    out += "\n";

    for (size_t r = 0; r < 4; ++r) {
        append_padded(out, kRowNames[r]);
        for (size_t c = 0; c < 3; ++c) {
            append_cell(out, table.delta[r][c] ? percent(*table.delta[r][c], true) : "--");
        }
        out += "\n";
    }
    return out;
}

std::string render_csv(const ImprovementTable& table) {
    std::string out = "row,WA,WE,WO\n";
    out += "sensors";
    for (size_t c = 0; c < 3; ++c) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), ",%.2f", table.baseline[c]);
        out += buffer;
    }
    out += "\n";
    const std::array<std::string, 4> rows = {"+WA", "+WE", "+WO", "+other"};
    for (size_t r = 0; r < 4; ++r) {
        out += rows[r];
        for (size_t c = 0; c < 3; ++c) {
            out += ",";
            if (table.delta[r][c]) {
                char buffer[32];
                std::snprintf(buffer, sizeof(buffer), "%+.2f", *table.delta[r][c]);
                out += buffer;
            }
        }
        out += "\n";
    }
    return out;
}

std::string render_plotdata(const std::vector<ExperimentReport>& reports) {
    std::string out = "target,inputs,label,f1,supported\n";
    for (const ExperimentReport& report : reports) {
        const std::string arm = inputs_name(report.spec.inputs);
        for (const auto& [label, score] : report.label_f1) {
            out += to_string(report.spec.target);
            out += ",";
            out += arm;
            out += ",";
            out += label;
            out += ",";
            out += format_double(score.f1);
            out += ",";
            out += score.supported ? "1" : "0";
            out += "\n";
        }
    }
    return out;
}

}  // namespace ctxrec
