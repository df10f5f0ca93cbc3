#include "ctxrec/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ctxrec/error.hpp"
#include "json.hpp"

namespace ctxrec {

using nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string slurp(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io(std::string("cannot open ") + what + ": " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::vector<AnnotationEvent> read_annotations(const std::string& text,
                                              const Ontology* ontology) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error::data("annotations: empty file");
    if (split(line, ',') != std::vector<std::string>{"user", "ts_ms", "we", "wa", "wo"})
        throw Error::data("annotations: expected header user,ts_ms,we,wa,wo");
    std::vector<AnnotationEvent> events;
    std::map<std::string, int64_t> last_ts;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 5)
            throw Error::data("annotations line " + std::to_string(line_no) +
                              ": expected 5 fields");
        AnnotationEvent e;
        e.user = fields[0];
        auto [ptr, ec] =
            std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), e.ts_ms);
        if (ec != std::errc() || ptr != fields[1].data() + fields[1].size())
            throw Error::data("annotations line " + std::to_string(line_no) +
                              ": bad timestamp");
        e.we = fields[2];
        e.wa = fields[3];
        e.wo = fields[4];
        auto it = last_ts.find(e.user);
        if (it != last_ts.end() && e.ts_ms <= it->second)
            throw Error::data("annotations line " + std::to_string(line_no) +
                              ": timestamps not strictly increasing for user " + e.user);
        last_ts[e.user] = e.ts_ms;
        if (ontology) {
            auto check = [&](AspectId a, const std::string& label) {
                if (!validate_label(*ontology, a, label))
                    throw Error::data("annotations line " + std::to_string(line_no) +
                                      ": label \"" + label + "\" not in " +
                                      std::string(to_string(a)) + " vocabulary");
            };
            check(AspectId::We, e.we);
            check(AspectId::Wa, e.wa);
            check(AspectId::Wo, e.wo);
        }
        events.push_back(std::move(e));
    }
    return events;
}

std::vector<AnnotationEvent> read_annotations_file(const std::string& path,
                                                   const Ontology* ontology) {
    return read_annotations(slurp(path, "annotations file"), ontology);
}

std::vector<Window> window_records(const std::vector<SensorReading>& readings,
                                   const std::vector<AnnotationEvent>& annotations,
                                   int64_t window_ms, WindowStats* stats) {
    if (window_ms <= 0) throw Error::config("window length must be positive");

    // Per-user reading indices, already timestamp-sorted by the parser;
    // re-sort defensively in case the caller built them by hand.
    std::map<std::string, std::vector<size_t>> by_user;
    for (size_t i = 0; i < readings.size(); ++i)
        by_user[readings[i].user].push_back(i);
    for (auto& [user, idx] : by_user)
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return readings[a].ts_ms < readings[b].ts_ms;
        });

    std::map<std::string, std::vector<const AnnotationEvent*>> ann_by_user;
    for (const auto& a : annotations) ann_by_user[a.user].push_back(&a);
    for (auto& [user, anns] : ann_by_user) {
        for (size_t i = 1; i < anns.size(); ++i)
            if (anns[i]->ts_ms <= anns[i - 1]->ts_ms)
                throw Error::data("annotations not strictly increasing for user " + user);
    }

    std::vector<Window> windows;
    size_t truncated = 0, claimed = 0;
    for (const auto& [user, anns] : ann_by_user) {
        auto ru = by_user.find(user);
        const std::vector<size_t>* idx = ru == by_user.end() ? nullptr : &ru->second;
        size_t cursor = 0;
        for (size_t i = 0; i < anns.size(); ++i) {
            Window w;
            w.user = user;
            w.start_ms = anns[i]->ts_ms;
            w.end_ms = w.start_ms + window_ms;
            if (i + 1 < anns.size() && anns[i + 1]->ts_ms < w.end_ms) {
                w.end_ms = anns[i + 1]->ts_ms;
                ++truncated;
            }
            w.we = anns[i]->we;
            w.wa = anns[i]->wa;
            w.wo = anns[i]->wo;
            if (idx) {
                while (cursor < idx->size() && readings[(*idx)[cursor]].ts_ms < w.start_ms)
                    ++cursor;  // readings before this window are unclaimed
                while (cursor < idx->size() && readings[(*idx)[cursor]].ts_ms < w.end_ms) {
                    w.readings.push_back(&readings[(*idx)[cursor]]);
                    ++cursor;
                }
            }
            claimed += w.readings.size();
            windows.push_back(std::move(w));
        }
    }
    if (stats) {
        stats->truncated = truncated;
        stats->dropped = readings.size() - claimed;
    }
    return windows;
}

std::string to_string(Aggregate a) {
    switch (a) {
        case Aggregate::Mean: return "mean";
        case Aggregate::Std: return "std";
        case Aggregate::Min: return "min";
        case Aggregate::Max: return "max";
        case Aggregate::Count: return "count";
        case Aggregate::ModeFreq: return "mode_freq";
    }
    return "?";
}

std::optional<Aggregate> parse_aggregate(const std::string& s) {
    for (Aggregate a : {Aggregate::Mean, Aggregate::Std, Aggregate::Min, Aggregate::Max,
                        Aggregate::Count, Aggregate::ModeFreq})
        if (s == to_string(a)) return a;
    return std::nullopt;
}

std::string RecipeEntry::column_name() const {
    if (aggregate == Aggregate::Count || aggregate == Aggregate::ModeFreq)
        return sensor + "_" + to_string(aggregate);
    return sensor + "_" + std::to_string(component) + "_" + to_string(aggregate);
}

std::vector<std::string> FeatureRecipe::column_names() const {
    std::vector<std::string> names;
    names.reserve(entries.size());
    for (const auto& e : entries) names.push_back(e.column_name());
    return names;
}

void FeatureRecipe::validate(const SensorCatalog& catalog) const {
    if (entries.empty()) throw Error::data("recipe: no columns");
    for (const auto& e : entries) {
        const SensorSpec* spec = catalog.find(e.sensor);
        if (!spec) throw Error::data("recipe: unknown sensor \"" + e.sensor + "\"");
        switch (e.aggregate) {
            case Aggregate::Mean:
            case Aggregate::Std:
            case Aggregate::Min:
            case Aggregate::Max:
                if (spec->kind != SensorKind::Numeric)
                    throw Error::data("recipe: " + to_string(e.aggregate) +
                                      " needs a numeric sensor, got \"" + e.sensor + "\"");
                if (e.component >= spec->arity)
                    throw Error::data("recipe: component " + std::to_string(e.component) +
                                      " out of range for sensor \"" + e.sensor + "\"");
                break;
            case Aggregate::ModeFreq:
                if (spec->kind != SensorKind::Symbolic)
                    throw Error::data("recipe: mode_freq needs a symbolic sensor, got \"" +
                                      e.sensor + "\"");
                break;
            case Aggregate::Count:
                break;  // any sensor
        }
    }
}

FeatureRecipe load_recipe(const std::string& text, const SensorCatalog& catalog) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error::data(std::string("recipe: parse error: ") + e.what());
    }
    FeatureRecipe recipe;
    try {
        for (const auto& entry : doc.at("columns")) {
            RecipeEntry e;
            e.sensor = entry.at("sensor").get<std::string>();
            e.component = entry.value("component", 0);
            auto agg = parse_aggregate(entry.at("aggregate").get<std::string>());
            if (!agg)
                throw Error::data("recipe: unknown aggregate \"" +
                                  entry.at("aggregate").get<std::string>() + "\"");
            e.aggregate = *agg;
            recipe.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error::data(std::string("recipe: ") + e.what());
    }
    recipe.validate(catalog);
    return recipe;
}

FeatureRecipe load_recipe_file(const std::string& path, const SensorCatalog& catalog) {
    return load_recipe(slurp(path, "recipe file"), catalog);
}

std::string serialize_recipe(const FeatureRecipe& recipe) {
    ordered_json doc;
    ordered_json cols = ordered_json::array();
    for (const auto& e : recipe.entries) {
        ordered_json entry;
        entry["sensor"] = e.sensor;
        if (e.aggregate != Aggregate::Count && e.aggregate != Aggregate::ModeFreq)
            entry["component"] = e.component;
        entry["aggregate"] = to_string(e.aggregate);
        cols.push_back(std::move(entry));
    }
    doc["columns"] = std::move(cols);
    return doc.dump(2) + "\n";
}

FeatureRecipe default_recipe() {
    FeatureRecipe r;
    auto full = [&](const std::string& sensor, size_t arity) {
        for (size_t c = 0; c < arity; ++c)
            for (Aggregate a :
                 {Aggregate::Mean, Aggregate::Std, Aggregate::Min, Aggregate::Max})
                r.entries.push_back({sensor, c, a});
    };
    // 20 Hz inertial and environment channels: full summary statistics.
    full("acceleration", 3);
    full("linear_acceleration", 3);
    full("gyroscope", 3);
    full("gravity", 3);
    full("rotation_vector", 3);
    full("magnetic_field", 3);
    full("orientation", 3);
    full("temperature", 1);
    full("pressure", 1);
    full("humidity", 1);
    full("position", 2);
    // Slow or bursty channels: coarser aggregates.
    r.entries.push_back({"battery_level", 0, Aggregate::Mean});
    r.entries.push_back({"battery_level", 0, Aggregate::Std});
    r.entries.push_back({"audio_level", 0, Aggregate::Mean});
    r.entries.push_back({"audio_level", 0, Aggregate::Std});
    r.entries.push_back({"wifi_available", 0, Aggregate::Mean});
    for (const char* s : {"wifi_connected", "running_app", "cellular"})
        r.entries.push_back({s, 0, Aggregate::ModeFreq});
    // On-change channels: event counts.
    for (const char* s : {"proximity", "touch", "notifications", "screen_status",
                          "flight_mode", "battery_charge", "doze_mode", "headset_plugged",
                          "audio_mode", "music_playback"})
        r.entries.push_back({s, 0, Aggregate::Count});
    r.validate(default_catalog());
    return r;
}

void extract_features(const Window& window, const SensorCatalog& catalog,
                      const FeatureRecipe& recipe, std::vector<double>& features,
                      std::vector<uint8_t>& missing) {
    features.assign(recipe.width(), 0.0);
    missing.assign(recipe.width(), 1);

    // Group the window's readings by sensor once.
    std::map<std::string, std::vector<const SensorReading*>> by_sensor;
    for (const SensorReading* r : window.readings) by_sensor[r->sensor].push_back(r);

    for (size_t j = 0; j < recipe.entries.size(); ++j) {
        const RecipeEntry& e = recipe.entries[j];
        auto it = by_sensor.find(e.sensor);
        if (it == by_sensor.end()) continue;  // masked
        const auto& rs = it->second;
        double value = 0.0;
        switch (e.aggregate) {
            case Aggregate::Count:
                value = static_cast<double>(rs.size());
                break;
            case Aggregate::ModeFreq: {
                std::map<std::string, size_t> freq;
                for (const SensorReading* r : rs) ++freq[r->symbol];
                size_t best = 0;
                for (const auto& [sym, n] : freq) best = std::max(best, n);
                value = static_cast<double>(best) / static_cast<double>(rs.size());
                break;
            }
            default: {
                double sum = 0.0, lo = rs[0]->values[e.component],
                       hi = rs[0]->values[e.component];
                for (const SensorReading* r : rs) {
                    double v = r->values[e.component];
                    sum += v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                double mean = sum / static_cast<double>(rs.size());
                if (e.aggregate == Aggregate::Mean) {
                    value = mean;
                } else if (e.aggregate == Aggregate::Min) {
                    value = lo;
                } else if (e.aggregate == Aggregate::Max) {
                    value = hi;
                } else {  // population std
                    double ss = 0.0;
                    for (const SensorReading* r : rs) {
                        double d = r->values[e.component] - mean;
                        ss += d * d;
                    }
                    value = std::sqrt(ss / static_cast<double>(rs.size()));
                }
            }
        }
        features[j] = value;
        missing[j] = 0;
    }
}

Dataset build_dataset(const std::vector<SensorReading>& readings,
                      const std::vector<AnnotationEvent>& annotations,
                      const SensorCatalog& catalog, const FeatureRecipe& recipe,
                      int64_t window_ms, WindowStats* stats) {
    recipe.validate(catalog);
    auto windows = window_records(readings, annotations, window_ms, stats);
    Dataset ds;
    ds.feature_names = recipe.column_names();
    ds.records.reserve(windows.size());
    for (const auto& w : windows) {
        Record rec;
        rec.user = w.user;
        rec.t_ms = w.start_ms;
        extract_features(w, catalog, recipe, rec.features, rec.missing);
        rec.we = w.we;
        rec.wa = w.wa;
        rec.wo = w.wo;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Imputer fit_imputer(const Dataset& ds, const std::vector<size_t>& fit_rows) {
    Imputer imp;
    imp.medians.resize(ds.width());
    std::vector<double> column;
    for (size_t j = 0; j < ds.width(); ++j) {
        column.clear();
        for (size_t row : fit_rows) {
            const Record& r = ds.records[row];
            if (!r.missing[j]) column.push_back(r.features[j]);
        }
        if (column.empty())
            throw Error::data("impute: column \"" + ds.feature_names[j] +
                              "\" has no observed value in the fitting split");
        std::sort(column.begin(), column.end());
        size_t n = column.size();
        imp.medians[j] =
            n % 2 == 1 ? column[n / 2] : (column[n / 2 - 1] + column[n / 2]) / 2.0;
    }
    return imp;
}

Dataset impute(const Dataset& ds, const Imputer& imputer, const ImputePolicy& policy) {
    if (imputer.medians.size() != ds.width())
        throw Error::data("impute: imputer width " + std::to_string(imputer.medians.size()) +
                          " does not match dataset width " + std::to_string(ds.width()));
    Dataset out;
    out.feature_names = ds.feature_names;
    if (policy.append_mask_features)
        for (const auto& name : ds.feature_names)
            out.feature_names.push_back(name + "_was_missing");
    out.records.reserve(ds.records.size());
    for (const Record& r : ds.records) {
        Record o = r;
        for (size_t j = 0; j < ds.width(); ++j)
            if (o.missing[j]) o.features[j] = imputer.medians[j];
        if (policy.append_mask_features)
            for (size_t j = 0; j < ds.width(); ++j)
                o.features.push_back(r.missing[j] ? 1.0 : 0.0);
        o.missing.assign(out.feature_names.size(), 0);
        out.records.push_back(std::move(o));
    }
    return out;
}

}  // namespace ctxrec
