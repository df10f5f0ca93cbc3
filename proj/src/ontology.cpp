#include "ctxrec/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ctxrec/error.hpp"
#include "json.hpp"

namespace ctxrec {

using nlohmann::ordered_json;

std::optional<AspectId> parse_aspect(const std::string& s) {
    for (AspectId a : kAllAspects)
        if (s == to_string(a)) return a;
    return std::nullopt;
}

size_t Ontology::label_count() const {
    size_t n = 0;
    for (const auto& [aspect, labels] : aspects) n += labels.size();
    return n;
}

namespace {

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw Error::data("ontology: unknown key \"" + path + it.key() + "\"");
    }
}

void check_vocabulary(AspectId aspect, const std::vector<LabelDef>& labels) {
    std::map<std::string, const LabelDef*> by_id;
    for (const auto& l : labels) {
        if (l.id.empty())
            throw Error::data(std::string("ontology: empty label id in aspect ") +
                              to_string(aspect));
        if (!by_id.emplace(l.id, &l).second)
            throw Error::data(std::string("ontology: duplicate label \"") + l.id +
                              "\" in aspect " + to_string(aspect));
    }
    // Parent links must resolve within the aspect and form a forest.
    for (const auto& l : labels) {
        if (!l.parent) continue;
        std::set<std::string> seen{l.id};
        const LabelDef* cur = &l;
        while (cur->parent) {
            auto it = by_id.find(*cur->parent);
            if (it == by_id.end())
                throw Error::data("ontology: label \"" + cur->id +
                                  "\" has unknown parent \"" + *cur->parent + "\"");
            cur = it->second;
            if (!seen.insert(cur->id).second)
                throw Error::data("ontology: parent cycle through label \"" + l.id + "\"");
        }
    }
}

void check_time_rules(const std::vector<TimeRule>& rules) {
    if (rules.empty()) return;  // time rules are optional as a block
    for (const auto& r : rules) {
        if (r.start < 0 || r.end > 24 || r.start >= r.end)
            throw Error::data("ontology: bad time rule [" + std::to_string(r.start) + "," +
                              std::to_string(r.end) + ") \"" + r.label + "\"");
    }
    auto sorted = rules;
    std::sort(sorted.begin(), sorted.end(),
              [](const TimeRule& a, const TimeRule& b) { return a.start < b.start; });
    int cursor = 0;
    for (const auto& r : sorted) {
        if (r.start != cursor)
            throw Error::data("ontology: time rules do not partition [0,24)");
        cursor = r.end;
    }
    if (cursor != 24) throw Error::data("ontology: time rules do not partition [0,24)");
}

void check_geofences(const Ontology& o) {
    for (const auto& g : o.geofences) {
        if (g.polygon.size() < 3)
            throw Error::data("ontology: geofence \"" + g.label + "\" has fewer than 3 vertices");
        if (polygon_area(g.polygon) == 0.0)
            throw Error::data("ontology: geofence \"" + g.label + "\" has zero area");
        for (const auto& v : g.polygon) {
            if (!(std::isfinite(v.lat) && std::isfinite(v.lon)) || std::abs(v.lat) > 90.0 ||
                std::abs(v.lon) > 180.0)
                throw Error::data("ontology: geofence \"" + g.label +
                                  "\" has out-of-range vertex");
        }
    }
}

// Labels that the lifting rules can produce must themselves validate.
void check_rule_labels(const Ontology& o) {
    for (const auto& r : o.time_rules)
        if (!validate_label(o, AspectId::Time, r.label))
            throw Error::data("ontology: time rule label \"" + r.label +
                              "\" not in TIME vocabulary");
    for (const auto& g : o.geofences)
        if (!validate_label(o, AspectId::We, g.label))
            throw Error::data("ontology: geofence label \"" + g.label +
                              "\" not in WE vocabulary");
}

}  // namespace

Ontology load_ontology(const std::string& text, bool strict) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error::data(std::string("ontology: parse error: ") + e.what());
    }
    if (!doc.is_object()) throw Error::data("ontology: document root must be an object");
    if (strict)
        reject_unknown_keys(doc, {"version", "aspects", "time_rules", "geofences"}, "");

    Ontology o;
    try {
        o.version = doc.value("version", std::string("0"));
        if (doc.contains("aspects")) {
            for (auto it = doc["aspects"].begin(); it != doc["aspects"].end(); ++it) {
                auto aspect = parse_aspect(it.key());
                if (!aspect)
                    throw Error::data("ontology: unknown aspect \"" + it.key() + "\"");
                std::vector<LabelDef> labels;
                for (const auto& entry : it.value()) {
                    if (strict)
                        reject_unknown_keys(entry, {"id", "name", "parent"},
                                            "aspects." + it.key() + ".");
                    LabelDef l;
                    l.id = entry.at("id").get<std::string>();
                    l.name = entry.value("name", l.id);
                    if (entry.contains("parent"))
                        l.parent = entry["parent"].get<std::string>();
                    labels.push_back(std::move(l));
                }
                o.aspects[*aspect] = std::move(labels);
            }
        }
        for (const auto& entry : doc.value("time_rules", ordered_json::array())) {
            if (strict) reject_unknown_keys(entry, {"start", "end", "label"}, "time_rules.");
            o.time_rules.push_back(
                {entry.at("start").get<int>(), entry.at("end").get<int>(),
                 entry.at("label").get<std::string>()});
        }
        for (const auto& entry : doc.value("geofences", ordered_json::array())) {
            if (strict) reject_unknown_keys(entry, {"label", "polygon"}, "geofences.");
            Geofence g;
            g.label = entry.at("label").get<std::string>();
            for (const auto& v : entry.at("polygon")) {
                if (!v.is_array() || v.size() != 2)
                    throw Error::data("ontology: geofence \"" + g.label +
                                      "\" vertex must be [lat,lon]");
                g.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            o.geofences.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error::data(std::string("ontology: ") + e.what());
    }

    for (const auto& [aspect, labels] : o.aspects) check_vocabulary(aspect, labels);
    check_time_rules(o.time_rules);
    check_geofences(o);
    check_rule_labels(o);
    return o;
}

Ontology load_ontology_file(const std::string& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("cannot open ontology file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_ontology(buf.str(), strict);
}

std::string serialize_ontology(const Ontology& o) {
    ordered_json doc;
    doc["version"] = o.version;
    ordered_json aspects = ordered_json::object();
    for (AspectId a : kAllAspects) {
        auto it = o.aspects.find(a);
        if (it == o.aspects.end()) continue;
        ordered_json labels = ordered_json::array();
        for (const auto& l : it->second) {
            ordered_json entry;
            entry["id"] = l.id;
            entry["name"] = l.name;
            if (l.parent) entry["parent"] = *l.parent;
            labels.push_back(std::move(entry));
        }
        aspects[to_string(a)] = std::move(labels);
    }
    doc["aspects"] = std::move(aspects);
    ordered_json rules = ordered_json::array();
    for (const auto& r : o.time_rules)
        rules.push_back({{"start", r.start}, {"end", r.end}, {"label", r.label}});
    doc["time_rules"] = std::move(rules);
    ordered_json fences = ordered_json::array();
    for (const auto& g : o.geofences) {
        ordered_json poly = ordered_json::array();
        for (const auto& v : g.polygon) poly.push_back({v.lat, v.lon});
        fences.push_back({{"label", g.label}, {"polygon", std::move(poly)}});
    }
    doc["geofences"] = std::move(fences);
    return doc.dump(2) + "\n";
}

bool validate_label(const Ontology& o, AspectId aspect, const std::string& label) {
    auto it = o.aspects.find(aspect);
    if (it == o.aspects.end()) return false;
    for (const auto& l : it->second)
        if (l.id == label) return true;
    return false;
}

std::string subjective_time(int hour_of_day, const std::vector<TimeRule>& rules) {
    for (const auto& r : rules)
        if (r.start <= hour_of_day && hour_of_day < r.end) return r.label;
    throw Error::data("no time rule covers hour " + std::to_string(hour_of_day));
}

double polygon_area(const std::vector<GeoPoint>& polygon) {
    double twice = 0.0;
    size_t n = polygon.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        twice += polygon[j].lon * polygon[i].lat - polygon[i].lon * polygon[j].lat;
    }
    return std::abs(twice) / 2.0;
}

bool point_in_polygon(const GeoPoint& p, const std::vector<GeoPoint>& polygon) {
    bool inside = false;
    size_t n = polygon.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        double yi = polygon[i].lat, xi = polygon[i].lon;
        double yj = polygon[j].lat, xj = polygon[j].lon;
        if ((yi > p.lat) != (yj > p.lat)) {
            double x_cross = (xj - xi) * (p.lat - yi) / (yj - yi) + xi;
            if (p.lon < x_cross) inside = !inside;
        }
    }
    return inside;
}

std::optional<std::string> resolve_place(const GeoPoint& p, const Ontology& o) {
    if (!(std::isfinite(p.lat) && std::isfinite(p.lon)) || std::abs(p.lat) > 90.0 ||
        std::abs(p.lon) > 180.0)
        throw Error::data("resolve_place: coordinates out of range");
    const Geofence* best = nullptr;
    double best_area = 0.0;
    for (const auto& g : o.geofences) {
        if (!point_in_polygon(p, g.polygon)) continue;
        double area = polygon_area(g.polygon);
        if (!best || area < best_area) {
            best = &g;
            best_area = area;
        }
    }
    if (!best) return std::nullopt;
    return best->label;
}

int local_hour(int64_t epoch_ms, int utc_offset_minutes) {
    int64_t local_ms = epoch_ms + static_cast<int64_t>(utc_offset_minutes) * 60'000;
    int64_t hours = local_ms / 3'600'000;
    if (local_ms < 0 && local_ms % 3'600'000 != 0) --hours;  // floor division
    int64_t h = hours % 24;
    if (h < 0) h += 24;
    return static_cast<int>(h);
}

ContextTuple lift_context(const ContextTuple& machine, const Ontology& o,
                          int utc_offset_minutes) {
    ContextTuple out = machine;
    if (!out.time.machine || !std::holds_alternative<int64_t>(*out.time.machine))
        throw Error::data("lift_context: time.machine must be an epoch-ms timestamp");
    int64_t epoch_ms = std::get<int64_t>(*out.time.machine);
    out.time.subjective = subjective_time(local_hour(epoch_ms, utc_offset_minutes),
                                          o.time_rules);
    if (out.we.machine && std::holds_alternative<GeoPoint>(*out.we.machine)) {
        auto place = resolve_place(std::get<GeoPoint>(*out.we.machine), o);
        if (place) out.we.subjective = *place;
    }
    return out;
}

}  // namespace ctxrec
