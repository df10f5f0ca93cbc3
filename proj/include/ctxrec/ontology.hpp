#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxrec/aspect.hpp"

namespace ctxrec {

struct LabelDef {
    std::string id;
    std::string name;
    std::optional<std::string> parent;  // forms a forest within the aspect

    bool operator==(const LabelDef&) const = default;
};

// Half-open hour range [start, end) mapped to a TIME label.  The full rule
// list must partition [0, 24); the same label may appear in several rules
// (night covers both ends of the day).
struct TimeRule {
    int start = 0;
    int end = 0;
    std::string label;

    bool operator==(const TimeRule&) const = default;
};

// Named polygon on the earth's surface.  Vertices are lat/lon degrees and
// the ring is implicitly closed; at least 3 vertices, nonzero area.
struct Geofence {
    std::string label;  // WE label
    std::vector<GeoPoint> polygon;

    bool operator==(const Geofence&) const = default;
};

// The label vocabularies, time-of-day rules, and geofences that all
// annotations validate against.  Immutable after load; safe to share
// across concurrent readers.
struct Ontology {
    std::string version;
    std::map<AspectId, std::vector<LabelDef>> aspects;
    std::vector<TimeRule> time_rules;
    std::vector<Geofence> geofences;

    bool operator==(const Ontology&) const = default;

    size_t label_count() const;
};

// Parses and validates an ontology document (JSON text).  In strict mode
// unknown keys anywhere in the document are rejected.  Errors carry the
// offending path, label, or rule.
Ontology load_ontology(const std::string& text, bool strict = false);
Ontology load_ontology_file(const std::string& path, bool strict = false);

// Canonical serialization; load_ontology(serialize_ontology(o)) == o.
std::string serialize_ontology(const Ontology& o);

// True iff the label exists in the aspect's vocabulary, at any depth.
bool validate_label(const Ontology& o, AspectId aspect, const std::string& label);

// Label of the unique rule whose [start, end) contains hour_of_day.
std::string subjective_time(int hour_of_day, const std::vector<TimeRule>& rules);

// Shoelace area of a lat/lon ring, in squared degrees.
double polygon_area(const std::vector<GeoPoint>& polygon);

// Even-odd (ray crossing) containment test.
bool point_in_polygon(const GeoPoint& p, const std::vector<GeoPoint>& polygon);

// Label of the geofence containing the point; the smallest-area fence wins
// when several contain it, declaration order breaks exact area ties.
// Throws on out-of-range coordinates.
std::optional<std::string> resolve_place(const GeoPoint& p, const Ontology& o);

// Fills subjective levels that rules can derive: TIME from the epoch
// timestamp (shifted by the given UTC offset) and WE from the coordinate.
// WA/WO/WI subjective levels come from annotation or prediction, never
// from rules, and are left untouched.
ContextTuple lift_context(const ContextTuple& machine, const Ontology& o,
                          int utc_offset_minutes);

// Local hour of day in [0, 23] for an epoch-ms timestamp at a UTC offset.
int local_hour(int64_t epoch_ms, int utc_offset_minutes);

}  // namespace ctxrec
