#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxrec/dataset.hpp"
#include "ctxrec/ontology.hpp"
#include "ctxrec/sensors.hpp"

namespace ctxrec {

// One questionnaire response: the user's WE/WA/WO self-report at time t.
struct AnnotationEvent {
    std::string user;
    int64_t ts_ms = 0;
    std::string we, wa, wo;
};

// Parses the annotation table (CSV: user,ts_ms,we,wa,wo with header).
// Timestamps must be strictly increasing per user; when an ontology is
// given every label must validate against it.
std::vector<AnnotationEvent> read_annotations(const std::string& text,
                                              const Ontology* ontology = nullptr);
std::vector<AnnotationEvent> read_annotations_file(const std::string& path,
                                                   const Ontology* ontology = nullptr);

inline constexpr int64_t kDefaultWindowMs = 30 * 60 * 1000;

// A 30-minute observation window: the annotation's labels plus the sensor
// readings it claims.
struct Window {
    std::string user;
    int64_t start_ms = 0;
    int64_t end_ms = 0;
    std::vector<const SensorReading*> readings;
    std::string we, wa, wo;
};

struct WindowStats {
    size_t truncated = 0;  // windows cut short by the next annotation
    size_t dropped = 0;    // readings claimed by no annotation
};

// Assigns each reading to the annotation window [t, t+window_ms) of the
// same user; the next annotation truncates an overlapping window.  Windows
// with zero readings are kept (their features come out all-missing).
std::vector<Window> window_records(const std::vector<SensorReading>& readings,
                                   const std::vector<AnnotationEvent>& annotations,
                                   int64_t window_ms = kDefaultWindowMs,
                                   WindowStats* stats = nullptr);

enum class Aggregate { Mean, Std, Min, Max, Count, ModeFreq };

std::string to_string(Aggregate a);
std::optional<Aggregate> parse_aggregate(const std::string& s);

// One output column: an aggregate of one sensor channel.
struct RecipeEntry {
    std::string sensor;
    size_t component = 0;  // ignored by Count/ModeFreq
    Aggregate aggregate = Aggregate::Mean;

    std::string column_name() const;
};

// Declarative feature derivation: the recipe file is the source of truth
// for how raw streams become the fixed-width vector, so alternate
// derivations are configuration, not code.
struct FeatureRecipe {
    std::vector<RecipeEntry> entries;

    size_t width() const { return entries.size(); }
    std::vector<std::string> column_names() const;
    void validate(const SensorCatalog& catalog) const;
};

FeatureRecipe load_recipe(const std::string& text, const SensorCatalog& catalog);
FeatureRecipe load_recipe_file(const std::string& path, const SensorCatalog& catalog);
std::string serialize_recipe(const FeatureRecipe& recipe);

// The recipe shipped with the tool: mean/std/min/max over the inertial and
// environment channels, coarser aggregates over network/app/audio channels,
// event counts for the on-change ones.  122 columns over default_catalog().
FeatureRecipe default_recipe();

// Aggregates one window into (features, missing mask).  Channels with no
// readings in the window produce masked entries.  Deterministic given
// window + recipe.
void extract_features(const Window& window, const SensorCatalog& catalog,
                      const FeatureRecipe& recipe, std::vector<double>& features,
                      std::vector<uint8_t>& missing);

// Full pipeline: readings + annotations -> fixed-width records.
Dataset build_dataset(const std::vector<SensorReading>& readings,
                      const std::vector<AnnotationEvent>& annotations,
                      const SensorCatalog& catalog, const FeatureRecipe& recipe,
                      int64_t window_ms = kDefaultWindowMs, WindowStats* stats = nullptr);

struct ImputePolicy {
    bool append_mask_features = false;  // keep the mask as extra binary columns
};

// Per-column medians learned from the unmasked entries of a fitting split.
struct Imputer {
    std::vector<double> medians;
};

// Fits medians on `fit_rows` (indices into ds.records).  A column with no
// unmasked value in the fitting split is an error naming the column.
Imputer fit_imputer(const Dataset& ds, const std::vector<size_t>& fit_rows);

// Replaces masked entries with the fitted medians; unmasked values never
// change.  With append_mask_features the mask is kept as appended 0/1
// columns (named <col>_was_missing), otherwise masks are cleared.
Dataset impute(const Dataset& ds, const Imputer& imputer, const ImputePolicy& policy = {});

}  // namespace ctxrec
