#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxrec/aspect.hpp"
#include "ctxrec/dataset.hpp"
#include "ctxrec/forest.hpp"
#include "ctxrec/metrics.hpp"

namespace ctxrec {

enum class Protocol {
    Cv5,    // depth tuned once on a seeded 75/25 split, then 5-fold CV
    Nested  // depth re-tuned inside each fold's training split
};

std::string to_string(Protocol protocol);
Protocol parse_protocol(const std::string& text);

// One recognition run: predict `target` from sensor features, optionally
// augmented with the ground-truth labels of the other aspects.
struct ExperimentSpec {
    AspectId target = AspectId::Wa;
    std::vector<AspectId> inputs;  // extra label aspects, kept in WE < WA < WO order
    Protocol protocol = Protocol::Cv5;
    ForestParams forest;
    std::vector<int> depth_grid = kDefaultDepthGrid;
    uint64_t seed = 0;

    void validate() const;
    bool operator==(const ExperimentSpec&) const = default;
};

struct ExperimentReport {
    ExperimentSpec spec;
    double micro = 0.0;      // pooled micro-F1 over every held-out prediction
    double user_mean = 0.0;  // unweighted mean of per-user micro-F1
    std::vector<double> fold_f1;
    std::map<std::string, double> user_f1;
    std::map<std::string, LabelScore> label_f1;
    std::vector<int> depths;  // one entry under cv5, one per fold when nested
    std::string digest;       // digest of the evaluated dataset

    // Wall-clock cost of the run; informational only and deliberately kept
    // out of the serialized report so identical runs stay byte-identical.
    double runtime_seconds = 0.0;

    bool operator==(const ExperimentReport& other) const;
};

// Index of a label within a vocabulary as a one-hot block.  Unknown labels
// are an error.
std::vector<double> one_hot(const std::string& label, const std::vector<std::string>& vocab);

// Sorted unique labels of one aspect across the dataset; a record with an
// empty label for the aspect is an error.
std::vector<std::string> aspect_vocab(const Dataset& ds, AspectId aspect);

// Sensor features followed by the one-hot blocks of the requested aspects,
// always in WE, WA, WO order regardless of how `inputs` is given.
std::vector<double> augment(const Record& record, const std::vector<AspectId>& inputs,
                            const std::map<AspectId, std::vector<std::string>>& vocabs);

Matrix design_matrix(const Dataset& ds, const std::vector<AspectId>& inputs,
                     const std::map<AspectId, std::vector<std::string>>& vocabs);

// Seeded fold assignment: returns fold id per index; the first n % k folds
// are one element larger, so sizes differ by at most one.
std::vector<uint32_t> kfold(size_t n, size_t k, uint64_t seed);

// Runs the full protocol and scores every held-out prediction.  All
// randomness derives from spec.seed, so reruns (and any worker count)
// reproduce the report exactly.
ExperimentReport run_experiment(const Dataset& ds, const ExperimentSpec& spec,
                                int threads = 1);

// JSON round trip; runtime_seconds is not part of the format.
std::string serialize_report(const ExperimentReport& report);
ExperimentReport parse_report(const std::string& text);
ExperimentReport load_report_file(const std::string& path);

// The target-by-augmentation improvement grid, in percentage points of the
// per-user mean F1 relative to the sensors-only baseline of each column.
struct ImprovementTable {
    static constexpr std::array<AspectId, 3> kColumns = {AspectId::Wa, AspectId::We,
                                                         AspectId::Wo};
    std::array<double, 3> baseline{};  // absolute sensors-only mean F1 per column
    // Rows: augmented with WA, WE, WO, then both non-target aspects; the
    // target's own row stays empty.
    std::array<std::array<std::optional<double>, 3>, 4> delta{};
};

// Assembles the grid from 12 reports (per column: sensors-only, two
// single-aspect arms, both-aspects arm).  Reports must share one dataset
// digest and protocol; duplicates or missing runs are errors.
ImprovementTable improvement_table(const std::vector<ExperimentReport>& reports);

std::string render_grid(const ImprovementTable& table);
std::string render_csv(const ImprovementTable& table);

// Per-label F1 rows across runs, for external plotting.
std::string render_plotdata(const std::vector<ExperimentReport>& reports);

}  // namespace ctxrec
