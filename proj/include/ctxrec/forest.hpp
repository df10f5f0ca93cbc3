#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxrec/matrix.hpp"

namespace ctxrec {

struct ForestParams {
    size_t trees = 100;
    int max_depth = 0;             // 0 = unlimited
    size_t max_features = 0;       // candidate features per split; 0 = ceil(sqrt(D))
    bool bootstrap = true;
    double bootstrap_fraction = 1.0;  // in (0, 1], draws with replacement
    size_t min_samples_split = 2;
    uint64_t seed = 0;

    void validate() const;
    bool operator==(const ForestParams&) const = default;
};

inline const std::vector<int> kDefaultDepthGrid = {2, 4, 6, 8, 12, 16, 24, 0};

// Flat node storage, preorder.  feature == -1 marks a leaf; leaves carry
// the training class counts.
struct TreeNode {
    int32_t feature = -1;
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    std::vector<uint32_t> counts;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& descend(const double* x) const;
    int depth() const;
    bool operator==(const DecisionTree&) const = default;
};

struct RandomForest {
    std::vector<std::string> vocab;  // class labels, index = class id
    size_t feature_width = 0;
    ForestParams params;
    std::vector<uint64_t> tree_seeds;  // provenance, one per tree
    std::vector<DecisionTree> trees;

    bool operator==(const RandomForest&) const = default;
};

// Column-major view of the training samples, built once per training run
// so per-feature scans are contiguous.
struct TrainingData {
    size_t n = 0;
    size_t width = 0;
    size_t n_classes = 0;
    std::vector<double> columns;   // width * n, column c at [c*n, (c+1)*n)
    std::vector<uint32_t> labels;

    static TrainingData from_rows(const Matrix& x, const std::vector<uint32_t>& y,
                                  size_t n_classes);
    double value(size_t row, size_t col) const { return columns[col * n + row]; }
};

// Gini impurity 1 - sum(p_i^2) of a class-count vector.  Throws on an
// all-zero vector.
double gini(const std::vector<uint32_t>& class_counts);

struct SplitCandidate {
    uint32_t feature = 0;
    double threshold = 0.0;
    double weighted_impurity = 0.0;  // (n_l*g_l + n_r*g_r) / n
};

// Minimizes weighted Gini over all (feature, midpoint-between-consecutive-
// distinct-values) pairs; ties go to the lower feature index, then the
// lower threshold.  Returns nullopt when no split reduces impurity.
// Candidate quality is compared in exact integer arithmetic, so tie-breaks
// are reproducible bit-for-bit.
std::optional<SplitCandidate> best_split(const TrainingData& data,
                                         const std::vector<uint32_t>& rows,
                                         const std::vector<uint32_t>& features);

// Recursive Gini splitting with per-node candidate-feature subsampling
// drawn from the tree seed.  Stops at max depth, pure node, min-samples,
// or no improving split.
DecisionTree grow_tree(const TrainingData& data, const ForestParams& params,
                       uint64_t tree_seed);

// Bagged ensemble; tree t trains on a bootstrap resample drawn from
// mix_seed(params.seed, t), so the result is identical for any worker
// count.
RandomForest train_forest(const Matrix& x, const std::vector<uint32_t>& y,
                          const std::vector<std::string>& vocab,
                          const ForestParams& params, int threads = 1);

struct Prediction {
    uint32_t label = 0;
    std::vector<double> fractions;  // per-class vote shares, sum to 1
};

// Argmax of summed leaf-normalized votes; ties go to the lowest class
// index.  Throws on width mismatch.
Prediction predict(const RandomForest& forest, const double* x, size_t width);
std::vector<uint32_t> predict_labels(const RandomForest& forest, const Matrix& x,
                                     int threads = 1);

// 75/25 seeded split; trains one forest per grid depth on the 75% and
// returns the depth with the best validation micro-F1, smallest depth on
// ties (unlimited counts as the largest).
int tune_depth(const Matrix& x, const std::vector<uint32_t>& y, size_t n_classes,
               const std::vector<int>& depth_grid, const ForestParams& params,
               uint64_t seed, int threads = 1);

// Versioned flat text serialization of params, vocab, and node arrays.
// Loading a file whose version line differs fails loudly.
std::string serialize_forest(const RandomForest& forest);
RandomForest parse_forest(const std::string& text);
void save_forest_file(const RandomForest& forest, const std::string& path);
RandomForest load_forest_file(const std::string& path);

}  // namespace ctxrec
