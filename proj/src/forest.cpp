#include "ctxrec/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctxrec/dataset.hpp"
#include "ctxrec/error.hpp"
#include "ctxrec/metrics.hpp"
#include "ctxrec/parallel.hpp"
#include "ctxrec/rng.hpp"

namespace ctxrec {

void ForestParams::validate() const {
    if (trees == 0) {
        throw Error::config("forest: trees must be at least 1");
    }
    if (max_depth < 0) {
        throw Error::config("forest: max_depth must be >= 0");
    }
    if (!(bootstrap_fraction > 0.0) || bootstrap_fraction > 1.0) {
        throw Error::config("forest: bootstrap_fraction out of (0, 1]");
    }
    if (min_samples_split < 2) {
        throw Error::config("forest: min_samples_split must be at least 2");
    }
}

const TreeNode& DecisionTree::descend(const double* x) const {
    size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& node = nodes[i];
        i = static_cast<size_t>(x[node.feature] < node.threshold ? node.left : node.right);
    }
    return nodes[i];
}

int DecisionTree::depth() const {
    std::function<int(size_t)> walk = [&](size_t i) -> int {
        const TreeNode& node = nodes[i];
        if (node.is_leaf()) {
            return 0;
        }
        return 1 + std::max(walk(static_cast<size_t>(node.left)),
                            walk(static_cast<size_t>(node.right)));
    };
    return nodes.empty() ? 0 : walk(0);
}

TrainingData TrainingData::from_rows(const Matrix& x, const std::vector<uint32_t>& y,
                                     size_t n_classes) {
    if (x.rows != y.size()) {
        throw Error::data("forest: feature rows and label count differ");
    }
    if (x.rows == 0 || x.cols == 0) {
        throw Error::data("forest: cannot train on an empty dataset");
    }
    TrainingData data;
    data.n = x.rows;
    data.width = x.cols;
    data.n_classes = n_classes;
    data.labels = y;
    for (uint32_t label : y) {
        if (label >= n_classes) {
            throw Error::data("forest: label index " + std::to_string(label) +
                              " outside the class vocabulary");
        }
    }
    data.columns.resize(data.width * data.n);
    for (size_t r = 0; r < data.n; ++r) {
        for (size_t c = 0; c < data.width; ++c) {
            data.columns[c * data.n + r] = x.at(r, c);
        }
    }
    return data;
}

double gini(const std::vector<uint32_t>& class_counts) {
    uint64_t total = 0;
    for (uint32_t c : class_counts) {
        total += c;
    }
    if (total == 0) {
        throw Error::data("gini: empty class-count vector");
    }
    double sum_sq = 0.0;
    for (uint32_t c : class_counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

namespace {

// The quality of a split is S_l/n_l + S_r/n_r where S = sum of squared class
// counts on a side; maximizing it minimizes the weighted Gini.  Candidates
// are compared as exact rationals (cross-multiplied in 128-bit) so equal
// scores are recognized exactly and the first candidate in (feature,
// threshold) order wins.
struct RationalScore {
    uint64_t num = 0;  // S_l * n_r + S_r * n_l
    uint64_t den = 0;  // n_l * n_r
};

bool better(const RationalScore& a, const RationalScore& b) {
    return static_cast<unsigned __int128>(a.num) * b.den >
           static_cast<unsigned __int128>(b.num) * a.den;
}

std::optional<SplitCandidate> best_split_sorted(const TrainingData& data,
                                                const std::vector<uint32_t>& rows,
                                                const std::vector<uint32_t>& features,
                                                const std::vector<uint32_t>& parent_counts) {
    const uint64_t m = rows.size();
    uint64_t parent_sq = 0;
    for (uint32_t c : parent_counts) {
        parent_sq += static_cast<uint64_t>(c) * c;
    }

    bool found = false;
    SplitCandidate best;
    RationalScore best_score;

    std::vector<std::pair<double, uint32_t>> ordered(rows.size());
    std::vector<uint32_t> left(parent_counts.size());

    for (uint32_t f : features) {
        const double* column = data.columns.data() + static_cast<size_t>(f) * data.n;
        for (size_t i = 0; i < rows.size(); ++i) {
            ordered[i] = {column[rows[i]], data.labels[rows[i]]};
        }
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (!(ordered.front().first < ordered.back().first)) {
            continue;  // constant feature on these rows
        }

        std::fill(left.begin(), left.end(), 0u);
        uint64_t sum_left = 0;
        uint64_t sum_right = parent_sq;
        for (uint64_t i = 1; i < m; ++i) {
            const uint32_t cls = ordered[i - 1].second;
            sum_left += 2ull * left[cls] + 1;
            const uint64_t right_count = parent_counts[cls] - left[cls];
            sum_right -= 2ull * right_count - 1;
            ++left[cls];

            const double lo = ordered[i - 1].first;
            const double hi = ordered[i].first;
            if (!(lo < hi)) {
                continue;
            }
            const double threshold = std::midpoint(lo, hi);
            if (!(threshold > lo)) {
                continue;  // adjacent representable values; the midpoint cannot separate them
            }
            const uint64_t n_left = i;
            const uint64_t n_right = m - i;
            const RationalScore score{sum_left * n_right + sum_right * n_left,
                                      n_left * n_right};
            if (!found || better(score, best_score)) {
                found = true;
                best_score = score;
                best.feature = f;
                best.threshold = threshold;
            }
        }
    }

    if (!found) {
        return std::nullopt;
    }
    // Keep the split only if it strictly beats the parent impurity:
    // num/den > parent_sq/m, cross-multiplied exactly.
    if (static_cast<unsigned __int128>(best_score.num) * m <=
        static_cast<unsigned __int128>(parent_sq) * best_score.den) {
        return std::nullopt;
    }
    best.weighted_impurity = 1.0 - static_cast<double>(best_score.num) /
                                       static_cast<double>(best_score.den) /
                                       static_cast<double>(m);
    return best;
}

std::vector<uint32_t> count_classes(const TrainingData& data, const std::vector<uint32_t>& rows) {
    std::vector<uint32_t> counts(data.n_classes, 0);
    for (uint32_t r : rows) {
        ++counts[data.labels[r]];
    }
    return counts;
}

size_t resolve_mtry(const ForestParams& params, size_t width) {
    if (params.max_features > 0) {
        return std::min(params.max_features, width);
    }
    return std::min(width, static_cast<size_t>(
                               std::ceil(std::sqrt(static_cast<double>(width)))));
}

DecisionTree grow_tree_on_rows(const TrainingData& data, const ForestParams& params, Rng& rng,
                               std::vector<uint32_t> root_rows) {
    const size_t mtry = resolve_mtry(params, data.width);
    std::vector<uint32_t> pool(data.width);
    std::iota(pool.begin(), pool.end(), 0u);

    DecisionTree tree;
    std::function<int32_t(std::vector<uint32_t>&, int)> build =
        [&](std::vector<uint32_t>& rows, int depth) -> int32_t {
        const int32_t index = static_cast<int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::vector<uint32_t> counts = count_classes(data, rows);

        const bool pure =
            std::count_if(counts.begin(), counts.end(), [](uint32_t c) { return c > 0; }) <= 1;
        const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
        std::optional<SplitCandidate> split;
        if (!pure && !depth_capped && rows.size() >= params.min_samples_split) {
            if (mtry >= data.width) {
                split = best_split_sorted(data, rows, pool, counts);
            } else {
                // Partial Fisher-Yates draw of mtry distinct candidate features.
                for (size_t i = 0; i < mtry; ++i) {
                    const size_t j = i + static_cast<size_t>(
                                             rng.next_below(static_cast<uint64_t>(data.width - i)));
                    std::swap(pool[i], pool[j]);
                }
                std::vector<uint32_t> candidates(pool.begin(),
                                                 pool.begin() + static_cast<ptrdiff_t>(mtry));
                std::sort(candidates.begin(), candidates.end());
                split = best_split_sorted(data, rows, candidates, counts);
            }
        }

        if (!split) {
            tree.nodes[index].counts = std::move(counts);
            return index;
        }

        std::vector<uint32_t> left_rows;
        std::vector<uint32_t> right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        const double* column =
            data.columns.data() + static_cast<size_t>(split->feature) * data.n;
        for (uint32_t r : rows) {
            (column[r] < split->threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[index].feature = static_cast<int32_t>(split->feature);
        tree.nodes[index].threshold = split->threshold;
        const int32_t left_index = build(left_rows, depth + 1);
        tree.nodes[index].left = left_index;
        const int32_t right_index = build(right_rows, depth + 1);
        tree.nodes[index].right = right_index;
        return index;
    };

    build(root_rows, 0);
    return tree;
}

}  // namespace

std::optional<SplitCandidate> best_split(const TrainingData& data,
                                         const std::vector<uint32_t>& rows,
                                         const std::vector<uint32_t>& features) {
    if (rows.empty()) {
        throw Error::data("forest: best_split over zero rows");
    }
    for (uint32_t r : rows) {
        if (r >= data.n) {
            throw Error::internal("forest: row index out of range");
        }
    }
    std::vector<uint32_t> ordered_features(features);
    std::sort(ordered_features.begin(), ordered_features.end());
    ordered_features.erase(std::unique(ordered_features.begin(), ordered_features.end()),
                           ordered_features.end());
    for (uint32_t f : ordered_features) {
        if (f >= data.width) {
            throw Error::internal("forest: feature index out of range");
        }
    }
    return best_split_sorted(data, rows, ordered_features, count_classes(data, rows));
}

DecisionTree grow_tree(const TrainingData& data, const ForestParams& params,
                       uint64_t tree_seed) {
    params.validate();
    Rng rng(tree_seed);
    std::vector<uint32_t> rows(data.n);
    std::iota(rows.begin(), rows.end(), 0u);
    return grow_tree_on_rows(data, params, rng, std::move(rows));
}

RandomForest train_forest(const Matrix& x, const std::vector<uint32_t>& y,
                          const std::vector<std::string>& vocab, const ForestParams& params,
                          int threads) {
    params.validate();
    if (vocab.empty()) {
        throw Error::data("forest: empty class vocabulary");
    }
    const TrainingData data = TrainingData::from_rows(x, y, vocab.size());

    RandomForest forest;
    forest.vocab = vocab;
    forest.feature_width = data.width;
    forest.params = params;
    forest.tree_seeds.resize(params.trees);
    forest.trees.resize(params.trees);
    for (size_t t = 0; t < params.trees; ++t) {
        forest.tree_seeds[t] = mix_seed(params.seed, static_cast<uint64_t>(t));
    }

    // Each tree is a pure function of its own seed, so the partition into
    // workers cannot change the result.
    parallel_for(params.trees, threads, [&](size_t t) {
        Rng rng(forest.tree_seeds[t]);
        std::vector<uint32_t> rows;
        if (params.bootstrap) {
            const auto draws = std::max<size_t>(
                1, static_cast<size_t>(params.bootstrap_fraction * static_cast<double>(data.n) +
                                       0.5));
            rows.resize(draws);
            for (size_t i = 0; i < draws; ++i) {
                rows[i] = static_cast<uint32_t>(rng.next_below(data.n));
            }
        } else {
            rows.resize(data.n);
            std::iota(rows.begin(), rows.end(), 0u);
        }
        forest.trees[t] = grow_tree_on_rows(data, params, rng, std::move(rows));
    });
    return forest;
}

Prediction predict(const RandomForest& forest, const double* x, size_t width) {
    if (width != forest.feature_width) {
        throw Error::data("forest: feature width mismatch: model expects " +
                          std::to_string(forest.feature_width) + ", got " +
                          std::to_string(width));
    }
    if (forest.trees.empty()) {
        throw Error::data("forest: model has no trees");
    }
    Prediction out;
    out.fractions.assign(forest.vocab.size(), 0.0);
    for (const DecisionTree& tree : forest.trees) {
        const TreeNode& leaf = tree.descend(x);
        uint64_t total = 0;
        for (uint32_t c : leaf.counts) {
            total += c;
        }
        for (size_t cls = 0; cls < leaf.counts.size(); ++cls) {
            if (leaf.counts[cls] > 0) {
                out.fractions[cls] += static_cast<double>(leaf.counts[cls]) /
                                      static_cast<double>(total);
            }
        }
    }
    for (double& f : out.fractions) {
        f /= static_cast<double>(forest.trees.size());
    }
    out.label = 0;
    for (size_t cls = 1; cls < out.fractions.size(); ++cls) {
        if (out.fractions[cls] > out.fractions[out.label]) {
            out.label = static_cast<uint32_t>(cls);
        }
    }
    return out;
}

std::vector<uint32_t> predict_labels(const RandomForest& forest, const Matrix& x, int threads) {
    std::vector<uint32_t> labels(x.rows);
    parallel_for(x.rows, threads, [&](size_t r) {
        labels[r] = predict(forest, x.row(r), x.cols).label;
    });
    return labels;
}

int tune_depth(const Matrix& x, const std::vector<uint32_t>& y, size_t n_classes,
               const std::vector<int>& depth_grid, const ForestParams& params, uint64_t seed,
               int threads) {
    if (depth_grid.empty()) {
        throw Error::config("tune: empty depth grid");
    }
    const size_t n = x.rows;
    if (n < 4) {
        throw Error::data("tune: need at least 4 rows for a 75/25 split");
    }

    // Try shallow trees first so a tie keeps the simplest model; an
    // unlimited depth (0) ranks after every bounded one.
    std::vector<int> grid(depth_grid);
    std::sort(grid.begin(), grid.end(), [](int a, int b) {
        const long ea = a == 0 ? std::numeric_limits<long>::max() : a;
        const long eb = b == 0 ? std::numeric_limits<long>::max() : b;
        return ea < eb;
    });
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (int d : grid) {
        if (d < 0) {
            throw Error::config("tune: negative depth in grid");
        }
    }

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(order);
    const size_t n_fit = n * 3 / 4;

    Matrix fit_x(n_fit, x.cols);
    Matrix val_x(n - n_fit, x.cols);
    std::vector<uint32_t> fit_y(n_fit);
    std::vector<uint32_t> val_y(n - n_fit);
    for (size_t i = 0; i < n; ++i) {
        const uint32_t src = order[i];
        if (i < n_fit) {
            std::copy(x.row(src), x.row(src) + x.cols, fit_x.row(i));
            fit_y[i] = y[src];
        } else {
            std::copy(x.row(src), x.row(src) + x.cols, val_x.row(i - n_fit));
            val_y[i - n_fit] = y[src];
        }
    }

    int chosen = grid.front();
    double best_score = -1.0;
    // Class names play no role in scoring, so a placeholder vocabulary of
    // the right size is enough here.
    const std::vector<std::string> vocab(n_classes, "-");
    for (int depth : grid) {
        ForestParams trial = params;
        trial.max_depth = depth;
        const RandomForest forest = train_forest(fit_x, fit_y, vocab, trial, threads);
        const std::vector<uint32_t> predicted = predict_labels(forest, val_x, threads);
        const double score = micro_f1(val_y, predicted);
        if (score > best_score) {
            best_score = score;
            chosen = depth;
        }
    }
    return chosen;
}

std::string serialize_forest(const RandomForest& forest) {
    std::ostringstream out;
    out << "ctxrec-forest v1\n";
    const ForestParams& p = forest.params;
    out << "trees " << p.trees << "\n";
    out << "max_depth " << p.max_depth << "\n";
    out << "max_features " << p.max_features << "\n";
    out << "bootstrap " << (p.bootstrap ? 1 : 0) << "\n";
    out << "bootstrap_fraction " << format_double(p.bootstrap_fraction) << "\n";
    out << "min_samples_split " << p.min_samples_split << "\n";
    out << "seed " << p.seed << "\n";
    out << "width " << forest.feature_width << "\n";
    out << "classes " << forest.vocab.size() << "\n";
    for (const std::string& label : forest.vocab) {
        out << "class " << label << "\n";
    }
    for (size_t t = 0; t < forest.trees.size(); ++t) {
        const DecisionTree& tree = forest.trees[t];
        out << "tree " << t << " seed " << forest.tree_seeds[t] << " nodes "
            << tree.nodes.size() << "\n";
        for (const TreeNode& node : tree.nodes) {
            if (node.is_leaf()) {
                out << "L";
                for (uint32_t c : node.counts) {
                    out << " " << c;
                }
                out << "\n";
            } else {
                out << "I " << node.feature << " " << format_double(node.threshold) << " "
                    << node.left << " " << node.right << "\n";
            }
        }
    }
    out << "end\n";
    return out.str();
}

namespace {

class LineReader {
  public:
    explicit LineReader(const std::string& text) : stream_(text) {}

    std::string next() {
        std::string line;
        if (!std::getline(stream_, line)) {
            throw Error::data("forest model: unexpected end of file at line " +
                              std::to_string(number_ + 1));
        }
        ++number_;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return line;
    }

    size_t number() const { return number_; }

  private:
    std::istringstream stream_;
    size_t number_ = 0;
};

uint64_t expect_u64(LineReader& reader, const std::string& key) {
    const std::string line = reader.next();
    const std::string prefix = key + " ";
    if (line.rfind(prefix, 0) != 0) {
        throw Error::data("forest model: expected '" + key + "' at line " +
                          std::to_string(reader.number()));
    }
    return std::strtoull(line.c_str() + prefix.size(), nullptr, 10);
}

}  // namespace

RandomForest parse_forest(const std::string& text) {
    LineReader reader(text);
    if (reader.next() != "ctxrec-forest v1") {
        throw Error::data("forest model: version mismatch, expected 'ctxrec-forest v1'");
    }
    RandomForest forest;
    forest.params.trees = expect_u64(reader, "trees");
    forest.params.max_depth = static_cast<int>(expect_u64(reader, "max_depth"));
    forest.params.max_features = expect_u64(reader, "max_features");
    forest.params.bootstrap = expect_u64(reader, "bootstrap") != 0;
    {
        const std::string line = reader.next();
        if (line.rfind("bootstrap_fraction ", 0) != 0) {
            throw Error::data("forest model: expected 'bootstrap_fraction' at line " +
                              std::to_string(reader.number()));
        }
        forest.params.bootstrap_fraction = std::strtod(line.c_str() + 19, nullptr);
    }
    forest.params.min_samples_split = expect_u64(reader, "min_samples_split");
    forest.params.seed = expect_u64(reader, "seed");
    forest.feature_width = expect_u64(reader, "width");
    const size_t n_classes = expect_u64(reader, "classes");
    forest.vocab.reserve(n_classes);
    for (size_t i = 0; i < n_classes; ++i) {
        const std::string line = reader.next();
        if (line.rfind("class ", 0) != 0) {
            throw Error::data("forest model: expected 'class' at line " +
                              std::to_string(reader.number()));
        }
        forest.vocab.push_back(line.substr(6));
    }

    forest.trees.resize(forest.params.trees);
    forest.tree_seeds.resize(forest.params.trees);
    for (size_t t = 0; t < forest.params.trees; ++t) {
        std::istringstream header(reader.next());
        std::string word;
        size_t index = 0;
        size_t node_count = 0;
        uint64_t seed = 0;
        std::string seed_word;
        std::string nodes_word;
        if (!(header >> word >> index >> seed_word >> seed >> nodes_word >> node_count) ||
            word != "tree" || seed_word != "seed" || nodes_word != "nodes" || index != t) {
            throw Error::data("forest model: malformed tree header at line " +
                              std::to_string(reader.number()));
        }
        forest.tree_seeds[t] = seed;
        DecisionTree& tree = forest.trees[t];
        tree.nodes.resize(node_count);
        for (size_t i = 0; i < node_count; ++i) {
            std::istringstream fields(reader.next());
            std::string kind;
            fields >> kind;
            TreeNode& node = tree.nodes[i];
            if (kind == "I") {
                if (!(fields >> node.feature)) {
                    throw Error::data("forest model: malformed node at line " +
                                      std::to_string(reader.number()));
                }
                std::string threshold_text;
                if (!(fields >> threshold_text >> node.left >> node.right)) {
                    throw Error::data("forest model: malformed node at line " +
                                      std::to_string(reader.number()));
                }
                node.threshold = std::strtod(threshold_text.c_str(), nullptr);
                if (node.left < 0 || node.right < 0 ||
                    static_cast<size_t>(node.left) >= node_count ||
                    static_cast<size_t>(node.right) >= node_count) {
                    throw Error::data("forest model: child index out of range at line " +
                                      std::to_string(reader.number()));
                }
            } else if (kind == "L") {
                node.feature = -1;
                node.counts.reserve(n_classes);
                uint32_t count = 0;
                while (fields >> count) {
                    node.counts.push_back(count);
                }
                if (node.counts.size() != n_classes) {
                    throw Error::data("forest model: leaf counts do not match class count "
                                      "at line " +
                                      std::to_string(reader.number()));
                }
            } else {
                throw Error::data("forest model: unknown node kind at line " +
                                  std::to_string(reader.number()));
            }
        }
    }
    if (reader.next() != "end") {
        throw Error::data("forest model: missing end marker");
    }
    return forest;
}

void save_forest_file(const RandomForest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error::io("cannot open '" + path + "' for writing");
    }
    const std::string text = serialize_forest(forest);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error::io("failed writing '" + path + "'");
    }
}

RandomForest load_forest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error::io("cannot open '" + path + "' for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_forest(buffer.str());
}

}  // namespace ctxrec
