#include "ctxrec/metrics.hpp"

#include <map>

#include "ctxrec/error.hpp"

namespace ctxrec {

namespace {

void check_lengths(size_t truth, size_t predicted) {
    if (truth == 0) {
        throw Error::data("metrics: no samples to score");
    }
    if (truth != predicted) {
        throw Error::data("metrics: truth and prediction lengths differ (" +
                          std::to_string(truth) + " vs " + std::to_string(predicted) + ")");
    }
}

// Pooled micro counts. Every (truth, predicted) pair contributes one TP on a
// match, otherwise one FP for the predicted class and one FN for the true one.
template <typename Label>
double pooled_micro_f1(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
    check_lengths(truth.size(), predicted.size());
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == predicted[i]) {
            ++tp;
        } else {
            ++fp;
            ++fn;
        }
    }
    const uint64_t denom = 2 * tp + fp + fn;
    if (denom == 0) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double micro_f1(const std::vector<std::string>& truth,
                const std::vector<std::string>& predicted) {
    return pooled_micro_f1(truth, predicted);
}

double micro_f1(const std::vector<uint32_t>& truth, const std::vector<uint32_t>& predicted) {
    return pooled_micro_f1(truth, predicted);
}

std::map<std::string, LabelScore> per_label_f1(const std::vector<std::string>& truth,
                                               const std::vector<std::string>& predicted,
                                               const std::vector<std::string>& vocabulary) {
    check_lengths(truth.size(), predicted.size());
    if (vocabulary.empty()) {
        throw Error::data("metrics: empty vocabulary");
    }

    struct Tally {
        uint64_t tp = 0;
        uint64_t fp = 0;
        uint64_t fn = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& label : vocabulary) {
        tallies[label];  // keep unsupported labels present in the output
    }
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == predicted[i]) {
            auto it = tallies.find(truth[i]);
            if (it != tallies.end()) {
                ++it->second.tp;
            }
        } else {
            auto pit = tallies.find(predicted[i]);
            if (pit != tallies.end()) {
                ++pit->second.fp;
            }
            auto tit = tallies.find(truth[i]);
            if (tit != tallies.end()) {
                ++tit->second.fn;
            }
        }
    }

    std::map<std::string, LabelScore> scores;
    for (const auto& [label, t] : tallies) {
        LabelScore s;
        const uint64_t denom = 2 * t.tp + t.fp + t.fn;
        if (denom == 0) {
            s.f1 = 0.0;
            s.supported = false;
        } else {
            s.f1 = 2.0 * static_cast<double>(t.tp) / static_cast<double>(denom);
        }
        scores.emplace(label, s);
    }
    return scores;
}

}  // namespace ctxrec
