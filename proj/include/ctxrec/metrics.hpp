#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctxrec {

// Micro-averaged F1 over pooled per-class TP/FP/FN.  With exactly one
// predicted and one true label per item this collapses to accuracy, but the
// pooled counts are computed explicitly, not shortcut.  Throws on empty or
// mismatched inputs.
double micro_f1(const std::vector<std::string>& truth,
                const std::vector<std::string>& predicted);
double micro_f1(const std::vector<uint32_t>& truth,
                const std::vector<uint32_t>& predicted);

struct LabelScore {
    double f1 = 0.0;
    bool supported = true;  // false when the label never occurs in truth or predictions

    bool operator==(const LabelScore&) const = default;
};

// One-vs-rest F1 per vocabulary label.  A label with zero TP+FP+FN scores
// 0 and is flagged unsupported rather than dropped.
std::map<std::string, LabelScore> per_label_f1(
    const std::vector<std::string>& truth,
    const std::vector<std::string>& predicted,
    const std::vector<std::string>& vocabulary);

}  // namespace ctxrec
