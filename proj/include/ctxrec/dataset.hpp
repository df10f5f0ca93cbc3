#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctxrec {

// One 30-minute observation: fixed-width feature vector with a missing
// mask and the three self-reported labels.
struct Record {
    std::string user;
    int64_t t_ms = 0;  // window start, epoch milliseconds
    std::vector<double> features;
    std::vector<uint8_t> missing;  // 1 iff the feature was absent (to be imputed)
    std::string we, wa, wo;

    bool operator==(const Record&) const = default;
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Record> records;

    size_t width() const { return feature_names.size(); }
    bool operator==(const Dataset&) const = default;
};

// Canonical CSV serialization:
//   user,t_ms,<f...>,<f>_missing...,we,wa,wo
// Feature values use shortest round-trip formatting, so
// read_table(write_table(ds)) == ds and the bytes are reproducible.
std::string write_table(const Dataset& ds);
Dataset read_table(const std::string& text);

void write_table_file(const Dataset& ds, const std::string& path);
Dataset read_table_file(const std::string& path);

// Digest of the canonical serialization, e.g. "fnv1a64:90b1..."; identifies
// the dataset in reports and manifests.
std::string dataset_digest(const Dataset& ds);

// Shortest round-trip decimal formatting for doubles (std::to_chars).
std::string format_double(double v);

}  // namespace ctxrec
