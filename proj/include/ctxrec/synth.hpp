#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxrec/dataset.hpp"
#include "ctxrec/matrix.hpp"

namespace ctxrec {

// Desk-scale generator with a single correlation knob: rho interpolates
// between independent aspects (0) and deterministically coupled ones (1),
// so directional augmentation effects are reproducible without the
// original mobile-sensing corpus.
struct GeneratorParams {
    size_t users = 20;
    size_t records_per_user = 250;
    size_t we_labels = 8;
    size_t wa_labels = 10;
    size_t wo_labels = 5;
    double rho = 0.8;          // correlation strength in [0, 1]
    size_t feature_width = 30;
    double prototype_scale = 1.0;
    double noise_scale = 2.0;
    uint64_t seed = 0;

    void validate() const;
};

// Label ids used by the generator: we0..we{n-1}, wa.., wo..
std::vector<std::string> synth_vocab(const std::string& prefix, size_t n);

// The per-(WE,WA,WO) feature prototypes, one row per combination, indexed
// by (we * wa_labels + wa) * wo_labels + wo.  Derived from the master seed
// only; exposed so tests can verify label separability independently.
Matrix prototype_matrix(const GeneratorParams& p);

// Deterministic coupling maps derived from the seed: WA = wa_map[WE] with
// probability rho, WO = wo_map[(WE * wa_labels + WA) % wo_labels-order].
std::vector<size_t> wa_coupling(const GeneratorParams& p);
std::vector<size_t> wo_coupling(const GeneratorParams& p);

// Draws the dataset: WE uniform; WA and WO from the rho-mixture; features
// = prototype(WE,WA,WO) + Gaussian noise.  Byte-identical output for equal
// params; per-user substreams derive from (seed, user index) so users can
// generate concurrently with a deterministic merge order.
Dataset sample_dataset(const GeneratorParams& p);

// Plug-in mutual information of the empirical joint distribution, in nats.
// Nonnegative, bounded by min(H(A), H(B)).  Throws on empty or mismatched
// input.
double mutual_information(const std::vector<std::string>& labels_a,
                          const std::vector<std::string>& labels_b);

}  // namespace ctxrec
