#include "ctxrec/synth.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "ctxrec/error.hpp"
#include "ctxrec/rng.hpp"

namespace ctxrec {

void GeneratorParams::validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error::config("rho out of [0,1]");
    if (users == 0) throw Error::config("users must be positive");
    if (records_per_user == 0) throw Error::config("records per user must be positive");
    if (we_labels < 2 || wa_labels < 2 || wo_labels < 2)
        throw Error::config("label vocabularies need at least 2 labels");
    if (feature_width == 0) throw Error::config("feature width must be positive");
    if (prototype_scale < 0.0 || noise_scale < 0.0)
        throw Error::config("scales must be nonnegative");
}

std::vector<std::string> synth_vocab(const std::string& prefix, size_t n) {
    std::vector<std::string> v;
    v.reserve(n);
    for (size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

Matrix prototype_matrix(const GeneratorParams& p) {
    size_t combos = p.we_labels * p.wa_labels * p.wo_labels;
    Matrix m(combos, p.feature_width);
    Rng rng(mix_seed(p.seed, "prototypes"));
    for (double& v : m.data) v = p.prototype_scale * rng.next_gaussian();
    return m;
}

namespace {

std::vector<size_t> seeded_permutation(size_t n, uint64_t seed) {
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(perm.begin(), perm.size());
    return perm;
}

}  // namespace

std::vector<size_t> wa_coupling(const GeneratorParams& p) {
    auto perm = seeded_permutation(p.wa_labels, mix_seed(p.seed, "couple-wa"));
    std::vector<size_t> map(p.we_labels);
    for (size_t we = 0; we < p.we_labels; ++we) map[we] = perm[we % p.wa_labels];
    return map;
}

std::vector<size_t> wo_coupling(const GeneratorParams& p) {
    auto perm = seeded_permutation(p.wo_labels, mix_seed(p.seed, "couple-wo"));
    std::vector<size_t> map(p.we_labels * p.wa_labels);
    for (size_t i = 0; i < map.size(); ++i) map[i] = perm[i % p.wo_labels];
    return map;
}

Dataset sample_dataset(const GeneratorParams& p) {
    p.validate();
    auto we_vocab = synth_vocab("we", p.we_labels);
    auto wa_vocab = synth_vocab("wa", p.wa_labels);
    auto wo_vocab = synth_vocab("wo", p.wo_labels);
    Matrix prototypes = prototype_matrix(p);
    auto wa_map = wa_coupling(p);
    auto wo_map = wo_coupling(p);

    int user_digits = 1;
    for (size_t u = p.users - 1; u >= 10; u /= 10) ++user_digits;

    Dataset ds;
    ds.feature_names.reserve(p.feature_width);
    for (size_t j = 0; j < p.feature_width; ++j)
        ds.feature_names.push_back("f" + std::to_string(j));
    ds.records.reserve(p.users * p.records_per_user);

    for (size_t u = 0; u < p.users; ++u) {
        Rng rng(mix_seed(p.seed, u));  // per-user substream
        std::string user = std::to_string(u);
        user = "u" + std::string(user_digits - user.size(), '0') + user;
        for (size_t i = 0; i < p.records_per_user; ++i) {
            size_t we = rng.next_below(p.we_labels);
            size_t wa = rng.next_double() < p.rho ? wa_map[we]
                                                  : rng.next_below(p.wa_labels);
            size_t wo = rng.next_double() < p.rho
                            ? wo_map[we * p.wa_labels + wa]
                            : rng.next_below(p.wo_labels);
            Record r;
            r.user = user;
            r.t_ms = static_cast<int64_t>(i) * 1'800'000;
            size_t combo = (we * p.wa_labels + wa) * p.wo_labels + wo;
            r.features.resize(p.feature_width);
            const double* proto = prototypes.row(combo);
            for (size_t j = 0; j < p.feature_width; ++j)
                r.features[j] = proto[j] + p.noise_scale * rng.next_gaussian();
            r.missing.assign(p.feature_width, 0);
            r.we = we_vocab[we];
            r.wa = wa_vocab[wa];
            r.wo = wo_vocab[wo];
            ds.records.push_back(std::move(r));
        }
    }
    return ds;
}

double mutual_information(const std::vector<std::string>& labels_a,
                          const std::vector<std::string>& labels_b) {
    if (labels_a.empty()) throw Error::data("mutual_information: empty input");
    if (labels_a.size() != labels_b.size())
        throw Error::data("mutual_information: sequence lengths differ");
    std::map<std::string, size_t> ca, cb;
    std::map<std::pair<std::string, std::string>, size_t> joint;
    for (size_t i = 0; i < labels_a.size(); ++i) {
        ++ca[labels_a[i]];
        ++cb[labels_b[i]];
        ++joint[{labels_a[i], labels_b[i]}];
    }
    double n = static_cast<double>(labels_a.size());
    double mi = 0.0;
    for (const auto& [ab, c] : joint) {
        double pxy = static_cast<double>(c) / n;
        double ratio = (static_cast<double>(c) * n) /
                       (static_cast<double>(ca[ab.first]) * static_cast<double>(cb[ab.second]));
        mi += pxy * std::log(ratio);
    }
    return std::max(0.0, mi);
}

}  // namespace ctxrec
