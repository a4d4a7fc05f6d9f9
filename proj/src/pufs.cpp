#include "partcom/pufs.hpp"

#include <cstdio>
#include <stdexcept>

#include "partcom/errors.hpp"
#include "partcom/losses.hpp"
#include "partcom/rng.hpp"

namespace partcom {

void MixConfig::validate() const {
    // The mix must stay nearer the base class, hence the lower bound above 0.5.
    if (!(lambda_lo > 0.5) || !(lambda_hi <= 1.0) || !(lambda_lo <= lambda_hi))
        throw ConfigError("mix lambda range must satisfy 0.5 < lo <= hi <= 1.0");
    if (!(weight >= 0.0)) throw ConfigError("pufs.weight must be nonnegative");
}

std::vector<MixPair> sample_pairs(const std::vector<int>& labels, std::uint64_t seed,
                                  const MixConfig& cfg) {
    cfg.validate();
    bool multi_class = false;
    for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] != labels[0]) {
            multi_class = true;
            break;
        }
    if (!multi_class) {
        std::fprintf(stderr, "warning: single-class batch, skipping unknown-feature synthesis\n");
        return {};
    }

    Rng rng(mix64(seed ^ fnv1a64("mixpairs")));
    std::vector<MixPair> pairs;
    pairs.reserve(labels.size());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (labels[j] != labels[i]) candidates.push_back(j);
        MixPair p;
        p.i = i;
        p.j = candidates[rng.uniform_int(candidates.size())];
        p.lambda = rng.uniform(cfg.lambda_lo, cfg.lambda_hi);
        pairs.push_back(p);
    }
    return pairs;
}

Tensor mixup_parts(const Tensor& Zp_i, int class_i, const Tensor& Zp_j, int class_j,
                   double lambda, const MixConfig& cfg) {
    if (class_i == class_j)
        throw std::invalid_argument("mixup_parts: the two samples must come from different classes");
    if (lambda < cfg.lambda_lo - 1e-12 || lambda > cfg.lambda_hi + 1e-12)
        throw std::invalid_argument("mixup_parts: lambda outside the configured range");
    return add(scale(Zp_i, lambda), scale(Zp_j, 1.0 - lambda));
}

namespace {

Tensor ce_over_union(const Tensor& feat, const Tensor& C, const Tensor& V,
                     std::size_t target_row) {
    if (C.rows() != V.rows() || C.cols() != V.cols())
        throw std::invalid_argument("prototype banks C and V must have matching shapes: " +
                                    shape_str(C) + " vs " + shape_str(V));
    return loss_ce_rows(feat, concat_rows({C, V}), target_row);
}

}  // namespace

Tensor loss_ce_virtual(const Tensor& Zvc, const Tensor& C, const Tensor& V, int source_class) {
    if (source_class < 1 || static_cast<std::size_t>(source_class) > V.rows())
        throw std::invalid_argument("loss_ce_virtual: class index out of range");
    return ce_over_union(Zvc, C, V, C.rows() + static_cast<std::size_t>(source_class - 1));
}

Tensor loss_ce_known_union(const Tensor& Zc, const Tensor& C, const Tensor& V, int true_class) {
    if (true_class < 1 || static_cast<std::size_t>(true_class) > C.rows())
        throw std::invalid_argument("loss_ce_known_union: class index out of range");
    return ce_over_union(Zc, C, V, static_cast<std::size_t>(true_class - 1));
}

}  // namespace partcom
