// Part-based unknown feature synthesis: convex mixes of part composite
// features from two different classes, trained against K learnable virtual
// unknown prototypes via a 2K-way cross entropy over [C; V].
#pragma once

#include <cstdint>
#include <vector>

#include "partcom/tensor.hpp"

namespace partcom {

struct MixConfig {
    bool enabled = true;
    double lambda_lo = 0.6;
    double lambda_hi = 1.0;
    // When true (default), known-sample classification also ranks all 2K
    // prototypes; the switch restores the plain K-way loss.
    bool known_ce_union = true;
    // Weight of the virtual-prototype term in the training objective; the
    // synthesis loss enters the batch total at this scale.
    double weight = 1.0;
    void validate() const;
};

struct MixPair {
    std::size_t i = 0;  // batch index of the base sample
    std::size_t j = 0;  // batch index of the different-class partner
    double lambda = 1.0;
};

// One pair per batch sample, partner drawn uniformly among different-class
// samples, lambda ~ U[lo, hi]. A single-class batch yields an empty list and
// a warning on stderr (PUFS is skipped for that batch).
std::vector<MixPair> sample_pairs(const std::vector<int>& labels, std::uint64_t seed,
                                  const MixConfig& cfg = MixConfig{});

// lambda*Zp_i + (1-lambda)*Zp_j at the part-composite level. The classes are
// passed so the different-class contract can be enforced.
Tensor mixup_parts(const Tensor& Zp_i, int class_i, const Tensor& Zp_j, int class_j,
                   double lambda, const MixConfig& cfg = MixConfig{});

// 2K-way -log softmax over [C; V] with target V^i (source_class is 1-based).
Tensor loss_ce_virtual(const Tensor& Zvc, const Tensor& C, const Tensor& V, int source_class);

// 2K-way known-sample loss targeting C^i; used instead of the K-way loss
// whenever PUFS is active with known_ce_union.
Tensor loss_ce_known_union(const Tensor& Zc, const Tensor& C, const Tensor& V, int true_class);

}  // namespace partcom
