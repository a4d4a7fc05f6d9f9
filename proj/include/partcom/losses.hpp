// Training objectives: prototype-based classification, compactness,
// part-balance, part-diversity, and their weighted total. All distances are
// cosine distance 1 - cos except the compactness term, which is squared
// Euclidean. Class labels here are 1-based (1..K), matching sample labels.
#pragma once

#include <cstdint>
#include <vector>

#include "partcom/tensor.hpp"

namespace partcom {

struct LossWeights {
    double lambda1 = 0.1;  // compactness
    double lambda2 = 1.0;  // part balance
    double lambda3 = 1.0;  // part diversity
    double tau = 0.1;      // part-balance temperature
    double delta = 0.1;    // diversity hinge threshold
    void validate() const;
};

// K x Dc learnable class prototypes, one row per known class. Also used for
// the virtual unknown bank. Rows start as random unit vectors.
Tensor init_prototype_rows(int K, std::size_t Dc, std::uint64_t seed, const char* tag);

// 1 - cosine similarity of two row vectors, in [0, 2].
Tensor cosine_distance(const Tensor& a, const Tensor& b);

// -log softmax over logits -d(Z_c, C^k), K-way; true_class is 1-based.
Tensor loss_ce(const Tensor& Zc, const Tensor& C, int true_class);

// Same loss over the stacked bank rows (e.g. [C; V]); target_row is 0-based.
Tensor loss_ce_rows(const Tensor& Zc, const Tensor& bank, std::size_t target_row);

// Squared Euclidean pull toward the true class prototype.
Tensor loss_pl(const Tensor& Zc, const Tensor& C, int true_class);

// Per-point cross entropy over one class's M prototypes with logits
// cos(z_i, p_m)/tau and targets fixed by the precomputed balanced assignment
// (integers, so no gradient reaches the assignment). Mean over points.
Tensor loss_pb(const Tensor& Z, const Tensor& Pk, const std::vector<int>& assigned, double tau);

// Hinge on each prototype's highest cosine similarity to any other prototype,
// summed over the whole bank.
Tensor loss_pd(const Tensor& P, double delta);

// ce + lambda1*pl + lambda2*pb + lambda3*pd.
Tensor total_loss(const Tensor& ce, const Tensor& pl, const Tensor& pb, const Tensor& pd,
                  const LossWeights& w);

}  // namespace partcom
