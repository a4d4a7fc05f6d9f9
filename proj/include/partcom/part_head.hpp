// Class-specific part prototypes and the part-aware feature pipeline:
// similarity map S = softmax_columns(P Z^T), part composites Z_p = S Z, and
// the per-row reduction + concatenation that yields the final feature Z_c.
#pragma once

#include <cstdint>
#include <vector>

#include "partcom/tensor.hpp"

namespace partcom {

struct PartBank {
    int K = 0;            // known classes
    int M = 0;            // prototypes per class
    std::size_t D = 0;    // feature width
    Tensor P;             // KM x D, class-major: row k*M + m holds prototype m of class k

    // Seeded unit rows; candidates with pairwise cosine similarity above 0.5
    // are re-drawn (with gradual relaxation) so the diversity loss starts
    // satisfiable.
    static PartBank init(int K, int M, std::size_t D, std::uint64_t seed);

    // Rows of P for one class, as a view on the tape.
    Tensor class_slice(int k) const;
};

// Throws if any prototype has collapsed to (near) zero norm.
void check_prototypes(const PartBank& bank);

// S = softmax over prototypes, per point: KM x L, columns sum to 1.
Tensor similarity_map(const PartBank& bank, const Tensor& Z);

// Z_p = S Z: KM x D part composite features.
Tensor aggregate(const Tensor& S, const Tensor& Z);

struct Reducer {
    std::size_t d_in = 0;
    std::size_t d_r = 0;
    Tensor W;  // d_in x d_r
    Tensor b;  // 1 x d_r

    static Reducer init(std::size_t d_in, std::size_t d_r, std::uint64_t seed);
};

// Row-wise relu(Z_p W + b): KM x D_r.
Tensor reduce_rows(const Reducer& reducer, const Tensor& Z_p);

// Row-major flattening of a KM x D_r matrix into 1 x (KM*D_r), class-major
// blocks of size D_r.
Tensor concat_flatten(const Tensor& reduced);

// reduce_rows then concat_flatten: the default fusion.
Tensor reduce_concat(const Reducer& reducer, const Tensor& Z_p);

// Ablation fusion: column-wise max over the KM reduced rows, 1 x D_r.
Tensor reduce_maxpool(const Reducer& reducer, const Tensor& Z_p);

}  // namespace partcom
