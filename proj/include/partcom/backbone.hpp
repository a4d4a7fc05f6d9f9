// Point-set encoder: a per-point MLP (3 -> h1 -> h2 -> d) whose output is
// enriched with a local context vector (mean of the per-point features inside
// radius rho) and passed through one more affine+ReLU. Permutation
// equivariant; each output row depends only on that point's neighborhood.
#pragma once

#include <cstdint>
#include <vector>

#include "partcom/shapegen.hpp"
#include "partcom/tensor.hpp"

namespace partcom {

struct EncoderConfig {
    std::size_t h1 = 64;
    std::size_t h2 = 128;
    std::size_t d = 64;   // feature width; at least 8
    double rho = 0.3;     // context pooling radius
};

struct Encoder {
    EncoderConfig cfg;
    Tensor w1, b1, w2, b2, w3, b3;  // per-point MLP
    Tensor wc, bc;                  // context fusion (2d -> d)

    static Encoder init(const EncoderConfig& cfg, std::uint64_t seed);

    std::vector<Tensor> parameters() const;

    // Neighbor lists may be precomputed (clouds are static across epochs);
    // they must come from neighbor_lists(x, cfg.rho).
    Tensor encode(const PointCloud& x, const std::vector<std::vector<int>>& neighbors) const;
    Tensor encode(const PointCloud& x) const;
};

// Indices within rho of each point (always includes the point itself),
// ascending order.
std::vector<std::vector<int>> neighbor_lists(const PointCloud& x, double rho);

// Affine layer factory used across the model: weights and biases uniform in
// +-1/sqrt(fan_in).
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, class Rng& rng);
Tensor init_bias(std::size_t fan_in, std::size_t fan_out, class Rng& rng);

}  // namespace partcom
