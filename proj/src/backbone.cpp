#include "partcom/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "partcom/errors.hpp"
#include "partcom/rng.hpp"

namespace partcom {

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    return Tensor::from_data(fan_in, fan_out, std::move(w), true);
}

Tensor init_bias(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    // Nonnegative biases keep rectified units away from the dead region at
    // the start of training; with narrow layers a symmetric init loses a
    // noticeable fraction of capacity to units that never fire.
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> b(fan_out);
    for (auto& v : b) v = rng.uniform(0.0, bound);
    return Tensor::from_data(1, fan_out, std::move(b), true);
}

Encoder Encoder::init(const EncoderConfig& cfg, std::uint64_t seed) {
    if (cfg.d < 8) throw ConfigError("encoder feature width must be at least 8");
    if (cfg.h1 == 0 || cfg.h2 == 0) throw ConfigError("encoder hidden widths must be positive");
    if (!(cfg.rho > 0.0)) throw ConfigError("encoder pooling radius must be positive");
    Rng rng(mix64(seed ^ fnv1a64("encoder")));
    Encoder e;
    e.cfg = cfg;
    e.w1 = init_weight(3, cfg.h1, rng);
    e.b1 = init_bias(3, cfg.h1, rng);
    e.w2 = init_weight(cfg.h1, cfg.h2, rng);
    e.b2 = init_bias(cfg.h1, cfg.h2, rng);
    e.w3 = init_weight(cfg.h2, cfg.d, rng);
    e.b3 = init_bias(cfg.h2, cfg.d, rng);
    e.wc = init_weight(2 * cfg.d, cfg.d, rng);
    e.bc = init_bias(2 * cfg.d, cfg.d, rng);
    return e;
}

std::vector<Tensor> Encoder::parameters() const {
    return {w1, b1, w2, b2, w3, b3, wc, bc};
}

std::vector<std::vector<int>> neighbor_lists(const PointCloud& x, double rho) {
    const std::size_t L = x.size();
    const double r2 = rho * rho;
    std::vector<std::vector<int>> out(L);
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            const double dx = x.pts[i][0] - x.pts[j][0];
            const double dy = x.pts[i][1] - x.pts[j][1];
            const double dz = x.pts[i][2] - x.pts[j][2];
            if (dx * dx + dy * dy + dz * dz <= r2) out[i].push_back(static_cast<int>(j));
        }
    }
    return out;
}

Tensor Encoder::encode(const PointCloud& x,
                       const std::vector<std::vector<int>>& neighbors) const {
    const std::size_t L = x.size();
    if (L == 0) throw std::invalid_argument("encode: empty cloud");
    if (neighbors.size() != L) throw std::invalid_argument("encode: neighbor list size mismatch");

    // Inputs must be normalized: centroid at the origin, max norm 1.
    double cx = 0, cy = 0, cz = 0, mn = 0;
    for (const auto& p : x.pts) {
        cx += p[0];
        cy += p[1];
        cz += p[2];
        mn = std::max(mn, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    const double n = static_cast<double>(L);
    if (std::abs(cx / n) > 1e-6 || std::abs(cy / n) > 1e-6 || std::abs(cz / n) > 1e-6 ||
        std::abs(mn - 1.0) > 1e-6) {
        throw std::invalid_argument("encode: cloud is not normalized");
    }

    std::vector<double> coords;
    coords.reserve(L * 3);
    for (const auto& p : x.pts) {
        coords.push_back(p[0]);
        coords.push_back(p[1]);
        coords.push_back(p[2]);
    }
    Tensor X = Tensor::from_data(L, 3, std::move(coords), false);
    Tensor h1 = relu(add_rowvec(matmul(X, w1), b1));
    Tensor h2 = relu(add_rowvec(matmul(h1, w2), b2));
    Tensor f = relu(add_rowvec(matmul(h2, w3), b3));
    Tensor ctx = neighborhood_mean(f, neighbors);
    return relu(add_rowvec(matmul(concat_cols({f, ctx}), wc), bc));
}

Tensor Encoder::encode(const PointCloud& x) const { return encode(x, neighbor_lists(x, cfg.rho)); }

}  // namespace partcom
