#include "partcom/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "partcom/errors.hpp"
#include "partcom/rng.hpp"

namespace partcom {

void LossWeights::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
        throw ConfigError("loss weights must be nonnegative");
    if (!(tau > 0.0)) throw ConfigError("temperature tau must be positive");
    if (delta < -1.0 || delta > 1.0) throw ConfigError("diversity threshold must lie in [-1, 1]");
}

Tensor init_prototype_rows(int K, std::size_t Dc, std::uint64_t seed, const char* tag) {
    if (K <= 0 || Dc == 0) throw ConfigError("prototype bank needs positive dimensions");
    Rng rng(mix64(seed ^ fnv1a64(tag)));
    std::vector<double> data(static_cast<std::size_t>(K) * Dc);
    for (int k = 0; k < K; ++k) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (std::size_t j = 0; j < Dc; ++j) {
                const double v = rng.normal();
                data[static_cast<std::size_t>(k) * Dc + j] = v;
                norm2 += v * v;
            }
        } while (norm2 < 1e-18);
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t j = 0; j < Dc; ++j) data[static_cast<std::size_t>(k) * Dc + j] *= inv;
    }
    return Tensor::from_data(static_cast<std::size_t>(K), Dc, std::move(data), true);
}

Tensor cosine_distance(const Tensor& a, const Tensor& b) {
    return scale(add_const(cosine_similarity(a, b), -1.0), -1.0);
}

namespace {

void check_class_index(int true_class, std::size_t K, const char* op) {
    if (true_class < 1 || static_cast<std::size_t>(true_class) > K) {
        throw std::invalid_argument(std::string(op) + ": class index " +
                                    std::to_string(true_class) + " outside 1.." +
                                    std::to_string(K));
    }
}

}  // namespace

Tensor loss_ce_rows(const Tensor& Zc, const Tensor& bank, std::size_t target_row) {
    if (target_row >= bank.rows())
        throw std::invalid_argument("loss_ce_rows: target row out of range");
    // Degenerate directions take their limiting values so the loss stays
    // finite on every finite input: a zero feature sees all rows uniformly
    // (constant ln N, no gradient) and a zero bank row gets the orthogonal
    // logit 0. Live inputs go through the unmodified fast path.
    auto row_norm = [](const Tensor& t, std::size_t i) {
        double n2 = 0.0;
        const auto& v = t.values();
        for (std::size_t j = 0; j < t.cols(); ++j) n2 += v[i * t.cols() + j] * v[i * t.cols() + j];
        return std::sqrt(n2);
    };
    const std::size_t n = bank.rows();
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < n; ++i)
        if (row_norm(bank, i) > kNormEpsilon) alive.push_back(i);
    if (row_norm(Zc, 0) <= kNormEpsilon || alive.empty())
        return Tensor::scalar(std::log(static_cast<double>(n)));
    Tensor logits;
    if (alive.size() == n) {
        // Logits -d = cos - 1; softmax is shift invariant, so the cosines
        // serve directly.
        logits = cosine_rows(Zc, bank);  // 1 x rows
    } else {
        std::vector<double> sel(alive.size() * n, 0.0), scatter(alive.size() * n, 0.0);
        for (std::size_t r = 0; r < alive.size(); ++r) {
            sel[r * n + alive[r]] = 1.0;
            scatter[r * n + alive[r]] = 1.0;
        }
        Tensor alive_bank = matmul(Tensor::from_data(alive.size(), n, std::move(sel)), bank);
        logits = matmul(cosine_rows(Zc, alive_bank),
                        Tensor::from_data(alive.size(), n, std::move(scatter)));
    }
    Tensor lse = row_logsumexp(logits);
    Tensor hit = gather_cols(logits, {static_cast<int>(target_row)});
    return sub(lse, hit);
}

Tensor loss_ce(const Tensor& Zc, const Tensor& C, int true_class) {
    check_class_index(true_class, C.rows(), "loss_ce");
    return loss_ce_rows(Zc, C, static_cast<std::size_t>(true_class - 1));
}

Tensor loss_pl(const Tensor& Zc, const Tensor& C, int true_class) {
    check_class_index(true_class, C.rows(), "loss_pl");
    return squared_distance(Zc, slice_rows(C, static_cast<std::size_t>(true_class - 1), 1));
}

Tensor loss_pb(const Tensor& Z, const Tensor& Pk, const std::vector<int>& assigned, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("loss_pb: tau must be positive");
    if (assigned.size() != Z.rows())
        throw std::invalid_argument("loss_pb: need one assigned prototype per point");
    const int M = static_cast<int>(Pk.rows());
    for (int t : assigned)
        if (t < 0 || t >= M) throw std::invalid_argument("loss_pb: assignment index out of range");
    // A rectified point feature can be exactly zero, leaving its direction
    // (hence its distance to every prototype) undefined. Those rows take the
    // uniform-softmax limit: a constant ln M with no gradient.
    const std::size_t L = Z.rows(), D = Z.cols();
    const auto& zv = Z.values();
    std::vector<std::size_t> alive;
    std::vector<int> alive_targets;
    for (std::size_t i = 0; i < L; ++i) {
        double n2 = 0.0;
        for (std::size_t j = 0; j < D; ++j) n2 += zv[i * D + j] * zv[i * D + j];
        if (std::sqrt(n2) > kNormEpsilon) {
            alive.push_back(i);
            alive_targets.push_back(assigned[i]);
        }
    }
    if (alive.size() == L) {
        Tensor logits = scale(cosine_rows(Z, Pk), 1.0 / tau);  // L x M
        Tensor lse = row_logsumexp(logits);                    // L x 1
        Tensor hit = gather_cols(logits, assigned);            // L x 1
        return mean(sub(lse, hit));
    }
    const double dead_share = static_cast<double>(L - alive.size()) / static_cast<double>(L) *
                              std::log(static_cast<double>(M));
    if (alive.empty()) return Tensor::scalar(dead_share);
    std::vector<double> sel(alive.size() * L, 0.0);
    for (std::size_t r = 0; r < alive.size(); ++r) sel[r * L + alive[r]] = 1.0;
    Tensor Za = matmul(Tensor::from_data(alive.size(), L, std::move(sel)), Z);
    Tensor logits = scale(cosine_rows(Za, Pk), 1.0 / tau);
    Tensor alive_mean = mean(sub(row_logsumexp(logits), gather_cols(logits, alive_targets)));
    return add_const(scale(alive_mean, static_cast<double>(alive.size()) / static_cast<double>(L)),
                     dead_share);
}

Tensor loss_pd(const Tensor& P, double delta) {
    if (P.rows() < 2) throw std::invalid_argument("loss_pd: need at least two prototypes");
    Tensor sims = cosine_rows(P, P);
    Tensor worst = row_max_offdiag(sims);
    return sum(relu(add_const(worst, -delta)));
}

Tensor total_loss(const Tensor& ce, const Tensor& pl, const Tensor& pb, const Tensor& pd,
                  const LossWeights& w) {
    Tensor t = add(ce, scale(pl, w.lambda1));
    t = add(t, scale(pb, w.lambda2));
    return add(t, scale(pd, w.lambda3));
}

}  // namespace partcom
