#include "partcom/part_head.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "partcom/errors.hpp"
#include "partcom/rng.hpp"

namespace partcom {

PartBank PartBank::init(int K, int M, std::size_t D, std::uint64_t seed) {
    if (K <= 0 || M <= 0) throw ConfigError("part bank needs positive K and M");
    if (D < 2) throw ConfigError("part bank feature width too small");
    const std::size_t n = static_cast<std::size_t>(K) * static_cast<std::size_t>(M);
    Rng rng(mix64(seed ^ fnv1a64("prototypes")));

    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    double limit = 0.5;
    int stalls = 0;
    while (rows.size() < n) {
        std::vector<double> v(D);
        double norm2 = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm2 += x * x;
        }
        const double norm = std::sqrt(norm2);
        if (norm < 1e-9) continue;
        for (auto& x : v) x /= norm;

        bool ok = true;
        for (const auto& r : rows) {
            double dot = 0.0;
            for (std::size_t i = 0; i < D; ++i) dot += r[i] * v[i];
            if (dot > limit) {
                ok = false;
                break;
            }
        }
        if (ok) {
            rows.push_back(std::move(v));
            stalls = 0;
        } else if (++stalls >= 200) {
            limit *= 1.05;  // relax when the sphere gets crowded
            stalls = 0;
        }
    }

    std::vector<double> flat;
    flat.reserve(n * D);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    PartBank bank;
    bank.K = K;
    bank.M = M;
    bank.D = D;
    bank.P = Tensor::from_data(n, D, std::move(flat), true);
    return bank;
}

Tensor PartBank::class_slice(int k) const {
    if (k < 0 || k >= K) throw std::invalid_argument("class_slice: class index out of range");
    return slice_rows(P, static_cast<std::size_t>(k * M), static_cast<std::size_t>(M));
}

void check_prototypes(const PartBank& bank) {
    for (std::size_t i = 0; i < bank.P.rows(); ++i) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < bank.D; ++j) {
            const double v = bank.P(i, j);
            norm2 += v * v;
        }
        if (std::sqrt(norm2) <= 1e-6) {
            throw NumericalError("prototype " + std::to_string(i) + " collapsed to zero norm");
        }
    }
}

Tensor similarity_map(const PartBank& bank, const Tensor& Z) {
    if (Z.cols() != bank.D) {
        throw std::invalid_argument("similarity_map: feature width mismatch: bank D=" +
                                    std::to_string(bank.D) + " vs Z " + shape_str(Z));
    }
    return softmax_columns(matmul(bank.P, transpose(Z)));
}

Tensor aggregate(const Tensor& S, const Tensor& Z) { return matmul(S, Z); }

Reducer Reducer::init(std::size_t d_in, std::size_t d_r, std::uint64_t seed) {
    if (d_in == 0 || d_r == 0) throw ConfigError("reducer dimensions must be positive");
    Rng rng(mix64(seed ^ fnv1a64("reducer")));
    Reducer r;
    r.d_in = d_in;
    r.d_r = d_r;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    std::vector<double> w(d_in * d_r), b(d_r);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    r.W = Tensor::from_data(d_in, d_r, std::move(w), true);
    r.b = Tensor::from_data(1, d_r, std::move(b), true);
    return r;
}

Tensor reduce_rows(const Reducer& reducer, const Tensor& Z_p) {
    if (Z_p.cols() != reducer.d_in) {
        throw std::invalid_argument("reduce_rows: expected width " +
                                    std::to_string(reducer.d_in) + ", got " + shape_str(Z_p));
    }
    // Plain affine: the inputs are already rectified upstream, and keeping
    // this layer linear means the flattened feature can only vanish on a
    // measure-zero weight set instead of whenever every unit goes dead.
    return add_rowvec(matmul(Z_p, reducer.W), reducer.b);
}

Tensor concat_flatten(const Tensor& reduced) {
    return reshape(reduced, 1, reduced.rows() * reduced.cols());
}

Tensor reduce_concat(const Reducer& reducer, const Tensor& Z_p) {
    return concat_flatten(reduce_rows(reducer, Z_p));
}

Tensor reduce_maxpool(const Reducer& reducer, const Tensor& Z_p) {
    return colwise_max(reduce_rows(reducer, Z_p));
}

}  // namespace partcom
