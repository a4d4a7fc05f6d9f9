// Entropy-regularized balanced assignment of points to prototypes, solved with
// log-domain Sinkhorn-Knopp. The resulting plan is a plain matrix, never part
// of the autodiff tape: downstream losses treat it as a constant target.
#pragma once

#include <cstddef>
#include <vector>

namespace partcom {

struct AssignmentProblem {
    std::size_t rows = 0;        // points
    std::size_t cols = 0;        // prototypes
    std::vector<double> scores;  // row-major point-to-prototype affinities
    double epsilon = 0.05;
    int max_iters = 1000;
    double tol = 1e-6;
};

struct AssignmentMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> gamma;  // row-major; rows sum to 1, columns to rows/cols
    bool converged = false;
    int iters = 0;

    double operator()(std::size_t i, std::size_t j) const { return gamma[i * cols + j]; }
};

// Alternating row/column scaling in the log domain until both marginals are
// within tol (max violation) or max_iters is hit; in the latter case the best
// plan so far is returned with converged=false.
AssignmentMatrix sinkhorn_assign(const AssignmentProblem& problem);

// Per-row argmax, ties broken by the lowest prototype index.
std::vector<int> hard_assign(const AssignmentMatrix& plan);

// Capacity-respecting rounding: prototypes hold ceil/floor(rows/cols) points;
// points are committed in descending order of how much they prefer their best
// remaining prototype over their second choice.
std::vector<int> greedy_capacity_assign(const AssignmentMatrix& plan);

// -sum gamma_ij log gamma_ij, with 0 log 0 = 0.
double plan_entropy(const AssignmentMatrix& plan);

}  // namespace partcom
