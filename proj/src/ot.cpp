#include "partcom/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "partcom/errors.hpp"

namespace partcom {

namespace {

double logsumexp(const double* v, std::size_t n, std::size_t stride) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(v[i * stride] - mx);
    return mx + std::log(z);
}

}  // namespace

AssignmentMatrix sinkhorn_assign(const AssignmentProblem& problem) {
    const std::size_t L = problem.rows, M = problem.cols;
    if (L == 0 || M == 0 || problem.scores.size() != L * M) {
        throw std::invalid_argument("sinkhorn_assign: bad problem shape");
    }
    if (!(problem.epsilon > 0.0)) {
        throw std::invalid_argument("sinkhorn_assign: epsilon must be positive");
    }
    for (double s : problem.scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("sinkhorn_assign: non-finite score");
    }

    // log gamma_ij = scores_ij/eps + alpha_i + beta_j; row target 1, column
    // target L/M.
    const double inv_eps = 1.0 / problem.epsilon;
    const double log_col_target = std::log(static_cast<double>(L) / static_cast<double>(M));
    std::vector<double> k(L * M);
    for (std::size_t i = 0; i < L * M; ++i) k[i] = problem.scores[i] * inv_eps;

    std::vector<double> alpha(L, 0.0), beta(M, 0.0), work(L * M);
    AssignmentMatrix out;
    out.rows = L;
    out.cols = M;
    out.gamma.assign(L * M, 0.0);

    auto refresh_plan = [&]() {
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < M; ++j)
                out.gamma[i * M + j] = std::exp(k[i * M + j] + alpha[i] + beta[j]);
    };
    auto violation = [&]() {
        double worst = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < M; ++j) s += out.gamma[i * M + j];
            worst = std::max(worst, std::abs(s - 1.0));
        }
        const double col_target = static_cast<double>(L) / static_cast<double>(M);
        for (std::size_t j = 0; j < M; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < L; ++i) s += out.gamma[i * M + j];
            worst = std::max(worst, std::abs(s - col_target));
        }
        return worst;
    };

    int it = 0;
    for (; it < problem.max_iters; ++it) {
        for (std::size_t i = 0; i < L; ++i) {
            for (std::size_t j = 0; j < M; ++j) work[i * M + j] = k[i * M + j] + beta[j];
            alpha[i] = -logsumexp(work.data() + i * M, M, 1);
        }
        for (std::size_t j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < L; ++i) work[i * M + j] = k[i * M + j] + alpha[i];
            beta[j] = log_col_target - logsumexp(work.data() + j, L, M);
        }
        refresh_plan();
        if (violation() < problem.tol) {
            out.converged = true;
            ++it;
            break;
        }
    }
    out.iters = it;
    for (double g : out.gamma) {
        if (std::isnan(g)) throw NumericalError("sinkhorn_assign: NaN in transport plan");
    }
    return out;
}

std::vector<int> hard_assign(const AssignmentMatrix& plan) {
    std::vector<int> labels(plan.rows);
    for (std::size_t i = 0; i < plan.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < plan.cols; ++j)
            if (plan(i, j) > plan(i, best)) best = j;
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

std::vector<int> greedy_capacity_assign(const AssignmentMatrix& plan) {
    const std::size_t L = plan.rows, M = plan.cols;
    std::vector<int> capacity(M, static_cast<int>(L / M));
    for (std::size_t j = 0; j < L % M; ++j) ++capacity[j];

    // Largest gap between a point's best and second-best prototype goes first.
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> margin(L, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        if (M == 1) continue;
        double best = -std::numeric_limits<double>::infinity(), second = best;
        for (std::size_t j = 0; j < M; ++j) {
            const double v = plan(i, j);
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        margin[i] = best - second;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return margin[a] > margin[b]; });

    std::vector<int> labels(L, -1);
    for (std::size_t i : order) {
        int best = -1;
        for (std::size_t j = 0; j < M; ++j) {
            if (capacity[j] == 0) continue;
            if (best < 0 || plan(i, j) > plan(i, static_cast<std::size_t>(best))) {
                best = static_cast<int>(j);
            }
        }
        labels[i] = best;
        --capacity[static_cast<std::size_t>(best)];
    }
    return labels;
}

double plan_entropy(const AssignmentMatrix& plan) {
    double h = 0.0;
    for (double g : plan.gamma)
        if (g > 0.0) h -= g * std::log(g);
    return h;
}

}  // namespace partcom
