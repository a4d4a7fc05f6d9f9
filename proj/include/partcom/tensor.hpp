#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace partcom {

// Dense row-major 2-D tensor of 64-bit floats with reverse-mode automatic
// differentiation. Scalars are 1x1. Every operation that sees at least one
// requires-grad input records itself on the implicit tape (the parent links
// of its node); backward(root) replays the tape in reverse topological
// order and accumulates gradients into every reachable node.
//
// Tensor is a cheap value-semantic handle: copies share the same node.
class Tensor {
public:
    struct Node {
        std::size_t rows = 0, cols = 0;
        std::vector<double> value;
        std::vector<double> grad;  // allocated iff requires_grad
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;  // pulls node.grad into parents
    };

    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                            bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->value.size(); }

    double operator()(std::size_t r, std::size_t c) const {
        return node_->value[r * node_->cols + c];
    }

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values() { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Value of a 1x1 tensor.
    double item() const;

    // Leaf copy of the current values; gradient never flows through it.
    Tensor detach() const;

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
    friend Tensor make_op(std::size_t, std::size_t, std::vector<Tensor>,
                          std::function<void(Node&)>);
};

std::string shape_str(const Tensor& t);

// --- forward operations -------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor sum(const Tensor& a);   // -> 1x1
Tensor mean(const Tensor& a);  // -> 1x1

// Column-stable softmax: each output column sums to 1.
Tensor softmax_columns(const Tensor& a);

// Per-row log(sum(exp(row))), max-subtracted. n x m -> n x 1.
Tensor row_logsumexp(const Tensor& a);

// Picks one entry per row. n x m -> n x 1.
Tensor gather_cols(const Tensor& a, const std::vector<int>& col_idx);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);

// Pairwise cosine similarity of rows: (n x d, m x d) -> n x m.
// Throws if any row norm is below norm_epsilon.
Tensor cosine_rows(const Tensor& a, const Tensor& b);

// Cosine similarity of two 1 x d vectors -> 1x1, in [-1, 1].
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Squared L2 distance of two same-shape tensors -> 1x1.
Tensor squared_distance(const Tensor& a, const Tensor& b);

// Column-wise max over rows: n x d -> 1 x d. Gradient routes to the first
// attaining row.
Tensor colwise_max(const Tensor& a);

// Per-row max over the off-diagonal entries of a square matrix: n x n -> n x 1.
Tensor row_max_offdiag(const Tensor& a);

// Row i of the output is the mean of rows neighbors[i] of the input. The
// neighbor structure is a constant (it comes from point coordinates, which
// carry no gradient). Every neighbor list must be non-empty.
Tensor neighborhood_mean(const Tensor& a, const std::vector<std::vector<int>>& neighbors);

inline constexpr double kNormEpsilon = 1e-12;

// Reverse-mode sweep from a scalar root. Gradients accumulate (+=), so
// parameter tensors must be zero_grad()-ed between optimization steps.
void backward(const Tensor& root);

}  // namespace partcom
