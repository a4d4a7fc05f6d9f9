#include "partcom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "partcom/parallel.hpp"

namespace partcom {

namespace {

std::string dims(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

// C += A(m x k) * B(k x n)
void mm_nn_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
               double* c) {
    parallel_for(m, 64, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            double* crow = c + i * n;
            const double* arow = a + i * k;
            for (std::size_t t = 0; t < k; ++t) {
                const double av = arow[t];
                const double* brow = b + t * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C(m x k) += G(m x n) * B^T, where B is k x n
void mm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const double* g, const double* b,
               double* c) {
    parallel_for(m, 64, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double* grow = g + i * n;
            double* crow = c + i * k;
            for (std::size_t j = 0; j < k; ++j) {
                const double* brow = b + j * n;
                double acc = 0.0;
                for (std::size_t t = 0; t < n; ++t) acc += grow[t] * brow[t];
                crow[j] += acc;
            }
        }
    });
}

// C(k x n) += A^T * G, where A is m x k and G is m x n
void mm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* g,
               double* c) {
    for (std::size_t t = 0; t < m; ++t) {
        const double* arow = a + t * k;
        const double* grow = g + t * n;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

}  // namespace

Tensor make_op(std::size_t rows, std::size_t cols, std::vector<Tensor> inputs,
               std::function<void(Tensor::Node&)> backprop) {
    Tensor out;
    auto node = std::make_shared<Tensor::Node>();
    node->rows = rows;
    node->cols = cols;
    node->value.assign(rows * cols, 0.0);
    bool grad = false;
    for (const auto& in : inputs) grad = grad || in.requires_grad();
    if (grad) {
        node->requires_grad = true;
        node->grad.assign(rows * cols, 0.0);
        for (const auto& in : inputs) node->parents.push_back(in.node());
        node->backprop = std::move(backprop);
    }
    out.node_ = std::move(node);
    return out;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v, bool requires_grad) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("tensor dimensions must be positive");
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->rows = rows;
    t.node_->cols = cols;
    t.node_->value.assign(rows * cols, v);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->grad.assign(rows * cols, 0.0);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full(1, 1, v, requires_grad); }

Tensor Tensor::from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad) {
    if (data.size() != rows * cols) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + dims(rows, cols));
    }
    Tensor t = zeros(rows, cols, requires_grad);
    t.node_->value = std::move(data);
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
    std::size_t r = rows.size();
    std::size_t c = rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("ragged initializer rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return from_data(r, c, std::move(data), requires_grad);
}

const std::vector<double>& Tensor::grad() const {
    if (!node_->requires_grad) throw std::runtime_error("tensor does not require gradients");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(*this));
    return node_->value[0];
}

Tensor Tensor::detach() const { return from_data(rows(), cols(), node_->value, false); }

std::string shape_str(const Tensor& t) { return dims(t.rows(), t.cols()); }

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a) + " vs " +
                                    shape_str(b));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_op(m, n, {a, b}, [a, b, m, k, n](Tensor::Node& node) {
        if (a.requires_grad()) {
            mm_nt_acc(m, n, k, node.grad.data(), b.values().data(),
                      a.node()->grad.data());
        }
        if (b.requires_grad()) {
            mm_tn_acc(m, k, n, a.values().data(), node.grad.data(),
                      b.node()->grad.data());
        }
    });
    mm_nn_acc(m, k, n, a.values().data(), b.values().data(), out.values().data());
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op(n, m, {a}, [a, m, n](Tensor::Node& node) {
        if (!a.requires_grad()) return;
        auto& ga = a.node()->grad;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) ga[j * n + i] += node.grad[i * m + j];
    });
    const auto& v = a.values();
    auto& o = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[j * m + i] = v[i * n + j];
    return out;
}

namespace {
void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch: " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = make_op(a.rows(), a.cols(), {a, b}, [a, b](Tensor::Node& node) {
        if (a.requires_grad()) {
            auto& g = a.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
        }
        if (b.requires_grad()) {
            auto& g = b.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out = make_op(a.rows(), a.cols(), {a, b}, [a, b](Tensor::Node& node) {
        if (a.requires_grad()) {
            auto& g = a.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
        }
        if (b.requires_grad()) {
            auto& g = b.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= node.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = make_op(a.rows(), a.cols(), {a, b}, [a, b](Tensor::Node& node) {
        if (a.requires_grad()) {
            auto& g = a.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * b.values()[i];
        }
        if (b.requires_grad()) {
            auto& g = b.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * a.values()[i];
        }
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw std::invalid_argument("add_rowvec: " + shape_str(a) + " vs row " + shape_str(row));
    }
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op(m, n, {a, row}, [a, row, m, n](Tensor::Node& node) {
        if (a.requires_grad()) {
            auto& g = a.node()->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
        }
        if (row.requires_grad()) {
            auto& g = row.node()->grad;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += node.grad[i * n + j];
        }
    });
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.values()[i * n + j] = a.values()[i * n + j] + row.values()[j];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_op(a.rows(), a.cols(), {a}, [a, c](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * node.grad[i];
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = c * a.values()[i];
    return out;
}

Tensor add_const(const Tensor& a, double c) {
    Tensor out = make_op(a.rows(), a.cols(), {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = a.values()[i] + c;
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = make_op(a.rows(), a.cols(), {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (a.values()[i] > 0.0) g[i] += node.grad[i];
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = std::max(0.0, a.values()[i]);
    return out;
}

Tensor exp_elem(const Tensor& a) {
    Tensor out = make_op(a.rows(), a.cols(), {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * node.value[i];
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = std::exp(a.values()[i]);
    return out;
}

Tensor log_elem(const Tensor& a) {
    for (double v : a.values())
        if (!(v > 0.0)) throw std::invalid_argument("log of non-positive entry");
    Tensor out = make_op(a.rows(), a.cols(), {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] / a.values()[i];
    });
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = std::log(a.values()[i]);
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out = make_op(1, 1, {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0];
    });
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.values()[0] = acc;
    return out;
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    Tensor out = make_op(1, 1, {a}, [a, inv](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0] * inv;
    });
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.values()[0] = acc * inv;
    return out;
}

Tensor softmax_columns(const Tensor& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) throw std::invalid_argument("softmax_columns: non-finite input");
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op(m, n, {a}, [a, m, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < m; ++i) dot += node.grad[i * n + j] * node.value[i * n + j];
            for (std::size_t i = 0; i < m; ++i) {
                const double y = node.value[i * n + j];
                g[i * n + j] += y * (node.grad[i * n + j] - dot);
            }
        }
    });
    const auto& v = a.values();
    auto& o = out.values();
    for (std::size_t j = 0; j < n; ++j) {
        double mx = v[j];
        for (std::size_t i = 1; i < m; ++i) mx = std::max(mx, v[i * n + j]);
        double z = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double e = std::exp(v[i * n + j] - mx);
            o[i * n + j] = e;
            z += e;
        }
        for (std::size_t i = 0; i < m; ++i) o[i * n + j] /= z;
    }
    return out;
}

Tensor row_logsumexp(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op(m, 1, {a}, [a, m, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < m; ++i) {
            const double lse = node.value[i];
            for (std::size_t j = 0; j < n; ++j)
                g[i * n + j] += node.grad[i] * std::exp(a.values()[i * n + j] - lse);
        }
    });
    const auto& v = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mx = v[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, v[i * n + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(v[i * n + j] - mx);
        out.values()[i] = mx + std::log(z);
    }
    return out;
}

Tensor gather_cols(const Tensor& a, const std::vector<int>& col_idx) {
    const std::size_t m = a.rows(), n = a.cols();
    if (col_idx.size() != m) {
        throw std::invalid_argument("gather_cols: need one index per row of " + shape_str(a));
    }
    for (int c : col_idx)
        if (c < 0 || static_cast<std::size_t>(c) >= n)
            throw std::invalid_argument("gather_cols: column index out of range");
    Tensor out = make_op(m, 1, {a}, [a, col_idx, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < node.value.size(); ++i)
            g[i * n + static_cast<std::size_t>(col_idx[i])] += node.grad[i];
    });
    for (std::size_t i = 0; i < m; ++i)
        out.values()[i] = a.values()[i * n + static_cast<std::size_t>(col_idx[i])];
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m)
            throw std::invalid_argument("concat_cols: row counts disagree: " + shape_str(parts[0]) +
                                        " vs " + shape_str(p));
        n += p.cols();
    }
    Tensor out = make_op(m, n, parts, [parts, m, n](Tensor::Node& node) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t pc = p.cols();
            if (p.requires_grad()) {
                auto& g = p.node()->grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += node.grad[i * n + off + j];
            }
            off += pc;
        }
    });
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j)
                out.values()[i * n + off + j] = p.values()[i * pc + j];
        off += pc;
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p.cols() != n)
            throw std::invalid_argument("concat_rows: column counts disagree: " +
                                        shape_str(parts[0]) + " vs " + shape_str(p));
        m += p.rows();
    }
    Tensor out = make_op(m, n, parts, [parts](Tensor::Node& node) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t sz = p.size();
            if (p.requires_grad()) {
                auto& g = p.node()->grad;
                for (std::size_t i = 0; i < sz; ++i) g[i] += node.grad[off + i];
            }
            off += sz;
        }
    });
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(off));
        off += p.size();
    }
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
    if (start + count > a.rows()) {
        throw std::invalid_argument("slice_rows: rows [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of " + shape_str(a));
    }
    const std::size_t n = a.cols();
    Tensor out = make_op(count, n, {a}, [a, start, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < node.value.size(); ++i) g[start * n + i] += node.grad[i];
    });
    std::copy(a.values().begin() + static_cast<std::ptrdiff_t>(start * n),
              a.values().begin() + static_cast<std::ptrdiff_t>((start + count) * n),
              out.values().begin());
    return out;
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a) + " as " +
                                    dims(rows, cols));
    }
    Tensor out = make_op(rows, cols, {a}, [a](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
    out.values() = a.values();
    return out;
}

Tensor cosine_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("cosine_rows: feature widths disagree: " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
    const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
    auto row_norms = [d](const Tensor& t) {
        std::vector<double> out(t.rows());
        for (std::size_t i = 0; i < t.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = t.values()[i * d + j];
                s += v * v;
            }
            out[i] = std::sqrt(s);
        }
        return out;
    };
    std::vector<double> na = row_norms(a), nb = row_norms(b);
    for (double v : na)
        if (v <= kNormEpsilon) throw std::invalid_argument("cosine_rows: degenerate (near-zero) vector");
    for (double v : nb)
        if (v <= kNormEpsilon) throw std::invalid_argument("cosine_rows: degenerate (near-zero) vector");

    Tensor out = make_op(n, m, {a, b}, [a, b, na, nb, n, m, d](Tensor::Node& node) {
        // d cos/d a_i = b_j/(|a||b|) - cos * a_i/|a|^2, symmetric in b.
        for (std::size_t i = 0; i < n; ++i) {
            const double* arow = a.values().data() + i * d;
            for (std::size_t j = 0; j < m; ++j) {
                const double g = node.grad[i * m + j];
                if (g == 0.0) continue;
                const double* brow = b.values().data() + j * d;
                const double c = node.value[i * m + j];
                const double inv_ab = 1.0 / (na[i] * nb[j]);
                if (a.requires_grad()) {
                    double* ga = a.node()->grad.data() + i * d;
                    const double ca = c / (na[i] * na[i]);
                    for (std::size_t t = 0; t < d; ++t)
                        ga[t] += g * (brow[t] * inv_ab - ca * arow[t]);
                }
                if (b.requires_grad()) {
                    double* gb = b.node()->grad.data() + j * d;
                    const double cb = c / (nb[j] * nb[j]);
                    for (std::size_t t = 0; t < d; ++t)
                        gb[t] += g * (arow[t] * inv_ab - cb * brow[t]);
                }
            }
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.values().data() + i * d;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b.values().data() + j * d;
            double dot = 0.0;
            for (std::size_t t = 0; t < d; ++t) dot += arow[t] * brow[t];
            out.values()[i * m + j] = dot / (na[i] * nb[j]);
        }
    }
    return out;
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.rows() != 1 || b.rows() != 1) {
        throw std::invalid_argument("cosine_similarity expects row vectors, got " + shape_str(a) +
                                    " and " + shape_str(b));
    }
    return cosine_rows(a, b);
}

Tensor squared_distance(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return sum(mul(d, d));
}

Tensor colwise_max(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 1; i < m; ++i)
            if (a.values()[i * n + j] > a.values()[arg[j] * n + j]) arg[j] = i;
    }
    Tensor out = make_op(1, n, {a}, [a, arg, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t j = 0; j < n; ++j) g[arg[j] * n + j] += node.grad[j];
    });
    for (std::size_t j = 0; j < n; ++j) out.values()[j] = a.values()[arg[j] * n + j];
    return out;
}

Tensor row_max_offdiag(const Tensor& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("row_max_offdiag: square matrix expected, got " + shape_str(a));
    }
    const std::size_t n = a.rows();
    if (n < 2) throw std::invalid_argument("row_max_offdiag: need at least two rows");
    std::vector<std::size_t> arg(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = (i == 0) ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (a.values()[i * n + j] > a.values()[i * n + best]) best = j;
        }
        arg[i] = best;
    }
    Tensor out = make_op(n, 1, {a}, [a, arg, n](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < n; ++i) g[i * n + arg[i]] += node.grad[i];
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i * n + arg[i]];
    return out;
}

Tensor neighborhood_mean(const Tensor& a, const std::vector<std::vector<int>>& neighbors) {
    const std::size_t m = a.rows(), d = a.cols();
    if (neighbors.size() != m) {
        throw std::invalid_argument("neighborhood_mean: need one neighbor list per row");
    }
    for (const auto& nb : neighbors)
        if (nb.empty()) throw std::invalid_argument("neighborhood_mean: empty neighbor list");
    Tensor out = make_op(m, d, {a}, [a, neighbors, m, d](Tensor::Node& node) {
        auto& g = a.node()->grad;
        for (std::size_t i = 0; i < m; ++i) {
            const double inv = 1.0 / static_cast<double>(neighbors[i].size());
            for (int j : neighbors[i]) {
                double* grow = g.data() + static_cast<std::size_t>(j) * d;
                const double* nrow = node.grad.data() + i * d;
                for (std::size_t t = 0; t < d; ++t) grow[t] += inv * nrow[t];
            }
        }
    });
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.values().data() + i * d;
        for (int j : neighbors[i]) {
            const double* arow = a.values().data() + static_cast<std::size_t>(j) * d;
            for (std::size_t t = 0; t < d; ++t) orow[t] += arow[t];
        }
        const double inv = 1.0 / static_cast<double>(neighbors[i].size());
        for (std::size_t t = 0; t < d; ++t) orow[t] *= inv;
    }
    return out;
}

void backward(const Tensor& root) {
    if (root.size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root));
    }
    if (!root.requires_grad()) return;

    // Iterative post-order DFS for the topological order.
    std::vector<Tensor::Node*> topo;
    std::unordered_set<Tensor::Node*> visited;
    std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor::Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

}  // namespace partcom
