#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

#include "sgsim/tensor.hpp"

namespace sgsim {

/// Reverse-mode autodiff tape over TensorT<S>. Build a graph of ops, call
/// backward() on a scalar node, read gradients off the leaves. All math is
/// single-threaded and runs in a fixed order, so results are bit-reproducible.
template <typename S>
class TapeT {
public:
    using Tns = TensorT<S>;

    TapeT() = default;
    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    int leaf(Tns v, bool needs_grad = false) {
        return push(std::move(v), needs_grad, nullptr);
    }

    const Tns& val(int id) const { return nodes_.at(id).value; }
    const Tns& grad(int id) const { return nodes_.at(id).grad; }
    bool needs_grad(int id) const { return nodes_.at(id).needs_grad; }
    size_t size() const { return nodes_.size(); }

    /// y = a @ b, a:[n,k] b:[k,m]
    int matmul(int a, int b) {
        const Tns& A = val(a);
        const Tns& B = val(b);
        check2d(A, "matmul lhs");
        check2d(B, "matmul rhs");
        if (A.shape[1] != B.shape[0])
            throw std::invalid_argument("matmul: inner dims " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        int n = A.shape[0], k = A.shape[1], m = B.shape[1];
        Tns Y({n, m});
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < k; ++p) {
                S aip = A.data[(size_t)i * k + p];
                if (aip == S(0)) continue;
                const S* brow = &B.data[(size_t)p * m];
                S* yrow = &Y.data[(size_t)i * m];
                for (int j = 0; j < m; ++j) yrow[j] += aip * brow[j];
            }
        return push(std::move(Y), needs_grad(a) || needs_grad(b), [a, b, n, k, m](TapeT& t, int out) {
            const Tns& g = t.nodes_[out].grad;
            const Tns& A = t.val(a);
            const Tns& B = t.val(b);
            if (t.needs_grad(a)) {
                Tns& ga = t.nodes_[a].grad;
                // ga += g @ B^T
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) {
                        S gij = g.data[(size_t)i * m + j];
                        if (gij == S(0)) continue;
                        const S* brow = &B.data[0] + j;  // column j strided
                        S* garow = &ga.data[(size_t)i * k];
                        for (int p = 0; p < k; ++p) garow[p] += gij * brow[(size_t)p * m];
                    }
            }
            if (t.needs_grad(b)) {
                Tns& gb = t.nodes_[b].grad;
                // gb += A^T @ g
                for (int i = 0; i < n; ++i)
                    for (int p = 0; p < k; ++p) {
                        S aip = A.data[(size_t)i * k + p];
                        if (aip == S(0)) continue;
                        const S* grow = &g.data[(size_t)i * m];
                        S* gbrow = &gb.data[(size_t)p * m];
                        for (int j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
                    }
            }
        });
    }

    int add(int a, int b) { return elemwise2(a, b, "add", S(1)); }
    int sub(int a, int b) { return elemwise2(a, b, "sub", S(-1)); }

    /// y = a + bias (row broadcast), a:[n,m] bias:[m]
    int add_bias(int a, int b) {
        const Tns& A = val(a);
        const Tns& B = val(b);
        check2d(A, "add_bias input");
        if (B.shape.size() != 1 || B.shape[0] != A.shape[1])
            throw std::invalid_argument("add_bias: bias shape " + shape_str(B.shape) + " vs input " + shape_str(A.shape));
        int n = A.shape[0], m = A.shape[1];
        Tns Y = A;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) Y.data[(size_t)i * m + j] += B.data[j];
        return push(std::move(Y), needs_grad(a) || needs_grad(b), [a, b, n, m](TapeT& t, int out) {
            const Tns& g = t.nodes_[out].grad;
            if (t.needs_grad(a)) {
                Tns& ga = t.nodes_[a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.needs_grad(b)) {
                Tns& gb = t.nodes_[b].grad;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) gb.data[j] += g.data[(size_t)i * m + j];
            }
        });
    }

    int scale(int a, S c) {
        Tns Y = val(a);
        for (auto& v : Y.data) v *= c;
        return push(std::move(Y), needs_grad(a), [a, c](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            const Tns& g = t.nodes_[out].grad;
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
        });
    }

    int relu(int a) {
        Tns Y = val(a);
        for (auto& v : Y.data)
            if (v < S(0)) v = S(0);
        return push(std::move(Y), needs_grad(a), [a](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            const Tns& g = t.nodes_[out].grad;
            const Tns& x = t.val(a);
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < g.size(); ++i)
                if (x.data[i] > S(0)) ga.data[i] += g.data[i];
        });
    }

    /// Row-wise layer norm with affine params. Std is floored at 1e-8 before
    /// dividing; the backward pass branches on whether the floor was hit.
    int layer_norm(int x, int gamma, int beta) {
        const Tns& X = val(x);
        check2d(X, "layer_norm input");
        int n = X.shape[0], m = X.shape[1];
        const Tns& G = val(gamma);
        const Tns& B = val(beta);
        if (G.shape != std::vector<int>{m} || B.shape != std::vector<int>{m})
            throw std::invalid_argument("layer_norm: affine params must be [" + std::to_string(m) + "]");
        const S eps = S(1e-8);
        Tns Y({n, m});
        auto xhat = std::make_shared<Tns>(std::vector<int>{n, m});
        auto denom = std::make_shared<std::vector<S>>(n);
        for (int i = 0; i < n; ++i) {
            const S* xr = &X.data[(size_t)i * m];
            S mu = 0;
            for (int j = 0; j < m; ++j) mu += xr[j];
            mu /= S(m);
            S var = 0;
            for (int j = 0; j < m; ++j) var += (xr[j] - mu) * (xr[j] - mu);
            var /= S(m);
            S sd = std::sqrt(var);
            S d = sd < eps ? eps : sd;
            (*denom)[i] = d;
            for (int j = 0; j < m; ++j) {
                S xh = (xr[j] - mu) / d;
                xhat->data[(size_t)i * m + j] = xh;
                Y.data[(size_t)i * m + j] = xh * G.data[j] + B.data[j];
            }
        }
        bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
        return push(std::move(Y), ng, [x, gamma, beta, n, m, eps, xhat, denom](TapeT& t, int out) {
            const Tns& g = t.nodes_[out].grad;
            const Tns& G = t.val(gamma);
            if (t.needs_grad(gamma)) {
                Tns& gg = t.nodes_[gamma].grad;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j)
                        gg.data[j] += g.data[(size_t)i * m + j] * xhat->data[(size_t)i * m + j];
            }
            if (t.needs_grad(beta)) {
                Tns& gb = t.nodes_[beta].grad;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) gb.data[j] += g.data[(size_t)i * m + j];
            }
            if (t.needs_grad(x)) {
                Tns& gx = t.nodes_[x].grad;
                std::vector<S> tvec(m);
                for (int i = 0; i < n; ++i) {
                    const S* gr = &g.data[(size_t)i * m];
                    const S* xh = &xhat->data[(size_t)i * m];
                    S d = (*denom)[i];
                    S tmean = 0, txmean = 0;
                    for (int j = 0; j < m; ++j) {
                        tvec[j] = gr[j] * G.data[j];
                        tmean += tvec[j];
                        txmean += tvec[j] * xh[j];
                    }
                    tmean /= S(m);
                    txmean /= S(m);
                    bool floored = d == eps;
                    for (int j = 0; j < m; ++j) {
                        S dx = floored ? (tvec[j] - tmean) / d : (tvec[j] - tmean - xh[j] * txmean) / d;
                        gx.data[(size_t)i * m + j] += dx;
                    }
                }
            }
        });
    }

    /// Column-wise concat of 2-d tensors with equal row counts.
    int concat_cols(const std::vector<int>& xs) {
        if (xs.empty()) throw std::invalid_argument("concat_cols: empty input list");
        int n = val(xs[0]).shape[0];
        int m = 0;
        bool ng = false;
        for (int id : xs) {
            const Tns& X = val(id);
            check2d(X, "concat_cols input");
            if (X.shape[0] != n) throw std::invalid_argument("concat_cols: row counts differ");
            m += X.shape[1];
            ng = ng || needs_grad(id);
        }
        Tns Y({n, m});
        int off = 0;
        for (int id : xs) {
            const Tns& X = val(id);
            int w = X.shape[1];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) Y.data[(size_t)i * m + off + j] = X.data[(size_t)i * w + j];
            off += w;
        }
        auto ids = std::make_shared<std::vector<int>>(xs);
        return push(std::move(Y), ng, [ids, n, m](TapeT& t, int out) {
            const Tns& g = t.nodes_[out].grad;
            int off = 0;
            for (int id : *ids) {
                int w = t.val(id).shape[1];
                if (t.needs_grad(id)) {
                    Tns& gx = t.nodes_[id].grad;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < w; ++j) gx.data[(size_t)i * w + j] += g.data[(size_t)i * m + off + j];
                }
                off += w;
            }
        });
    }

    /// y[i] = a[idx[i]]
    int gather_rows(int a, std::vector<int> idx) {
        const Tns& A = val(a);
        check2d(A, "gather_rows input");
        int n = A.shape[0], m = A.shape[1];
        Tns Y({(int)idx.size(), m});
        for (size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] >= n)
                throw std::out_of_range("gather_rows: index " + std::to_string(idx[i]) + " out of [0," + std::to_string(n) + ")");
            for (int j = 0; j < m; ++j) Y.data[i * m + j] = A.data[(size_t)idx[i] * m + j];
        }
        auto ix = std::make_shared<std::vector<int>>(std::move(idx));
        return push(std::move(Y), needs_grad(a), [a, ix, m](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            const Tns& g = t.nodes_[out].grad;
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < ix->size(); ++i)
                for (int j = 0; j < m; ++j) ga.data[(size_t)(*ix)[i] * m + j] += g.data[i * m + j];
        });
    }

    /// y[k] = sum of rows i with seg[i] == k; seg[i] == -1 drops the row.
    int segment_sum(int a, std::vector<int> seg, int num_segments) {
        const Tns& A = val(a);
        check2d(A, "segment_sum input");
        if ((int)seg.size() != A.shape[0])
            throw std::invalid_argument("segment_sum: segment ids count != rows");
        int m = A.shape[1];
        Tns Y({num_segments, m});
        for (size_t i = 0; i < seg.size(); ++i) {
            if (seg[i] == -1) continue;
            if (seg[i] < 0 || seg[i] >= num_segments)
                throw std::out_of_range("segment_sum: segment id " + std::to_string(seg[i]) + " out of range");
            for (int j = 0; j < m; ++j) Y.data[(size_t)seg[i] * m + j] += A.data[i * m + j];
        }
        auto sg = std::make_shared<std::vector<int>>(std::move(seg));
        return push(std::move(Y), needs_grad(a), [a, sg, m](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            const Tns& g = t.nodes_[out].grad;
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < sg->size(); ++i) {
                int k = (*sg)[i];
                if (k == -1) continue;
                for (int j = 0; j < m; ++j) ga.data[i * m + j] += g.data[(size_t)k * m + j];
            }
        });
    }

    /// y[i,:] = a[i,:] * w[i] for constant per-row weights.
    int row_scale(int a, std::vector<S> w) {
        const Tns& A = val(a);
        check2d(A, "row_scale input");
        if ((int)w.size() != A.shape[0]) throw std::invalid_argument("row_scale: weight count != rows");
        int m = A.shape[1];
        Tns Y = A;
        for (size_t i = 0; i < w.size(); ++i)
            for (int j = 0; j < m; ++j) Y.data[i * m + j] *= w[i];
        auto wv = std::make_shared<std::vector<S>>(std::move(w));
        return push(std::move(Y), needs_grad(a), [a, wv, m](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            const Tns& g = t.nodes_[out].grad;
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < wv->size(); ++i)
                for (int j = 0; j < m; ++j) ga.data[i * m + j] += g.data[i * m + j] * (*wv)[i];
        });
    }

    /// Scalar sum_i w[i] * |a[i,:]|^2 with constant per-row weights.
    int weighted_sumsq(int a, std::vector<S> w) {
        const Tns& A = val(a);
        check2d(A, "weighted_sumsq input");
        if ((int)w.size() != A.shape[0]) throw std::invalid_argument("weighted_sumsq: weight count != rows");
        int m = A.shape[1];
        S acc = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            S row = 0;
            for (int j = 0; j < m; ++j) row += A.data[i * m + j] * A.data[i * m + j];
            acc += w[i] * row;
        }
        Tns Y({1});
        Y.data[0] = acc;
        auto wv = std::make_shared<std::vector<S>>(std::move(w));
        return push(std::move(Y), needs_grad(a), [a, wv, m](TapeT& t, int out) {
            if (!t.needs_grad(a)) return;
            S g = t.nodes_[out].grad.data[0];
            const Tns& A = t.val(a);
            Tns& ga = t.nodes_[a].grad;
            for (size_t i = 0; i < wv->size(); ++i)
                for (int j = 0; j < m; ++j) ga.data[i * m + j] += S(2) * (*wv)[i] * A.data[i * m + j] * g;
        });
    }

    /// Run reverse sweep from a scalar node. Gradients accumulate; reuse of a
    /// tape across multiple backward calls is not supported.
    void backward(int id) {
        Node& root = nodes_.at(id);
        if (root.value.size() != 1)
            throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root.value.shape));
        for (auto& nd : nodes_) {
            nd.grad = Tns(nd.value.shape);
        }
        root.grad.data[0] = S(1);
        for (int i = id; i >= 0; --i) {
            Node& nd = nodes_[i];
            if (nd.back && nd.needs_grad) nd.back(*this, i);
        }
    }

private:
    struct Node {
        Tns value;
        Tns grad;
        bool needs_grad = false;
        std::function<void(TapeT&, int)> back;
    };
    std::vector<Node> nodes_;

    int push(Tns v, bool ng, std::function<void(TapeT&, int)> back) {
        nodes_.push_back(Node{std::move(v), Tns(), ng, std::move(back)});
        return (int)nodes_.size() - 1;
    }

    static void check2d(const Tns& t, const char* what) {
        if (t.shape.size() != 2)
            throw std::invalid_argument(std::string(what) + ": expected 2-d tensor, got " + shape_str(t.shape));
    }

    int elemwise2(int a, int b, const char* name, S sign_b) {
        const Tns& A = val(a);
        const Tns& B = val(b);
        if (!A.same_shape(B))
            throw std::invalid_argument(std::string(name) + ": shapes " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        Tns Y = A;
        for (size_t i = 0; i < Y.size(); ++i) Y.data[i] += sign_b * B.data[i];
        return push(std::move(Y), needs_grad(a) || needs_grad(b), [a, b, sign_b](TapeT& t, int out) {
            const Tns& g = t.nodes_[out].grad;
            if (t.needs_grad(a)) {
                Tns& ga = t.nodes_[a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.needs_grad(b)) {
                Tns& gb = t.nodes_[b].grad;
                for (size_t i = 0; i < g.size(); ++i) gb.data[i] += sign_b * g.data[i];
            }
        });
    }
};

using Tape = TapeT<float>;

}  // namespace sgsim
