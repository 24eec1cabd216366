#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dymesh/mesh.hpp"
#include "dymesh/tensor.hpp"

namespace dymesh {

/// Learnable tensor plus its accumulated gradient.
template <class T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    void reset(std::string n, TensorT<T> v) {
        name = std::move(n);
        grad = TensorT<T>::zeros(v.shape);
        value = std::move(v);
    }
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

using Parameter = ParameterT<float>;

enum class MaskMode { NegInf, LiteralHadamard };

/// Reverse-mode tape over the primitives this artifact needs. One graph
/// instance records one forward pass; backward() walks the tape in reverse
/// and accumulates into ParameterT::grad. Graphs are single-threaded;
/// distinct instances may live on distinct threads.
template <class T>
class GraphT {
  public:
    using Tensor = TensorT<T>;

    int input(Tensor v) { return push(std::move(v), false); }

    int param(ParameterT<T>& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return it->second;
        int id = push(p.value, true);
        bound_.push_back({id, &p});
        param_nodes_.emplace(&p, id);
        return id;
    }

    const Tensor& value(int id) const { return nodes_[id].value; }
    std::size_t node_count() const { return nodes_.size(); }

    // ---- elementwise ----

    int add(int a, int b) {
        check_same(a, b, "add");
        Tensor out = nodes_[a].value;
        const auto& bd = nodes_[b].value.data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bd[i];
        return record(std::move(out), {a, b}, [this, a, b](const Tensor& g, const Tensor& out) {
            axpy(a, g, T(1));
            axpy(b, g, T(1));
        });
    }

    int sub(int a, int b) {
        check_same(a, b, "sub");
        Tensor out = nodes_[a].value;
        const auto& bd = nodes_[b].value.data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bd[i];
        return record(std::move(out), {a, b}, [this, a, b](const Tensor& g, const Tensor& out) {
            axpy(a, g, T(1));
            axpy(b, g, T(-1));
        });
    }

    int mul(int a, int b) {
        check_same(a, b, "mul");
        Tensor out = nodes_[a].value;
        const auto& bd = nodes_[b].value.data;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bd[i];
        return record(std::move(out), {a, b}, [this, a, b](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            auto& gb = nodes_[b].grad.data;
            const auto& av = nodes_[a].value.data;
            const auto& bv = nodes_[b].value.data;
            if (nodes_[a].requires_grad)
                for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += g.data[i] * bv[i];
            if (nodes_[b].requires_grad)
                for (std::size_t i = 0; i < g.data.size(); ++i) gb[i] += g.data[i] * av[i];
        });
    }

    int scale(int a, T c) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v *= c;
        return record(std::move(out), {a}, [this, a, c](const Tensor& g, const Tensor& out) { axpy(a, g, c); });
    }

    int add_scalar(int a, T c) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v += c;
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) { axpy(a, g, T(1)); });
    }

    int exp(int a) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v = std::exp(v);
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += g.data[i] * out.data[i];
        });
    }

    int square(int a) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v *= v;
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            const auto& av = nodes_[a].value.data;
            for (std::size_t i = 0; i < g.data.size(); ++i) ga[i] += T(2) * g.data[i] * av[i];
        });
    }

    /// Exact GELU: x * Phi(x).
    int gelu(int a) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v = v * phi_cdf(v);
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            const auto& av = nodes_[a].value.data;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const T x = av[i];
                const T d = phi_cdf(x) + x * phi_pdf(x);
                ga[i] += g.data[i] * d;
            }
        });
    }

    int silu(int a) {
        Tensor out = nodes_[a].value;
        for (auto& v : out.data) v = v * sigmoid(v);
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            const auto& av = nodes_[a].value.data;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const T s = sigmoid(av[i]);
                ga[i] += g.data[i] * (s + av[i] * s * (T(1) - s));
            }
        });
    }

    // ---- matrix products ----

    int matmul(int a, int b) {
        const auto& A = nodes_[a].value;
        const auto& B = nodes_[b].value;
        const std::size_t r = A.rows(), k = A.cols(), n = B.cols();
        if (B.rows() != k) throw std::invalid_argument("matmul: inner extents differ");
        Tensor out({r, n});
        matmul_into(A.data.data(), B.data.data(), out.data.data(), r, k, n);
        return record(std::move(out), {a, b}, [this, a, b, r, k, n](const Tensor& g, const Tensor& out) {
            if (nodes_[a].requires_grad)
                matmul_nt_into(g.data.data(), nodes_[b].value.data.data(),
                               nodes_[a].grad.data.data(), r, n, k, true);
            if (nodes_[b].requires_grad)
                matmul_tn_into(nodes_[a].value.data.data(), g.data.data(),
                               nodes_[b].grad.data.data(), r, k, n, true);
        });
    }

    /// A * B^T with A:[r,k], B:[n,k] -> [r,n].
    int matmul_nt(int a, int b) {
        const auto& A = nodes_[a].value;
        const auto& B = nodes_[b].value;
        const std::size_t r = A.rows(), k = A.cols(), n = B.rows();
        if (B.cols() != k) throw std::invalid_argument("matmul_nt: inner extents differ");
        Tensor out({r, n});
        matmul_nt_into(A.data.data(), B.data.data(), out.data.data(), r, k, n);
        return record(std::move(out), {a, b}, [this, a, b, r, k, n](const Tensor& g, const Tensor& out) {
            if (nodes_[a].requires_grad)
                matmul_into(g.data.data(), nodes_[b].value.data.data(),
                            nodes_[a].grad.data.data(), r, n, k, true);
            if (nodes_[b].requires_grad)
                matmul_tn_into(g.data.data(), nodes_[a].value.data.data(),
                               nodes_[b].grad.data.data(), r, n, k, true);
        });
    }

    // ---- broadcasts over rows (v is [1,C] or [C]) ----

    int add_rowvec(int x, int v) {
        const auto& X = nodes_[x].value;
        const auto& V = nodes_[v].value;
        const std::size_t r = X.rows(), c = X.cols();
        if (V.size() != c) throw std::invalid_argument("add_rowvec: width mismatch");
        Tensor out = X;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += V.data[j];
        return record(std::move(out), {x, v}, [this, x, v, r, c](const Tensor& g, const Tensor& out) {
            axpy(x, g, T(1));
            if (nodes_[v].requires_grad) {
                auto& gv = nodes_[v].grad.data;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gv[j] += g.data[i * c + j];
            }
        });
    }

    int mul_rowvec(int x, int v) {
        const auto& X = nodes_[x].value;
        const auto& V = nodes_[v].value;
        const std::size_t r = X.rows(), c = X.cols();
        if (V.size() != c) throw std::invalid_argument("mul_rowvec: width mismatch");
        Tensor out = X;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= V.data[j];
        return record(std::move(out), {x, v}, [this, x, v, r, c](const Tensor& g, const Tensor& out) {
            if (nodes_[x].requires_grad) {
                auto& gx = nodes_[x].grad.data;
                const auto& vv = nodes_[v].value.data;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g.data[i * c + j] * vv[j];
            }
            if (nodes_[v].requires_grad) {
                auto& gv = nodes_[v].grad.data;
                const auto& xv = nodes_[x].value.data;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gv[j] += g.data[i * c + j] * xv[i * c + j];
            }
        });
    }

    // ---- softmax ----

    /// Row-wise softmax with optional adjacency mask. NegInf semantics: the
    /// logit of a disallowed pair is treated as -inf, so its weight is
    /// exactly zero. Rows are stabilized by max subtraction.
    int softmax_rows(int x, const AdjacencyMask* mask = nullptr) {
        const auto& X = nodes_[x].value;
        const std::size_t r = X.rows(), c = X.cols();
        if (mask && (mask->size() != r || mask->size() != c))
            throw std::invalid_argument("softmax: mask size mismatch");
        Tensor out({r, c});
        for (std::size_t i = 0; i < r; ++i) {
            T mx = -std::numeric_limits<T>::infinity();
            bool any = false;
            for (std::size_t j = 0; j < c; ++j) {
                if (mask && !mask->adj(i, j)) continue;
                any = true;
                mx = std::max(mx, X.data[i * c + j]);
            }
            if (!any) throw std::logic_error("softmax: row with no allowed entries");
            T sum = 0;
            for (std::size_t j = 0; j < c; ++j) {
                T e = 0;
                if (!mask || mask->adj(i, j)) e = std::exp(X.data[i * c + j] - mx);
                out.data[i * c + j] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= inv;
        }
        return record(std::move(out), {x}, [this, x, r, c](const Tensor& g, const Tensor& out) {
            auto& gx = nodes_[x].grad.data;
            const auto& ov = out.data;
            for (std::size_t i = 0; i < r; ++i) {
                T dot = 0;
                for (std::size_t j = 0; j < c; ++j) dot += g.data[i * c + j] * ov[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    gx[i * c + j] += ov[i * c + j] * (g.data[i * c + j] - dot);
            }
        });
    }

    // ---- reductions ----

    int sum_all(int a) {
        T s = 0;
        for (T v : nodes_[a].value.data) s += v;
        Tensor out({1});
        out.data[0] = s;
        return record(std::move(out), {a}, [this, a](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            for (auto& v : ga) v += g.data[0];
        });
    }

    int mean_all(int a) {
        const std::size_t n = nodes_[a].value.size();
        return scale(sum_all(a), T(1) / T(n));
    }

    // ---- shape ops ----

    int concat_cols(int a, int b) {
        const auto& A = nodes_[a].value;
        const auto& B = nodes_[b].value;
        const std::size_t r = A.rows(), ca = A.cols(), cb = B.cols();
        if (B.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
        Tensor out({r, ca + cb});
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(&A.data[i * ca], ca, &out.data[i * (ca + cb)]);
            std::copy_n(&B.data[i * cb], cb, &out.data[i * (ca + cb) + ca]);
        }
        return record(std::move(out), {a, b}, [this, a, b, r, ca, cb](const Tensor& g, const Tensor& out) {
            if (nodes_[a].requires_grad) {
                auto& ga = nodes_[a].grad.data;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g.data[i * (ca + cb) + j];
            }
            if (nodes_[b].requires_grad) {
                auto& gb = nodes_[b].grad.data;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < cb; ++j)
                        gb[i * cb + j] += g.data[i * (ca + cb) + ca + j];
            }
        });
    }

    int slice_cols(int a, std::size_t c0, std::size_t c1) {
        const auto& A = nodes_[a].value;
        const std::size_t r = A.rows(), c = A.cols(), w = c1 - c0;
        if (c1 > c || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
        Tensor out({r, w});
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(&A.data[i * c + c0], w, &out.data[i * w]);
        return record(std::move(out), {a}, [this, a, r, c, c0, w](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j) ga[i * c + c0 + j] += g.data[i * w + j];
        });
    }

    int concat_rows(int a, int b) {
        const auto& A = nodes_[a].value;
        const auto& B = nodes_[b].value;
        const std::size_t c = A.cols();
        if (B.cols() != c) throw std::invalid_argument("concat_rows: col mismatch");
        const std::size_t ra = A.rows(), rb = B.rows();
        Tensor out({ra + rb, c});
        std::copy(A.data.begin(), A.data.end(), out.data.begin());
        std::copy(B.data.begin(), B.data.end(), out.data.begin() + ra * c);
        return record(std::move(out), {a, b}, [this, a, b, ra, rb, c](const Tensor& g, const Tensor& out) {
            if (nodes_[a].requires_grad) {
                auto& ga = nodes_[a].grad.data;
                for (std::size_t i = 0; i < ra * c; ++i) ga[i] += g.data[i];
            }
            if (nodes_[b].requires_grad) {
                auto& gb = nodes_[b].grad.data;
                for (std::size_t i = 0; i < rb * c; ++i) gb[i] += g.data[ra * c + i];
            }
        });
    }

    int slice_rows(int a, std::size_t r0, std::size_t r1) {
        const auto& A = nodes_[a].value;
        const std::size_t c = A.cols(), w = r1 - r0;
        if (r1 > A.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
        Tensor out({w, c});
        std::copy_n(&A.data[r0 * c], w * c, out.data.begin());
        return record(std::move(out), {a}, [this, a, r0, c, w](const Tensor& g, const Tensor& out) {
            auto& ga = nodes_[a].grad.data;
            for (std::size_t i = 0; i < w * c; ++i) ga[r0 * c + i] += g.data[i];
        });
    }

    int gather_rows(int a, std::vector<std::uint32_t> idx) {
        const auto& A = nodes_[a].value;
        const std::size_t c = A.cols();
        Tensor out({idx.size(), c});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= A.rows()) throw std::invalid_argument("gather_rows: index out of range");
            std::copy_n(&A.data[idx[i] * c], c, &out.data[i * c]);
        }
        return record(std::move(out), {a},
                      [this, a, c, idx = std::move(idx)](const Tensor& g, const Tensor& out) {
                          auto& ga = nodes_[a].grad.data;
                          for (std::size_t i = 0; i < idx.size(); ++i)
                              for (std::size_t j = 0; j < c; ++j)
                                  ga[idx[i] * c + j] += g.data[i * c + j];
                      });
    }

    // ---- normalization ----

    /// Row-wise layer normalization without learnable affine; compose with
    /// mul_rowvec/add_rowvec where a gain is wanted.
    int layer_norm(int x, T eps = T(1e-5)) {
        const auto& X = nodes_[x].value;
        const std::size_t r = X.rows(), c = X.cols();
        Tensor out({r, c});
        std::vector<T> inv_sigma(r), mean(r);
        for (std::size_t i = 0; i < r; ++i) {
            T mu = 0;
            for (std::size_t j = 0; j < c; ++j) mu += X.data[i * c + j];
            mu /= T(c);
            T var = 0;
            for (std::size_t j = 0; j < c; ++j) {
                const T d = X.data[i * c + j] - mu;
                var += d * d;
            }
            var /= T(c);
            const T is = T(1) / std::sqrt(var + eps);
            mean[i] = mu;
            inv_sigma[i] = is;
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = (X.data[i * c + j] - mu) * is;
        }
        return record(std::move(out), {x},
                      [this, x, r, c, mean = std::move(mean),
                       inv_sigma = std::move(inv_sigma)](const Tensor& g, const Tensor& out) {
                          auto& gx = nodes_[x].grad.data;
                          const auto& ov = out.data;
                          for (std::size_t i = 0; i < r; ++i) {
                              T gsum = 0, gdot = 0;
                              for (std::size_t j = 0; j < c; ++j) {
                                  gsum += g.data[i * c + j];
                                  gdot += g.data[i * c + j] * ov[i * c + j];
                              }
                              const T is = inv_sigma[i];
                              for (std::size_t j = 0; j < c; ++j) {
                                  const T xhat = ov[i * c + j];
                                  gx[i * c + j] += is * (g.data[i * c + j] - gsum / T(c) -
                                                         xhat * gdot / T(c));
                              }
                          }
                      });
    }

    // ---- backward ----

    void backward(int loss) {
        if (nodes_[loss].value.size() != 1)
            throw std::logic_error("backward: loss must be a scalar");
        for (auto& n : nodes_)
            if (n.requires_grad && n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape);
        nodes_[loss].grad.data[0] = T(1);
        for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
            auto& n = nodes_[i];
            if (!n.requires_grad || !n.pull) continue;
            n.pull(n.grad, n.value);
        }
        for (auto& [id, p] : bound_) {
            const auto& g = nodes_[id].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) p->grad.data[i] += g.data[i];
        }
    }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(const Tensor&, const Tensor&)> pull;
    };

    int push(Tensor v, bool rg) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = rg;
        if (rg) n.grad = Tensor::zeros(n.value.shape);
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    int record(Tensor out, std::initializer_list<int> deps,
               std::function<void(const Tensor&, const Tensor&)> pull) {
        bool rg = false;
        for (int d : deps) rg = rg || nodes_[d].requires_grad;
        int id = push(std::move(out), rg);
        if (rg) nodes_[id].pull = std::move(pull);
        return id;
    }

    void axpy(int target, const Tensor& g, T c) {
        if (!nodes_[target].requires_grad) return;
        auto& dst = nodes_[target].grad.data;
        for (std::size_t i = 0; i < g.data.size(); ++i) dst[i] += c * g.data[i];
    }

    void check_same(int a, int b, const char* op) {
        if (!nodes_[a].value.same_shape(nodes_[b].value))
            throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }

    static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }
    static T phi_cdf(T x) { return T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2)))); }
    static T phi_pdf(T x) {
        return std::exp(-x * x / T(2)) / std::sqrt(T(2) * T(3.14159265358979323846));
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<int, ParameterT<T>*>> bound_;
    std::unordered_map<ParameterT<T>*, int> param_nodes_;
};

using Graph = GraphT<float>;

}  // namespace dymesh
