#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dymesh/graph.hpp"
#include "dymesh/rng.hpp"
#include "dymesh/tensor.hpp"

namespace dymesh {

/// Sinusoidal positional encoding config. Per input scalar s the map emits
/// [sin(2^0 pi s), cos(2^0 pi s), ..., sin(2^{L-1} pi s), cos(2^{L-1} pi s)]
/// and optionally s itself, so the output width per scalar is 2L (+1).
struct FourierEncoding {
    int num_bands = 8;
    bool include_input = true;

    std::size_t width_per_scalar() const {
        return std::size_t(2 * num_bands) + (include_input ? 1 : 0);
    }
};

/// Encodes a [rows, k] buffer into [rows, k * width_per_scalar]. Pure
/// preprocessing: gradients never flow into coordinates, so this stays
/// outside the tape.
template <class T>
TensorT<T> fourier_encode(const T* x, std::size_t rows, std::size_t k,
                          const FourierEncoding& enc) {
    const std::size_t w = enc.width_per_scalar();
    TensorT<T> out({rows, k * w});
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
            const double s = double(x[r * k + c]);
            T* o = &out.data[r * k * w + c * w];
            std::size_t p = 0;
            if (enc.include_input) o[p++] = T(s);
            double freq = kPi;
            for (int b = 0; b < enc.num_bands; ++b) {
                o[p++] = T(std::sin(freq * s));
                o[p++] = T(std::cos(freq * s));
                freq *= 2.0;
            }
        }
    }
    return out;
}

template <class T>
TensorT<T> fourier_encode(const TensorT<T>& x, const FourierEncoding& enc) {
    return fourier_encode(x.data.data(), x.rows(), x.cols(), enc);
}

/// Affine map with bias. Weight layout [in, out] so apply() is x * W + b.
template <class T>
struct LinearT {
    ParameterT<T> weight;
    ParameterT<T> bias;

    void init(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
              bool zero_init = false) {
        TensorT<T> w({in, out});
        if (!zero_init) {
            const double s = 1.0 / std::sqrt(double(in));
            for (auto& v : w.data) v = T(rng.uniform(-s, s));
        }
        weight.reset(name + ".weight", std::move(w));
        bias.reset(name + ".bias", TensorT<T>({1, out}));
    }

    int apply(GraphT<T>& g, int x) {
        return g.add_rowvec(g.matmul(x, g.param(weight)), g.param(bias));
    }

    void collect(std::vector<ParameterT<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

/// Single-head self-attention with an optional adjacency mask and residual,
/// out = softmax(mask(Q K^T / sqrt(d))) V + x. NegInf mode zeroes disallowed
/// weights exactly; LiteralHadamard multiplies the scaled logits by the 0/1
/// adjacency instead (ablation path).
template <class T>
struct MaskedSelfAttentionT {
    LinearT<T> q, k, v;
    std::size_t dim = 0;

    void init(const std::string& name, std::size_t d, Rng& rng) {
        dim = d;
        q.init(name + ".q", d, d, rng);
        k.init(name + ".k", d, d, rng);
        v.init(name + ".v", d, d, rng);
    }

    int apply(GraphT<T>& g, int x, const AdjacencyMask* mask,
              MaskMode mode = MaskMode::NegInf) {
        const int Q = q.apply(g, x), K = k.apply(g, x), V = v.apply(g, x);
        int logits = g.scale(g.matmul_nt(Q, K), T(1) / std::sqrt(T(dim)));
        int attn;
        if (!mask) {
            attn = g.softmax_rows(logits);
        } else if (mode == MaskMode::NegInf) {
            attn = g.softmax_rows(logits, mask);
        } else {
            const std::size_t n = mask->size();
            TensorT<T> m01({n, n});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) m01.data[i * n + j] = mask->adj(i, j) ? 1 : 0;
            attn = g.softmax_rows(g.mul(logits, g.input(std::move(m01))));
        }
        return g.add(g.matmul(attn, V), x);
    }

    void collect(std::vector<ParameterT<T>*>& out) {
        q.collect(out);
        k.collect(out);
        v.collect(out);
    }
};

/// Cross-attention that computes one row-stochastic map A from projected
/// queries/keys and applies it to two value streams:
///   (A * Wa(v_a) + res_a, A * Wb(v_b) + res_b).
/// The two streams may have different channel counts.
template <class T>
struct SharedMapCrossAttentionT {
    LinearT<T> q, k, va, vb;
    std::size_t dim = 0;

    /// qk_in: width of the query/key features; proj: projected attention
    /// width; c_a/c_b: channel counts of the two value streams.
    void init(const std::string& name, std::size_t qk_in, std::size_t proj, std::size_t c_a,
              std::size_t c_b, Rng& rng) {
        dim = proj;
        q.init(name + ".q", qk_in, proj, rng);
        k.init(name + ".k", qk_in, proj, rng);
        va.init(name + ".va", c_a, c_a, rng);
        vb.init(name + ".vb", c_b, c_b, rng);
    }

    std::pair<int, int> apply(GraphT<T>& g, int q_in, int k_in, int va_in, int vb_in, int res_a,
                              int res_b) {
        const int A = attention_map(g, q_in, k_in);
        return {g.add(g.matmul(A, va.apply(g, va_in)), res_a),
                g.add(g.matmul(A, vb.apply(g, vb_in)), res_b)};
    }

    int attention_map(GraphT<T>& g, int q_in, int k_in) {
        return g.softmax_rows(
            g.scale(g.matmul_nt(q.apply(g, q_in), k.apply(g, k_in)), T(1) / std::sqrt(T(dim))));
    }

    void collect(std::vector<ParameterT<T>*>& out) {
        q.collect(out);
        k.collect(out);
        va.collect(out);
        vb.collect(out);
    }
};

/// Adam with bias correction; state is keyed by parameter order, which is
/// stable because models register parameters deterministically.
template <class T>
class AdamT {
  public:
    explicit AdamT(std::vector<ParameterT<T>*> params, double lr = 1e-4, double beta1 = 0.9,
                   double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.push_back(TensorT<T>::zeros(p->value.shape));
            v_.push_back(TensorT<T>::zeros(p->value.shape));
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            for (std::size_t j = 0; j < p.value.data.size(); ++j) {
                const double g = double(p.grad.data[j]);
                double m = b1_ * double(m_[i].data[j]) + (1.0 - b1_) * g;
                double v = b2_ * double(v_[i].data[j]) + (1.0 - b2_) * g * g;
                m_[i].data[j] = T(m);
                v_[i].data[j] = T(v);
                p.value.data[j] -= T(lr_ * (m / c1) / (std::sqrt(v / c2) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

  private:
    std::vector<ParameterT<T>*> params_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<TensorT<T>> m_, v_;
};

using Adam = AdamT<float>;

}  // namespace dymesh
