#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ehrl/error.hpp"

namespace ehrl {

enum class HiddenActivation : std::uint32_t { relu = 0, tanh = 1 };

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
    Mat<Scalar> w; // out x in
    Vec<Scalar> b; // out

    bool operator==(const DenseLayer& o) const { return w == o.w && b == o.b; }
};

// Per-layer gradients with the same shapes as the model's layers.
template <typename Scalar>
struct MlpGradients {
    std::vector<DenseLayer<Scalar>> layers;

    double squared_norm() const {
        double s = 0.0;
        for (const auto& l : layers) s += static_cast<double>(l.w.squaredNorm()) + static_cast<double>(l.b.squaredNorm());
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }
    void scale(Scalar k) {
        for (auto& l : layers) {
            l.w *= k;
            l.b *= k;
        }
    }
    void add(const MlpGradients& o) {
        if (o.layers.size() != layers.size()) throw ContractError("gradient shape mismatch");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (o.layers[i].w.rows() != layers[i].w.rows() || o.layers[i].w.cols() != layers[i].w.cols())
                throw ContractError("gradient shape mismatch");
            layers[i].w += o.layers[i].w;
            layers[i].b += o.layers[i].b;
        }
    }
    bool is_zero() const {
        for (const auto& l : layers)
            if (!l.w.isZero(0) || !l.b.isZero(0)) return false;
        return true;
    }
};

// Dense feed-forward network: hidden layers use the configured activation, the
// final layer is linear.
template <typename Scalar>
class Mlp {
public:
    using Matrix = Mat<Scalar>;
    using Vector = Vec<Scalar>;

    struct Cache {
        std::vector<Matrix> activations; // input, then each layer's output
    };

    Mlp() = default;

    // Hidden layers: uniform in +-sqrt(6/fan_in); output layer: +-1/sqrt(fan_in).
    Mlp(std::vector<int> dims, std::uint64_t seed, HiddenActivation act = HiddenActivation::relu)
        : dims_(std::move(dims)), act_(act) {
        if (dims_.size() < 2) throw ContractError("a network needs at least input and output sizes");
        for (int d : dims_)
            if (d <= 0) throw ContractError("layer sizes must be positive");
        std::mt19937_64 rng(seed);
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            const int in = dims_[l];
            const int out = dims_[l + 1];
            const bool last = l + 2 == dims_.size();
            const double limit = last ? 1.0 / std::sqrt(in) : std::sqrt(6.0 / in);
            std::uniform_real_distribution<double> u(-limit, limit);
            DenseLayer<Scalar> layer{Matrix(out, in), Vector::Zero(out)};
            for (int r = 0; r < out; ++r)
                for (int c = 0; c < in; ++c) layer.w(r, c) = static_cast<Scalar>(u(rng));
            layers_.push_back(std::move(layer));
        }
    }

    const std::vector<int>& dims() const { return dims_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    HiddenActivation activation() const { return act_; }
    std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
    const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
        return n;
    }

    // x: input_dim x batch.
    Matrix forward(const Matrix& x) const {
        check_input(x);
        Matrix a = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].w * a;
            z.colwise() += layers_[l].b;
            if (l + 1 < layers_.size()) activate(z);
            a = std::move(z);
        }
        return a;
    }

    Matrix forward(const Matrix& x, Cache& cache) const {
        check_input(x);
        cache.activations.resize(layers_.size() + 1);
        cache.activations[0] = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix& z = cache.activations[l + 1];
            z.noalias() = layers_[l].w * cache.activations[l];
            z.colwise() += layers_[l].b;
            if (l + 1 < layers_.size()) activate(z);
        }
        return cache.activations.back();
    }

    // grad_out: d(loss)/d(output), output_dim x batch.
    MlpGradients<Scalar> backward(const Cache& cache, const Matrix& grad_out) const {
        if (cache.activations.size() != layers_.size() + 1) throw ContractError("backward needs a forward cache");
        MlpGradients<Scalar> g;
        g.layers.resize(layers_.size());
        Matrix delta = grad_out;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const Matrix& a = cache.activations[li];
            g.layers[li].w.noalias() = delta * a.transpose();
            g.layers[li].b = delta.rowwise().sum();
            if (li == 0) break;
            Matrix back;
            back.noalias() = layers_[li].w.transpose() * delta;
            const Matrix& h = cache.activations[li];
            if (act_ == HiddenActivation::relu)
                back = (h.array() > Scalar(0)).select(back, Scalar(0));
            else
                back.array() *= (Scalar(1) - h.array().square());
            delta = std::move(back);
        }
        return g;
    }

    MlpGradients<Scalar> zero_gradients() const {
        MlpGradients<Scalar> g;
        for (const auto& l : layers_) g.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
        return g;
    }

    bool same_shape(const Mlp& o) const { return dims_ == o.dims_; }
    bool same_shape(const MlpGradients<Scalar>& g) const {
        if (g.layers.size() != layers_.size()) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (g.layers[i].w.rows() != layers_[i].w.rows() || g.layers[i].w.cols() != layers_[i].w.cols() ||
                g.layers[i].b.size() != layers_[i].b.size())
                return false;
        return true;
    }

    bool operator==(const Mlp& o) const { return dims_ == o.dims_ && act_ == o.act_ && layers_ == o.layers_; }

    // Used by checkpoint loading.
    static Mlp from_layers(std::vector<int> dims, HiddenActivation act, std::vector<DenseLayer<Scalar>> layers) {
        Mlp m;
        m.dims_ = std::move(dims);
        m.act_ = act;
        m.layers_ = std::move(layers);
        return m;
    }

private:
    void check_input(const Matrix& x) const {
        if (x.rows() != input_dim()) throw ContractError("input has " + std::to_string(x.rows()) + " rows, network expects " + std::to_string(input_dim()));
    }
    void activate(Matrix& z) const {
        if (act_ == HiddenActivation::relu)
            z = z.cwiseMax(Scalar(0));
        else
            z = z.array().tanh().matrix();
    }

    std::vector<int> dims_;
    HiddenActivation act_ = HiddenActivation::relu;
    std::vector<DenseLayer<Scalar>> layers_;
};

inline const std::vector<int> actor_hidden_dims{49, 256, 512, 256, 128};
inline const std::vector<int> critic_dims{49, 512, 1024, 256, 1};

// Actor: the hidden stack followed by a linear 128 -> (4 + 16) head.
inline std::vector<int> actor_dims() {
    auto d = actor_hidden_dims;
    d.push_back(20);
    return d;
}

} // namespace ehrl
