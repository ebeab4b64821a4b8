#pragma once

#include "edgeslice/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace edgeslice::nn {

enum class Activation { leaky_relu, sigmoid, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;
};

/// Gradients for every parameter of an Mlp, plus the gradient with respect to
/// the network input (one column per sample).
struct GradientTape {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;

    bool is_zero() const;
};

/// Fully connected network with leaky-rectifier hidden layers.
class Mlp {
public:
    /// All parameters zero.
    Mlp(std::vector<int> layer_sizes, Activation output, double leaky_slope = 0.01);

    /// Weights and biases uniform in +-1/sqrt(fan_in).
    static Mlp uniform_init(std::vector<int> layer_sizes, Activation output, std::mt19937_64& rng,
                            double leaky_slope = 0.01);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    Activation output_activation() const { return output_; }
    double leaky_slope() const { return slope_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    bool same_architecture(const Mlp& other) const;
    std::size_t parameter_count() const;

    Vector forward(const Vector& input) const;
    /// Columns are samples.
    Matrix forward(const Matrix& inputs) const;

    /// Gradient of sum(output .* output_grad) for one sample.
    GradientTape backward(const Vector& input, const Vector& output_grad) const;
    /// Batched version; parameter gradients are summed over the columns.
    /// `preactivation_grads`, when given, is added to the gradient arriving at the
    /// output layer's pre-activation.
    GradientTape backward(const Matrix& inputs, const Matrix& output_grads,
                          const Matrix* preactivation_grads = nullptr) const;

    /// Output layer values before the output activation.
    Matrix output_preactivation(const Matrix& inputs) const;

    GradientTape zero_tape() const;

    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);

private:
    Matrix activate(const Matrix& pre, bool hidden) const;
    Matrix derivative(const Matrix& pre, const Matrix& post, bool hidden) const;

    std::vector<int> sizes_;
    Activation output_;
    double slope_;
    std::vector<DenseLayer> layers_;
};

/// Adaptive-moment first-order optimizer.
class Adam {
public:
    explicit Adam(const Mlp& net, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    /// Moves parameters along -(scale * gradient) under the adaptive rule.
    void apply(Mlp& net, const GradientTape& tape, double scale = 1.0);

    double learning_rate() const { return lr_; }
    long steps() const { return step_; }

    void save(std::ostream& out) const;
    static Adam load(std::istream& in);

private:
    Adam() = default;

    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long step_ = 0;
    std::vector<Matrix> m_w_, v_w_;
    std::vector<Vector> m_b_, v_b_;
};

/// target <- tau * source + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& source, double tau);

}  // namespace edgeslice::nn
