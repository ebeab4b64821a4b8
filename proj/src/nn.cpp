#include "edgeslice/nn.hpp"

#include "edgeslice/text_io.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace edgeslice::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + name + "'");
}

bool GradientTape::is_zero() const {
    for (const auto& w : weights) {
        if (!w.isZero(0.0)) return false;
    }
    for (const auto& b : biases) {
        if (!b.isZero(0.0)) return false;
    }
    return input.isZero(0.0);
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation output, double leaky_slope)
    : sizes_(std::move(layer_sizes)), output_(output), slope_(leaky_slope) {
    if (sizes_.size() < 2) throw ConfigError("an Mlp needs at least input and output sizes");
    for (int s : sizes_) {
        if (s < 1) throw ConfigError("Mlp layer sizes must be positive");
    }
    if (!(slope_ >= 0.0) || !std::isfinite(slope_)) throw ConfigError("leaky slope must be finite and >= 0");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        layers_.push_back({Matrix::Zero(sizes_[l], sizes_[l - 1]), Vector::Zero(sizes_[l])});
    }
}

Mlp Mlp::uniform_init(std::vector<int> layer_sizes, Activation output, std::mt19937_64& rng, double leaky_slope) {
    Mlp net(std::move(layer_sizes), output, leaky_slope);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = dist(rng);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
    }
    return net;
}

bool Mlp::same_architecture(const Mlp& other) const {
    return sizes_ == other.sizes_ && output_ == other.output_ && slope_ == other.slope_;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

Matrix Mlp::activate(const Matrix& pre, bool hidden) const {
    const Activation a = hidden ? Activation::leaky_relu : output_;
    switch (a) {
        case Activation::leaky_relu: {
            const double slope = slope_;
            return pre.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
        }
        case Activation::sigmoid:
            return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::identity:
            return pre;
    }
    return pre;
}

Matrix Mlp::derivative(const Matrix& pre, const Matrix& post, bool hidden) const {
    const Activation a = hidden ? Activation::leaky_relu : output_;
    switch (a) {
        case Activation::leaky_relu: {
            const double slope = slope_;
            return pre.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
        }
        case Activation::sigmoid:
            return post.array() * (1.0 - post.array());
        case Activation::identity:
            return Matrix::Ones(pre.rows(), pre.cols());
    }
    return Matrix::Ones(pre.rows(), pre.cols());
}

Vector Mlp::forward(const Vector& input) const {
    return forward(Matrix(input)).col(0);
}

Matrix Mlp::forward(const Matrix& inputs) const {
    if (inputs.rows() != input_size()) {
        throw ConfigError("Mlp forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(input_size()));
    }
    Matrix act = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix pre = layers_[l].weights * act;
        pre.colwise() += layers_[l].bias;
        act = activate(pre, l + 1 < layers_.size());
    }
    return act;
}

GradientTape Mlp::backward(const Vector& input, const Vector& output_grad) const {
    return backward(Matrix(input), Matrix(output_grad));
}

Matrix Mlp::output_preactivation(const Matrix& inputs) const {
    if (inputs.rows() != input_size()) throw ConfigError("Mlp: input has the wrong size");
    Matrix act = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix pre = layers_[l].weights * act;
        pre.colwise() += layers_[l].bias;
        if (l + 1 == layers_.size()) return pre;
        act = activate(pre, true);
    }
    return act;
}

GradientTape Mlp::backward(const Matrix& inputs, const Matrix& output_grads,
                           const Matrix* preactivation_grads) const {
    if (inputs.rows() != input_size()) throw ConfigError("Mlp backward: input has the wrong size");
    if (output_grads.rows() != output_size() || output_grads.cols() != inputs.cols()) {
        throw ConfigError("Mlp backward: output gradient has the wrong shape");
    }
    const std::size_t L = layers_.size();
    std::vector<Matrix> pre(L), post(L + 1);
    post[0] = inputs;
    for (std::size_t l = 0; l < L; ++l) {
        pre[l] = layers_[l].weights * post[l];
        pre[l].colwise() += layers_[l].bias;
        post[l + 1] = activate(pre[l], l + 1 < L);
    }

    GradientTape tape;
    tape.weights.resize(L);
    tape.biases.resize(L);
    Matrix delta = output_grads.array() * derivative(pre[L - 1], post[L], false).array();
    if (preactivation_grads) {
        if (preactivation_grads->rows() != delta.rows() || preactivation_grads->cols() != delta.cols()) {
            throw ConfigError("Mlp backward: pre-activation gradient has the wrong shape");
        }
        delta += *preactivation_grads;
    }
    for (std::size_t l = L; l-- > 0;) {
        tape.weights[l] = delta * post[l].transpose();
        tape.biases[l] = delta.rowwise().sum();
        Matrix upstream = layers_[l].weights.transpose() * delta;
        if (l == 0) {
            tape.input = std::move(upstream);
        } else {
            delta = upstream.array() * derivative(pre[l - 1], post[l], true).array();
        }
    }
    return tape;
}

GradientTape Mlp::zero_tape() const {
    GradientTape tape;
    for (const auto& l : layers_) {
        tape.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        tape.biases.push_back(Vector::Zero(l.bias.size()));
    }
    tape.input = Matrix::Zero(input_size(), 1);
    return tape;
}

void Mlp::save(std::ostream& out) const {
    out << "mlp 1\nsizes " << sizes_.size();
    for (int s : sizes_) out << ' ' << s;
    out << "\noutput " << to_string(output_) << "\nleaky_slope " << text_io::format(slope_) << '\n';
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out << "layer " << l << "\nweights ";
        text_io::write_matrix(out, layers_[l].weights);
        out << "bias ";
        text_io::write_vector(out, layers_[l].bias);
    }
}

Mlp Mlp::load(std::istream& in) {
    const std::string ctx = "mlp checkpoint";
    text_io::expect(in, "mlp", ctx);
    if (text_io::parse_long(in, ctx) != 1) throw ConfigError(ctx + ": unsupported version");
    text_io::expect(in, "sizes", ctx);
    const long n = text_io::parse_long(in, ctx);
    if (n < 2 || n > 64) throw ConfigError(ctx + ": implausible layer count");
    std::vector<int> sizes;
    for (long i = 0; i < n; ++i) sizes.push_back(static_cast<int>(text_io::parse_long(in, ctx)));
    text_io::expect(in, "output", ctx);
    const auto output = activation_from_string(text_io::next_token(in, ctx));
    text_io::expect(in, "leaky_slope", ctx);
    const double slope = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    Mlp net(sizes, output, slope);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
        text_io::expect(in, "layer", ctx);
        if (text_io::parse_long(in, ctx) != static_cast<long>(l)) throw ConfigError(ctx + ": layers out of order");
        text_io::expect(in, "weights", ctx);
        Matrix w = text_io::read_matrix(in, ctx);
        text_io::expect(in, "bias", ctx);
        Vector b = text_io::read_vector(in, ctx);
        if (w.rows() != net.layers_[l].weights.rows() || w.cols() != net.layers_[l].weights.cols() ||
            b.size() != net.layers_[l].bias.size()) {
            throw ConfigError(ctx + ": layer " + std::to_string(l) + " shape does not match sizes");
        }
        net.layers_[l] = {std::move(w), std::move(b)};
    }
    return net;
}

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    if (!(lr_ > 0.0)) throw ConfigError("learning rate must be positive");
    for (const auto& l : net.layers()) {
        m_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        v_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        m_b_.push_back(Vector::Zero(l.bias.size()));
        v_b_.push_back(Vector::Zero(l.bias.size()));
    }
}

void Adam::apply(Mlp& net, const GradientTape& tape, double scale) {
    auto& layers = net.layers();
    if (layers.size() != m_w_.size() || tape.weights.size() != m_w_.size() || tape.biases.size() != m_b_.size()) {
        throw ConfigError("optimizer/network/tape layer count mismatch");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    const double step_size = lr_ * std::sqrt(c2) / c1;
    const double eps_hat = eps_ * std::sqrt(c2);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
        if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
            throw ConfigError("optimizer: gradient shape does not match parameters");
        }
        m = beta1_ * m + (1.0 - beta1_) * (scale * grad);
        v = beta2_ * v + (1.0 - beta2_) * (scale * grad).cwiseAbs2();
        param.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, m_w_[l], v_w_[l], tape.weights[l]);
        update(layers[l].bias, m_b_[l], v_b_[l], tape.biases[l]);
    }
}

void Adam::save(std::ostream& out) const {
    out << "adam 1\nlr " << text_io::format(lr_) << "\nbeta1 " << text_io::format(beta1_) << "\nbeta2 "
        << text_io::format(beta2_) << "\nepsilon " << text_io::format(eps_) << "\nstep " << step_ << "\nlayers "
        << m_w_.size() << '\n';
    for (std::size_t l = 0; l < m_w_.size(); ++l) {
        text_io::write_matrix(out, m_w_[l]);
        text_io::write_matrix(out, v_w_[l]);
        text_io::write_vector(out, m_b_[l]);
        text_io::write_vector(out, v_b_[l]);
    }
}

Adam Adam::load(std::istream& in) {
    const std::string ctx = "optimizer checkpoint";
    Adam opt;
    text_io::expect(in, "adam", ctx);
    if (text_io::parse_long(in, ctx) != 1) throw ConfigError(ctx + ": unsupported version");
    text_io::expect(in, "lr", ctx);
    opt.lr_ = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    text_io::expect(in, "beta1", ctx);
    opt.beta1_ = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    text_io::expect(in, "beta2", ctx);
    opt.beta2_ = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    text_io::expect(in, "epsilon", ctx);
    opt.eps_ = text_io::parse_double(text_io::next_token(in, ctx), ctx);
    text_io::expect(in, "step", ctx);
    opt.step_ = text_io::parse_long(in, ctx);
    text_io::expect(in, "layers", ctx);
    const long n = text_io::parse_long(in, ctx);
    for (long l = 0; l < n; ++l) {
        opt.m_w_.push_back(text_io::read_matrix(in, ctx));
        opt.v_w_.push_back(text_io::read_matrix(in, ctx));
        opt.m_b_.push_back(text_io::read_vector(in, ctx));
        opt.v_b_.push_back(text_io::read_vector(in, ctx));
    }
    return opt;
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_architecture(source)) throw ConfigError("soft_update: architecture mismatch");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in [0, 1]");
    auto& dst = target.layers();
    const auto& src = source.layers();
    for (std::size_t l = 0; l < dst.size(); ++l) {
        dst[l].weights = tau * src[l].weights + (1.0 - tau) * dst[l].weights;
        dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
    }
}

}  // namespace edgeslice::nn
