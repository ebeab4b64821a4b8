#pragma once

// Central finite-difference oracle for Mlp::backward, shared by the unit and
// acceptance suites.

#include "edgeslice/nn.hpp"

#include <algorithm>
#include <cmath>

namespace gradcheck {

using edgeslice::Matrix;
using edgeslice::Vector;
using edgeslice::nn::Mlp;

/// ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12) over every
/// parameter and the input, for L = sum(output .* output_grad).
inline double relative_error(const Mlp& net, const Vector& input, const Vector& output_grad, double h = 1e-5) {
    const auto tape = net.backward(input, output_grad);
    auto loss = [&](const Mlp& m, const Vector& x) { return m.forward(x).dot(output_grad); };

    double diff2 = 0.0, norm_a = 0.0, norm_n = 0.0;
    auto accumulate = [&](double analytic, double numeric) {
        diff2 += (analytic - numeric) * (analytic - numeric);
        norm_a += analytic * analytic;
        norm_n += numeric * numeric;
    };

    Mlp probe = net;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& w = probe.layers()[l].weights;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double keep = w(r, c);
                w(r, c) = keep + h;
                const double up = loss(probe, input);
                w(r, c) = keep - h;
                const double down = loss(probe, input);
                w(r, c) = keep;
                accumulate(tape.weights[l](r, c), (up - down) / (2 * h));
            }
        }
        auto& b = probe.layers()[l].bias;
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            const double keep = b(r);
            b(r) = keep + h;
            const double up = loss(probe, input);
            b(r) = keep - h;
            const double down = loss(probe, input);
            b(r) = keep;
            accumulate(tape.biases[l](r), (up - down) / (2 * h));
        }
    }
    Vector x = input;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double keep = x(k);
        x(k) = keep + h;
        const double up = loss(net, x);
        x(k) = keep - h;
        const double down = loss(net, x);
        x(k) = keep;
        accumulate(tape.input(k, 0), (up - down) / (2 * h));
    }
    return std::sqrt(diff2) / std::max(std::sqrt(norm_a) + std::sqrt(norm_n), 1e-12);
}

}  // namespace gradcheck
