#include "edgeslice/nn.hpp"
#include "edgeslice/text_io.hpp"

#include "gradcheck.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace edgeslice;
using namespace edgeslice::nn;

TEST_SUITE("nn") {

TEST_CASE("zero networks") {
    const Mlp sig({4, 8, 8, 3}, Activation::sigmoid);
    CHECK(sig.forward(Vector(Vector::Random(4))).isApproxToConstant(0.5, 0.0));
    const Mlp lin({4, 8, 1}, Activation::identity);
    CHECK(lin.forward(Vector(Vector::Random(4))).isZero(0.0));
    CHECK(sig.parameter_count() == 4 * 8 + 8 + 8 * 8 + 8 + 8 * 3 + 3);
}

TEST_CASE("forward matches the golden snapshot") {
    std::ifstream in(std::string(EDGESLICE_TEST_DIR) + "/golden/mlp_forward.txt");
    REQUIRE(in);
    const std::string ctx = "golden";
    text_io::expect(in, "cases", ctx);
    const long cases = text_io::parse_long(in, ctx);
    CHECK(cases == 3);
    for (long n = 0; n < cases; ++n) {
        text_io::expect(in, "sizes", ctx);
        std::vector<int> sizes(static_cast<std::size_t>(text_io::parse_long(in, ctx)));
        for (int& s : sizes) s = static_cast<int>(text_io::parse_long(in, ctx));
        text_io::expect(in, "output", ctx);
        Mlp net(sizes, activation_from_string(text_io::next_token(in, ctx)));
        for (auto& layer : net.layers()) {
            text_io::expect(in, "weights", ctx);
            const long r = text_io::parse_long(in, ctx), c = text_io::parse_long(in, ctx);
            REQUIRE(r == layer.weights.rows());
            REQUIRE(c == layer.weights.cols());
            for (long i = 0; i < r; ++i)
                for (long j = 0; j < c; ++j) layer.weights(i, j) = text_io::parse_double(text_io::next_token(in, ctx), ctx);
            text_io::expect(in, "bias", ctx);
            REQUIRE(text_io::parse_long(in, ctx) == layer.bias.size());
            for (auto& b : layer.bias) b = text_io::parse_double(text_io::next_token(in, ctx), ctx);
        }
        auto read = [&](const char* tag) {
            text_io::expect(in, tag, ctx);
            Vector v(text_io::parse_long(in, ctx));
            for (auto& x : v) x = text_io::parse_double(text_io::next_token(in, ctx), ctx);
            return v;
        };
        const Vector x = read("input");
        const Vector expected = read("expected");
        const Vector y = net.forward(x);
        REQUIRE(y.size() == expected.size());
        CHECK((y - expected).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
        // Purity: bit-identical on repeat, and the batched path agrees.
        CHECK(net.forward(x) == y);
        CHECK((net.forward(Matrix(x)).col(0) - y).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("backward by hand") {
    Mlp net({1, 1}, Activation::identity);
    net.layers()[0].weights(0, 0) = 3.0;
    net.layers()[0].bias(0) = -1.0;
    const auto tape = net.backward(Vector(Vector::Constant(1, 2.0)), Vector(Vector::Constant(1, 1.0)));
    CHECK(tape.weights[0](0, 0) == 2.0);
    CHECK(tape.biases[0](0) == 1.0);
    CHECK(tape.input(0, 0) == 3.0);

    std::mt19937_64 rng(1);
    const Mlp big = Mlp::uniform_init({3, 16, 16, 2}, Activation::sigmoid, rng);
    CHECK(big.backward(Vector(Vector::Random(3)), Vector(Vector::Zero(2))).is_zero());
}

TEST_CASE("backward matches finite differences") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    SUBCASE("full-size hidden layers") {
        const Mlp net = Mlp::uniform_init({3, 128, 128, 2}, Activation::sigmoid, rng);
        const Vector x = Vector::NullaryExpr(3, [&] { return n(rng); });
        const Vector g = Vector::NullaryExpr(2, [&] { return n(rng); });
        CHECK(gradcheck::relative_error(net, x, g) <= 1e-4);
    }
    SUBCASE("every output activation") {
        for (Activation out : {Activation::sigmoid, Activation::identity, Activation::leaky_relu}) {
            for (int trial = 0; trial < 10; ++trial) {
                const Mlp net = Mlp::uniform_init({4, 9, 7, 3}, out, rng, 0.01);
                const Vector x = Vector::NullaryExpr(4, [&] { return n(rng); });
                const Vector g = Vector::NullaryExpr(3, [&] { return n(rng); });
                CHECK(gradcheck::relative_error(net, x, g) <= 1e-4);
            }
        }
    }
}

TEST_CASE("batched backward sums per-sample tapes") {
    std::mt19937_64 rng(9);
    const Mlp net = Mlp::uniform_init({3, 6, 2}, Activation::sigmoid, rng);
    const Matrix X = Matrix::Random(3, 5);
    const Matrix G = Matrix::Random(2, 5);
    const auto batch = net.backward(X, G);
    auto sum = net.zero_tape();
    for (int s = 0; s < 5; ++s) {
        const auto t = net.backward(Vector(X.col(s)), Vector(G.col(s)));
        for (std::size_t l = 0; l < sum.weights.size(); ++l) {
            sum.weights[l] += t.weights[l];
            sum.biases[l] += t.biases[l];
        }
        CHECK((batch.input.col(s) - t.input.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
    for (std::size_t l = 0; l < sum.weights.size(); ++l) {
        CHECK((batch.weights[l] - sum.weights[l]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((batch.biases[l] - sum.biases[l]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("adam") {
    SUBCASE("zero tape leaves parameters untouched") {
        std::mt19937_64 rng(2);
        Mlp net = Mlp::uniform_init({2, 4, 1}, Activation::identity, rng);
        const Mlp before = net;
        Adam opt(net);
        for (int i = 0; i < 10; ++i) opt.apply(net, net.zero_tape());
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            CHECK(net.layers()[l].weights == before.layers()[l].weights);
            CHECK(net.layers()[l].bias == before.layers()[l].bias);
        }
    }
    SUBCASE("descends on w^2") {
        Mlp net({1, 1}, Activation::identity);
        net.layers()[0].bias(0) = 1.0;
        Adam opt(net, 1e-2);
        auto tape = net.zero_tape();
        tape.biases[0](0) = 2.0 * net.layers()[0].bias(0);
        opt.apply(net, tape);
        CHECK(net.layers()[0].bias(0) < 1.0);
    }
    SUBCASE("converges on a convex quadratic") {
        // f = (w - 3)^2 + 2 (b + 1)^2, minimum at w = 3, b = -1.
        Mlp net({1, 1}, Activation::identity);
        Adam opt(net, 0.05);
        for (int step = 0; step < 500; ++step) {
            auto tape = net.zero_tape();
            tape.weights[0](0, 0) = 2.0 * (net.layers()[0].weights(0, 0) - 3.0);
            tape.biases[0](0) = 4.0 * (net.layers()[0].bias(0) + 1.0);
            opt.apply(net, tape);
        }
        CHECK(std::abs(net.layers()[0].weights(0, 0) - 3.0) < 1e-2);
        CHECK(std::abs(net.layers()[0].bias(0) + 1.0) < 1e-2);
        CHECK(opt.steps() == 500);
    }
    SUBCASE("scale -1 ascends") {
        Mlp net({1, 1}, Activation::identity);
        Adam opt(net, 0.1);
        auto tape = net.zero_tape();
        tape.biases[0](0) = 1.0;
        opt.apply(net, tape, -1.0);
        CHECK(net.layers()[0].bias(0) > 0.0);
    }
}

TEST_CASE("soft update") {
    Mlp target({1, 1}, Activation::identity);
    Mlp source({1, 1}, Activation::identity);
    source.layers()[0].weights(0, 0) = 1.0;
    source.layers()[0].bias(0) = 1.0;
    soft_update(target, source, 0.005);
    CHECK(target.layers()[0].weights(0, 0) == doctest::Approx(0.005).epsilon(1e-15));
    for (int n = 2; n <= 200; ++n) soft_update(target, source, 0.005);
    CHECK(1.0 - target.layers()[0].bias(0) == doctest::Approx(std::pow(0.995, 200)).epsilon(1e-10));
    Mlp copy = target;
    soft_update(copy, source, 0.0);
    CHECK(copy.layers()[0].bias(0) == target.layers()[0].bias(0));
    soft_update(copy, source, 1.0);
    CHECK(copy.layers()[0].bias(0) == 1.0);
    CHECK_THROWS_AS(soft_update(copy, source, 1.5), ConfigError);
    CHECK_THROWS_AS(soft_update(copy, Mlp({2, 1}, Activation::identity), 0.5), ConfigError);
}

TEST_CASE("text checkpoints are exact") {
    std::mt19937_64 rng(5);
    const Mlp net = Mlp::uniform_init({3, 5, 2}, Activation::sigmoid, rng, 0.02);
    std::stringstream buf;
    net.save(buf);
    const Mlp back = Mlp::load(buf);
    CHECK(back.same_architecture(net));
    CHECK(back.leaky_slope() == 0.02);
    for (std::size_t l = 0; l < net.layers().size(); ++l) CHECK(back.layers()[l].weights == net.layers()[l].weights);

    Adam opt(net);
    Mlp moving = net;
    opt.apply(moving, moving.backward(Vector(Vector::Ones(3)), Vector(Vector::Ones(2))));
    std::stringstream obuf;
    opt.save(obuf);
    Adam restored = Adam::load(obuf);
    Mlp a = moving, b = moving;
    const auto tape = moving.backward(Vector(Vector::Ones(3)), Vector(Vector::Ones(2)));
    opt.apply(a, tape);
    restored.apply(b, tape);
    CHECK(a.layers()[0].weights == b.layers()[0].weights);

    std::istringstream bad("mlp 2\n");
    CHECK_THROWS_AS(Mlp::load(bad), ConfigError);
    CHECK(activation_from_string(to_string(Activation::leaky_relu)) == Activation::leaky_relu);
    CHECK_THROWS_AS(activation_from_string("tanh"), ConfigError);
}

}
