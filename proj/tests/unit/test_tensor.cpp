#include "doctest.h"
#include "gradient_suite.hpp"
#include "oracles.hpp"

#include "dmfour/autodiff.hpp"
#include "dmfour/conv.hpp"
#include "dmfour/fourier.hpp"
#include "dmfour/stage1.hpp"
#include "dmfour/training.hpp"

#include <cmath>

using namespace dmfour;
using oracle::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("shape product equals data length")
{
    Tensor t({2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(shape_numel(t.shape()) == t.size());
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(t.reshaped({7}), ShapeError);
}

TEST_CASE("conv2d with a 1x1 identity kernel leaves the input unchanged")
{
    Tensor x = random_tensor({1, 1, 3, 3}, 1);
    Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}), 1, 0);
    CHECK(y == x);
}

TEST_CASE("conv2d of ones with a 3x3 ones kernel and padding 1")
{
    Tensor y = conv2d(Tensor::ones({1, 1, 3, 3}), Tensor::ones({1, 1, 3, 3}), Tensor({1}), 1, 1);
    REQUIRE(y.shape() == Shape{1, 1, 3, 3});
    CHECK(y.at(0, 0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 0, 2) == 4.0);
    CHECK(y.at(0, 0, 2, 0) == 4.0);
    CHECK(y.at(0, 0, 2, 2) == 4.0);
    CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d mixes channels with bias")
{
    Tensor y = conv2d(Tensor({1, 2, 1, 1}, {2, 3}), Tensor({1, 2, 1, 1}, {10, 100}), Tensor({1}, {1.0}), 1, 0);
    CHECK(y.item() == 321.0);
}

TEST_CASE("conv2d stride 2 matches a hand loop")
{
    Tensor x = random_tensor({2, 3, 7, 6}, 3);
    Tensor k = random_tensor({4, 3, 3, 3}, 4);
    Tensor b = random_tensor({4}, 5);
    Tensor y = conv2d(x, k, b, 2, 1);
    REQUIRE(y.shape() == Shape{2, 4, 4, 3});
    double worst = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 4; ++o)
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    double acc = b[o];
                    for (std::size_t c = 0; c < 3; ++c)
                        for (std::size_t u = 0; u < 3; ++u)
                            for (std::size_t v = 0; v < 3; ++v) {
                                const long r = static_cast<long>(2 * i + u) - 1;
                                const long q = static_cast<long>(2 * j + v) - 1;
                                if (r < 0 || q < 0 || r >= 7 || q >= 6) continue;
                                acc += x.at(n, c, r, q) * k.at(o, c, u, v);
                            }
                    worst = std::max(worst, std::abs(acc - y.at(n, o, i, j)));
                }
    CHECK(worst < 1e-12);
}

TEST_CASE("conv2d rejects mismatched channels")
{
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({1, 3, 4, 4}), Tensor({2, 3, 3, 3}), Tensor({1}), 1, 1), ShapeError);
}

TEST_CASE("activations")
{
    CHECK(leaky_relu(Tensor({1}, {-1.0}), 0.2)[0] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(leaky_relu(Tensor({1}, {3.0}), 0.2)[0] == 3.0);
    CHECK(sigmoid(0.0) == 0.5);
    Tensor s = softmax_rows(Tensor({1, 3}, {0, 0, 0}));
    for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    Tensor big = softmax_rows(Tensor({1, 2}, {1000.0, 0.0}));
    CHECK(big.all_finite());
    CHECK(big[0] == doctest::Approx(1.0));
}

TEST_CASE("backward of sum is all ones")
{
    Tape tape;
    Var x = tape.variable(random_tensor({2, 3, 4}, 8));
    Tensor g = tape.backward(sum(x)).of(x);
    for (double v : g.data()) CHECK(v == 1.0);
}

TEST_CASE("backward of sum of sigmoid at zero is one quarter")
{
    Tape tape;
    Var x = tape.variable(Tensor({3, 3}));
    Tensor g = tape.backward(sum(sigmoid(x))).of(x);
    for (double v : g.data()) CHECK(v == 0.25);
}

TEST_CASE("every leaf receives an adjoint of its own shape")
{
    Tape tape;
    Var a = tape.variable(random_tensor({1, 2, 4, 4}, 1));
    Var b = tape.variable(random_tensor({1, 2, 4, 4}, 2));
    Var unused = tape.variable(random_tensor({5}, 3));
    Var c = tape.constant(random_tensor({1, 2, 4, 4}, 4));
    Adjoints adj = tape.backward(oracle::probe(mul(add(a, c), b)));
    CHECK(adj.of(a).shape() == a.shape());
    CHECK(adj.of(b).shape() == b.shape());
    CHECK(max_abs(adj.of(unused)) == 0.0);
    CHECK(adj.of(unused).shape() == unused.shape());
}

TEST_CASE("backward rejects non-scalar losses")
{
    Tape tape;
    Var x = tape.variable(Tensor({2}));
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("values stay finite for finite inputs")
{
    Tape tape;
    Var x = tape.variable(random_tensor({1, 2, 8, 8}, 11, -50.0, 50.0));
    Var y = sigmoid(leaky_relu(x, 0.2));
    Var z = softmax_rows(reshape(x, {2, 64}));
    CHECK(y.value().all_finite());
    CHECK(z.value().all_finite());
    Adjoints adj = tape.backward(add(sum(y), sum(z)));
    CHECK(adj.of(x).all_finite());
}

TEST_CASE("parameters bound twice share a handle")
{
    Tensor p = random_tensor({3}, 1);
    Tape tape;
    Var a = tape.parameter(p);
    Var b = tape.parameter(p);
    CHECK(a.id() == b.id());
    Tensor g = tape.backward(sum(add(a, b))).of_parameter(p);
    for (double v : g.data()) CHECK(v == 2.0);
}

} // TEST_SUITE

TEST_SUITE("gradients") {

TEST_CASE("every primitive matches central finite differences")
{
    for (const oracle::NamedCheck& c : oracle::primitive_gradient_checks()) {
        CAPTURE(c.name);
        CHECK(c.result.checked > 0);
        CHECK(c.result.rel_error < 1e-4);
    }
}

TEST_CASE("end-to-end training loss matches central finite differences")
{
    for (const oracle::NamedCheck& c : oracle::end_to_end_gradient_checks()) {
        CAPTURE(c.name);
        CHECK(c.result.rel_error < 1e-4);
    }
}

} // TEST_SUITE
