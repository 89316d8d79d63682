#include "doctest.h"
#include "oracles.hpp"

#include "dmfour/color.hpp"

using namespace dmfour;

TEST_SUITE("color") {

TEST_CASE("BT.601 reference colours")
{
    const Tensor rgb({1, 3, 1, 3}, {0, 1, 1, 0, 1, 0, 0, 1, 0});
    const YcbcrImage ycc = rgb_to_ycbcr(rgb);
    CHECK(ycc.y[0] == 0.0);
    CHECK(ycc.y[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ycc.cb[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ycc.cr[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ycc.y[2] == doctest::Approx(0.299).epsilon(1e-15));
}

TEST_CASE("colour round trip on in-gamut random images")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor rgb = oracle::random_tensor({2, 3, 5, 7}, seed, 0.0, 1.0);
        CHECK(oracle::max_abs_diff(ycbcr_to_rgb(rgb_to_ycbcr(rgb)), rgb) < 1e-6);
    }
}

TEST_CASE("out-of-range values are clamped and counted")
{
    std::size_t clamped = 0;
    const YcbcrImage ycc = rgb_to_ycbcr(Tensor({1, 3, 1, 1}, {1.5, -0.2, 0.5}), &clamped);
    CHECK(clamped == 2);
    CHECK(ycc.y[0] == doctest::Approx(0.299 + 0.114 * 0.5));
}

TEST_CASE("wrong channel count is rejected")
{
    CHECK_THROWS_AS(rgb_to_ycbcr(Tensor({1, 2, 2, 2})), ShapeError);
    CHECK_THROWS_AS(luminance(Tensor({1, 1, 2, 2})), ShapeError);
}

TEST_CASE("luminance attention target examples")
{
    const Tensor y({1, 1, 1, 3}, {0.3, 0.2, 0.5});
    const Tensor same = luminance_attention_target(y, y);
    for (double v : same.data()) CHECK(v == 0.0);

    CHECK(luminance_attention_target(Tensor({1}, {0.2}), Tensor({1}, {0.8}))[0] ==
          doctest::Approx(0.75).epsilon(1e-15));
    CHECK(luminance_attention_target(Tensor({1}, {0.5}), Tensor({1}, {0.0}), {1e-3, 10.0})[0] == 10.0);
}

TEST_CASE("attention target is non-negative and grows with the luminance gap")
{
    const Tensor gt({1}, {0.6});
    double prev = -1.0;
    for (double low = 0.6; low >= 0.0; low -= 0.05) {
        const double v = luminance_attention_target(Tensor({1}, {low}), gt)[0];
        CHECK(v >= 0.0);
        CHECK(v > prev);
        prev = v;
    }
}

} // TEST_SUITE
