#include "doctest.h"

#include <cmath>

#include "dscodec/ad/ops.hpp"
#include "gradcheck.hpp"

using namespace dscodec;
using ad::Var;
using testutil::max_grad_error;
using testutil::project;
using testutil::random_var;

TEST_CASE("elementwise and reduction gradients") {
    util::Rng rng(1);
    auto a = random_var({3, 4}, rng);
    auto b = random_var({3, 4}, rng);
    CHECK(max_grad_error([&] { return project(ad::mul(ad::sub(a, b), ad::add(a, b))); }, {a, b}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::silu(ad::tanh(ad::sigmoid(a)))); }, {a}) < 1e-6);
    CHECK(max_grad_error([&] { return ad::mean_sq_diff(a, b); }, {a, b}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::leaky_relu(a, 0.2)); }, {a}) < 1e-6);
    auto pos = Var::from({4}, {0.5, 2.0, 3.0, 0.1}, true);
    CHECK(max_grad_error([&] { return project(ad::log_clamp(pos, 1e-3)); }, {pos}) < 1e-6);
}

TEST_CASE("shape ops move gradients to the right elements") {
    util::Rng rng(2);
    auto x = random_var({2, 3, 4}, rng);
    auto y = random_var({2, 2, 4}, rng);
    CHECK(max_grad_error([&] { return project(ad::permute(x, {2, 0, 1})); }, {x}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::slice(x, 1, 1, 2)); }, {x}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::concat({x, y}, 1)); }, {x, y}) < 1e-6);
    auto bias = random_var({3}, rng);
    CHECK(max_grad_error([&] { return project(ad::add_bias(x, bias, 1)); }, {x, bias}) < 1e-6);
}

TEST_CASE("permute matches index arithmetic") {
    auto x = Var::from({2, 3}, {0, 1, 2, 3, 4, 5});
    auto y = ad::permute(x, {1, 0});
    CHECK(y.shape() == ad::Shape{3, 2});
    CHECK(y.values() == std::vector<double>{0, 3, 1, 4, 2, 5});
}

TEST_CASE("matmul and linear gradients") {
    util::Rng rng(3);
    auto a = random_var({3, 5}, rng);
    auto b = random_var({5, 2}, rng);
    CHECK(max_grad_error([&] { return project(ad::matmul(a, b)); }, {a, b}) < 1e-6);
    auto ba = random_var({2, 3, 4}, rng);
    auto bb = random_var({2, 4, 3}, rng);
    CHECK(max_grad_error([&] { return project(ad::matmul(ba, bb)); }, {ba, bb}) < 1e-6);
    auto x = random_var({2, 3, 4}, rng);
    auto w = random_var({6, 4}, rng);
    CHECK(max_grad_error([&] { return project(ad::linear(x, w)); }, {x, w}) < 1e-6);
}

TEST_CASE("conv1d matches a direct sum and its gradients") {
    util::Rng rng(4);
    auto x = random_var({2, 3, 11}, rng);
    auto w = random_var({4, 3, 3}, rng);
    auto b = random_var({4}, rng);
    ad::Conv1dOptions opt{2, 2, 2, 1};
    auto y = ad::conv1d(x, w, b, opt);
    // (11 + 3 - 5) / 2 + 1 = 5
    REQUIRE(y.shape() == ad::Shape{2, 4, 5});
    for (int bi = 0; bi < 2; ++bi)
        for (int o = 0; o < 4; ++o)
            for (int t = 0; t < 5; ++t) {
                double acc = b.values()[o];
                for (int c = 0; c < 3; ++c)
                    for (int k = 0; k < 3; ++k) {
                        const int src = t * 2 + k * 2 - 2;
                        if (src >= 0 && src < 11) acc += w.values()[(o * 3 + c) * 3 + k] * x.values()[(bi * 3 + c) * 11 + src];
                    }
                CHECK(y.values()[(bi * 4 + o) * 5 + t] == doctest::Approx(acc).epsilon(1e-12));
            }
    CHECK(max_grad_error([&] { return project(ad::conv1d(x, w, b, opt)); }, {x, w, b}) < 1e-6);
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
    util::Rng rng(5);
    // <conv(x), y> == <x, convT(y)> for matching geometry and no bias.
    auto x = random_var({1, 3, 20}, rng, 1.0, false);
    auto w = random_var({2, 3, 4}, rng, 1.0, false);  // conv weight (Cout=2, Cin=3, K=4)
    auto y = random_var({1, 2, 10}, rng, 1.0, false);
    auto cx = ad::conv1d(x, w, Var(), {2, 1, 1, 1});
    REQUIRE(cx.shape() == ad::Shape{1, 2, 10});
    // The conv weight (Cout=2, Cin=3, K) is already in convT layout (Cin=2, Cout=3, K).
    auto ty = ad::conv_transpose1d(y, w, Var(), 2, 1, 1);
    REQUIRE(ty.shape() == ad::Shape{1, 3, 20});
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx.values().size(); ++i) lhs += cx.values()[i] * y.values()[i];
    for (std::size_t i = 0; i < x.values().size(); ++i) rhs += x.values()[i] * ty.values()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    auto xg = random_var({2, 3, 5}, rng);
    auto wg = random_var({3, 2, 6}, rng);
    auto bg = random_var({2}, rng);
    CHECK(max_grad_error([&] { return project(ad::conv_transpose1d(xg, wg, bg, 3, 2, 1)); }, {xg, wg, bg}) < 1e-6);
}

TEST_CASE("conv2d gradients with stride and dilation") {
    util::Rng rng(6);
    auto x = random_var({2, 2, 7, 9}, rng);
    auto w = random_var({3, 2, 3, 5}, rng);
    auto b = random_var({3}, rng);
    ad::Conv2dOptions opt;
    opt.stride_w = 2;
    opt.dilation_h = 2;
    opt.pad_h = 2;
    opt.pad_w = 2;
    CHECK(max_grad_error([&] { return project(ad::conv2d(x, w, b, opt)); }, {x, w, b}) < 1e-6);
}

TEST_CASE("nn primitives: lstm, rmsnorm, softmax, rope, normalize, gather") {
    util::Rng rng(7);
    auto x = random_var({2, 5, 3}, rng);
    auto wih = random_var({16, 3}, rng, 0.5);
    auto whh = random_var({16, 4}, rng, 0.5);
    auto bias = random_var({16}, rng, 0.5);
    CHECK(max_grad_error([&] { return project(ad::lstm(x, wih, whh, bias)); }, {x, wih, whh, bias}) < 1e-5);

    auto r = random_var({3, 6}, rng);
    auto g = random_var({6}, rng);
    CHECK(max_grad_error([&] { return project(ad::rms_norm(r, g, 1e-6)); }, {r, g}) < 1e-5);
    CHECK(max_grad_error([&] { return project(ad::softmax(r)); }, {r}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::l2_normalize(r)); }, {r}) < 1e-6);
    auto q = random_var({1, 2, 4, 6}, rng);
    CHECK(max_grad_error([&] { return project(ad::rope(q, 10000.0)); }, {q}) < 1e-6);
    auto table = random_var({5, 3}, rng);
    std::vector<std::uint32_t> idx{4, 0, 4, 2};
    CHECK(max_grad_error([&] { return project(ad::gather_rows(table, idx)); }, {table}) < 1e-6);
}

TEST_CASE("stft gradient and reflect padding") {
    util::Rng rng(8);
    auto x = random_var({2, 40}, rng);
    CHECK(max_grad_error([&] { return project(ad::reflect_pad(x, 5, 7)); }, {x}) < 1e-6);
    ad::StftOptions opt{16, 4, 12, true};
    CHECK(max_grad_error([&] { return project(ad::stft(x, opt)); }, {x}) < 1e-6);
    CHECK(max_grad_error([&] { return project(ad::complex_magnitude(ad::stft(x, opt), 1e-12)); }, {x}) < 1e-5);
}

TEST_CASE("no-grad guard suppresses graph construction") {
    auto a = Var::from({2}, {1.0, 2.0}, true);
    {
        ad::NoGradGuard guard;
        CHECK_FALSE(ad::scale(a, 2.0).requires_grad());
    }
    CHECK(ad::scale(a, 2.0).requires_grad());
}
