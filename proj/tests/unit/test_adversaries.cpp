#include "doctest.h"

#include <cmath>

#include "dscodec/adv/discriminators.hpp"
#include "gradcheck.hpp"

using namespace dscodec;
using ad::Var;

namespace {

adv::DiscriminatorConfig small_config() {
    adv::DiscriminatorConfig c;
    c.mpd.channels = {4, 8};
    c.msstft.channels = 4;
    return c;
}

adv::DiscriminatorOutput constant_logits(std::size_t subs, double v) {
    adv::DiscriminatorOutput o;
    for (std::size_t i = 0; i < subs; ++i) o.logits.push_back(ad::Var::full({2, 3}, v));
    return o;
}

}  // namespace

TEST_CASE("mpd folds by period with reflect padding") {
    adv::Discriminators d(small_config());
    d.init(1);
    util::Rng rng(2);
    auto x = testutil::random_var({1, 16000}, rng, 0.3, false);
    auto out = d.mpd_forward(x);
    REQUIRE(out.logits.size() == 5);
    // period 2: 2 columns of 8000 rows; first conv (k5, s3, pad 2) -> 2667 steps
    CHECK(out.features[0][0].shape() == ad::Shape{2, 4, 2667});
    auto x1 = testutil::random_var({1, 16001}, rng, 0.3, false);
    auto o1 = d.mpd_forward(x1);
    CHECK(o1.features[0][0].shape() == ad::Shape{2, 4, (8001 + 4 - 5) / 3 + 1});
    auto again = d.mpd_forward(x);
    for (std::size_t i = 0; i < out.logits.size(); ++i) CHECK(out.logits[i].values() == again.logits[i].values());
}

TEST_CASE("ms-stft discriminator arity, zero input and scale sensitivity") {
    adv::Discriminators d(small_config());
    d.init(3);
    auto z = d.msstft_forward(Var::zeros({1, 4000}));
    REQUIRE(z.logits.size() == 5);
    // Zero spectrogram: first layer output is its bias everywhere.
    const auto& b0 = d.msstft[0].layers[0].b.values();
    const auto& f0 = z.features[0][0];
    const auto inner = f0.dim(2) * f0.dim(3);
    for (int c = 0; c < 4; ++c) {
        const double expect = b0[c] > 0 ? b0[c] : 0.2 * b0[c];
        CHECK(f0.values()[c * inner] == doctest::Approx(expect).epsilon(1e-15));
        CHECK(f0.values()[c * inner + inner - 1] == doctest::Approx(expect).epsilon(1e-15));
    }
    util::Rng rng(4);
    auto x = testutil::random_var({1, 4000}, rng, 0.3, false);
    auto a = d.msstft_forward(x), b = d.msstft_forward(ad::scale(x, 2.0));
    CHECK(a.logits[2].values() != b.logits[2].values());
}

TEST_CASE("least-squares adversarial losses") {
    auto real1 = constant_logits(3, 1.0), fake0 = constant_logits(3, 0.0), fake1 = constant_logits(3, 1.0);
    auto zeros = constant_logits(3, 0.0);
    CHECK(adv::adversarial_losses(real1, fake0).d_loss.item() == 0.0);
    CHECK(adv::adversarial_losses(real1, fake1).g_loss.item() == 0.0);
    auto l = adv::adversarial_losses(zeros, zeros);
    CHECK(l.d_loss.item() == 3.0);
    CHECK(l.g_loss.item() == 3.0);
    CHECK_THROWS_AS(adv::discriminator_loss(real1, constant_logits(2, 0.0)), std::invalid_argument);
}

TEST_CASE("feature matching loss properties") {
    adv::Discriminators d(small_config());
    d.init(5);
    util::Rng rng(6);
    auto x = testutil::random_var({2, 2000}, rng, 0.3, false);
    auto y = testutil::random_var({2, 2000}, rng, 0.3, false);
    auto ox = d.forward(x), oy = d.forward(y);
    CHECK(adv::feature_matching_loss(ox, ox).item() == 0.0);
    const double a = adv::feature_matching_loss(ox, oy).item();
    CHECK(a > 0.0);
    CHECK(adv::feature_matching_loss(oy, ox).item() == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("feature matching sends no gradient through real features") {
    adv::Discriminators d(small_config());
    d.init(7);
    util::Rng rng(8);
    auto real = testutil::random_var({1, 1200}, rng, 0.3, true);
    auto fake = testutil::random_var({1, 1200}, rng, 0.3, true);
    auto fm = adv::feature_matching_loss(d.forward(real), d.forward(fake));
    fm.backward();
    CHECK_FALSE(real.has_grad());
    double g = 0;
    for (double v : fake.grad()) {
        CHECK(std::isfinite(v));
        g += std::abs(v);
    }
    CHECK(g > 0);
}

TEST_CASE("reinitialization changes every discriminator tensor") {
    adv::Discriminators d(small_config());
    d.init(9);
    std::vector<std::vector<double>> before;
    for (const auto& p : d.params()) before.push_back(p.var.values());
    d.init(10);
    auto after = d.params();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK_MESSAGE(after[i].var.values() != before[i], after[i].name);
}

TEST_CASE("discriminator gradients match finite differences") {
    adv::DiscriminatorConfig c;
    c.mpd.periods = {3};
    c.mpd.channels = {2};
    c.msstft.fft_sizes = {16};
    c.msstft.channels = 2;
    c.msstft.dilations = {1};
    adv::Discriminators d(c);
    d.init(11);
    util::Rng rng(12);
    auto x = testutil::random_var({1, 40}, rng, 0.5);
    std::vector<Var> inputs{x};
    for (const auto& p : d.params()) inputs.push_back(p.var);
    CHECK(testutil::max_grad_error([&] { return adv::generator_adversarial_loss(d.forward(x)); }, inputs) < 1e-4);
}

TEST_CASE("discriminator config validation") {
    adv::DiscriminatorConfig c;
    c.mpd.periods = {2, 2};
    CHECK_THROWS_AS(c.mpd.validate(), std::invalid_argument);
    c.mpd.periods = {1};
    CHECK_THROWS_AS(c.mpd.validate(), std::invalid_argument);
    c.msstft.fft_sizes = {256, 256};
    CHECK_THROWS_AS(c.msstft.validate(), std::invalid_argument);
    auto j = adv::DiscriminatorConfig{}.to_json();
    CHECK(adv::DiscriminatorConfig::from_json(j).to_json() == j);
    j["mpd"]["x"] = 1;
    CHECK_THROWS_AS(adv::DiscriminatorConfig::from_json(j), std::invalid_argument);
}
