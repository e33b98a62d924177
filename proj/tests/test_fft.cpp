#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "acmca/fft.hpp"
#include "testutil.hpp"

using namespace acmca;

namespace {

std::vector<cdouble> random_complex(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0, 1);
    std::vector<cdouble> v(n);
    for (auto& c : v) c = {nd(rng), nd(rng)};
    return v;
}

}  // namespace

TEST(Dft, ConstantSignalIsDcOnly) {
    auto out = dft1d({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
    EXPECT_NEAR(out[0].real(), 4.0, 1e-12);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(out[k]), 0.0, 1e-12);
}

TEST(Dft, ImpulseGivesFlatSpectrum) {
    auto out = dft1d({{1, 0}, {0, 0}, {0, 0}, {0, 0}});
    for (const auto& c : out) {
        EXPECT_NEAR(c.real(), 1.0, 1e-12);
        EXPECT_NEAR(c.imag(), 0.0, 1e-12);
    }
}

TEST(Dft, FftLength8MatchesNaiveOracle) {
    std::mt19937_64 rng(1);
    std::vector<cdouble> x(8);
    std::normal_distribution<double> nd(0, 1);
    for (auto& c : x) c = {nd(rng), 0.0};
    const auto fast = dft1d(x);
    const auto oracle = testutil::dft_oracle(x);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(std::abs(fast[k] - oracle[k]), 0.0, 1e-9);
}

TEST(Dft, FastPathEqualsNaiveOnAllPowerOfTwoLengthsUpTo64) {
    std::mt19937_64 rng(2);
    for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 32u, 64u}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto x = random_complex(n, rng);
            ASSERT_TRUE(is_power_of_two(n));
            const auto fast = dft1d(x);
            const auto naive = dft_naive(x);
            for (std::size_t k = 0; k < n; ++k)
                ASSERT_NEAR(std::abs(fast[k] - naive[k]), 0.0, 1e-9)
                    << "n=" << n << " k=" << k;
        }
    }
}

TEST(Dft, ParsevalHolds) {
    std::mt19937_64 rng(3);
    for (std::size_t n : {5u, 8u, 10u, 13u, 16u, 64u}) {
        const auto x = random_complex(n, rng);
        const auto X = dft1d(x);
        double time_energy = 0, freq_energy = 0;
        for (const auto& c : x) time_energy += std::norm(c);
        for (const auto& c : X) freq_energy += std::norm(c);
        freq_energy /= static_cast<double>(n);
        EXPECT_NEAR(time_energy, freq_energy, 1e-9 * std::max(1.0, time_energy)) << "n=" << n;
    }
}

TEST(Dft, InverseRecoversInput) {
    std::mt19937_64 rng(4);
    for (std::size_t n : {3u, 8u, 10u, 32u}) {
        const auto x = random_complex(n, rng);
        const auto back = idft1d(dft1d(x));
        for (std::size_t i = 0; i < n; ++i)
            ASSERT_NEAR(std::abs(back[i] - x[i]), 0.0, 1e-9) << "n=" << n;
    }
}

TEST(Dft, EmptySequenceIsUsageError) {
    EXPECT_THROW(dft1d({}), UsageError);
    EXPECT_THROW(idft1d({}), UsageError);
}

TEST(FourierMix, MatchesNaive2dOracleOn1x4x4) {
    std::mt19937_64 rng(5);
    Tensor x = rand_normal(Shape{1, 4, 4}, 0, 1, rng);
    Graph g;
    Tensor y = fourier_mix(g, x);
    const auto oracle = testutil::dft2_real_oracle(x.values(), 4, 4);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.values()[i], oracle[i], 1e-9);
}

TEST(FourierMix, MatchesOracleOnNonPowerOfTwoTokens) {
    std::mt19937_64 rng(6);
    Tensor x = rand_normal(Shape{2, 10, 5}, 0, 1, rng);
    Graph g;
    Tensor y = fourier_mix(g, x);
    for (std::size_t b = 0; b < 2; ++b) {
        std::vector<double> sample(x.values().begin() + static_cast<std::ptrdiff_t>(b * 50),
                                   x.values().begin() + static_cast<std::ptrdiff_t>((b + 1) * 50));
        const auto oracle = testutil::dft2_real_oracle(sample, 10, 5);
        for (std::size_t i = 0; i < 50; ++i)
            ASSERT_NEAR(y.values()[b * 50 + i], oracle[i], 1e-9);
    }
}

TEST(FourierMix, ConstantTokensStayFiniteAndShaped) {
    Graph g;
    Tensor x = Tensor::full(Shape{2, 6, 4}, 3.25);
    Tensor y = fourier_mix(g, x);
    ASSERT_EQ(y.shape(), x.shape());
    for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
    // constant input concentrates on the DC bin
    EXPECT_NEAR(y.at({0, 0, 0}), 3.25 * 6 * 4, 1e-9);
    EXPECT_NEAR(y.at({0, 1, 1}), 0.0, 1e-9);
}

TEST(FourierMix, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rand_normal(Shape{1, 3, 4}, 0, 1, rng, true);
        Tensor w = rand_normal(Shape{4, 1}, 0, 1, rng);
        auto r = testutil::check_gradients(
            {x}, [&](Graph& g) { return sum(g, matmul(g, fourier_mix(g, x), w)); }, 1e-4);
        ASSERT_TRUE(r.ok) << r.detail;
    }
}

TEST(FourierMix, WrongRankIsShapeError) {
    Graph g;
    Tensor x(Shape{4, 4}, std::vector<double>(16, 0.0));
    EXPECT_THROW(fourier_mix(g, x), ShapeError);
}
