#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "plansel/kernels.hpp"

using plansel::kern::Kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

// reference triple loop, independent of the kernel implementations
std::vector<double> naive_gemm(const std::vector<double>& a, const std::vector<double>& b,
                               std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    return c;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 1e-300;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(a[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("scalar gemm matches the naive triple loop exactly") {
    std::mt19937_64 rng(1);
    const Kernels& k = plansel::kern::scalar_table();
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 1 + trial, kk = 3 + trial % 5, n = 2 + trial % 7;
        const auto a = random_vec(rng, m * kk);
        const auto b = random_vec(rng, kk * n);
        std::vector<double> c(m * n, -1.0);
        k.gemm_nn(a.data(), b.data(), c.data(), m, kk, n, false);
        const auto ref = naive_gemm(a, b, m, kk, n);
        CHECK(rel_diff(c, ref) < 1e-14);
    }
}

TEST_CASE("gemm_nt and gemm_tn agree with explicit transposition") {
    std::mt19937_64 rng(2);
    const Kernels& k = plansel::kern::scalar_table();
    const std::size_t m = 5, kk = 7, n = 4;
    const auto a = random_vec(rng, m * kk);
    const auto bt = random_vec(rng, n * kk);  // B stored as n x k
    std::vector<double> b(kk * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < kk; ++p) b[p * n + i] = bt[i * kk + p];
    std::vector<double> c1(m * n, 0.0);
    k.gemm_nt(a.data(), bt.data(), c1.data(), m, kk, n, false);
    CHECK(rel_diff(c1, naive_gemm(a, b, m, kk, n)) < 1e-14);

    const auto at = random_vec(rng, kk * m);  // A stored as k x m
    std::vector<double> a2(m * kk);
    for (std::size_t p = 0; p < kk; ++p)
        for (std::size_t i = 0; i < m; ++i) a2[i * kk + p] = at[p * m + i];
    const auto b2 = random_vec(rng, kk * n);
    std::vector<double> c2(m * n, 0.0);
    k.gemm_tn(at.data(), b2.data(), c2.data(), m, kk, n, false);
    CHECK(rel_diff(c2, naive_gemm(a2, b2, m, kk, n)) < 1e-14);
}

TEST_CASE("accumulate flag adds instead of overwriting") {
    const Kernels& k = plansel::kern::scalar_table();
    const std::vector<double> a = {1.0, 2.0}, b = {3.0, 4.0};
    std::vector<double> c = {10.0};
    k.gemm_nn(a.data(), b.data(), c.data(), 1, 2, 1, true);
    CHECK(c[0] == doctest::Approx(10.0 + 11.0));
}

TEST_CASE("adam first step moves by -lr/(1+eps) for unit gradient") {
    const Kernels& k = plansel::kern::scalar_table();
    double p = 0.5, g = 1.0, m = 0.0, v = 0.0;
    const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    k.adam_update(&p, &g, &m, &v, 1, lr, b1, b2, eps, 1.0 - b1, 1.0 - b2);
    CHECK(p == doctest::Approx(0.5 - lr / (1.0 + eps)).epsilon(1e-12));
}

TEST_CASE("scalar and active tables agree") {
    const Kernels& s = plansel::kern::scalar_table();
    const Kernels& a = plansel::kern::active();
    INFO("active kernel table: ", a.name);
    std::mt19937_64 rng(3);

    for (std::size_t n : {std::size_t(1), std::size_t(4), std::size_t(7), std::size_t(64),
                          std::size_t(1023)}) {
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);
        std::vector<double> r1(n), r2(n);

        // elementwise kernels must agree bitwise
        s.vadd(x.data(), y.data(), r1.data(), n);
        a.vadd(x.data(), y.data(), r2.data(), n);
        CHECK(r1 == r2);
        s.vmul(x.data(), y.data(), r1.data(), n);
        a.vmul(x.data(), y.data(), r2.data(), n);
        CHECK(r1 == r2);
        s.vscale(1.7, x.data(), r1.data(), n);
        a.vscale(1.7, x.data(), r2.data(), n);
        CHECK(r1 == r2);
        s.relu(x.data(), r1.data(), n);
        a.relu(x.data(), r2.data(), n);
        CHECK(r1 == r2);
        s.leaky_relu(0.2, x.data(), r1.data(), n);
        a.leaky_relu(0.2, x.data(), r2.data(), n);
        CHECK(r1 == r2);

        // reductions may reassociate; allow fp noise
        CHECK(s.vdot(x.data(), y.data(), n) ==
              doctest::Approx(a.vdot(x.data(), y.data(), n)).epsilon(1e-12));
        CHECK(s.vsum(x.data(), n) == doctest::Approx(a.vsum(x.data(), n)).epsilon(1e-12));
        CHECK(s.vmax(x.data(), n) == a.vmax(x.data(), n));
    }

    // axpy / mul_acc with accumulation
    {
        const std::size_t n = 129;
        const auto x = random_vec(rng, n);
        auto acc1 = random_vec(rng, n);
        auto acc2 = acc1;
        s.vaxpy(0.3, x.data(), acc1.data(), n);
        a.vaxpy(0.3, x.data(), acc2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(acc1[i] == doctest::Approx(acc2[i]).epsilon(1e-14));
    }

    // gemm within reassociation tolerance
    {
        const std::size_t m = 9, kk = 33, n = 13;
        const auto x = random_vec(rng, m * kk);
        const auto y = random_vec(rng, kk * n);
        std::vector<double> c1(m * n), c2(m * n);
        s.gemm_nn(x.data(), y.data(), c1.data(), m, kk, n, false);
        a.gemm_nn(x.data(), y.data(), c2.data(), m, kk, n, false);
        CHECK(rel_diff(c1, c2) < 1e-12);
        const auto yt = random_vec(rng, n * kk);
        s.gemm_nt(x.data(), yt.data(), c1.data(), m, kk, n, false);
        a.gemm_nt(x.data(), yt.data(), c2.data(), m, kk, n, false);
        CHECK(rel_diff(c1, c2) < 1e-12);
        const auto xt = random_vec(rng, kk * m);
        s.gemm_tn(xt.data(), y.data(), c1.data(), m, kk, n, false);
        a.gemm_tn(xt.data(), y.data(), c2.data(), m, kk, n, false);
        CHECK(rel_diff(c1, c2) < 1e-12);
    }

    // adam is elementwise sqrt/div; must agree bitwise
    {
        const std::size_t n = 37;
        auto p1 = random_vec(rng, n);
        auto p2 = p1;
        const auto g = random_vec(rng, n);
        std::vector<double> m1(n, 0.0), v1(n, 0.0), m2(n, 0.0), v2(n, 0.0);
        s.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.1,
                      0.001);
        a.adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.1,
                      0.001);
        CHECK(p1 == p2);
        CHECK(m1 == m2);
        CHECK(v1 == v2);
    }
}

TEST_CASE("avx2 table is exercised when the host supports it") {
    if (const Kernels* t = plansel::kern::avx2_table()) {
        CHECK(std::string(t->name) == "avx2");
        CHECK(std::string(plansel::kern::active().name) == "avx2");
    } else {
        MESSAGE("AVX2 not available on this host; scalar path only");
    }
}

TEST_CASE("vmax handles the empty span") {
    CHECK(std::isinf(plansel::kern::scalar_table().vmax(nullptr, 0)));
}
