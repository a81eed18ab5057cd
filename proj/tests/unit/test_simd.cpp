#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fg/nn/rng.hpp"
#include "fg/simd/kernels.hpp"

using namespace fg;

namespace {

std::vector<float> rand_vec(nn::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::vector<const simd::KernelTable*> vector_tables() {
    std::vector<const simd::KernelTable*> out;
    if (auto* t = simd::avx2_kernels()) out.push_back(t);
    if (auto* t = simd::neon_kernels()) out.push_back(t);
    return out;
}

// Lengths straddling every vector-width remainder.
const std::size_t kLengths[] = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 33, 64, 255, 256, 1024, 1031};

}  // namespace

TEST_CASE("an active kernel table is always available") {
    const auto& t = simd::active();
    CHECK(t.dot != nullptr);
    CHECK_FALSE(simd::isa_name(t.isa).empty());
    CHECK(simd::force_isa(simd::Isa::scalar));
    CHECK(simd::active().isa == simd::Isa::scalar);
    CHECK(simd::force_isa(t.isa));
}

TEST_CASE("elementwise kernels are bit-identical to the scalar reference") {
    const auto& ref = simd::scalar_kernels();
    nn::Rng rng(11);
    for (const auto* vt : vector_tables()) {
        CAPTURE(simd::isa_name(vt->isa));
        for (std::size_t n : kLengths) {
            CAPTURE(n);
            auto a = rand_vec(rng, n), b = rand_vec(rng, n);
            for (std::size_t i = 0; i < n; i += 5) a[i] = 0.0f;  // relu boundary

            auto y1 = b, y2 = b;
            ref.axpy(0.37f, a.data(), y1.data(), n);
            vt->axpy(0.37f, a.data(), y2.data(), n);
            CHECK(bits_equal(y1, y2));

            std::vector<float> m1(n), m2(n);
            ref.multiply(a.data(), b.data(), m1.data(), n);
            vt->multiply(a.data(), b.data(), m2.data(), n);
            CHECK(bits_equal(m1, m2));

            ref.relu_forward(a.data(), m1.data(), n);
            vt->relu_forward(a.data(), m2.data(), n);
            CHECK(bits_equal(m1, m2));

            ref.relu_backward(a.data(), b.data(), m1.data(), n);
            vt->relu_backward(a.data(), b.data(), m2.data(), n);
            CHECK(bits_equal(m1, m2));

            auto origin = rand_vec(rng, n, 0.0, 1.0), current = origin, grad = rand_vec(rng, n);
            for (std::size_t i = 0; i < n; i += 4) grad[i] = 0.0f;
            for (std::size_t i = 0; i < n; i += 7) origin[i] = current[i] = 1.0f;
            ref.signed_step(origin.data(), current.data(), grad.data(), 0.003f, 0.01f, m1.data(), n);
            vt->signed_step(origin.data(), current.data(), grad.data(), 0.003f, 0.01f, m2.data(), n);
            CHECK(bits_equal(m1, m2));

            simd::AdamCoeffs c{1e-3f, 0.9f, 0.999f, 1e-8f, 1.0f / 0.1f, 1.0f / 0.001f};
            auto p1 = rand_vec(rng, n), g = rand_vec(rng, n), mm1 = rand_vec(rng, n, 0, 0.1),
                 v1 = rand_vec(rng, n, 0, 0.1);
            auto p2 = p1, mm2 = mm1, v2 = v1;
            ref.adam_update(p1.data(), g.data(), mm1.data(), v1.data(), c, n);
            vt->adam_update(p2.data(), g.data(), mm2.data(), v2.data(), c, n);
            CHECK(bits_equal(p1, p2));
            CHECK(bits_equal(mm1, mm2));
            CHECK(bits_equal(v1, v2));
        }
    }
}

TEST_CASE("reductions agree with the scalar reference up to summation order") {
    const auto& ref = simd::scalar_kernels();
    nn::Rng rng(12);
    for (const auto* vt : vector_tables()) {
        for (std::size_t n : kLengths) {
            CAPTURE(n);
            const auto a = rand_vec(rng, n), b = rand_vec(rng, n);
            double mag = 0.0;
            for (std::size_t i = 0; i < n; ++i) mag += std::abs(static_cast<double>(a[i]) * b[i]);
            CHECK(std::abs(ref.dot(a.data(), b.data(), n) - vt->dot(a.data(), b.data(), n)) <= 1e-5 * (mag + 1));
            const double s1 = ref.squared_error(a.data(), b.data(), n);
            const double s2 = vt->squared_error(a.data(), b.data(), n);
            CHECK(std::abs(s1 - s2) <= 1e-9 * (s1 + 1));
        }
    }
}

TEST_CASE("scalar reference kernels follow their definitions") {
    const auto& k = simd::scalar_kernels();
    const float a[] = {1, -2, 3}, b[] = {4, 5, -6};
    CHECK(k.dot(a, b, 3) == doctest::Approx(-24.0));
    float y[] = {1, 1, 1};
    k.axpy(2.0f, a, y, 3);
    CHECK(y[0] == 3.0f);
    CHECK(y[1] == -3.0f);
    CHECK(y[2] == 7.0f);
    float r[3];
    k.relu_forward(a, r, 3);
    CHECK(r[1] == 0.0f);
    CHECK(r[2] == 3.0f);
    CHECK(k.squared_error(a, b, 3) == doctest::Approx(9 + 49 + 81));

    // origin 0.5, step 0.3 clipped to the 0.1 ball; origin 1.0 clipped to [0,1]; zero grad holds.
    const float origin[] = {0.5f, 1.0f, 0.5f}, grad[] = {1.0f, 1.0f, 0.0f};
    float out[3];
    k.signed_step(origin, origin, grad, 0.3f, 0.1f, out, 3);
    CHECK(out[0] == doctest::Approx(0.6f));
    CHECK(out[1] == 1.0f);
    CHECK(out[2] == 0.5f);
}
