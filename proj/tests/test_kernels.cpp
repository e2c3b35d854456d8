#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rhdi/kernels.hpp"

using namespace rhdi::kernels;

namespace {

struct IsaGuard {
  Isa saved = active_isa();
  ~IsaGuard() { force_isa(saved); }
};

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = unif(gen);
  return v;
}

}  // namespace

TEST_CASE("isa dispatch reports a supported implementation") {
  CHECK(isa_supported(Isa::Scalar));
  CHECK(isa_supported(active_isa()));
  CHECK(isa_name(Isa::Scalar) == "scalar");
  CHECK(isa_name(Isa::Avx2) == "avx2");
  CHECK(isa_name(Isa::Neon) == "neon");
#if defined(__x86_64__) || defined(_M_X64)
  CHECK_FALSE(isa_supported(Isa::Neon));
  CHECK_FALSE(force_isa(Isa::Neon));
#endif
#if defined(__aarch64__)
  CHECK_FALSE(isa_supported(Isa::Avx2));
  CHECK_FALSE(force_isa(Isa::Avx2));
#endif
}

TEST_CASE("force_isa switches and restores") {
  IsaGuard guard;
  CHECK(force_isa(Isa::Scalar));
  CHECK(active_isa() == Isa::Scalar);
  if (isa_supported(Isa::Avx2)) {
    CHECK(force_isa(Isa::Avx2));
    CHECK(active_isa() == Isa::Avx2);
  }
}

TEST_CASE("scalar kernel semantics") {
  IsaGuard guard;
  force_isa(Isa::Scalar);

  double out[3];
  const double clamp_in[3] = {2.0, -3.0, 0.5};
  clamp_abs(clamp_in, out, 3, 1.0);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == -1.0);
  CHECK(out[2] == 0.5);

  const double soft_in[3] = {3.0, -0.5, 1.0};
  soft_threshold(soft_in, out, 3, 1.0);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  // tau=0.3, w=1: kink interval is [-0.7, 0.3].
  const double prox_in[4] = {1.0, 0.2, -0.5, -2.0};
  prox_check(prox_in, out, 3, 0.3, 1.0);
  CHECK(out[0] == doctest::Approx(0.7));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);
  prox_check(prox_in + 3, out, 1, 0.3, 1.0);
  CHECK(out[0] == doctest::Approx(-1.3));

  const double loss_in[3] = {2.0, -1.0, 0.0};
  CHECK(check_loss_sum(loss_in, 3, 0.5) == doctest::Approx(1.5));
  CHECK(check_loss_sum(loss_in, 3, 0.9) == doctest::Approx(1.9));
}

TEST_CASE("simd variants agree with the scalar reference") {
  IsaGuard guard;
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (!isa_supported(isa)) continue;
    INFO("isa = ", isa_name(isa));
    REQUIRE(force_isa(isa));
    // Lengths straddling the vector width exercise remainder lanes.
    for (std::size_t n = 1; n <= 17; ++n) {
      const auto x = random_vec(n, static_cast<unsigned>(1000 + n));
      std::vector<double> got(n), want(n);

      clamp_abs(x.data(), got.data(), n, 2.5);
      scalar::clamp_abs(x.data(), want.data(), n, 2.5);
      CHECK(got == want);  // elementwise kernels are bit-exact

      soft_threshold(x.data(), got.data(), n, 1.25);
      scalar::soft_threshold(x.data(), want.data(), n, 1.25);
      CHECK(got == want);

      for (double tau : {0.1, 0.5, 0.9}) {
        prox_check(x.data(), got.data(), n, tau, 0.7);
        scalar::prox_check(x.data(), want.data(), n, tau, 0.7);
        CHECK(got == want);

        const double s = check_loss_sum(x.data(), n, tau);
        const double sref = scalar::check_loss_sum(x.data(), n, tau);
        CHECK(s == doctest::Approx(sref).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("kernels handle edge inputs") {
  IsaGuard guard;
  std::vector<Isa> isas = {Isa::Scalar};
  if (isa_supported(Isa::Avx2)) isas.push_back(Isa::Avx2);
  if (isa_supported(Isa::Neon)) isas.push_back(Isa::Neon);
  for (Isa isa : isas) {
    REQUIRE(force_isa(isa));
    INFO("isa = ", isa_name(isa));

    // n = 0 is a no-op.
    CHECK(check_loss_sum(nullptr, 0, 0.5) == 0.0);
    double sentinel = 42.0;
    clamp_abs(nullptr, &sentinel, 0, 1.0);
    CHECK(sentinel == 42.0);

    // Signed zeros and exact kink points.
    const double x[4] = {0.0, -0.0, 1.0, -1.0};
    double y[4];
    soft_threshold(x, y, 4, 1.0);
    for (double v : y) CHECK(v == 0.0);
    prox_check(x, y, 4, 0.5, 2.0);
    for (double v : y) CHECK(v == 0.0);
  }
}
