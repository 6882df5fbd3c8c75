#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aqed/errors.hpp"
#include "aqed/field_kernels.hpp"

using namespace aqed;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson on [a, b] with n (even) intervals.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

Vec3 random_k(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Vec3(g(rng), g(rng), g(rng));
}

ModeField random_field(std::shared_ptr<const ModeGrid> grid, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ModeField alpha(grid);
  for (auto& a : alpha.amplitudes()) a = cplx(g(rng), g(rng));
  return alpha;
}

const double kCoulombC = std::pow(2.0 * kPi, -1.5) * 16.0 * kPi * kPi;

}  // namespace

TEST_CASE("polarization frames") {
  SUBCASE("reference examples") {
    auto p = polarization_basis(Vec3(1, 0, 0));
    CHECK((p.e1 - Vec3(0, 1, 0)).norm() < 1e-15);
    CHECK((p.e2 - Vec3(0, 0, 1)).norm() < 1e-15);
    p = polarization_basis(Vec3(0, 0, 1));
    CHECK((p.e1 - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK((p.e2 - Vec3(0, 1, 0)).norm() < 1e-15);
    p = polarization_basis(Vec3(0, 0, -2.5));
    CHECK(p.e1.cross(p.e2).dot(Vec3(0, 0, -1)) == doctest::Approx(1.0));
  }
  SUBCASE("zero wave-vector") { CHECK_THROWS_AS(polarization_basis(Vec3::Zero()), DomainError); }
  SUBCASE("completeness on seeded random wave-vectors") {
    std::mt19937_64 rng(20240611);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
      const Vec3 k = random_k(rng);
      const auto p = polarization_basis(k);
      const Vec3 kh = k.normalized();
      const Mat3 sum = p.e1 * p.e1.transpose() + p.e2 * p.e2.transpose() + kh * kh.transpose();
      worst = std::max(worst, (sum - Mat3::Identity()).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(p.e1.dot(k)) + std::abs(p.e2.dot(k)));
      worst = std::max(worst, std::abs(p.e1.cross(p.e2).dot(kh) - 1.0));
      CHECK(polarization_basis(k).e1 == p.e1);
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("product grid") {
  const auto grid = ModeGrid::product({6, 4, 8, 2.0});
  CHECK(grid->node_count() == 6u * 4u * 8u);
  double volume = 0.0;
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    CHECK(grid->weight(i) > 0.0);
    CHECK(grid->k_norm(i) > 0.0);
    volume += grid->weight(i);
  }
  CHECK(volume == doctest::Approx(4.0 * kPi / 3.0 * 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(ModeGrid::from_nodes({Vec3::Zero()}, {1.0}), DomainError);
  CHECK_THROWS_AS(ModeGrid::from_nodes({Vec3(1, 0, 0)}, {0.0}), DomainError);
}

TEST_CASE("form factor") {
  const auto grid = ModeGrid::product({20, 6, 8, 1.0});
  const FieldKernels kernels(grid, Cutoff::sharp(1.0, 0.5));
  const auto g0 = form_factor(Vec3::Zero(), kernels);
  for (const auto& v : g0.values) CHECK(v.imag().norm() == 0.0);
  const auto gx = form_factor(Vec3(0.3, -1.2, 2.0), kernels);
  for (std::size_t a = 0; a < gx.values.size(); ++a)
    CHECK(gx.values[a].norm() == doctest::Approx(g0.values[a].norm()).epsilon(1e-14));

  // Discrete h^sigma norm against a radial integral of 4 pi r (1+r^2)^sigma |F|^2.
  for (double sigma : {0.5, 1.0}) {
    double discrete = 0.0;
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
      const double k = grid->k_norm(i);
      for (int l = 0; l < 2; ++l)
        discrete += grid->weight(i) * std::pow(1.0 + k * k, sigma) *
                    gx.values[ModeGrid::mode_index(i, l)].squaredNorm();
    }
    const double f2 = std::pow(2.0 * kPi, -3.0);
    const double oracle =
        4.0 * kPi * f2 * simpson([&](double r) { return r * std::pow(1.0 + r * r, sigma); }, 0.0, 1.0, 20000);
    CHECK(std::abs(discrete - oracle) < 1e-8 * oracle);
  }
}

TEST_CASE("vector potential and electric field") {
  std::mt19937_64 rng(7);
  const auto grid = ModeGrid::product({8, 6, 8, 1.0});
  const FieldKernels kernels(grid, Cutoff::sharp(1.0, 0.5));
  const ModeField zero(grid);
  CHECK(eval_A(kernels, zero, Vec3(1, 2, 3)).norm() == 0.0);
  CHECK(eval_E(kernels, zero, Vec3(1, 2, 3)).norm() == 0.0);
  CHECK(eval_faraday(kernels, zero, Vec3(1, 2, 3)).norm() == 0.0);

  for (std::size_t i = 0; i < grid->node_count(); ++i)
    for (int l = 0; l < 2; ++l) CHECK(grid->node(i).dot(grid->polarization(i, l)) == doctest::Approx(0.0).epsilon(1e-15));

  SUBCASE("sup bound through the inverse-k norm") {
    double inv_k = 0.0;
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
      const double f = kernels.cutoff()(grid->k_norm(i));
      inv_k += grid->weight(i) * f * f / (grid->k_norm(i) * grid->k_norm(i));
    }
    for (int trial = 0; trial < 20; ++trial) {
      const auto alpha = random_field(grid, rng);
      const double bound = 2.0 * std::sqrt(inv_k) * norm_h_sigma(alpha, 0.5, true);
      for (int s = 0; s < 10; ++s) {
        const Vec3 x = 3.0 * random_k(rng);
        CHECK(eval_A(kernels, alpha, x).norm() <= bound);
      }
    }
  }

  SUBCASE("E is minus the time derivative of A under free flow") {
    const auto alpha = random_field(grid, rng);
    const Vec3 x(0.4, -0.1, 0.7);
    auto rotated = [&](double t) {
      ModeField out(grid);
      for (std::size_t i = 0; i < grid->node_count(); ++i)
        for (int l = 0; l < 2; ++l) out(i, l) = std::polar(1.0, -t * grid->k_norm(i)) * alpha(i, l);
      return out;
    };
    const Vec3 e = eval_E(kernels, alpha, x);
    double prev = 0.0;
    for (double dt : {1e-2, 5e-3}) {
      const Vec3 fd = -(eval_A(kernels, rotated(dt), x) - eval_A(kernels, rotated(-dt), x)) / (2 * dt);
      const double err = (fd - e).norm();
      if (prev > 0.0) CHECK(prev / err > 3.5);
      prev = err;
    }
  }

  SUBCASE("Faraday tensor") {
    const auto alpha = random_field(grid, rng);
    const Vec3 x(0.2, 0.5, -0.3);
    const Mat3 f = eval_faraday(kernels, alpha, x);
    CHECK((f + f.transpose()).norm() == 0.0);
    auto fd_faraday = [&](double h) {
      Mat3 j;
      for (int m = 0; m < 3; ++m) {
        const Vec3 e = h * Vec3::Unit(m);
        j.col(m) = (eval_A(kernels, alpha, x + e) - eval_A(kernels, alpha, x - e)) / (2 * h);
      }
      return Mat3(j - j.transpose());
    };
    const double e1 = (fd_faraday(0.1) - f).norm();
    const double e2 = (fd_faraday(0.05) - f).norm();
    CHECK(std::log2(e1 / e2) > 1.9);

    // Magnetic force identity: (v x curl A)^m = sum_l v^l F^{lm}.
    const Mat3 grad = kernels.local_field(alpha, x).gradient;
    const Vec3 curl(grad(2, 1) - grad(1, 2), grad(0, 2) - grad(2, 0), grad(1, 0) - grad(0, 1));
    const Vec3 v(0.3, -1.1, 0.8);
    CHECK((v.cross(curl) - f.transpose() * v).norm() < 1e-10);
    CHECK(std::abs(v.dot(f * v)) < 1e-12);
  }
}

TEST_CASE("weighted norms") {
  const auto grid = ModeGrid::from_nodes({Vec3(0, 0, 1)}, {1.0});
  ModeField alpha(grid);
  alpha(0, 0) = 1.0;
  CHECK(norm_h_sigma(alpha, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(norm_h_sigma(alpha, 0.0, true) == norm_h_sigma(alpha, 0.0, false));
  CHECK_THROWS_AS(norm_h_sigma(alpha, 1.5), DomainError);

  std::mt19937_64 rng(3);
  const auto far = ModeGrid::from_nodes({Vec3(1, 0, 0), Vec3(0, 2, 1), Vec3(-3, 1, 1)}, {0.5, 1.0, 2.0});
  const auto beta = random_field(far, rng);
  double prev = 0.0;
  for (double s = 0.0; s <= 1.0; s += 0.125) {
    const double n = norm_h_sigma(beta, s, true);
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("admissibility") {
  const auto sharp = check_admissibility(Cutoff::sharp(1.0, 0.5));
  CHECK(sharp.pass());
  const double f2 = std::pow(2.0 * kPi, -3.0);
  CHECK(sharp.inverse_k_norm * sharp.inverse_k_norm == doctest::Approx(4.0 * kPi * f2).epsilon(1e-12));

  const auto flat = check_admissibility(Cutoff::custom([](const Vec3&) { return 1.0; }, 0.5));
  CHECK_FALSE(flat.sigma_finite);
  CHECK_FALSE(flat.pass());

  const auto gauss = check_admissibility(Cutoff::gaussian(1.0, 0.5));
  CHECK(gauss.pass());
  const double i1 = 4.0 * kPi * f2 * std::sqrt(kPi) / 2.0;
  const double i2 = 4.0 * kPi * f2 * 3.0 * std::sqrt(kPi) / 8.0;
  CHECK(std::abs(gauss.inverse_k_norm * gauss.inverse_k_norm - i1) < 1e-8 * i1);
  CHECK(std::abs(gauss.sigma_norm * gauss.sigma_norm - i2) < 1e-8 * i2);

  // General width: int r^n e^{-r^2/L^2} dr = L^{n+1} Gamma((n+1)/2) / 2.
  const double lambda = 2.5;
  const auto wide = check_admissibility(Cutoff::gaussian(lambda, 1.0));
  const double w2 = 4.0 * kPi * f2 * std::pow(lambda, 4.0) * std::tgamma(2.0) / 2.0;
  CHECK(std::abs(wide.sigma_norm * wide.sigma_norm - w2) < 1e-8 * w2);

  // Power-law profile: the inverse-k integral converges, the sigma integral grows linearly.
  const auto slow = check_admissibility(
      Cutoff::custom([](const Vec3& k) { return 1.0 / (1.0 + k.squaredNorm()); }, 0.5));
  CHECK(slow.inverse_k_finite);
  CHECK_FALSE(slow.sigma_finite);

  CHECK_THROWS_AS(
      check_admissibility(Cutoff::custom([](const Vec3& k) { return std::exp(-k.squaredNorm()) * (1.0 + k.x()); }, 0.5)),
      UnsupportedError);

  const auto table = Cutoff::table({0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}, 0.5);
  CHECK(table(0.25) == doctest::Approx(0.75));
  CHECK(table(2.0) == 0.0);
  CHECK(check_admissibility(table).pass());
}

TEST_CASE("smeared Coulomb potential") {
  const double lambda = 1.0;
  SUBCASE("sharp cutoff") {
    const SmearedCoulomb v(Cutoff::sharp(lambda, 0.5));
    const double f2 = std::pow(2.0 * kPi, -3.0);
    CHECK(v(Vec3::Zero()).gradient.norm() < 1e-12);
    CHECK(std::abs(v.value(0.0) - kCoulombC * f2 * lambda) < 1e-8 * kCoulombC * f2);
    for (double r : {0.1, 0.7, 1.9, 4.0, 9.5, 30.0, 70.0}) {
      const double ov = kCoulombC * f2 *
                        simpson([&](double k) { return std::sph_bessel(0u, k * r); }, 0.0, lambda, 40000);
      const double od = -kCoulombC * f2 *
                        simpson([&](double k) { return k * std::sph_bessel(1u, k * r); }, 0.0, lambda, 40000);
      CHECK(std::abs(v.value(r) - ov) < 1e-8 * std::abs(v.value(0.0)));
      CHECK(std::abs(v.radial_derivative(r) - od) < 1e-8 * std::abs(v.value(0.0)));
    }
  }
  SUBCASE("gaussian cutoff against the error-function closed form") {
    const SmearedCoulomb v(Cutoff::gaussian(lambda, 0.5));
    const double c = kCoulombC * std::pow(2.0 * kPi, -3.0);
    for (double r : {1e-3, 0.3, 1.0, 2.5, 6.0, 20.0, 60.0}) {
      const double exact = c * (kPi / 2.0) * std::erf(lambda * r / 2.0) / r;
      const double ex_d = c * (kPi / 2.0) *
                          (lambda / std::sqrt(kPi) * std::exp(-lambda * lambda * r * r / 4.0) / r -
                           std::erf(lambda * r / 2.0) / (r * r));
      CHECK(std::abs(v.value(r) - exact) < 1e-8 * c);
      CHECK(std::abs(v.radial_derivative(r) - ex_d) < 1e-8 * c);
    }
  }
  SUBCASE("bounds and symmetry") {
    for (const auto& cutoff : {Cutoff::sharp(1.0, 0.5), Cutoff::gaussian(0.7, 1.0)}) {
      const SmearedCoulomb v(cutoff);
      const auto report = check_admissibility(cutoff);
      const double bound = report.inverse_k_norm * report.inverse_k_norm;
      std::mt19937_64 rng(11);
      for (int n = 0; n < 100; ++n) {
        const Vec3 x = 4.0 * random_k(rng);
        const auto a = v(x);
        const auto b = v(-x);
        CHECK(std::abs(a.value) <= bound);
        CHECK(std::abs(a.value - b.value) < 1e-12);
        CHECK((a.gradient + b.gradient).norm() < 1e-12);
        CHECK(a.gradient.norm() <= v.hessian_bound() * x.norm());
      }
    }
  }
  SUBCASE("inadmissible cutoff") {
    CHECK_THROWS_AS(SmearedCoulomb(Cutoff::custom([](const Vec3&) { return 1.0; }, 0.5)), DomainError);
  }
}
