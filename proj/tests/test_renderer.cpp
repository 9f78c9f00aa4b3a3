#include <doctest.h>

#include <cmath>

#include "trislam/renderer.hpp"

using namespace trislam;

TEST_CASE("sample_ray_depths") {
  Rng rng(1);
  SUBCASE("stratification puts one sample in each bin") {
    for (int trial = 0; trial < 20; ++trial) {
      const RaySamples s = sample_ray_depths(0.0, 0.0, 4.0, 4, 0, 0.06, rng);
      REQUIRE(s.size() == 4);
      for (int i = 0; i < 4; ++i) {
        CHECK(s.depths[static_cast<std::size_t>(i)] >= i * 1.0);
        CHECK(s.depths[static_cast<std::size_t>(i)] < (i + 1) * 1.0);
      }
    }
  }
  SUBCASE("near-surface band") {
    const RaySamples s = sample_ray_depths(2.0, 0.05, 2.24, 0, 8, 0.06, rng);
    REQUIRE(s.size() == 8);
    for (double d : s.depths) {
      CHECK(d >= 1.94);
      CHECK(d <= 2.06);
    }
    for (SampleKind k : s.kinds) CHECK(k == SampleKind::NearSurface);
  }
  SUBCASE("sorted ascending for any seed") {
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
      Rng r(seed);
      const RaySamples s = sample_ray_depths(1.5, 0.05, 1.74, 16, 8, 0.06, r);
      CHECK(s.size() == 24);
      for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.depths[i] >= s.depths[i - 1]);
    }
  }
  SUBCASE("invalid depth skips the near-surface band") {
    const RaySamples s = sample_ray_depths(0.0, 0.05, 3.0, 16, 8, 0.06, rng);
    CHECK(s.size() == 16);
  }
  SUBCASE("near-surface samples are clamped to near") {
    Rng r(5);
    const RaySamples s = sample_ray_depths(0.06, 0.05, 0.4, 0, 64, 0.06, r);
    for (double d : s.depths) CHECK(d >= 0.05);
  }
  SUBCASE("far must exceed near") {
    CHECK_THROWS_AS(sample_ray_depths(1.0, 2.0, 2.0, 4, 0, 0.06, rng), std::runtime_error);
  }
}

TEST_CASE("sdf_to_density") {
  SUBCASE("midpoint value") { CHECK(sdf_to_density(0.0, 4.0) == doctest::Approx(2.0)); }
  SUBCASE("limits") {
    CHECK(sdf_to_density(60.0, 4.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sdf_to_density(-60.0, 4.0) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("spot value from the density formula") {
    // 10 * sigmoid(-10) = 10 / (1 + e^10)
    const double expected = 10.0 / (1.0 + std::exp(10.0));
    CHECK(expected == doctest::Approx(4.5398e-4).epsilon(1e-4));
    CHECK(sdf_to_density(1.0, 10.0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("monotone decreasing in s") {
    double prev = sdf_to_density(-3.0, 7.0);
    for (double s = -2.9; s < 3.0; s += 0.1) {
      const double cur = sdf_to_density(s, 7.0);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  SUBCASE("gradients match finite differences") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const double s = rng.uniform(-2, 2);
      const double beta = rng.uniform(0.5, 20.0);
      double d_s, d_beta;
      sdf_to_density_grad(s, beta, &d_s, &d_beta);
      const double eps = 1e-6;
      const double fd_s = (sdf_to_density(s + eps, beta) - sdf_to_density(s - eps, beta)) / (2 * eps);
      const double fd_b =
          (sdf_to_density(s, beta + eps) - sdf_to_density(s, beta - eps)) / (2 * eps);
      CHECK(d_s == doctest::Approx(fd_s).epsilon(1e-6));
      CHECK(d_beta == doctest::Approx(fd_b).epsilon(1e-6));
    }
  }
}

TEST_CASE("compute_weights") {
  std::vector<double> omega, trans;
  SUBCASE("single opaque sample") {
    compute_weights({2.0}, omega, trans);
    CHECK(omega[0] == doctest::Approx(1.0 - std::exp(-2.0)));
  }
  SUBCASE("transparent first sample") {
    compute_weights({0.0, 1.5}, omega, trans);
    CHECK(omega[0] == 0.0);
    CHECK(omega[1] == doctest::Approx(1.0 - std::exp(-1.5)));
  }
  SUBCASE("empty space stays empty") {
    compute_weights({0.0, 0.0, 0.0}, omega, trans);
    for (double w : omega) CHECK(w == 0.0);
  }
  SUBCASE("weights sum to 1 - exp(-sum sigma), to 1e-12") {
    Rng rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_index(40));
      std::vector<double> sigma(static_cast<std::size_t>(n));
      double sum_sigma = 0;
      for (double& s : sigma) {
        s = rng.uniform(0, 3);
        sum_sigma += s;
      }
      compute_weights(sigma, omega, trans);
      double sum_w = 0;
      for (double w : omega) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        sum_w += w;
      }
      CHECK(std::abs(sum_w + std::exp(-sum_sigma) - 1.0) <= 1e-12);
    }
  }
  SUBCASE("weights_backward matches finite differences") {
    Rng rng(9);
    const int n = 12;
    std::vector<double> sigma(n), upstream(n);
    for (double& s : sigma) s = rng.uniform(0.01, 2.0);
    for (double& g : upstream) g = rng.uniform(-1, 1);
    compute_weights(sigma, omega, trans);
    std::vector<double> d_sigma;
    weights_backward(sigma, omega, trans, upstream, d_sigma);

    auto loss = [&](const std::vector<double>& sig) {
      std::vector<double> w, t;
      compute_weights(sig, w, t);
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += upstream[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
      return acc;
    };
    const double eps = 1e-7;
    for (int i = 0; i < n; ++i) {
      std::vector<double> plus = sigma, minus = sigma;
      plus[static_cast<std::size_t>(i)] += eps;
      minus[static_cast<std::size_t>(i)] -= eps;
      const double fd = (loss(plus) - loss(minus)) / (2 * eps);
      CHECK(d_sigma[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("render_ray") {
  SUBCASE("a delta weight copies that sample") {
    RaySamples samples;
    samples.depths = {1.0, 2.0, 3.0};
    samples.kinds.assign(3, SampleKind::Regular);
    // Huge negative TSDF at the first sample absorbs everything.
    const std::vector<double> s{-10.0, 0.5, 0.5};
    const std::vector<Vec3> colors{Vec3(0.9, 0.1, 0.2), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    const RenderResult out = render_ray(samples, s, colors, 30.0);
    CHECK(out.omega[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(out.d_hat == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((out.c_hat - colors[0]).norm() < 1e-6);
  }
  SUBCASE("free space renders nearly nothing") {
    RaySamples samples;
    const int n = 24;
    for (int i = 0; i < n; ++i) {
      samples.depths.push_back(0.1 * (i + 1));
      samples.kinds.push_back(SampleKind::Regular);
    }
    const std::vector<double> s(n, 1.0);
    const std::vector<Vec3> colors(n, Vec3(1, 1, 1));
    const RenderResult out = render_ray(samples, s, colors, 10.0);
    CHECK(out.d_hat < 0.05);
    CHECK(out.c_hat.norm() < 0.05);
  }
  SUBCASE("rendered color in range, depth within [0, far]") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      RaySamples samples;
      const int n = 16;
      double far = 4.0;
      for (int i = 0; i < n; ++i) {
        samples.depths.push_back(far * (i + rng.uniform()) / n);
        samples.kinds.push_back(SampleKind::Regular);
      }
      std::vector<double> s(n);
      std::vector<Vec3> colors(n);
      for (int i = 0; i < n; ++i) {
        s[static_cast<std::size_t>(i)] = rng.uniform(-2, 2);
        colors[static_cast<std::size_t>(i)] =
            Vec3(rng.uniform(), rng.uniform(), rng.uniform());
      }
      const RenderResult out = render_ray(samples, s, colors, rng.uniform(1.0, 20.0));
      for (int c = 0; c < 3; ++c) {
        CHECK(out.c_hat[c] >= 0.0);
        CHECK(out.c_hat[c] <= 1.0);
      }
      CHECK(out.d_hat >= 0.0);
      CHECK(out.d_hat <= far);
    }
  }
  SUBCASE("sharper beta concentrates the weights") {
    // Step-function TSDF along the ray; weight entropy must fall as beta
    // grows.
    RaySamples samples;
    const int n = 64;
    for (int i = 0; i < n; ++i) {
      samples.depths.push_back(4.0 * (i + 0.5) / n);
      samples.kinds.push_back(SampleKind::Regular);
    }
    std::vector<double> s(n);
    std::vector<Vec3> colors(n, Vec3(0.5, 0.5, 0.5));
    for (int i = 0; i < n; ++i)
      s[static_cast<std::size_t>(i)] = samples.depths[static_cast<std::size_t>(i)] < 2.0 ? 1.0 : -1.0;

    double prev_entropy = 1e300;
    for (double beta : {8.0, 16.0, 32.0, 64.0, 128.0}) {
      const RenderResult out = render_ray(samples, s, colors, beta);
      double mass = 0, entropy = 0;
      for (double w : out.omega) mass += w;
      for (double w : out.omega) {
        if (w > 1e-300) {
          const double p = w / mass;
          entropy -= p * std::log(p);
        }
      }
      CHECK(entropy < prev_entropy);
      prev_entropy = entropy;
    }
  }
}
