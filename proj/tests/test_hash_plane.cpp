#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "trislam/hash_plane.hpp"

using namespace trislam;

TEST_CASE("level_resolutions") {
  SUBCASE("flat progression when N_min == N_max") {
    const auto res = level_resolutions(16, 16, 4);
    REQUIRE(res.size() == 4);
    for (int r : res) CHECK(r == 16);
  }
  SUBCASE("16 to 100 over 16 levels") {
    const auto res = level_resolutions(16, 100, 16);
    CHECK(res.front() == 16);
    CHECK(res.back() == 100);
    const double b = std::pow(100.0 / 16.0, 1.0 / 15.0);
    CHECK(b == doctest::Approx(1.1299).epsilon(1e-3));
    for (std::size_t l = 0; l < res.size(); ++l)
      CHECK(res[l] == static_cast<int>(std::floor(16.0 * std::pow(b, l) + 1e-9)));
    for (std::size_t l = 1; l < res.size(); ++l) CHECK(res[l] >= res[l - 1]);
  }
  SUBCASE("powers of two") {
    const auto res = level_resolutions(2, 8, 3);
    CHECK(res == std::vector<int>{2, 4, 8});
  }
  SUBCASE("invalid ordering") {
    CHECK_THROWS_AS(level_resolutions(16, 8, 4), std::runtime_error);
  }
}

namespace {
HashPlane2D make_plane(ParamStore& store, Rng& rng, int n_min = 4, int n_max = 16, int levels = 4,
                       int feat = 2, std::int64_t table = 64, const std::string& name = "plane",
                       bool force_hashed = false) {
  return HashPlane2D(store, name, n_min, n_max, levels, feat, table, 1e-2, rng, force_hashed);
}
}  // namespace

TEST_CASE("hash_index") {
  ParamStore store;
  Rng rng(1);
  SUBCASE("dense row-major") {
    // table 1024 keeps every level (finest 16 -> 17^2=289) dense
    auto plane = make_plane(store, rng, 4, 16, 4, 2, 1024);
    CHECK(plane.level_dense(3));
    const std::int64_t base = plane.hash_index(3, 0, 0);
    CHECK(plane.hash_index(3, 3, 2) - base == 2 * 17 + 3);
  }
  SUBCASE("hashed formula") {
    auto plane = make_plane(store, rng, 4, 16, 4, 2, 8, "hashed_plane");
    CHECK_FALSE(plane.level_dense(3));
    const std::int64_t base = plane.hash_index(3, 0, 0);
    // (1*1 xor 0*p2) mod 8 = 1
    CHECK(plane.hash_index(3, 1, 0) - base == 1);
  }
  SUBCASE("vertex outside range") {
    auto plane = make_plane(store, rng, 4, 16, 4, 2, 64, "range_plane");
    CHECK_THROWS_AS(plane.hash_index(0, -1, 0), std::runtime_error);
    CHECK_THROWS_AS(plane.hash_index(0, 0, 5), std::runtime_error);
  }
}

TEST_CASE("encode2d") {
  ParamStore store;
  Rng rng(3);
  auto plane = make_plane(store, rng, 4, 8, 3, 2, 4096);
  auto& values = store.block(plane.block()).values;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.01 * static_cast<double>(i % 97);

  PlaneQueryScratch scratch;
  std::vector<double> feat(static_cast<std::size_t>(plane.feature_length()));

  SUBCASE("output length is levels * feat_dim") {
    CHECK(plane.feature_length() == 6);
    plane.encode(store, 0.37, 0.81, feat.data(), scratch);
    for (double f : feat) CHECK(std::isfinite(f));
  }
  SUBCASE("grid vertex returns the table entry at every level") {
    // (0.5, 0.5) is a vertex of every level of 4/5-ish... use (0,0).
    plane.encode(store, 0.0, 0.0, feat.data(), scratch);
    for (int l = 0; l < plane.levels(); ++l) {
      const std::int64_t idx = plane.hash_index(l, 0, 0);
      for (int c = 0; c < plane.feat_dim(); ++c)
        CHECK(feat[static_cast<std::size_t>(l * plane.feat_dim() + c)] ==
              doctest::Approx(values[static_cast<std::size_t>(idx * plane.feat_dim() + c)]));
    }
  }
  SUBCASE("cell center averages the four corners") {
    // level 0 has resolution 4: center of cell (1,2) is ((1.5)/4, (2.5)/4).
    plane.encode(store, 1.5 / 4.0, 2.5 / 4.0, feat.data(), scratch);
    for (int c = 0; c < plane.feat_dim(); ++c) {
      double mean = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          mean += values[static_cast<std::size_t>(plane.hash_index(0, 1 + dx, 2 + dy) * 2 + c)];
      mean /= 4.0;
      CHECK(feat[static_cast<std::size_t>(c)] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  SUBCASE("continuity across a shared cell edge") {
    // Evaluate exactly on an interior grid line of the coarsest level from
    // both sides: bilinear interpolation must agree exactly at the line.
    const double u_edge = 2.0 / 4.0;
    std::vector<double> left(feat.size()), right(feat.size());
    plane.encode(store, std::nextafter(u_edge, 0.0), 0.3, left.data(), scratch);
    plane.encode(store, u_edge, 0.3, right.data(), scratch);
    for (std::size_t i = 0; i < feat.size(); ++i)
      CHECK(left[i] == doctest::Approx(right[i]).epsilon(1e-9));
  }
  SUBCASE("inputs clamped") {
    std::vector<double> a(feat.size()), b(feat.size());
    plane.encode(store, -0.5, 1.75, a.data(), scratch);
    plane.encode(store, 0.0, 1.0, b.data(), scratch);
    for (std::size_t i = 0; i < feat.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("encode2d gradients match finite differences") {
  ParamStore store;
  Rng rng(5);
  auto plane = make_plane(store, rng, 4, 12, 3, 2, 4096);
  auto& block = store.block(plane.block());
  for (double& v : block.values) v = rng.uniform(-0.5, 0.5);

  const double u = 0.337, v = 0.621;
  PlaneQueryScratch scratch;
  std::vector<double> feat(static_cast<std::size_t>(plane.feature_length()));
  std::vector<double> upstream(feat.size());
  for (double& g : upstream) g = rng.uniform(-1, 1);

  auto loss = [&] {
    plane.encode(store, u, v, feat.data(), scratch);
    double acc = 0;
    for (std::size_t i = 0; i < feat.size(); ++i) acc += upstream[i] * feat[i];
    return acc;
  };

  loss();
  double du = 0, dv = 0;
  plane.backward(store, scratch, upstream.data(), &du, &dv, true);

  SUBCASE("table gradients") {
    CHECK(finite_diff_check(loss, block, 1e-6, 40, rng) <= 1e-6);
  }
  SUBCASE("uv gradients") {
    const double eps = 1e-7;
    std::vector<double> f_plus(feat.size()), f_minus(feat.size());
    PlaneQueryScratch s2;
    plane.encode(store, u + eps, v, f_plus.data(), s2);
    plane.encode(store, u - eps, v, f_minus.data(), s2);
    double fd_u = 0;
    for (std::size_t i = 0; i < feat.size(); ++i)
      fd_u += upstream[i] * (f_plus[i] - f_minus[i]) / (2 * eps);
    CHECK(du == doctest::Approx(fd_u).epsilon(1e-5));

    plane.encode(store, u, v + eps, f_plus.data(), s2);
    plane.encode(store, u, v - eps, f_minus.data(), s2);
    double fd_v = 0;
    for (std::size_t i = 0; i < feat.size(); ++i)
      fd_v += upstream[i] * (f_plus[i] - f_minus[i]) / (2 * eps);
    CHECK(dv == doctest::Approx(fd_v).epsilon(1e-5));
  }
}

TEST_CASE("dense fallback and collision instrumentation") {
  ParamStore store;
  Rng rng(7);
  const int n_max = 12;

  SUBCASE("big table means every level is dense and collision-free") {
    const std::int64_t huge = static_cast<std::int64_t>(n_max + 1) * (n_max + 1);
    auto plane = make_plane(store, rng, 4, n_max, 3, 2, huge, "dense_plane");
    for (int l = 0; l < plane.levels(); ++l) CHECK(plane.level_dense(l));
    plane.set_recording(true);
    PlaneQueryScratch scratch;
    std::vector<double> feat(static_cast<std::size_t>(plane.feature_length()));
    for (int i = 0; i < 500; ++i)
      plane.encode(store, rng.uniform(), rng.uniform(), feat.data(), scratch);
    CHECK(plane.occupied_vertex_count() > 0);
    CHECK(plane.collision_pairs() == 0);
  }
  SUBCASE("forced hashing with no collisions matches dense training") {
    auto dense = make_plane(store, rng, 4, n_max, 3, 2, 65536, "ref_dense");
    Rng rng2(7);  // same init stream shape; values are trained below anyway
    auto hashed = HashPlane2D(store, "forced_hashed", 4, n_max, 3, 2, 65536, 1e-2, rng2, true);
    for (int l = 0; l < hashed.levels(); ++l) CHECK_FALSE(hashed.level_dense(l));
    // Zero both tables, then train on the same samples by plain gradient
    // descent through backward.
    for (double& v : store.block(dense.block()).values) v = 0;
    for (double& v : store.block(hashed.block()).values) v = 0;
    hashed.set_recording(true);

    PlaneQueryScratch scratch;
    std::vector<double> feat(static_cast<std::size_t>(dense.feature_length()));
    std::vector<double> upstream(feat.size(), 1.0);
    Rng sample_rng(11);
    std::vector<std::pair<double, double>> samples;
    for (int i = 0; i < 40; ++i) samples.push_back({sample_rng.uniform(), sample_rng.uniform()});

    for (const auto& [u, v] : samples) {
      dense.encode(store, u, v, feat.data(), scratch);
      dense.backward(store, scratch, upstream.data(), nullptr, nullptr, true);
      hashed.encode(store, u, v, feat.data(), scratch);
      hashed.backward(store, scratch, upstream.data(), nullptr, nullptr, true);
    }
    // "Training": apply the raw negative gradient.
    auto apply = [&](BlockId id) {
      auto& blk = store.block(id);
      for (std::size_t i = 0; i < blk.size(); ++i) blk.values[i] -= 0.5 * blk.grads[i];
      blk.zero_grads();
    };
    apply(dense.block());
    apply(hashed.block());

    // Table large enough that the recorded vertices do not collide: the
    // hashed plane must then behave exactly like the dense one.
    REQUIRE(hashed.collision_pairs() == 0);
    std::vector<double> a(feat.size()), b(feat.size());
    for (const auto& [u, v] : samples) {
      dense.encode(store, u, v, a.data(), scratch);
      hashed.encode(store, u, v, b.data(), scratch);
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }
  SUBCASE("small table on a fine level reports collisions") {
    auto plane = make_plane(store, rng, 8, 32, 3, 2, 16, "tiny_table");
    plane.set_recording(true);
    PlaneQueryScratch scratch;
    std::vector<double> feat(static_cast<std::size_t>(plane.feature_length()));
    for (int i = 0; i < 2000; ++i)
      plane.encode(store, rng.uniform(), rng.uniform(), feat.data(), scratch);
    CHECK(plane.collision_pairs() > 0);
  }
}
