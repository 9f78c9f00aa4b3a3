#include <doctest.h>

#include <cmath>

#include "trislam/submap.hpp"

using namespace trislam;

TEST_CASE("submap sizing follows the volume rule") {
  SUBCASE("spot values") {
    CHECK(submap_sizing_from_volume(8.0).n_max == 100);
    CHECK(submap_sizing_from_volume(8.0).table_size == 10000);
    CHECK(submap_sizing_from_volume(27.0).n_max == 150);
    CHECK(submap_sizing_from_volume(27.0).table_size == 22500);
    CHECK(submap_sizing_from_volume(1.0).n_max == 50);
    CHECK(submap_sizing_from_volume(1.0).table_size == 2500);
  }
  SUBCASE("floor-based across random volumes") {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
      const double v = rng.uniform(0.5, 500.0);
      const auto sizing = submap_sizing_from_volume(v);
      CHECK(sizing.n_max == static_cast<int>(std::floor(50.0 * std::cbrt(v))));
      CHECK(sizing.table_size == static_cast<std::int64_t>(sizing.n_max) * sizing.n_max);
    }
  }
}

TEST_CASE("project_to_planes") {
  Aabb box;
  box.min = Vec3(0, 0, 0);
  box.max = Vec3(1, 1, 1);
  SUBCASE("min corner") {
    const auto uv = project_to_planes(box.min, box);
    for (const auto& pair : uv) {
      CHECK(pair[0] == 0.0);
      CHECK(pair[1] == 0.0);
    }
  }
  SUBCASE("center") {
    const auto uv = project_to_planes(box.center(), box);
    for (const auto& pair : uv) {
      CHECK(pair[0] == doctest::Approx(0.5));
      CHECK(pair[1] == doctest::Approx(0.5));
    }
  }
  SUBCASE("axis pairs (x,y), (x,z), (y,z)") {
    const auto uv = project_to_planes(Vec3(0.25, 0.5, 0.75), box);
    CHECK(uv[0][0] == doctest::Approx(0.25));
    CHECK(uv[0][1] == doctest::Approx(0.5));
    CHECK(uv[1][0] == doctest::Approx(0.25));
    CHECK(uv[1][1] == doctest::Approx(0.75));
    CHECK(uv[2][0] == doctest::Approx(0.5));
    CHECK(uv[2][1] == doctest::Approx(0.75));
  }
}

namespace {
FieldConfig small_field() {
  FieldConfig fc;
  fc.levels = 3;
  fc.base_res = 4;
  fc.feat_dim = 2;
  fc.hidden_dim = 32;
  return fc;
}

Aabb unit_box() {
  Aabb box;
  box.min = Vec3(-0.5, -0.5, -0.5);
  box.max = Vec3(0.5, 0.5, 0.5);
  return box;
}
}  // namespace

TEST_CASE("submap construction") {
  ParamStore store;
  Rng rng(3);
  SUBCASE("degenerate box") {
    Aabb bad;
    bad.min = Vec3(0, 0, 0);
    bad.max = Vec3(1, 0, 1);
    CHECK_THROWS_AS(SubMap(store, bad, 0, small_field(), rng), std::runtime_error);
  }
  SUBCASE("allocates six planes sized by the volume rule") {
    SubMap sm(store, unit_box(), 0, small_field(), rng);
    CHECK(sm.n_max() == 50);
    CHECK(sm.table_size() == 2500);
    CHECK(sm.param_blocks().size() == 6);
    CHECK(sm.feature_length() == 6);
  }
}

TEST_CASE("encode_features sums the three planes") {
  ParamStore store;
  Rng rng(5);
  SubMap sm(store, unit_box(), 0, small_field(), rng);
  const int len = sm.feature_length();
  std::vector<double> f_s(static_cast<std::size_t>(len)), f_c(static_cast<std::size_t>(len));
  SubmapQueryScratch scratch;
  const Vec3 p(0.1, -0.2, 0.3);

  SUBCASE("zero tables give zero features") {
    for (BlockId id : sm.param_blocks())
      for (double& v : store.block(id).values) v = 0.0;
    sm.encode_features(store, p, f_s.data(), f_c.data(), scratch);
    for (int i = 0; i < len; ++i) {
      CHECK(f_s[static_cast<std::size_t>(i)] == 0.0);
      CHECK(f_c[static_cast<std::size_t>(i)] == 0.0);
    }
  }
  SUBCASE("single nonzero plane passes through") {
    for (BlockId id : sm.param_blocks())
      for (double& v : store.block(id).values) v = 0.0;
    auto& xy = store.block(sm.sdf_plane(0).block());
    Rng vals(7);
    for (double& v : xy.values) v = vals.uniform(-1, 1);
    sm.encode_features(store, p, f_s.data(), f_c.data(), scratch);

    PlaneQueryScratch ps;
    std::vector<double> direct(static_cast<std::size_t>(len));
    const auto uv = project_to_planes(p, sm.bounds());
    sm.sdf_plane(0).encode(store, uv[0][0], uv[0][1], direct.data(), ps);
    for (int i = 0; i < len; ++i)
      CHECK(f_s[static_cast<std::size_t>(i)] == doctest::Approx(direct[static_cast<std::size_t>(i)]));
    for (int i = 0; i < len; ++i) CHECK(f_c[static_cast<std::size_t>(i)] == 0.0);
  }
  SUBCASE("plane summation is order-independent up to fp") {
    Rng vals(11);
    for (BlockId id : sm.param_blocks())
      for (double& v : store.block(id).values) v = vals.uniform(-1, 1);
    sm.encode_features(store, p, f_s.data(), f_c.data(), scratch);
    // Recompute as yz + xz + xy (reversed order).
    PlaneQueryScratch ps;
    std::vector<double> acc(static_cast<std::size_t>(len), 0.0), tmp(static_cast<std::size_t>(len));
    const auto uv = project_to_planes(p, sm.bounds());
    for (int pl = 2; pl >= 0; --pl) {
      sm.sdf_plane(pl).encode(store, uv[static_cast<std::size_t>(pl)][0],
                              uv[static_cast<std::size_t>(pl)][1], tmp.data(), ps);
      for (int i = 0; i < len; ++i) acc[static_cast<std::size_t>(i)] += tmp[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < len; ++i)
      CHECK(std::abs(f_s[static_cast<std::size_t>(i)] - acc[static_cast<std::size_t>(i)]) <= 1e-12);
  }
  SUBCASE("table gradients match finite differences") {
    Rng vals(13);
    for (BlockId id : sm.param_blocks())
      for (double& v : store.block(id).values) v = vals.uniform(-0.5, 0.5);
    std::vector<double> up_s(static_cast<std::size_t>(len)), up_c(static_cast<std::size_t>(len));
    for (double& g : up_s) g = vals.uniform(-1, 1);
    for (double& g : up_c) g = vals.uniform(-1, 1);
    auto loss = [&] {
      sm.encode_features(store, p, f_s.data(), f_c.data(), scratch);
      double acc = 0;
      for (int i = 0; i < len; ++i)
        acc += up_s[static_cast<std::size_t>(i)] * f_s[static_cast<std::size_t>(i)] +
               up_c[static_cast<std::size_t>(i)] * f_c[static_cast<std::size_t>(i)];
      return acc;
    };
    loss();
    sm.encode_backward(store, scratch, up_s.data(), up_c.data(), nullptr, true);
    Rng probe(17);
    for (BlockId id : sm.param_blocks())
      CHECK(finite_diff_check(loss, store.block(id), 1e-6, 10, probe) <= 1e-6);
  }
}

TEST_CASE("decoders") {
  ParamStore store;
  Rng rng(19);
  const int len = 6;
  Decoders dec(store, len, 32, 1e-3, rng);
  Decoders::Workspace ws;
  std::vector<double> f_s(len, 0.0), f_c(len, 0.0);
  double s = 0;
  Vec3 c;

  SUBCASE("zero features read the output-layer bias") {
    // Fresh decoders have zero biases except the TSDF output bias of +1.
    dec.decode(store, f_s.data(), f_c.data(), &s, &c, ws);
    CHECK(s == doctest::Approx(1.0));
    for (int i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(0.5));  // sigmoid(0)
  }
  SUBCASE("color always lands in (0,1)") {
    Rng vals(23);
    for (int trial = 0; trial < 50; ++trial) {
      for (double& v : f_c) v = vals.uniform(-20, 20);
      dec.decode(store, f_s.data(), f_c.data(), &s, &c, ws);
      for (int i = 0; i < 3; ++i) {
        CHECK(c[i] > 0.0);
        CHECK(c[i] < 1.0);
      }
    }
  }
  SUBCASE("jacobian matches finite differences") {
    Rng vals(29);
    for (double& v : f_s) v = vals.uniform(-1, 1);
    for (double& v : f_c) v = vals.uniform(-1, 1);
    const double d_s = vals.uniform(-1, 1);
    const Vec3 d_c(vals.uniform(-1, 1), vals.uniform(-1, 1), vals.uniform(-1, 1));
    auto loss = [&] {
      dec.decode(store, f_s.data(), f_c.data(), &s, &c, ws);
      return d_s * s + d_c.dot(c);
    };
    loss();
    std::vector<double> d_fs(len, 0.0), d_fc(len, 0.0);
    dec.decode_backward(store, f_s.data(), f_c.data(), c, ws, d_s, d_c, d_fs.data(), d_fc.data(),
                        true);
    Rng probe(31);
    CHECK(finite_diff_check(loss, store.block(dec.sdf_mlp().block()), 1e-6, 30, probe) <= 1e-6);
    CHECK(finite_diff_check(loss, store.block(dec.color_mlp().block()), 1e-6, 30, probe) <= 1e-6);

    // Feature gradients against central differences.
    const double eps = 1e-6;
    for (int i = 0; i < len; ++i) {
      const double saved = f_s[static_cast<std::size_t>(i)];
      f_s[static_cast<std::size_t>(i)] = saved + eps;
      const double plus = loss();
      f_s[static_cast<std::size_t>(i)] = saved - eps;
      const double minus = loss();
      f_s[static_cast<std::size_t>(i)] = saved;
      CHECK(d_fs[static_cast<std::size_t>(i)] ==
            doctest::Approx((plus - minus) / (2 * eps)).epsilon(1e-5));
    }
  }
  SUBCASE("decoders are shared across submaps") {
    ParamStore store2;
    Rng rng2(37);
    FieldConfig fc = small_field();
    Decoders shared(store2, fc.levels * fc.feat_dim, fc.hidden_dim, 1e-3, rng2);
    Aabb box_a = unit_box();
    Aabb box_b = unit_box();
    box_b.min += Vec3(2, 0, 0);
    box_b.max += Vec3(2, 0, 0);
    SubMap a(store2, box_a, 0, fc, rng2);
    SubMap b(store2, box_b, 1, fc, rng2);
    // Identical features through the same decoders must give identical
    // outputs before and after a weight change.
    std::vector<double> feat(static_cast<std::size_t>(fc.levels * fc.feat_dim), 0.3);
    double s1, s2;
    Vec3 c1, c2;
    Decoders::Workspace w1, w2;
    shared.decode(store2, feat.data(), feat.data(), &s1, &c1, w1);
    shared.decode(store2, feat.data(), feat.data(), &s2, &c2, w2);
    CHECK(s1 == s2);
    shared.sdf_mlp().b3(store2)[0] += 0.25;
    double s1b, s2b;
    shared.decode(store2, feat.data(), feat.data(), &s1b, &c1, w1);
    shared.decode(store2, feat.data(), feat.data(), &s2b, &c2, w2);
    CHECK(s1b == s2b);
    CHECK(s1b != s1);
  }
}
