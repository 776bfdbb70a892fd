#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "vsgg/geometry.hpp"
#include "vsgg/jsonw.hpp"
#include "vsgg/rng.hpp"
#include "vsgg/tensor.hpp"

using namespace vsgg;

TEST_CASE("rng streams are deterministic and independent") {
  Rng a = Rng::from_key(42, {kTagVideo, 3});
  Rng b = Rng::from_key(42, {kTagVideo, 3});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c = Rng::from_key(42, {kTagVideo, 4});
  CHECK(Rng::from_key(42, {kTagVideo, 3}).next_u64() != c.next_u64());
}

TEST_CASE("rng uniform and normal have sane moments") {
  Rng rng(7);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sum2 += v * v;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);

  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_int(2, 5));
  CHECK(seen == std::set<int>{2, 3, 4, 5});
}

TEST_CASE("rng state round-trips") {
  Rng a(123);
  a.next_u64();
  a.normal();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("union_box covers both boxes") {
  const Box a{0.0, 0.0, 0.2, 0.2};
  const Box b{0.5, 0.5, 0.2, 0.2};
  const Box u = union_box(a, b);
  CHECK(u.x == doctest::Approx(0.0));
  CHECK(u.y == doctest::Approx(0.0));
  CHECK(u.w == doctest::Approx(0.7));
  CHECK(u.h == doctest::Approx(0.7));

  // idempotence and commutativity
  CHECK(union_box(a, a) == a);
  CHECK(union_box(a, b) == union_box(b, a));

  // nested boxes give the outer box
  const Box outer{0.1, 0.1, 0.6, 0.6};
  const Box inner{0.2, 0.2, 0.1, 0.1};
  CHECK(union_box(outer, inner) == outer);
}

TEST_CASE("union_box is monotone under enlargement") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const Box a{rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.05, 0.4),
                rng.uniform(0.05, 0.4)};
    const Box b{rng.uniform(0, 0.5), rng.uniform(0, 0.5), rng.uniform(0.05, 0.4),
                rng.uniform(0.05, 0.4)};
    Box bigger = b;
    bigger.w += rng.uniform(0.0, 0.2);
    bigger.h += rng.uniform(0.0, 0.2);
    const Box u1 = union_box(a, b);
    const Box u2 = union_box(a, bigger);
    CHECK(u2.x <= u1.x + 1e-12);
    CHECK(u2.y <= u1.y + 1e-12);
    CHECK(u2.x2() >= u1.x2() - 1e-12);
    CHECK(u2.y2() >= u1.y2() - 1e-12);
  }
}

TEST_CASE("iou basic values") {
  const Box a{0.0, 0.0, 1.0, 1.0};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Box{2.0, 2.0, 1.0, 1.0}) == doctest::Approx(0.0));
  // (0,0,2,2) vs (1,1,2,2): intersection 1, union 7
  CHECK(iou(Box{0, 0, 2, 2}, Box{1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0));
  // degenerate box scores 0
  CHECK(iou(Box{0, 0, 0, 1}, a) == doctest::Approx(0.0));
}

TEST_CASE("tensor layout converters invert each other") {
  Rng rng(3);
  Tensor<double> t({4, 5, 6});
  for (double& v : t.data) v = rng.normal();
  const Tensor<double> back = to_channel_last(to_channel_first(t));
  CHECK(back.shape == t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);
  CHECK(to_channel_first(t).shape == std::vector<int>{6, 4, 5});
}

TEST_CASE("json writer formats floats with 9 significant digits") {
  JsonWriter w;
  w.begin_object();
  w.key("v").value(0.123456789123).comma();
  w.key("n").value(-1.0 / 3.0);
  w.end_object();
  CHECK(w.str() == "{\"v\":0.123456789,\"n\":-0.333333333}");
}
