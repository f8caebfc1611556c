#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_util.hpp"
#include "xview/errors.hpp"
#include "xview/signal.hpp"

using namespace xview;
using xview::testing::random_vector;

namespace {

// Direct O(T^2) summation of the orthonormal DCT-II.
std::vector<double> dct_oracle(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
    out[k] = (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n)) * acc;
  }
  return out;
}

}  // namespace

TEST_CASE("dct of a constant signal") {
  const std::vector<double> x(8, 1.5);
  const auto c = dct_encode(x, 8);
  CHECK(c[0] == doctest::Approx(1.5 * std::sqrt(8.0)));
  for (int k = 1; k < 8; ++k) CHECK(std::abs(c[k]) < 1e-12);
  const auto back = dct_decode(std::vector<double>{1.5 * std::sqrt(5.0)}, 5);
  for (double v : back) CHECK(v == doctest::Approx(1.5));
}

TEST_CASE("dct of a basis vector hits one coefficient") {
  const int t = 8;
  std::vector<double> x(t);
  for (int n = 0; n < t; ++n) x[n] = std::cos(std::numbers::pi * (2 * n + 1) * 1.0 / (2 * t));
  const auto c = dct_encode(x, t);
  for (int k = 0; k < t; ++k) {
    if (k == 1) {
      CHECK(std::abs(c[k]) > 1.0);
    } else {
      CHECK(std::abs(c[k]) < 1e-12);
    }
  }
}

TEST_CASE("dct matches direct summation") {
  for (int t : {1, 2, 5, 24, 73}) {
    const auto x = random_vector(t, t);
    const auto c = dct_encode(x, t);
    const auto ref = dct_oracle(x);
    for (int k = 0; k < t; ++k) CHECK(c[k] == doctest::Approx(ref[k]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("dct order validation") {
  const std::vector<double> x(4, 0.0);
  for (int k : {0, 5, -1}) {
    try {
      dct_encode(x, k);
      FAIL("expected InvalidOrder");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidOrder);
    }
  }
  CHECK_THROWS_AS(dct_decode(std::vector<double>(5, 0.0), 4), Error);
  for (double v : dct_decode(std::vector<double>(3, 0.0), 6)) CHECK(v == 0.0);
}

TEST_CASE("truncation error is monotone in the order") {
  const auto x = random_vector(32, 4);
  double prev = 1e300;
  for (int k = 1; k <= 32; ++k) {
    const auto y = dct_decode(dct_encode(x, k), 32);
    double mse = 0.0;
    for (int i = 0; i < 32; ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
    CHECK(mse <= prev + 1e-12);
    prev = mse;
  }
}

TEST_CASE("trackgrid encoding") {
  SUBCASE("constant tracks carry only DC terms") {
    TrackGrid tg(3, 10);
    for (int gy = 0; gy < 3; ++gy)
      for (int gx = 0; gx < 3; ++gx)
        for (int t = 0; t < 10; ++t) {
          tg.x(gy, gx, t) = 0.1 * gx;
          tg.y(gy, gx, t) = 0.2 * gy;
          tg.visible[tg.index(gy, gx, t)] = 1;
        }
    const auto dct = encode_trackgrid(tg, 6);
    REQUIRE(dct.size() == 9);
    for (const DctTrack& d : dct)
      for (int k = 1; k < 6; ++k) {
        CHECK(std::abs(d.coeffs_x[k]) < 1e-12);
        CHECK(std::abs(d.coeffs_y[k]) < 1e-12);
      }
  }
  SUBCASE("linear tracks match per-coordinate encoding in grid order") {
    TrackGrid tg(2, 12);
    for (int gy = 0; gy < 2; ++gy)
      for (int gx = 0; gx < 2; ++gx)
        for (int t = 0; t < 12; ++t) {
          tg.x(gy, gx, t) = 0.1 + 0.03 * t * (gx + 1);
          tg.y(gy, gx, t) = 0.7 - 0.02 * t * (gy + 1);
          tg.visible[tg.index(gy, gx, t)] = 1;
        }
    const auto dct = encode_trackgrid(tg, 5);
    for (int gy = 0; gy < 2; ++gy)
      for (int gx = 0; gx < 2; ++gx) {
        std::vector<double> xs, ys;
        for (int t = 0; t < 12; ++t) {
          xs.push_back(tg.x(gy, gx, t));
          ys.push_back(tg.y(gy, gx, t));
        }
        const auto ex = dct_oracle(xs);
        const auto ey = dct_oracle(ys);
        const DctTrack& d = dct[gy * 2 + gx];
        for (int k = 0; k < 5; ++k) {
          CHECK(d.coeffs_x[k] == doctest::Approx(ex[k]).scale(1.0));
          CHECK(d.coeffs_y[k] == doctest::Approx(ey[k]).scale(1.0));
        }
      }
    const auto tokens = dct_token_matrix(dct);
    CHECK(tokens.size() == 4 * 10);
    CHECK(tokens[5] == dct[0].coeffs_y[0]);
  }
  SUBCASE("invisible samples hold the last visible position") {
    TrackGrid tg(1, 4);
    const double xs[] = {0.1, 0.2, 9.0, 9.0};
    for (int t = 0; t < 4; ++t) {
      tg.x(0, 0, t) = xs[t];
      tg.y(0, 0, t) = 0.5;
      tg.visible[t] = t < 2;
    }
    const auto d = encode_trackgrid(tg, 4);
    const auto back = dct_decode(d[0].coeffs_x, 4);
    CHECK(back[2] == doctest::Approx(0.2));
    CHECK(back[3] == doctest::Approx(0.2));
  }
  SUBCASE("full-scale token width") {
    TrackGrid tg(1, 73);
    for (int t = 0; t < 73; ++t) tg.visible[t] = 1;
    CHECK(dct_token_matrix(encode_trackgrid(tg, 20)).size() == 40);
  }
}

TEST_CASE("keyframe interpolation") {
  const Box2D a{0.2, 0.2, 0.1, 0.1};
  const Box2D b{0.6, 0.6, 0.1, 0.1};
  SUBCASE("midpoint") {
    const auto seq = interpolate_keyframes(std::vector<Keyframe>{{0, a}, {10, b}}, 24);
    CHECK(seq[5].cx == doctest::Approx(0.4));
    CHECK(seq[5].cy == doctest::Approx(0.4));
    CHECK(seq[5].w == doctest::Approx(0.1));
    CHECK(seq[0] == a);
    CHECK(seq[10] == b);
    for (int t = 11; t < 24; ++t) CHECK(seq[t] == b);
  }
  SUBCASE("constant cases") {
    for (const auto& keys : {std::vector<Keyframe>{{0, a}}, std::vector<Keyframe>{{0, a}, {23, a}}}) {
      const auto seq = interpolate_keyframes(keys, 24);
      REQUIRE(seq.size() == 24);
      for (const Box2D& s : seq) CHECK(s == a);
    }
  }
  SUBCASE("outputs stay within the keys' hull") {
    const std::vector<Keyframe> keys{{0, a}, {7, b}, {15, Box2D{0.3, 0.9, 0.2, 0.05}}};
    const auto seq = interpolate_keyframes(keys, 20);
    for (const Keyframe& k : keys) CHECK(seq[k.frame_index] == k.box);
    for (const Box2D& s : seq) {
      CHECK(s.cx >= 0.2 - 1e-12);
      CHECK(s.cx <= 0.6 + 1e-12);
      CHECK(s.cy <= 0.9 + 1e-12);
      CHECK(s.h >= 0.05 - 1e-12);
    }
  }
  SUBCASE("errors") {
    auto code_of = [](std::vector<Keyframe> keys, int t) {
      try {
        interpolate_keyframes(keys, t);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::kFormat;
    };
    CHECK(code_of({}, 10) == ErrorCode::kEmptyKeys);
    CHECK(code_of({{0, a}, {5, b}, {3, a}}, 10) == ErrorCode::kUnsortedKeys);
    CHECK(code_of({{0, a}, {10, b}}, 10) == ErrorCode::kKeyOutOfRange);
    CHECK(code_of({{2, a}}, 10) == ErrorCode::kKeyOutOfRange);
  }
}

TEST_CASE("sequence perturbation") {
  BoxSequence seq(10000, Box2D{0.5, 0.5, 0.2, 0.2});
  CHECK(perturb_sequence(seq, 0.0, 0.0, 3) == seq);
  const auto a = perturb_sequence(seq, 0.02, 0.0, 3);
  CHECK(a == perturb_sequence(seq, 0.02, 0.0, 3));
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double d = a[i].cx - seq[i].cx;
    s += d;
    ss += d * d;
  }
  const double n = static_cast<double>(seq.size());
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.1));
}
