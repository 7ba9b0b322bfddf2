#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "dltta/array.hpp"
#include "dltta/errors.hpp"

using namespace dltta;

namespace {

NumericArray random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> dist(0.0, scale);
  NumericArray m(r, c);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

NumericArray random_distribution_rows(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(1e-4, 1.0);
  NumericArray p(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += (p.at(i, j) = dist(rng));
    for (std::size_t j = 0; j < c; ++j) p.at(i, j) /= sum;
  }
  return p;
}

// Naive triple loop, no kernel dispatch.
NumericArray matmul_oracle(const NumericArray& a, const NumericArray& b) {
  NumericArray c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

}  // namespace

TEST_SUITE("array") {

TEST_CASE("from_rows and accessors") {
  const auto m = NumericArray::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  CHECK(m.at(0, 2) == 3);
  CHECK(m.at(1, 0) == 4);
  CHECK(m.row_span(1).size() == 3);
  CHECK(m.finite());
  CHECK_THROWS_AS(NumericArray::from_rows({{1, 2}, {3}}), DimensionError);
}

TEST_CASE("matmul hand case and identity") {
  const auto a = NumericArray::from_rows({{1, 2, 3}, {4, 5, 6}});
  const auto b = NumericArray::from_rows({{7, 8}, {9, 10}, {11, 12}});
  const auto c = matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.at(0, 0) == doctest::Approx(58).epsilon(1e-15));
  CHECK(c.at(0, 1) == doctest::Approx(64).epsilon(1e-15));
  CHECK(c.at(1, 0) == doctest::Approx(139).epsilon(1e-15));
  CHECK(c.at(1, 1) == doctest::Approx(154).epsilon(1e-15));

  NumericArray eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  std::mt19937_64 rng(11);
  const auto x = random_matrix(3, 5, rng);
  CHECK(matmul(eye, x) == x);
}

TEST_CASE("matmul matches triple-loop oracle on random extents") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> ext(1, 16);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = ext(rng), k = ext(rng), n = ext(rng);
    const auto a = random_matrix(m, k, rng);
    const auto b = random_matrix(k, n, rng);
    const auto got = matmul(a, b);
    const auto want = matmul_oracle(a, b);
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul rejects mismatched extents and non-finite products") {
  const NumericArray a(2, 3, 1.0);
  const NumericArray b(4, 2, 1.0);
  CHECK_THROWS_AS(matmul(a, b), DimensionError);

  NumericArray big(1, 2, 1e308);
  NumericArray ones(2, 1, 2.0);
  CHECK_THROWS_AS(matmul(big, ones), DomainError);
}

TEST_CASE("softmax hand values and row normalization") {
  const auto p = softmax(NumericArray::from_rows({{0, 0, 0, 0}}));
  for (std::size_t j = 0; j < 4; ++j) CHECK(p.at(0, j) == doctest::Approx(0.25).epsilon(1e-15));

  // ln 2 gap -> 2:1 odds.
  const auto q = softmax(NumericArray::from_rows({{std::log(2.0), 0.0}}));
  CHECK(q.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(q.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one for extreme logits") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(-500.0, 500.0);
  NumericArray logits(20, 6);
  for (auto& v : logits.data) v = dist(rng);
  const auto p = softmax(logits);
  CHECK(p.finite());
  for (std::size_t i = 0; i < p.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      sum += p.at(i, j);
      CHECK(p.at(i, j) >= 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(37);
  const auto logits = random_matrix(4, 5, rng, 3.0);
  auto shifted = logits;
  for (std::size_t i = 0; i < shifted.rows; ++i)
    for (std::size_t j = 0; j < shifted.cols; ++j) shifted.at(i, j) += 123.456;
  const auto p = softmax(logits);
  const auto q = softmax(shifted);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(p.data[i] == doctest::Approx(q.data[i]).epsilon(1e-12));
}

TEST_CASE("softmax rejects empty rows") {
  CHECK_THROWS_AS(softmax(NumericArray(2, 0)), DimensionError);
}

TEST_CASE("kl_div hand value, self distance, and Gibbs bound") {
  const std::vector<double> u = {0.5, 0.5};
  const std::vector<double> v = {0.9, 0.1};
  // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
  CHECK(kl_div(u, v) == doctest::Approx(0.51082562376599072).epsilon(1e-12));
  CHECK(kl_div(v, u) == doctest::Approx(0.36806420716849716).epsilon(1e-12));
  CHECK(kl_div(u, u) == 0.0);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_distribution_rows(1, 5, rng);
    const auto q = random_distribution_rows(1, 5, rng);
    CHECK(kl_div(p.row_span(0), q.row_span(0)) >= -1e-12);
    CHECK(kl_div(p.row_span(0), p.row_span(0)) == 0.0);
  }
}

TEST_CASE("kl_div clamps zero probabilities to a finite value") {
  const std::vector<double> p = {1.0, 0.0};
  const std::vector<double> q = {0.0, 1.0};
  const double d = kl_div(p, q);
  CHECK(std::isfinite(d));
  CHECK(d > 0.0);
  CHECK_THROWS_AS(kl_div(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("l2_distance") {
  const std::vector<double> a = {0, 0};
  const std::vector<double> b = {3, 4};
  CHECK(l2_distance(a, b) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(l2_distance(b, b) == 0.0);

  std::mt19937_64 rng(43);
  std::normal_distribution<double> dist(0.0, 2.0);
  std::vector<double> x(9), y(9);
  for (std::size_t i = 0; i < 9; ++i) {
    x[i] = dist(rng);
    y[i] = dist(rng);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < 9; ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  CHECK(l2_distance(x, y) == doctest::Approx(std::sqrt(sq)).epsilon(1e-13));
  CHECK_THROWS_AS(l2_distance(a, x), DimensionError);
}

TEST_CASE("cosine_similarity") {
  const std::vector<double> a = {1, 0};
  const std::vector<double> b = {0, 1};
  const std::vector<double> c = {2, 0};
  const std::vector<double> d = {-3, 0};
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_similarity(a, c) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, d) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("check_distribution_rows") {
  CHECK_NOTHROW(check_distribution_rows(NumericArray::from_rows({{0.25, 0.75}, {1.0, 0.0}})));
  CHECK_THROWS_AS(check_distribution_rows(NumericArray::from_rows({{0.5, 0.4}})), DomainError);
  CHECK_THROWS_AS(check_distribution_rows(NumericArray::from_rows({{1.2, -0.2}})), DomainError);
}

}  // TEST_SUITE
