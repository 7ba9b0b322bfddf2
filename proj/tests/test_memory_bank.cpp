#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "dltta/array.hpp"
#include "dltta/errors.hpp"
#include "dltta/memory_bank.hpp"

using namespace dltta;

namespace {

std::vector<double> random_key(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> k(dim);
  for (auto& v : k) v = dist(rng);
  return k;
}

std::vector<double> random_dist(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> dist(0.01, 1.0);
  std::vector<double> p(dim);
  double total = 0.0;
  for (auto& v : p) total += (v = dist(rng));
  for (auto& v : p) v /= total;
  return p;
}

// Brute-force nearest neighbors reproducing the exact ranking contract:
// lower score first, ties to the larger insert_index.
std::vector<std::uint64_t> oracle_retrieve(const MemoryBank& bank,
                                           const std::vector<double>& query, std::size_t d,
                                           Similarity sim) {
  struct Row {
    double score;
    std::uint64_t index;
  };
  std::vector<Row> rows;
  for (const auto& e : bank.entries()) {
    double s = 0.0;
    if (sim == Similarity::l2) {
      for (std::size_t i = 0; i < query.size(); ++i)
        s += (query[i] - e.key[i]) * (query[i] - e.key[i]);
    } else {
      s = -cosine_similarity(query, e.key);
    }
    rows.push_back({s, e.insert_index});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.index > b.index;
  });
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < rows.size() && i < d; ++i) out.push_back(rows[i].index);
  return out;
}

std::vector<std::uint64_t> indices_of(const SupportSet& support) {
  std::vector<std::uint64_t> out;
  for (const auto* e : support) out.push_back(e->insert_index);
  return out;
}

}  // namespace

TEST_SUITE("memory_bank") {

TEST_CASE("similarity names round-trip") {
  CHECK(similarity_from_string("l2") == Similarity::l2);
  CHECK(similarity_from_string("cosine") == Similarity::cosine);
  CHECK(similarity_name(Similarity::l2) == std::string("l2"));
  CHECK(similarity_name(Similarity::cosine) == std::string("cosine"));
  CHECK_THROWS_AS(similarity_from_string("dot"), ConfigError);
}

TEST_CASE("fifo eviction keeps the newest entries") {
  MemoryBank bank(3);
  for (int i = 0; i < 4; ++i) bank.push({double(i)}, {1.0});
  REQUIRE(bank.size() == 3);
  std::vector<std::uint64_t> got;
  for (const auto& e : bank.entries()) got.push_back(e.insert_index);
  CHECK(got == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(bank.entries().front().key[0] == 1.0);

  MemoryBank big(20);
  for (int i = 0; i < 1000; ++i) big.push({double(i)}, {1.0});
  REQUIRE(big.size() == 20);
  CHECK(big.entries().front().insert_index == 980);
  CHECK(big.entries().back().insert_index == 999);
}

TEST_CASE("push validates capacity, extents, and distributions") {
  CHECK_THROWS_AS(MemoryBank(0), DomainError);

  MemoryBank bank(4);
  CHECK_THROWS_AS(bank.push({}, {1.0}), DimensionError);
  CHECK_THROWS_AS(bank.push({1.0}, {}), DimensionError);
  bank.push({1.0, 2.0}, {0.5, 0.5});
  CHECK_THROWS_AS(bank.push({1.0}, {0.5, 0.5}), DimensionError);       // key extent drift
  CHECK_THROWS_AS(bank.push({1.0, 2.0}, {1.0}), DimensionError);       // value extent drift
  CHECK_THROWS_AS(bank.push({1.0, 2.0}, {0.7, 0.7}), DomainError);     // sums to 1.4
  CHECK_THROWS_AS(bank.push({1.0, 2.0}, {-0.1, 1.1}), DomainError);    // negative mass
  CHECK_THROWS_AS(bank.push({std::nan(""), 2.0}, {0.5, 0.5}), DomainError);
  CHECK(bank.size() == 1);  // the rejects must not have been admitted
}

TEST_CASE("retrieve basics") {
  MemoryBank bank(8);
  CHECK_THROWS_AS(bank.retrieve(std::vector<double>{0.0}, 0, Similarity::l2), DomainError);
  CHECK(bank.retrieve(std::vector<double>{0.0}, 3, Similarity::l2).empty());  // warm-up signal

  bank.push({0.0, 0.0}, {1.0, 0.0});
  bank.push({3.0, 0.0}, {0.0, 1.0});
  bank.push({1.0, 0.0}, {0.5, 0.5});
  CHECK_THROWS_AS(bank.retrieve(std::vector<double>{0.0}, 2, Similarity::l2), DimensionError);

  const std::vector<double> q{0.9, 0.0};
  const auto support = bank.retrieve(q, 2, Similarity::l2);
  REQUIRE(support.size() == 2);
  CHECK(support[0]->insert_index == 2);  // key (1,0) is nearest to (0.9,0)
  CHECK(support[1]->insert_index == 0);

  // The exact key comes back first, and d caps at the bank size.
  const auto exact = bank.retrieve(std::vector<double>{3.0, 0.0}, 10, Similarity::l2);
  REQUIRE(exact.size() == 3);
  CHECK(exact[0]->insert_index == 1);
}

TEST_CASE("equidistant keys resolve ties toward the most recent push") {
  MemoryBank bank(4);
  bank.push({1.0, 0.0}, {1.0});
  bank.push({-1.0, 0.0}, {1.0});
  bank.push({0.0, 1.0}, {1.0});
  const auto support = bank.retrieve(std::vector<double>{0.0, 0.0}, 3, Similarity::l2);
  REQUIRE(support.size() == 3);  // all at squared distance 1
  CHECK(indices_of(support) == std::vector<std::uint64_t>{2, 1, 0});
}

TEST_CASE("retrieve matches a brute-force oracle") {
  std::mt19937_64 rng(71);
  for (const Similarity sim : {Similarity::l2, Similarity::cosine}) {
    MemoryBank bank(64);
    std::uniform_int_distribution<int> d_pick(1, 12);
    for (int step = 0; step < 400; ++step) {
      bank.push(random_key(rng, 6), random_dist(rng, 4));
      const auto query = random_key(rng, 6);
      const std::size_t d = static_cast<std::size_t>(d_pick(rng));
      const auto got = indices_of(bank.retrieve(query, d, sim));
      CHECK(got == oracle_retrieve(bank, query, d, sim));
    }
  }
}

TEST_CASE("reference_prediction averages the support values") {
  MemoryBank bank(4);
  bank.push({0.0}, {1.0, 0.0});
  bank.push({1.0}, {0.0, 1.0});

  const auto one = bank.retrieve(std::vector<double>{0.0}, 1, Similarity::l2);
  CHECK(reference_prediction(one) == std::vector<double>{1.0, 0.0});

  const auto both = bank.retrieve(std::vector<double>{0.5}, 2, Similarity::l2);
  const auto ref = reference_prediction(both);
  REQUIRE(ref.size() == 2);
  CHECK(ref[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ref[1] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(reference_prediction(SupportSet{}), StateError);
}

TEST_CASE("reference_prediction matches a columnwise mean oracle") {
  std::mt19937_64 rng(72);
  MemoryBank bank(16);
  for (int i = 0; i < 8; ++i) bank.push(random_key(rng, 3), random_dist(rng, 5));
  const auto support = bank.retrieve(random_key(rng, 3), 8, Similarity::l2);
  REQUIRE(support.size() == 8);
  const auto ref = reference_prediction(support);
  double total = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    double mean = 0.0;
    for (const auto* e : support) mean += e->value[j];
    mean /= 8.0;
    CHECK(ref[j] == doctest::Approx(mean).epsilon(1e-12));
    total += ref[j];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));  // a mean of distributions
}

TEST_CASE("sample_discrepancy hand values and symmetry") {
  const std::vector<double> p{0.5, 0.5};
  CHECK(sample_discrepancy(p, p) == 0.0);

  // (KL([.5,.5]||[.9,.1]) + KL([.9,.1]||[.5,.5])) / 2
  const std::vector<double> q{0.9, 0.1};
  const double want = 0.5 * (0.51082562376599072 + 0.36806420716849716);
  CHECK(sample_discrepancy(p, q) == doctest::Approx(want).epsilon(1e-12));
  CHECK(sample_discrepancy(q, p) == doctest::Approx(sample_discrepancy(p, q)).epsilon(1e-12));

  std::mt19937_64 rng(73);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_dist(rng, 4);
    const auto b = random_dist(rng, 4);
    const double d = sample_discrepancy(a, b);
    CHECK(d >= -1e-12);
    CHECK(d == doctest::Approx(sample_discrepancy(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("batch_discrepancy is the arithmetic mean") {
  CHECK(batch_discrepancy(std::vector<double>{0.7}) == 0.7);
  CHECK(batch_discrepancy(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(batch_discrepancy(std::vector<double>{}), DomainError);

  std::mt19937_64 rng(74);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  std::vector<double> xs(200);
  double mean = 0.0;
  for (auto& v : xs) mean += (v = dist(rng));
  mean /= 200.0;
  CHECK(batch_discrepancy(xs) == doctest::Approx(mean).epsilon(1e-12));
}

}  // TEST_SUITE
