#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "atcl/errors.hpp"
#include "atcl/signals.hpp"

using namespace atcl;
using namespace atcl::signals;

namespace {

sim::ClientUpdate upd(std::vector<double> delta) {
  sim::ClientUpdate u;
  u.delta = std::move(delta);
  return u;
}

// Two-pass population std written out longhand, used as the oracle.
double oracle_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

// Closed-form OLS slope against x = 0..n-1.
double oracle_slope(const std::vector<double>& ys) {
  const double n = static_cast<double>(ys.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += ys[i];
    sxy += x * ys[i];
    sxx += x * x;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("reference_update is the coordinate-wise median") {
  const std::vector<sim::ClientUpdate> one{upd({0.5, -2.0})};
  CHECK(reference_update(one) == std::vector<double>{0.5, -2.0});

  const std::vector<sim::ClientUpdate> three{upd({1, 1}), upd({3, 3}), upd({100, 100})};
  CHECK(reference_update(three) == std::vector<double>{3, 3});

  const std::vector<sim::ClientUpdate> even{upd({1, 4}), upd({2, 0}), upd({10, 1}), upd({3, 2})};
  CHECK(reference_update(even) == std::vector<double>{2.5, 1.5});

  CHECK_THROWS_AS(reference_update(std::vector<sim::ClientUpdate>{}), SignalError);
  CHECK_THROWS_AS(reference_update(std::vector<sim::ClientUpdate>{upd({1}), upd({1, 2})}), SignalError);
}

TEST_CASE("median reference survives a minority of sign flips") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = random_vec(rng, 12, -1.0, 1.0);
    std::vector<sim::ClientUpdate> ups;
    for (int i = 0; i < 7; ++i) ups.push_back(upd(v));
    std::vector<double> neg(v);
    for (double& x : neg) x = -x;
    for (int i = 0; i < 3; ++i) ups.push_back(upd(neg));
    // With 7 of 10 copies equal to v, every coordinate's median is v itself.
    const auto ref = reference_update(ups);
    CHECK(ref == v);
    double dot = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) dot += ref[k] * v[k];
    CHECK(dot > 0.0);
  }
}

TEST_CASE("cosine similarity") {
  const std::vector<double> r{1.0, 2.0, -0.5};
  CHECK(compute_similarity(r, r) == doctest::Approx(1.0));
  CHECK(compute_similarity(std::vector<double>{-1.0, -2.0, 0.5}, r) == doctest::Approx(-1.0));
  CHECK(compute_similarity(std::vector<double>{2.0, -1.0, 0.0}, r) == doctest::Approx(0.0));
  CHECK(compute_similarity(std::vector<double>{0, 0, 0}, r) == 0.0);
  CHECK(compute_similarity(r, std::vector<double>{0, 0, 0}) == 0.0);
  CHECK_THROWS_AS(compute_similarity(std::vector<double>{1.0}, r), SignalError);
}

TEST_CASE("similarity is scale invariant and bounded") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto u = random_vec(rng, 7, -2.0, 2.0);
    const auto ref = random_vec(rng, 7, -2.0, 2.0);
    const double c = scale(rng);
    std::vector<double> cu(u);
    for (double& x : cu) x *= c;
    const double s = compute_similarity(u, ref);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(compute_similarity(cu, ref) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("volatility") {
  CHECK(compute_volatility(std::vector<double>{0.4, 0.4, 0.4, 0.4}, 5) == 0.0);
  CHECK(compute_volatility(std::vector<double>{1.0, -1.0}, 5) == doctest::Approx(1.0));
  const std::vector<double> h{0.9, 0.8, 1.0, 0.7};
  CHECK(compute_volatility(h, 4) == doctest::Approx(oracle_std(h)).epsilon(1e-12));
  CHECK(std::abs(compute_volatility(h, 4) - 0.1118) < 1e-4);
  // Only the last `window` entries count.
  CHECK(compute_volatility(std::vector<double>{-1.0, 0.5, 0.5}, 2) == 0.0);
  CHECK(compute_volatility(std::vector<double>{0.3}, 5) == 0.0);
  CHECK(compute_volatility(std::vector<double>{}, 5) == 0.0);
}

TEST_CASE("volatility is translation invariant") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = random_vec(rng, 1 + trial % 9, -0.5, 0.5);
    const double c = shift(rng);
    std::vector<double> moved(h);
    for (double& x : moved) x += c;
    CHECK(compute_volatility(moved, 5) == doctest::Approx(compute_volatility(h, 5)).epsilon(1e-9));
  }
}

TEST_CASE("participation EMA") {
  CHECK(update_participation(1.0, true, 0.37) == 1.0);
  CHECK(update_participation(0.5, true, 0.2) == doctest::Approx(0.6));
  CHECK(update_participation(0.5, false, 0.2) == doctest::Approx(0.4));
}

TEST_CASE("participation converges at the exact geometric rate") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = 0.01 + 0.98 * unit(rng);
    const double p0 = unit(rng);
    const bool b = trial % 2 == 0;
    const double target = b ? 1.0 : 0.0;
    double p = p0;
    for (int k = 1; k <= 30; ++k) {
      p = update_participation(p, b, beta);
      const double expected = std::pow(1.0 - beta, k) * std::abs(p0 - target);
      // Relative 1e-9, plus a few ulps of 1.0 for the cancellation in p - 1.
      CHECK(std::abs(std::abs(p - target) - expected) <= 1e-9 * expected + 1e-15);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("loss trend") {
  CHECK(compute_loss_trend(std::vector<double>{0.7, 0.7, 0.7, 0.7}, 5) == 0.0);
  CHECK(compute_loss_trend(std::vector<double>{1.0, 0.9, 0.8}, 3) == doctest::Approx(-0.1));
  const std::vector<double> h{1.0, 1.2, 1.1, 1.4};
  CHECK(compute_loss_trend(h, 4) == doctest::Approx(oracle_slope(h)).epsilon(1e-12));
  CHECK(std::abs(compute_loss_trend(h, 4) - 0.11) < 0.01);
  // Window keeps only the tail: the early jump is ignored.
  CHECK(compute_loss_trend(std::vector<double>{9.0, 1.0, 1.0, 1.0}, 3) == 0.0);
  CHECK(compute_loss_trend(std::vector<double>{2.0}, 5) == 0.0);
}

TEST_CASE("loss trend of a linear sequence equals its slope") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 3.0 * d(rng);
    const double slope = d(rng);
    std::vector<double> h;
    for (int i = 0; i < 2 + trial % 10; ++i) h.push_back(a + slope * i);
    CHECK(std::abs(compute_loss_trend(h, 5) - slope) <= 1e-12);
  }
}

TEST_CASE("trust dispersion") {
  CHECK(compute_trust_dispersion(std::vector<double>{0.3, 0.3, 0.3}) == 0.0);
  CHECK(compute_trust_dispersion(std::vector<double>{0.0, 1.0}) == doctest::Approx(0.5));
  const std::vector<double> t{0.9, 0.9, 0.9, 0.1, 0.1};
  CHECK(compute_trust_dispersion(t) == doctest::Approx(oracle_std(t)).epsilon(1e-12));
  CHECK(std::abs(compute_trust_dispersion(t) - 0.3919) < 1e-4);
  CHECK_THROWS_AS(compute_trust_dispersion(std::vector<double>{}), SignalError);
}
