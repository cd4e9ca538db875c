// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "atcl/aggregation.hpp"
#include "atcl/config.hpp"
#include "atcl/controller.hpp"
#include "atcl/runner.hpp"
#include "atcl/signals.hpp"
#include "atcl/trust.hpp"
#include "topsis_reference.hpp"

namespace fs = std::filesystem;
using namespace atcl;
using control::ControllerKind;
using control::OperatingState;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "atcl_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<harness::SuiteRow> suite(harness::ScenarioConfig cfg, std::vector<ControllerKind> kinds) {
  cfg.suite.controllers = std::move(kinds);
  cfg.suite.intensities = {0.0};
  return harness::run_suite(cfg, {}, workers());
}

double median_accuracy(const std::vector<harness::SuiteRow>& rows, ControllerKind kind) {
  std::vector<double> xs;
  for (const auto& r : rows) {
    if (r.controller == kind) xs.push_back(r.summary.final_accuracy);
  }
  return harness::median(xs);
}

// 1. Library entropy weights and TOPSIS closeness against the reference.
Outcome topsis_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> rows(2, 6), cols(2, 4);
  double worst = 0.0;
  int rank_mismatch = 0;
  for (int t = 0; t < 200; ++t) {
    reference::Matrix x(static_cast<std::size_t>(rows(rng)));
    const auto n = static_cast<std::size_t>(cols(rng));
    for (auto& r : x) {
      r.resize(n);
      for (double& v : r) v = unit(rng);
    }
    const auto m = trust::DecisionMatrix::from_rows(x);
    const auto w_ref = reference::entropy_weights(x);
    const auto w_lib = trust::entropy_weights(m);
    const auto c_ref = reference::closeness(x, w_ref);
    const auto c_lib = trust::topsis_closeness(m, w_lib);
    for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(w_ref[j] - w_lib[j]));
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(c_ref[i] - c_lib[i]));
    std::vector<std::size_t> a(x.size()), b(x.size());
    std::iota(a.begin(), a.end(), std::size_t{0});
    std::iota(b.begin(), b.end(), std::size_t{0});
    std::stable_sort(a.begin(), a.end(), [&](auto i, auto j) { return c_ref[i] > c_ref[j]; });
    std::stable_sort(b.begin(), b.end(), [&](auto i, auto j) { return c_lib[i] > c_lib[j]; });
    if (a != b) ++rank_mismatch;
  }
  Outcome o;
  o.pass = worst <= 1e-9 && rank_mismatch == 0;
  o.detail = "200 matrices, max |diff| = " + fmt("%.2e", worst) + ", ranking mismatches = " +
             std::to_string(rank_mismatch) + " (tol 1e-9, exact ranking)";
  return o;
}

// 2. Scripted indicator traces through the ATCL controller.
Outcome controller_traces() {
  struct Step {
    double L;
    double sigma;
    int volatile_clients;
  };
  const Step rise{0.2, 0.3, 0}, fall{-0.05, 0.0, 0}, calm{0.0, 0.0, 0};
  const auto rep = [](Step s, int n) { return std::vector<Step>(static_cast<std::size_t>(n), s); };
  const auto cat = [](std::initializer_list<std::vector<Step>> parts) {
    std::vector<Step> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  };
  constexpr auto N = OperatingState::kNormal, D = OperatingState::kDegraded, S = OperatingState::kStabilising;
  struct Trace {
    std::string name;
    std::vector<Step> steps;
    std::vector<OperatingState> expected;
  };
  std::vector<Step> osc;
  for (int i = 0; i < 10; ++i) osc.push_back(i % 2 ? fall : rise);
  const std::vector<Trace> traces{
      {"sustained rise", rep(rise, 5), {N, N, D, D, D}},
      {"single-round spike", cat({rep(calm, 2), {rise}, rep(calm, 4)}), std::vector(7, N)},
      {"recovery", cat({rep(rise, 3), rep(fall, 3)}), {N, N, D, D, D, S}},
      {"oscillating loss", osc, std::vector(10, N)},
      {"all calm", rep(calm, 8), std::vector(8, N)},
      {"dispersion only", rep({0.0, 0.5, 0}, 6), std::vector(6, N)},
      {"volatility fraction", rep({0.1, 0.0, 2}, 4), {N, N, D, D}},
      {"graduation", cat({rep(rise, 3), rep(fall, 3), rep(calm, 5)}), {N, N, D, D, D, S, S, S, S, S, N}},
  };
  Outcome o;
  int ok = 0;
  for (const auto& tr : traces) {
    control::Controller ctl(ControllerKind::kAtcl, {});
    trust::TrustTable table;
    std::vector<OperatingState> got;
    bool spurious_exclusion = false;
    for (std::size_t r = 0; r < tr.steps.size(); ++r) {
      const int round = static_cast<int>(r);
      std::vector<signals::SignalVector> sig;
      for (int c = 0; c < 5; ++c) {
        table.record(c).smoothed_trust_T = 0.8;
        sig.push_back({c, round, 0.9, c < tr.steps[r].volatile_clients ? 0.5 : 0.0, 1.0});
      }
      const signals::SystemIndicators ind{round, tr.steps[r].L, tr.steps[r].sigma};
      const auto d = ctl.step({round, &table, sig, ind, {}});
      if (d.state_after != D && !d.exclude.empty()) spurious_exclusion = true;
      got.push_back(ctl.state().state);
    }
    if (got == tr.expected && !spurious_exclusion) {
      ++ok;
    } else {
      o.pass = false;
      o.detail += " [" + tr.name + " mismatch]";
    }
  }
  o.detail = std::to_string(ok) + "/" + std::to_string(traces.size()) + " traces exact" + o.detail;
  return o;
}

// 3. S-poison, ATCL, 10 seeds.
Outcome trust_separation() {
  const auto rows = suite(harness::canonical_scenario("S-poison"), {ControllerKind::kAtcl});
  Outcome o;
  double min_gap = 1e9, min_recall = 1e9;
  for (const auto& r : rows) {
    const auto& s = r.summary;
    const double gap = s.mean_benign_trust.value_or(0) - s.mean_adversary_trust.value_or(1);
    const double recall = s.final_recall.value_or(0.0);
    min_gap = std::min(min_gap, gap);
    min_recall = std::min(min_recall, recall);
    if (gap < 0.2 || recall < 0.8) o.pass = false;
  }
  o.detail = std::to_string(rows.size()) + " seeds, min trust gap = " + fmt("%.3f", min_gap) +
             " (>= 0.2), min final recall = " + fmt("%.3f", min_recall) + " (>= 0.8)";
  if (rows.size() != 10) o.pass = false;
  return o;
}

// 4. S-flip ordering against NoTrust and the oracle; S-clean no-harm.
Outcome robustness_ordering() {
  const auto flip = harness::canonical_scenario("S-flip");
  const auto rows = suite(flip, {ControllerKind::kAtcl, ControllerKind::kNoTrust});
  auto oracle_cfg = flip;
  oracle_cfg.oracle_exclusion = true;
  const auto oracle_rows = suite(oracle_cfg, {ControllerKind::kNoTrust});
  const double atcl = median_accuracy(rows, ControllerKind::kAtcl);
  const double none = median_accuracy(rows, ControllerKind::kNoTrust);
  const double oracle = median_accuracy(oracle_rows, ControllerKind::kNoTrust);

  const auto clean = suite(harness::canonical_scenario("S-clean"), {ControllerKind::kAtcl, ControllerKind::kNoTrust});
  const double clean_atcl = median_accuracy(clean, ControllerKind::kAtcl);
  const double clean_none = median_accuracy(clean, ControllerKind::kNoTrust);

  Outcome o;
  o.pass = atcl >= none + 0.05 && std::abs(atcl - oracle) <= 0.05 && std::abs(clean_atcl - clean_none) <= 0.01;
  o.detail = "S-flip median acc atcl=" + fmt("%.4f", atcl) + " none=" + fmt("%.4f", none) +
             " oracle=" + fmt("%.4f", oracle) + " (atcl >= none+0.05, |atcl-oracle| <= 0.05); S-clean atcl=" +
             fmt("%.4f", clean_atcl) + " none=" + fmt("%.4f", clean_none) + " (|diff| <= 0.01)";
  return o;
}

// 5. S-noisy flip counts and benign exclusion length.
Outcome oscillation_reduction() {
  const auto rows = suite(harness::canonical_scenario("S-noisy"), {ControllerKind::kAtcl, ControllerKind::kFixedAtsssf});
  std::vector<double> atcl_flips, fixed_flips;
  int longest = 0;
  for (const auto& r : rows) {
    if (r.controller == ControllerKind::kAtcl) {
      atcl_flips.push_back(r.summary.total_flips);
      longest = std::max(longest, r.summary.longest_benign_exclusion);
    } else {
      fixed_flips.push_back(r.summary.total_flips);
    }
  }
  const double a = harness::median(atcl_flips);
  const double f = harness::median(fixed_flips);
  Outcome o;
  o.pass = a <= f && longest < 20;
  o.detail = "median flips atcl=" + fmt("%.1f", a) + " fixed=" + fmt("%.1f", f) +
             " (atcl <= fixed); longest benign exclusion under atcl = " + std::to_string(longest) +
             " rounds (< 20)";
  return o;
}

// Per-round messages and payload bytes exactly as serialized in metrics.jsonl.
std::string overhead_trace(const fs::path& metrics) {
  std::ifstream in(metrics);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    const auto j = harness::Json::parse(line);
    if (j.value("record", "") != "round") continue;
    out += j.at("messages").dump() + "," + j.at("payload_bytes").dump() + ";";
  }
  return out;
}

const std::vector<ControllerKind> kAllKinds{ControllerKind::kAtcl, ControllerKind::kFixedAtsssf,
                                            ControllerKind::kAdaptiveAtsssf, ControllerKind::kNoTrust};

// 6. Overhead identical for every controller.
Outcome overhead_neutrality() {
  Outcome o;
  int compared = 0;
  for (const char* name : {"S-churn", "S-poison", "S-noisy"}) {
    const auto cfg = harness::canonical_scenario(name);
    for (std::uint64_t seed : {1u, 2u}) {
      std::string base;
      for (auto kind : kAllKinds) {
        const auto dir = scratch(std::string("overhead_") + name + "_" + std::string(control::to_string(kind)));
        harness::write_run(harness::run_scenario(cfg, seed, kind), dir);
        const auto trace = overhead_trace(dir / "metrics.jsonl");
        if (trace.empty()) o.pass = false;
        if (base.empty()) base = trace;
        if (trace != base) {
          o.pass = false;
          o.detail += std::string(" [") + name + " differs]";
        }
        ++compared;
      }
    }
  }
  o.detail = std::to_string(compared) + " runs (3 scenarios x 2 seeds x 4 controllers), per-round messages/bytes " +
             (o.pass ? "identical" : "differ") + o.detail;
  return o;
}

// 7. Repeat runs are byte-identical.
Outcome determinism() {
  Outcome o;
  int compared = 0;
  for (const char* name : {"S-poison", "S-churn"}) {
    const auto cfg = harness::canonical_scenario(name);
    for (auto kind : kAllKinds) {
      const auto a = scratch("det_a");
      const auto b = scratch("det_b");
      harness::write_run(harness::run_scenario(cfg, 3, kind), a);
      harness::write_run(harness::run_scenario(cfg, 3, kind), b);
      for (const char* f : {"metrics.jsonl", "decisions.jsonl", "summary.json"}) {
        const auto x = slurp(a / f);
        if (x.empty() || x != slurp(b / f)) {
          o.pass = false;
          o.detail += std::string(" [") + name + "/" + f + " differs]";
        }
        ++compared;
      }
    }
  }
  o.detail = std::to_string(compared) + " artifact pairs byte-identical" + o.detail;
  return o;
}

// 8. Numerical invariants on random inputs.
Outcome numerical_invariants() {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Outcome o;
  auto fail = [&](const std::string& what) {
    o.pass = false;
    o.detail += " [" + what + "]";
  };

  // EMA boundedness.
  for (int t = 0; t < 100000; ++t) {
    const double alpha = std::max(unit(rng), 1e-9);
    const double v = trust::update_trust(unit(rng), unit(rng), alpha);
    if (v < 0.0 || v > 1.0) {
      fail("ema bound");
      break;
    }
  }

  // TOPSIS positive column scaling.
  double worst_scale = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = 2 + static_cast<std::size_t>(t % 5), n = 2 + static_cast<std::size_t>(t % 3);
    trust::DecisionMatrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) = unit(rng);
    std::vector<double> w(n);
    for (double& x : w) x = 0.1 + unit(rng);
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= ws;
    auto b = a;
    const double c = std::exp(8.0 * unit(rng) - 4.0);
    for (std::size_t i = 0; i < m; ++i) b.at(i, static_cast<std::size_t>(t) % n) *= c;
    const auto ca = trust::topsis_closeness(a, w), cb = trust::topsis_closeness(b, w);
    for (std::size_t i = 0; i < m; ++i) worst_scale = std::max(worst_scale, std::abs(ca[i] - cb[i]));
  }
  if (worst_scale > 1e-9) fail("column scaling");

  // Aggregation convexity and zero influence of omitted clients.
  for (int t = 0; t < 500; ++t) {
    const int k = 1 + t % 7;
    const std::size_t dim = 1 + static_cast<std::size_t>(t % 6);
    std::vector<sim::ClientUpdate> ups;
    trust::TrustTable table;
    std::set<sim::ClientId> excluded;
    for (int c = 0; c < k; ++c) {
      sim::ClientUpdate u;
      u.client_id = c;
      u.num_samples = 1 + static_cast<int>(100 * unit(rng));
      u.delta.resize(dim);
      for (double& x : u.delta) x = 2.0 * unit(rng) - 1.0;
      ups.push_back(u);
      table.record(c).smoothed_trust_T = unit(rng);
      if (unit(rng) < 0.2) excluded.insert(c);
    }
    const double theta = 0.5 * unit(rng);
    const sim::GlobalModel start{std::vector<double>(dim, 0.0), 0};
    const auto [model, rep] = agg::aggregate(start, ups, table, theta, excluded);
    for (std::size_t d = 0; d < dim && !rep.included_ids.empty(); ++d) {
      double lo = 1e300, hi = -1e300;
      for (auto id : rep.included_ids) {
        lo = std::min(lo, ups[static_cast<std::size_t>(id)].delta[d]);
        hi = std::max(hi, ups[static_cast<std::size_t>(id)].delta[d]);
      }
      if (model.parameters[d] < lo - 1e-12 || model.parameters[d] > hi + 1e-12) fail("convexity");
    }
    auto poked = ups;
    for (auto id : rep.omitted_ids)
      for (double& x : poked[static_cast<std::size_t>(id)].delta) x = 1e9 * (unit(rng) - 0.5);
    if (agg::aggregate(start, poked, table, theta, excluded).first.parameters != model.parameters) {
      fail("omitted influence");
    }
  }

  // Participation EMA converges at exactly (1 - beta)^k.
  for (int t = 0; t < 200; ++t) {
    const double beta = 0.01 + 0.98 * unit(rng);
    const double p0 = unit(rng);
    const bool b = t % 2 == 0;
    double p = p0;
    for (int k = 1; k <= 40; ++k) {
      p = signals::update_participation(p, b, beta);
      const double expected = std::pow(1.0 - beta, k) * std::abs(p0 - (b ? 1.0 : 0.0));
      const double err = std::abs(std::abs(p - (b ? 1.0 : 0.0)) - expected);
      if (err > 1e-9 * expected + 1e-15) fail("participation rate");
    }
  }

  o.detail = "EMA bounds (1e5 draws), column scaling max diff " + fmt("%.1e", worst_scale) +
             " (<= 1e-9), convexity + zero influence (500 rounds), participation rate (200 traces)" + o.detail;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "TOPSIS oracle equivalence", topsis_oracle},
      {2, "controller state-machine traces", controller_traces},
      {3, "trust separation under attack (S-poison)", trust_separation},
      {4, "robustness ordering (S-flip, S-clean)", robustness_ordering},
      {5, "oscillation reduction (S-noisy)", oscillation_reduction},
      {6, "overhead neutrality", overhead_neutrality},
      {7, "determinism", determinism},
      {8, "numerical invariants", numerical_invariants},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
