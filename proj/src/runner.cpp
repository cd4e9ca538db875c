#include "atcl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "atcl/aggregation.hpp"
#include "atcl/errors.hpp"
#include "atcl/signals.hpp"
#include "atcl/trust.hpp"

namespace atcl::harness {

namespace fs = std::filesystem;
using sim::ClientId;

namespace {

Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Json to_json(const RoundMetrics& m) {
  Json j;
  j["record"] = "round";
  j["round"] = m.round;
  j["global_loss"] = m.global_loss;
  j["global_accuracy"] = m.global_accuracy;
  j["agent_state"] = std::string(control::to_string(m.agent_state));
  j["theta"] = m.theta;
  j["alpha"] = m.alpha;
  j["rationale"] = m.rationale;
  j["loss_trend"] = m.loss_trend;
  j["trust_dispersion"] = m.trust_dispersion;
  j["participants"] = m.participants;
  Json sig = Json::array();
  for (std::size_t i = 0; i < m.signals.size(); ++i) {
    const auto& s = m.signals[i];
    sig.push_back({{"client", s.client_id},
                   {"s", s.similarity_s},
                   {"v", s.volatility_v},
                   {"p", s.participation_p},
                   {"raw", m.raw_trust[i]}});
  }
  j["signals"] = std::move(sig);
  j["trust"] = m.trust;
  j["excluded"] = m.excluded;
  j["newly_excluded"] = m.newly_excluded;
  j["reinstated"] = m.reinstated;
  j["flip_events"] = m.flip_events;
  j["omitted"] = m.omitted;
  j["aggregated"] = m.aggregated;
  j["stalled"] = m.stalled;
  j["omission_precision"] = optional_json(m.omission_precision);
  j["omission_recall"] = optional_json(m.omission_recall);
  j["messages"] = m.messages;
  j["payload_bytes"] = m.payload_bytes;
  return j;
}

RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed,
                       control::ControllerKind controller_kind) {
  validate(config);
  const auto roster = build_roster(config.clients);

  sim::FederationConfig fed_config;
  fed_config.task = config.task;
  fed_config.task.num_clients = config.clients.count;
  fed_config.train = config.train;
  fed_config.roster = roster;
  fed_config.seed = seed;
  fed_config.threads = config.threads;
  sim::Federation federation(std::move(fed_config));

  control::Controller controller(controller_kind, config.params);
  trust::TrustTable table(config.t_init);
  const auto n_clients = roster.size();
  for (const auto& profile : roster) table.record(profile.client_id);

  std::vector<bool> adversary(n_clients, false);
  std::vector<ClientId> adversary_ids;
  Json behaviors = Json::array();
  for (const auto& profile : roster) {
    adversary[static_cast<std::size_t>(profile.client_id)] = profile.is_adversarial();
    if (profile.is_adversarial()) adversary_ids.push_back(profile.client_id);
    behaviors.push_back(sim::behavior_name(profile.behavior));
  }

  RunResult run;
  run.header["record"] = "run";
  run.header["schema_version"] = kSchemaVersion;
  run.header["scenario"] = config.name;
  run.header["controller"] = std::string(control::to_string(controller_kind));
  run.header["seed"] = seed;
  run.header["rounds"] = config.rounds;
  run.header["num_clients"] = n_clients;
  run.header["parameter_count"] = federation.parameter_count();
  run.header["oracle_exclusion"] = config.oracle_exclusion;
  run.header["behaviors"] = behaviors;
  run.header["adversaries"] = adversary_ids;

  std::vector<double> participation(n_clients, config.signal.p_init);
  std::vector<std::vector<double>> similarity_history(n_clients);
  std::vector<double> loss_history{federation.evaluate().loss};
  const bool uses_trust = controller_kind != control::ControllerKind::kNoTrust;

  for (int round = 0; round < config.rounds; ++round) {
    // Receive local updates.
    sim::RoundResult received = federation.run_round(round);
    RoundMetrics m;
    m.round = round;
    m.messages = received.messages;
    m.payload_bytes = received.payload_bytes;

    // Per-client behavioural signals.
    for (std::size_t i = 0; i < n_clients; ++i) {
      participation[i] = signals::update_participation(participation[i], received.participated[i],
                                                       config.signal.beta_p);
    }
    std::vector<signals::SignalVector> round_signals;
    if (!received.updates.empty()) {
      const auto reference = signals::reference_update(received.updates);
      for (const auto& update : received.updates) {
        const auto id = static_cast<std::size_t>(update.client_id);
        auto& history = similarity_history[id];
        signals::SignalVector s;
        s.client_id = update.client_id;
        s.round = round;
        s.similarity_s = signals::compute_similarity(update.delta, reference);
        history.push_back(s.similarity_s);
        s.volatility_v = signals::compute_volatility(history, config.signal.window_v);
        s.participation_p = participation[id];
        round_signals.push_back(s);
        m.participants.push_back(update.client_id);
      }
    }

    // Trust update with the controller's current smoothing factor.
    trust::score_round(round_signals, table, controller.alpha());
    m.signals = round_signals;
    for (const auto& s : round_signals) m.raw_trust.push_back(table.record(s.client_id).raw_trust);

    // System-level indicators.
    signals::SystemIndicators indicators;
    indicators.round = round;
    indicators.loss_trend_L = signals::compute_loss_trend(loss_history, config.signal.window_l);
    if (!m.participants.empty()) {
      std::vector<double> scores;
      for (const ClientId id : m.participants) scores.push_back(table.trust(id));
      indicators.trust_dispersion_sigma = signals::compute_trust_dispersion(scores);
    }
    m.loss_trend = indicators.loss_trend_L;
    m.trust_dispersion = indicators.trust_dispersion_sigma;

    // Analysis, decision and action.
    control::RoundContext ctx;
    ctx.round = round;
    ctx.trust = &table;
    ctx.signals = round_signals;
    ctx.indicators = indicators;
    ctx.loss_history = loss_history;
    const control::ControllerDecision decision = controller.step(ctx);
    for (const ClientId id : decision.exclude) {
      if (table.record(id).set_excluded(true, round)) m.flip_events.push_back(id);
    }
    for (const ClientId id : decision.reinstate) {
      if (table.record(id).set_excluded(false, round)) m.flip_events.push_back(id);
    }
    std::sort(m.flip_events.begin(), m.flip_events.end());
    m.newly_excluded = decision.exclude;
    m.reinstated = decision.reinstate;
    m.agent_state = controller.state().state;
    m.theta = controller.theta();
    m.alpha = controller.alpha();
    m.rationale = decision.rationale;

    std::set<ClientId> excluded;
    for (const auto& [id, rec] : table.records()) {
      if (rec.excluded) excluded.insert(id);
    }
    m.excluded.assign(excluded.begin(), excluded.end());

    // Trust-aware aggregation and broadcast.
    std::vector<sim::ClientUpdate> usable;
    for (auto& update : received.updates) {
      if (config.oracle_exclusion && adversary[static_cast<std::size_t>(update.client_id)]) continue;
      usable.push_back(std::move(update));
    }
    sim::GlobalModel next = federation.model();
    if (usable.empty()) {
      m.stalled = true;
    } else if (!uses_trust) {
      next = agg::no_trust_aggregate(federation.model(), usable);
      for (const auto& u : usable) m.aggregated.push_back(u.client_id);
    } else {
      auto [model, report] =
          agg::aggregate(federation.model(), usable, table, controller.theta(), excluded);
      next = std::move(model);
      m.aggregated = report.included_ids;
      m.stalled = report.stalled;
    }
    next.round = round + 1;
    federation.set_model(std::move(next));
    const sim::Evaluation eval = federation.evaluate();
    m.global_loss = eval.loss;
    m.global_accuracy = eval.accuracy;
    loss_history.push_back(eval.loss);

    // Omission status and its accuracy against ground truth.
    std::size_t true_omitted = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      const auto id = static_cast<ClientId>(i);
      const bool omitted =
          (config.oracle_exclusion && adversary[i]) ||
          (uses_trust && (table.is_excluded(id) || table.trust(id) < controller.theta()));
      if (omitted) {
        m.omitted.push_back(id);
        if (adversary[i]) ++true_omitted;
      }
    }
    m.omission_precision = ratio(true_omitted, m.omitted.size());
    m.omission_recall = ratio(true_omitted, adversary_ids.size());

    m.trust.reserve(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) m.trust.push_back(table.trust(static_cast<ClientId>(i)));

    Json d;
    d["round"] = round;
    d["state"] = std::string(control::to_string(m.agent_state));
    d["theta"] = m.theta;
    d["alpha"] = m.alpha;
    d["excluded"] = decision.exclude;
    d["reinstated"] = decision.reinstate;
    d["rationale"] = decision.rationale;
    run.decisions.push_back(std::move(d));

    spdlog::debug("{} seed={} round={} loss={:.4f} acc={:.3f} state={} theta={:.3f} excluded={}",
                  control::to_string(controller_kind), seed, round, m.global_loss,
                  m.global_accuracy, control::to_string(m.agent_state), m.theta,
                  m.excluded.size());
    run.rounds.push_back(std::move(m));
  }
  return run;
}

namespace {

double population_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

std::optional<double> optional_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

RunSummary summarize_records(const Json& header, const std::vector<Json>& rounds) {
  try {
    if (header.value("record", "") != "run") throw std::runtime_error("missing run header record");
    if (rounds.empty()) throw std::runtime_error("run has no round records");
    RunSummary s;
    s.scenario = header.at("scenario").get<std::string>();
    s.controller = header.at("controller").get<std::string>();
    s.seed = header.at("seed").get<std::uint64_t>();
    s.rounds = static_cast<int>(rounds.size());
    const auto n = header.at("num_clients").get<std::size_t>();
    std::vector<bool> adversary(n, false);
    for (const auto& id : header.at("adversaries")) adversary.at(id.get<std::size_t>()) = true;

    s.flips_per_client.assign(n, 0);
    std::vector<std::vector<double>> trajectories(n);
    std::vector<int> exclusion_run(n, 0);
    for (const auto& r : rounds) {
      if (r.value("record", "") != "round") throw std::runtime_error("unexpected record type");
      const int round = r.at("round").get<int>();
      for (const auto& id : r.at("flip_events")) s.flips_per_client.at(id.get<std::size_t>()) += 1;
      const auto& trust = r.at("trust");
      if (trust.size() != n) throw std::runtime_error("trust vector has the wrong length");
      for (std::size_t i = 0; i < n; ++i) trajectories[i].push_back(trust[i].get<double>());

      std::vector<bool> excluded_now(n, false);
      for (const auto& id : r.at("excluded")) excluded_now.at(id.get<std::size_t>()) = true;
      for (std::size_t i = 0; i < n; ++i) {
        exclusion_run[i] = excluded_now[i] ? exclusion_run[i] + 1 : 0;
        if (!adversary[i]) s.longest_benign_exclusion = std::max(s.longest_benign_exclusion, exclusion_run[i]);
      }
      if (!s.first_correct_exclusion_round) {
        for (const auto& id : r.at("omitted")) {
          if (adversary.at(id.get<std::size_t>())) {
            s.first_correct_exclusion_round = round;
            break;
          }
        }
      }
      if (r.at("stalled").get<bool>()) ++s.stalled_rounds;
      s.rounds_per_state[r.at("agent_state").get<std::string>()] += 1;
      s.total_messages += r.at("messages").get<std::int64_t>();
      s.total_payload_bytes += r.at("payload_bytes").get<std::int64_t>();
    }
    for (const int f : s.flips_per_client) s.total_flips += f;
    for (const auto& t : trajectories) s.trust_std_per_client.push_back(population_std(t));

    const Json& last = rounds.back();
    s.final_loss = last.at("global_loss").get<double>();
    s.final_accuracy = last.at("global_accuracy").get<double>();
    s.final_precision = optional_from(last.at("omission_precision"));
    s.final_recall = optional_from(last.at("omission_recall"));
    double adv_sum = 0.0;
    double ben_sum = 0.0;
    std::size_t adv_n = 0;
    std::size_t ben_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = last.at("trust")[i].get<double>();
      if (adversary[i]) {
        adv_sum += t;
        ++adv_n;
      } else {
        ben_sum += t;
        ++ben_n;
      }
    }
    if (adv_n) s.mean_adversary_trust = adv_sum / static_cast<double>(adv_n);
    if (ben_n) s.mean_benign_trust = ben_sum / static_cast<double>(ben_n);
    return s;
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("corrupt run record: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw std::runtime_error(std::string("corrupt run record: ") + e.what());
  }
}

RunSummary summarize(const RunResult& run) {
  std::vector<Json> rounds;
  rounds.reserve(run.rounds.size());
  for (const auto& m : run.rounds) rounds.push_back(to_json(m));
  return summarize_records(run.header, rounds);
}

Json to_json(const RunSummary& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = s.scenario;
  j["controller"] = s.controller;
  j["seed"] = s.seed;
  j["rounds"] = s.rounds;
  j["final_loss"] = s.final_loss;
  j["final_accuracy"] = s.final_accuracy;
  j["total_flips"] = s.total_flips;
  j["flips_per_client"] = s.flips_per_client;
  j["mean_adversary_trust"] = optional_json(s.mean_adversary_trust);
  j["mean_benign_trust"] = optional_json(s.mean_benign_trust);
  j["final_omission_precision"] = optional_json(s.final_precision);
  j["final_omission_recall"] = optional_json(s.final_recall);
  j["first_correct_exclusion_round"] =
      s.first_correct_exclusion_round ? Json(*s.first_correct_exclusion_round) : Json(nullptr);
  j["trust_std_per_client"] = s.trust_std_per_client;
  j["longest_benign_exclusion"] = s.longest_benign_exclusion;
  j["stalled_rounds"] = s.stalled_rounds;
  j["rounds_per_state"] = s.rounds_per_state;
  j["total_messages"] = s.total_messages;
  j["total_payload_bytes"] = s.total_payload_bytes;
  return j;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing artifact " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_run(const RunResult& run, const fs::path& dir) {
  fs::create_directories(dir);
  std::string metrics = run.header.dump() + "\n";
  for (const auto& m : run.rounds) metrics += to_json(m).dump() + "\n";
  write_text(dir / "metrics.jsonl", metrics);

  std::string decisions;
  for (const auto& d : run.decisions) decisions += d.dump() + "\n";
  write_text(dir / "decisions.jsonl", decisions);

  write_text(dir / "summary.json", to_json(summarize(run)).dump(2) + "\n");
}

RunSummary summarize_directory(const fs::path& dir) {
  std::istringstream in(read_text(dir / "metrics.jsonl"));
  std::string line;
  Json header;
  std::vector<Json> rounds;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error&) {
      throw std::runtime_error((dir / "metrics.jsonl").string() + ":" + std::to_string(line_no) +
                               ": not valid JSON");
    }
    if (line_no == 1) {
      header = std::move(record);
    } else {
      rounds.push_back(std::move(record));
    }
  }
  if (header.is_object() && header.value("schema_version", 0) != kSchemaVersion) {
    throw std::runtime_error((dir / "metrics.jsonl").string() + ": unsupported schema version");
  }
  return summarize_records(header, rounds);
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

ScenarioConfig with_intensity(const ScenarioConfig& base, double intensity) {
  ScenarioConfig c = base;
  const int n_adv = static_cast<int>(std::lround(intensity * static_cast<double>(base.clients.count)));
  if (n_adv > base.clients.benign) {
    throw ConfigError("suite.intensities: not enough benign clients to convert");
  }
  c.clients.benign -= n_adv;
  if (base.suite.attack == "label_flip") {
    c.clients.label_flip += n_adv;
  } else {
    c.clients.sign_flip += n_adv;
  }
  return c;
}

namespace {

std::string intensity_tag(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

std::string csv_optional(const std::optional<double>& x) {
  if (!x) return "";
  std::ostringstream s;
  s.precision(17);
  s << *x;
  return s.str();
}

std::string csv_double(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

std::vector<SuiteRow> run_suite(const ScenarioConfig& config, const fs::path& out, int workers) {
  validate(config);
  struct Job {
    double intensity;
    control::ControllerKind controller;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const double intensity : config.suite.intensities) {
    (void)with_intensity(config, intensity);  // validate before spawning work
    for (const auto kind : config.suite.controllers) {
      for (const auto seed : config.seeds) jobs.push_back({intensity, kind, seed});
    }
  }

  std::vector<SuiteRow> rows(jobs.size());
  std::vector<std::string> round_rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        const ScenarioConfig run_config = with_intensity(config, job.intensity);
        const RunResult run = run_scenario(run_config, job.seed, job.controller);
        rows[i] = {job.intensity, job.controller, job.seed, summarize(run)};
        const std::string prefix = csv_double(job.intensity) + "," +
                                   std::string(control::to_string(job.controller)) + "," +
                                   std::to_string(job.seed) + ",";
        std::string lines;
        for (const auto& m : run.rounds) {
          lines += prefix + std::to_string(m.round) + "," + csv_double(m.global_loss) + "," +
                   csv_double(m.global_accuracy) + "," +
                   std::string(control::to_string(m.agent_state)) + "," + csv_double(m.theta) +
                   "," + csv_double(m.alpha) + "," + std::to_string(m.excluded.size()) + "," +
                   std::to_string(m.flip_events.size()) + "," + csv_optional(m.omission_precision) +
                   "," + csv_optional(m.omission_recall) + "," + std::to_string(m.messages) + "," +
                   std::to_string(m.payload_bytes) + "\n";
        }
        round_rows[i] = std::move(lines);
        if (!out.empty()) {
          write_run(run, out / "runs" /
                             (std::string(control::to_string(job.controller)) + "_i" +
                              intensity_tag(job.intensity) + "_s" + std::to_string(job.seed)));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, jobs.size());
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (!out.empty()) {
    fs::create_directories(out);
    std::string results =
        "intensity,controller,seed,round,global_loss,global_accuracy,agent_state,theta,alpha,"
        "num_excluded,flip_events,omission_precision,omission_recall,messages,payload_bytes\n";
    for (const auto& r : round_rows) results += r;
    write_text(out / "results.csv", results);

    std::string runs =
        "intensity,controller,seed,final_loss,final_accuracy,total_flips,mean_adversary_trust,"
        "mean_benign_trust,final_omission_precision,final_omission_recall,"
        "longest_benign_exclusion,total_messages,total_payload_bytes\n";
    for (const auto& r : rows) {
      const auto& s = r.summary;
      runs += csv_double(r.intensity) + "," + std::string(control::to_string(r.controller)) + "," +
              std::to_string(r.seed) + "," + csv_double(s.final_loss) + "," +
              csv_double(s.final_accuracy) + "," + std::to_string(s.total_flips) + "," +
              csv_optional(s.mean_adversary_trust) + "," + csv_optional(s.mean_benign_trust) + "," +
              csv_optional(s.final_precision) + "," + csv_optional(s.final_recall) + "," +
              std::to_string(s.longest_benign_exclusion) + "," + std::to_string(s.total_messages) +
              "," + std::to_string(s.total_payload_bytes) + "\n";
    }
    write_text(out / "runs.csv", runs);

    std::string cells =
        "intensity,controller,runs,median_final_accuracy,median_final_loss,median_total_flips,"
        "median_final_recall\n";
    for (const double intensity : config.suite.intensities) {
      for (const auto kind : config.suite.controllers) {
        std::vector<double> acc, loss, flips, recall;
        for (const auto& r : rows) {
          if (r.intensity != intensity || r.controller != kind) continue;
          acc.push_back(r.summary.final_accuracy);
          loss.push_back(r.summary.final_loss);
          flips.push_back(r.summary.total_flips);
          if (r.summary.final_recall) recall.push_back(*r.summary.final_recall);
        }
        cells += csv_double(intensity) + "," + std::string(control::to_string(kind)) + "," +
                 std::to_string(acc.size()) + "," + csv_double(median(acc)) + "," +
                 csv_double(median(loss)) + "," + csv_double(median(flips)) + "," +
                 (recall.empty() ? std::string() : csv_double(median(recall))) + "\n";
      }
    }
    write_text(out / "cells.csv", cells);
  }
  return rows;
}

}  // namespace atcl::harness
