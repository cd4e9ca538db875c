#include "atcl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "atcl/errors.hpp"

namespace atcl::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  throw ConfigError(std::string(key) + ": cannot parse '" + std::string(value) + "' as " +
                    std::string(what));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "a number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value, "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(ScenarioConfig&, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <typename Member>
Field int_field(std::string key, Member member) {
  return {key,
          [key, member](ScenarioConfig& c, std::string_view v) {
            member(c) = parse_number<std::decay_t<decltype(member(c))>>(key, v);
          },
          [member](const ScenarioConfig& c) {
            return std::to_string(member(c));
          }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {key,
          [key, member](ScenarioConfig& c, std::string_view v) {
            member(c) = parse_number<double>(key, v);
          },
          [member](const ScenarioConfig& c) {
            return format_double(member(c));
          }};
}

#define ATCL_MEMBER(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"name", [](ScenarioConfig& c, std::string_view v) { c.name = std::string(v); },
                 [](const ScenarioConfig& c) { return c.name; }});
    f.push_back(int_field("rounds", ATCL_MEMBER(rounds)));
    f.push_back({"seeds",
                 [](ScenarioConfig& c, std::string_view v) {
                   c.seeds.clear();
                   for (const auto item : split_list(v)) {
                     c.seeds.push_back(parse_number<std::uint64_t>("seeds", item));
                   }
                 },
                 [](const ScenarioConfig& c) {
                   return format_list<std::uint64_t>(
                       c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
                 }});
    f.push_back({"controller",
                 [](ScenarioConfig& c, std::string_view v) {
                   const auto kind = control::parse_controller_kind(v);
                   if (!kind) bad_value("controller", v, "one of atcl|fixed|adaptive|none");
                   c.controller = *kind;
                 },
                 [](const ScenarioConfig& c) { return std::string(control::to_string(c.controller)); }});
    f.push_back({"out_dir", [](ScenarioConfig& c, std::string_view v) { c.out_dir = std::string(v); },
                 [](const ScenarioConfig& c) { return c.out_dir; }});
    f.push_back({"oracle_exclusion",
                 [](ScenarioConfig& c, std::string_view v) {
                   c.oracle_exclusion = parse_bool("oracle_exclusion", v);
                 },
                 [](const ScenarioConfig& c) { return std::string(c.oracle_exclusion ? "true" : "false"); }});
    f.push_back(int_field("threads", ATCL_MEMBER(threads)));

    f.push_back(int_field("task.feature_dim", ATCL_MEMBER(task.feature_dim)));
    f.push_back(int_field("task.num_classes", ATCL_MEMBER(task.num_classes)));
    f.push_back(int_field("task.samples_per_client", ATCL_MEMBER(task.samples_per_client)));
    f.push_back(double_field("task.noise_std", ATCL_MEMBER(task.noise_std)));
    f.push_back(double_field("task.center_scale", ATCL_MEMBER(task.center_scale)));
    f.push_back(double_field("task.concentration", ATCL_MEMBER(task.concentration)));
    f.push_back(int_field("task.holdout_size", ATCL_MEMBER(task.holdout_size)));

    f.push_back(int_field("train.epochs", ATCL_MEMBER(train.epochs)));
    f.push_back(double_field("train.lr", ATCL_MEMBER(train.lr)));
    f.push_back(int_field("train.batch_size", ATCL_MEMBER(train.batch_size)));

    f.push_back(int_field("clients.count", ATCL_MEMBER(clients.count)));
    f.push_back(int_field("clients.benign", ATCL_MEMBER(clients.benign)));
    f.push_back(int_field("clients.noisy", ATCL_MEMBER(clients.noisy)));
    f.push_back(double_field("clients.noisy.sigma", ATCL_MEMBER(clients.noisy_sigma)));
    f.push_back(int_field("clients.intermittent", ATCL_MEMBER(clients.intermittent)));
    f.push_back(double_field("clients.intermittent.prob", ATCL_MEMBER(clients.intermittent_prob)));
    f.push_back(int_field("clients.label_flip", ATCL_MEMBER(clients.label_flip)));
    f.push_back(double_field("clients.label_flip.fraction", ATCL_MEMBER(clients.label_flip_fraction)));
    f.push_back(int_field("clients.sign_flip", ATCL_MEMBER(clients.sign_flip)));
    f.push_back(double_field("clients.sign_flip.scale", ATCL_MEMBER(clients.sign_flip_scale)));

    f.push_back(int_field("signals.window_v", ATCL_MEMBER(signal.window_v)));
    f.push_back(int_field("signals.window_l", ATCL_MEMBER(signal.window_l)));
    f.push_back(double_field("signals.beta_p", ATCL_MEMBER(signal.beta_p)));
    f.push_back(double_field("signals.p_init", ATCL_MEMBER(signal.p_init)));
    f.push_back(double_field("trust.t_init", ATCL_MEMBER(t_init)));

    f.push_back(double_field("atcl.eps_L", ATCL_MEMBER(params.eps_L)));
    f.push_back(int_field("atcl.K_d", ATCL_MEMBER(params.K_d)));
    f.push_back(int_field("atcl.K_s", ATCL_MEMBER(params.K_s)));
    f.push_back(int_field("atcl.H", ATCL_MEMBER(params.H)));
    f.push_back(double_field("atcl.sigma_min", ATCL_MEMBER(params.sigma_min)));
    f.push_back(double_field("atcl.v_max", ATCL_MEMBER(params.v_max)));
    f.push_back(double_field("atcl.rho", ATCL_MEMBER(params.rho)));
    f.push_back(double_field("atcl.theta_init", ATCL_MEMBER(params.theta_init)));
    f.push_back(double_field("atcl.theta_min", ATCL_MEMBER(params.theta_min)));
    f.push_back(double_field("atcl.theta_max", ATCL_MEMBER(params.theta_max)));
    f.push_back(double_field("atcl.delta_theta", ATCL_MEMBER(params.delta_theta)));
    f.push_back(double_field("atcl.margin", ATCL_MEMBER(params.margin)));
    f.push_back(double_field("atcl.alpha_init", ATCL_MEMBER(params.alpha_init)));
    f.push_back(double_field("atcl.alpha_min", ATCL_MEMBER(params.alpha_min)));
    f.push_back(double_field("atcl.alpha_max", ATCL_MEMBER(params.alpha_max)));
    f.push_back(double_field("atcl.gamma_up", ATCL_MEMBER(params.gamma_up)));
    f.push_back(int_field("atcl.R_probe", ATCL_MEMBER(params.R_probe)));
    f.push_back(double_field("fixed.theta", ATCL_MEMBER(params.theta_fixed)));

    f.push_back({"suite.controllers",
                 [](ScenarioConfig& c, std::string_view v) {
                   c.suite.controllers.clear();
                   for (const auto item : split_list(v)) {
                     const auto kind = control::parse_controller_kind(item);
                     if (!kind) bad_value("suite.controllers", item, "one of atcl|fixed|adaptive|none");
                     c.suite.controllers.push_back(*kind);
                   }
                 },
                 [](const ScenarioConfig& c) {
                   return format_list<control::ControllerKind>(
                       c.suite.controllers,
                       [](const control::ControllerKind& k) { return std::string(control::to_string(k)); });
                 }});
    f.push_back({"suite.intensities",
                 [](ScenarioConfig& c, std::string_view v) {
                   c.suite.intensities.clear();
                   for (const auto item : split_list(v)) {
                     c.suite.intensities.push_back(parse_number<double>("suite.intensities", item));
                   }
                 },
                 [](const ScenarioConfig& c) {
                   return format_list<double>(c.suite.intensities,
                                              [](const double& x) { return format_double(x); });
                 }});
    f.push_back({"suite.attack",
                 [](ScenarioConfig& c, std::string_view v) { c.suite.attack = std::string(v); },
                 [](const ScenarioConfig& c) { return c.suite.attack; }});
    return f;
  }();
  return table;
}

#undef ATCL_MEMBER

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void validate(const ScenarioConfig& c) {
  require(c.rounds >= 1, "rounds", "must be >= 1");
  require(!c.seeds.empty(), "seeds", "need at least one seed");
  require(c.threads >= 1, "threads", "must be >= 1");
  const auto& r = c.clients;
  require(r.count >= 1, "clients.count", "must be >= 1");
  for (const auto& [key, n] : {std::pair{"clients.benign", r.benign}, {"clients.noisy", r.noisy},
                               {"clients.intermittent", r.intermittent},
                               {"clients.label_flip", r.label_flip}, {"clients.sign_flip", r.sign_flip}}) {
    require(n >= 0, key, "must be >= 0");
  }
  require(r.benign + r.noisy + r.intermittent + r.label_flip + r.sign_flip == r.count,
          "clients.count", "behaviour counts must sum to clients.count");
  require(c.task.num_clients == r.count, "clients.count", "does not match the task's client count");
  sim::validate(c.task);
  require(c.train.epochs >= 1, "train.epochs", "must be >= 1");
  require(c.train.lr >= 0.0, "train.lr", "must be >= 0");
  require(c.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(c.signal.window_v >= 2, "signals.window_v", "must be >= 2");
  require(c.signal.window_l >= 2, "signals.window_l", "must be >= 2");
  require(c.signal.beta_p > 0.0 && c.signal.beta_p < 1.0, "signals.beta_p", "must be in (0,1)");
  require(c.signal.p_init >= 0.0 && c.signal.p_init <= 1.0, "signals.p_init", "must be in [0,1]");
  require(c.t_init >= 0.0 && c.t_init <= 1.0, "trust.t_init", "must be in [0,1]");
  control::validate(c.params);
  for (const auto& profile : build_roster(r)) sim::validate(profile);
  require(!c.suite.controllers.empty(), "suite.controllers", "need at least one controller");
  require(!c.suite.intensities.empty(), "suite.intensities", "need at least one intensity");
  for (const double x : c.suite.intensities) {
    require(x >= 0.0 && x <= 1.0, "suite.intensities", "each intensity must be in [0,1]");
  }
  require(c.suite.attack == "sign_flip" || c.suite.attack == "label_flip", "suite.attack",
          "must be sign_flip or label_flip");
}

ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig config;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line) + ": line " + std::to_string(line_no) +
                        " is not 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError(std::string(key) + ": unknown configuration key");
    it->set(config, value);
  }
  config.task.num_clients = config.clients.count;
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const ScenarioConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::vector<sim::ClientProfile> build_roster(const RosterSpec& spec) {
  std::vector<sim::ClientProfile> roster;
  auto add = [&](int n, const sim::Behavior& behavior) {
    for (int i = 0; i < n; ++i) {
      roster.push_back({static_cast<sim::ClientId>(roster.size()), behavior});
    }
  };
  add(spec.benign, sim::Benign{});
  add(spec.noisy, sim::NoisyUpdate{spec.noisy_sigma});
  add(spec.intermittent, sim::Intermittent{spec.intermittent_prob});
  add(spec.label_flip, sim::LabelFlip{spec.label_flip_fraction});
  add(spec.sign_flip, sim::SignFlipPoison{spec.sign_flip_scale});
  return roster;
}

std::vector<std::string> canonical_scenario_names() {
  return {"S-clean", "S-poison", "S-flip", "S-noisy", "S-churn", "S-sweep"};
}

ScenarioConfig canonical_scenario(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.rounds = 100;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto& r = c.clients;
  r = RosterSpec{};
  if (name == "S-clean") {
    // defaults: 20 benign
  } else if (name == "S-poison") {
    r.benign = 14;
    r.sign_flip = 6;
  } else if (name == "S-flip") {
    r.benign = 14;
    r.label_flip = 6;
    r.label_flip_fraction = 0.8;
  } else if (name == "S-noisy") {
    r.benign = 15;
    r.noisy = 5;
  } else if (name == "S-churn") {
    r.benign = 14;
    r.intermittent = 6;
    r.intermittent_prob = 0.5;
  } else if (name == "S-sweep") {
    c.suite.controllers = {control::ControllerKind::kNoTrust, control::ControllerKind::kAtcl};
    c.suite.intensities = {0.0, 0.1, 0.3, 0.5};
    c.suite.attack = "sign_flip";
  } else {
    throw ConfigError("scenario: unknown canonical scenario '" + std::string(name) + "'");
  }
  c.task.num_clients = r.count;
  return c;
}

}  // namespace atcl::harness
