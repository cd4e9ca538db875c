#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atcl/signals.hpp"
#include "atcl/trust.hpp"

namespace atcl::control {

using sim::ClientId;

enum class OperatingState { kNormal, kDegraded, kStabilising };

std::string_view to_string(OperatingState state);

enum class ControllerKind { kAtcl, kFixedAtsssf, kAdaptiveAtsssf, kNoTrust };

/// CLI names: atcl, fixed, adaptive, none.
std::string_view to_string(ControllerKind kind);
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct ControllerParams {
  // State inference.
  double eps_L = 0.0;
  int K_d = 3;
  int K_s = 3;
  int H = 5;
  double sigma_min = 0.15;
  double v_max = 0.3;
  double rho = 0.25;
  // Omission threshold.
  double theta_init = 0.3;
  double theta_min = 0.1;
  double theta_max = 0.6;
  double delta_theta = 0.05;
  double margin = 0.05;
  // EMA factor.
  double alpha_init = 0.2;
  double alpha_min = 0.05;
  double alpha_max = 0.6;
  double gamma_up = 1.5;
  int R_probe = 3;
  /// Threshold of the fixed-rule baseline.
  double theta_fixed = 0.3;
};

/// Throws ConfigError naming the first inconsistent parameter.
void validate(const ControllerParams& params);

/// Everything the supervisory loop carries from one round to the next.
struct AgentState {
  OperatingState state = OperatingState::kNormal;
  double theta = 0.3;
  double alpha = 0.2;
  int rounds_in_state = 0;
  /// Consecutive rounds with loss trend above eps_L / below zero.
  int rise_streak = 0;
  int fall_streak = 0;
  /// Consecutive Stabilising rounds with neither predicate firing.
  int calm_streak = 0;
  /// Consecutive rounds each excluded client has sat at or above theta + margin.
  std::map<ClientId, int> probe_streak;

  static AgentState initial(const ControllerParams& params);
};

struct StateInference {
  OperatingState state = OperatingState::kNormal;
  bool instability = false;
  bool recovery = false;
  bool high_dispersion = false;
  bool high_volatility = false;
  int rise_streak = 0;
  int fall_streak = 0;
  int calm_streak = 0;
  std::string rationale;
};

/// Analysis phase: classifies the current round from the participants'
/// signals and the system indicators, given the previous agent state.
///   instability: loss rising for K_d rounds and (dispersion > sigma_min or
///                more than rho of participants with volatility > v_max)
///   recovery:    loss falling for K_s rounds without instability, only
///                reachable from Degraded or Stabilising
///   graduation:  Stabilising -> Normal after H rounds with neither firing
/// Degraded never drops straight to Normal.
StateInference infer_state(std::span<const signals::SignalVector> signals,
                           const signals::SystemIndicators& indicators, const AgentState& prev,
                           const ControllerParams& params);

struct ControllerDecision {
  double new_theta = 0.0;
  double new_alpha = 0.0;
  std::vector<ClientId> exclude;
  std::vector<ClientId> reinstate;
  OperatingState state_after = OperatingState::kNormal;
  std::string rationale;
  std::map<ClientId, int> probe_streak;
};

/// Action phase for the agentic controller. `participants` are this round's
/// client ids; only they can be newly excluded.
ControllerDecision decide(const StateInference& inference, const trust::TrustTable& trust,
                          std::span<const ClientId> participants, const AgentState& prev,
                          const ControllerParams& params);

/// Next agent state after `decision` has been applied.
AgentState advance(const AgentState& prev, const StateInference& inference,
                   const ControllerDecision& decision);

/// Memoryless rule: exclusion status follows T < theta_fixed every round.
ControllerDecision baseline_fixed(const trust::TrustTable& trust, double theta_fixed, double alpha);

/// Single-signal reactive rule: theta steps up when the latest global loss rose
/// and down when it fell, then exclusion follows T < theta. Alpha never moves.
ControllerDecision baseline_adaptive(const trust::TrustTable& trust,
                                     std::span<const double> loss_history, double prev_theta,
                                     double alpha, const ControllerParams& params);

/// Inputs available to a controller in one round.
struct RoundContext {
  int round = 0;
  const trust::TrustTable* trust = nullptr;
  std::span<const signals::SignalVector> signals;
  signals::SystemIndicators indicators;
  std::span<const double> loss_history;
};

/// Per-run controller of any kind; owns the AgentState between rounds.
class Controller {
 public:
  Controller(ControllerKind kind, ControllerParams params);

  ControllerKind kind() const noexcept { return kind_; }
  const ControllerParams& params() const noexcept { return params_; }
  const AgentState& state() const noexcept { return state_; }

  /// EMA factor to use for this round's trust update.
  double alpha() const noexcept { return state_.alpha; }
  /// Aggregation threshold currently in force.
  double theta() const noexcept { return state_.theta; }

  ControllerDecision step(const RoundContext& ctx);

 private:
  ControllerKind kind_;
  ControllerParams params_;
  AgentState state_;
};

}  // namespace atcl::control
