#include "atcl/controller.hpp"

#include <algorithm>
#include <cmath>

#include "atcl/errors.hpp"

namespace atcl::control {

std::string_view to_string(OperatingState state) {
  switch (state) {
    case OperatingState::kNormal: return "Normal";
    case OperatingState::kDegraded: return "Degraded";
    case OperatingState::kStabilising: return "Stabilising";
  }
  return "?";
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kAtcl: return "atcl";
    case ControllerKind::kFixedAtsssf: return "fixed";
    case ControllerKind::kAdaptiveAtsssf: return "adaptive";
    case ControllerKind::kNoTrust: return "none";
  }
  return "?";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  for (const auto kind : {ControllerKind::kAtcl, ControllerKind::kFixedAtsssf,
                          ControllerKind::kAdaptiveAtsssf, ControllerKind::kNoTrust}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

void validate(const ControllerParams& p) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string(field) + ": " + what);
  };
  require(p.K_d >= 1, "atcl.K_d", "must be >= 1");
  require(p.K_s >= 1, "atcl.K_s", "must be >= 1");
  require(p.H >= 1, "atcl.H", "must be >= 1");
  require(p.R_probe >= 1, "atcl.R_probe", "must be >= 1");
  require(p.sigma_min >= 0.0, "atcl.sigma_min", "must be >= 0");
  require(p.v_max >= 0.0, "atcl.v_max", "must be >= 0");
  require(p.rho >= 0.0 && p.rho <= 1.0, "atcl.rho", "must be in [0,1]");
  require(p.theta_min >= 0.0 && p.theta_min <= p.theta_max && p.theta_max <= 1.0,
          "atcl.theta_max", "need 0 <= theta_min <= theta_max <= 1");
  require(p.theta_init >= p.theta_min && p.theta_init <= p.theta_max, "atcl.theta_init",
          "must lie in [theta_min, theta_max]");
  require(p.delta_theta >= 0.0, "atcl.delta_theta", "must be >= 0");
  require(p.margin >= 0.0, "atcl.margin", "must be >= 0");
  require(p.alpha_min > 0.0 && p.alpha_min <= p.alpha_max && p.alpha_max <= 1.0,
          "atcl.alpha_max", "need 0 < alpha_min <= alpha_max <= 1");
  require(p.alpha_init >= p.alpha_min && p.alpha_init <= p.alpha_max, "atcl.alpha_init",
          "must lie in [alpha_min, alpha_max]");
  require(p.gamma_up >= 1.0, "atcl.gamma_up", "must be >= 1");
  require(p.theta_fixed >= 0.0 && p.theta_fixed <= 1.0, "fixed.theta", "must be in [0,1]");
}

AgentState AgentState::initial(const ControllerParams& params) {
  AgentState s;
  s.theta = params.theta_init;
  s.alpha = params.alpha_init;
  return s;
}

StateInference infer_state(std::span<const signals::SignalVector> signals,
                           const signals::SystemIndicators& indicators, const AgentState& prev,
                           const ControllerParams& params) {
  StateInference out;
  out.rise_streak = indicators.loss_trend_L > params.eps_L ? prev.rise_streak + 1 : 0;
  out.fall_streak = indicators.loss_trend_L < 0.0 ? prev.fall_streak + 1 : 0;

  out.high_dispersion = indicators.trust_dispersion_sigma > params.sigma_min;
  if (!signals.empty()) {
    const auto volatile_count = std::count_if(signals.begin(), signals.end(), [&](const auto& s) {
      return s.volatility_v > params.v_max;
    });
    out.high_volatility =
        static_cast<double>(volatile_count) / static_cast<double>(signals.size()) > params.rho;
  }

  out.instability =
      out.rise_streak >= params.K_d && (out.high_dispersion || out.high_volatility);
  out.recovery = prev.state != OperatingState::kNormal && !out.instability &&
                 out.fall_streak >= params.K_s;

  if (out.instability) {
    out.state = OperatingState::kDegraded;
    out.rationale = "DEGRADED:loss_rise";
    if (out.high_dispersion) out.rationale += "+dispersion";
    if (out.high_volatility) out.rationale += "+volatility";
    return out;
  }
  if (out.recovery) {
    out.state = OperatingState::kStabilising;
    out.rationale = "STABILISING:loss_fall";
    return out;
  }
  switch (prev.state) {
    case OperatingState::kNormal:
      out.state = OperatingState::kNormal;
      out.rationale = "NORMAL";
      break;
    case OperatingState::kDegraded:
      out.state = OperatingState::kDegraded;
      out.rationale = "DEGRADED:hold";
      break;
    case OperatingState::kStabilising:
      out.calm_streak = prev.calm_streak + 1;
      if (out.calm_streak >= params.H) {
        out.state = OperatingState::kNormal;
        out.rationale = "NORMAL:graduated";
        out.calm_streak = 0;
      } else {
        out.state = OperatingState::kStabilising;
        out.rationale = "STABILISING:calm";
      }
      break;
  }
  return out;
}

ControllerDecision decide(const StateInference& inference, const trust::TrustTable& trust,
                          std::span<const ClientId> participants, const AgentState& prev,
                          const ControllerParams& params) {
  ControllerDecision d;
  d.state_after = inference.state;
  d.rationale = inference.rationale;
  d.new_theta = prev.theta;
  d.new_alpha = prev.alpha;

  switch (inference.state) {
    case OperatingState::kDegraded:
      d.new_theta = std::min(params.theta_max, prev.theta + params.delta_theta);
      d.new_alpha = std::min(params.alpha_max, prev.alpha * params.gamma_up);
      break;
    case OperatingState::kStabilising:
      d.new_theta = std::max(params.theta_min, prev.theta - params.delta_theta / 2.0);
      d.new_alpha = std::max(params.alpha_min, prev.alpha / std::sqrt(params.gamma_up));
      break;
    case OperatingState::kNormal:
      break;
  }
  d.new_theta = std::clamp(d.new_theta, params.theta_min, params.theta_max);
  d.new_alpha = std::clamp(d.new_alpha, params.alpha_min, params.alpha_max);

  const double release = d.new_theta + params.margin;

  // Probation runs for every excluded client in every state; release only
  // happens outside Degraded.
  for (const auto& [id, rec] : trust.records()) {
    if (!rec.excluded) continue;
    const auto it = prev.probe_streak.find(id);
    const int before = it == prev.probe_streak.end() ? 0 : it->second;
    const int streak = rec.smoothed_trust_T >= release ? before + 1 : 0;
    if (inference.state != OperatingState::kDegraded && streak >= params.R_probe) {
      d.reinstate.push_back(id);
    } else {
      d.probe_streak[id] = streak;
    }
  }

  if (inference.state == OperatingState::kDegraded) {
    for (const ClientId id : participants) {
      if (trust.is_excluded(id)) continue;
      if (trust.trust(id) < release) {
        d.exclude.push_back(id);
        d.probe_streak[id] = 0;
      }
    }
    std::sort(d.exclude.begin(), d.exclude.end());
    d.exclude.erase(std::unique(d.exclude.begin(), d.exclude.end()), d.exclude.end());
  }
  return d;
}

AgentState advance(const AgentState& prev, const StateInference& inference,
                   const ControllerDecision& decision) {
  AgentState next = prev;
  next.rounds_in_state = inference.state == prev.state ? prev.rounds_in_state + 1 : 0;
  next.state = inference.state;
  next.theta = decision.new_theta;
  next.alpha = decision.new_alpha;
  next.rise_streak = inference.rise_streak;
  next.fall_streak = inference.fall_streak;
  next.calm_streak = inference.calm_streak;
  next.probe_streak = decision.probe_streak;
  return next;
}

namespace {

ControllerDecision memoryless(const trust::TrustTable& trust, double theta, double alpha,
                              std::string rationale) {
  ControllerDecision d;
  d.new_theta = theta;
  d.new_alpha = alpha;
  d.rationale = std::move(rationale);
  for (const auto& [id, rec] : trust.records()) {
    const bool below = rec.smoothed_trust_T < theta;
    if (below && !rec.excluded) d.exclude.push_back(id);
    if (!below && rec.excluded) d.reinstate.push_back(id);
  }
  return d;
}

}  // namespace

ControllerDecision baseline_fixed(const trust::TrustTable& trust, double theta_fixed, double alpha) {
  return memoryless(trust, theta_fixed, alpha, "FIXED");
}

ControllerDecision baseline_adaptive(const trust::TrustTable& trust,
                                     std::span<const double> loss_history, double prev_theta,
                                     double alpha, const ControllerParams& params) {
  double theta = prev_theta;
  std::string rationale = "ADAPTIVE:hold";
  if (loss_history.size() >= 2) {
    const double now = loss_history[loss_history.size() - 1];
    const double before = loss_history[loss_history.size() - 2];
    if (now > before) {
      theta = std::min(params.theta_max, theta + params.delta_theta);
      rationale = "ADAPTIVE:loss_up";
    } else if (now < before) {
      theta = std::max(params.theta_min, theta - params.delta_theta);
      rationale = "ADAPTIVE:loss_down";
    }
  }
  return memoryless(trust, theta, alpha, std::move(rationale));
}

Controller::Controller(ControllerKind kind, ControllerParams params)
    : kind_(kind), params_(params), state_(AgentState::initial(params)) {
  validate(params_);
  if (kind_ == ControllerKind::kFixedAtsssf) state_.theta = params_.theta_fixed;
  if (kind_ == ControllerKind::kNoTrust) state_.theta = 0.0;
}

ControllerDecision Controller::step(const RoundContext& ctx) {
  ControllerDecision d;
  switch (kind_) {
    case ControllerKind::kAtcl: {
      std::vector<ClientId> participants;
      participants.reserve(ctx.signals.size());
      for (const auto& s : ctx.signals) participants.push_back(s.client_id);
      const StateInference inference = infer_state(ctx.signals, ctx.indicators, state_, params_);
      d = decide(inference, *ctx.trust, participants, state_, params_);
      state_ = advance(state_, inference, d);
      return d;
    }
    case ControllerKind::kFixedAtsssf:
      d = baseline_fixed(*ctx.trust, params_.theta_fixed, state_.alpha);
      break;
    case ControllerKind::kAdaptiveAtsssf:
      d = baseline_adaptive(*ctx.trust, ctx.loss_history, state_.theta, state_.alpha, params_);
      break;
    case ControllerKind::kNoTrust:
      d.new_theta = state_.theta;
      d.new_alpha = state_.alpha;
      d.rationale = "NO_TRUST";
      break;
  }
  state_.theta = d.new_theta;
  state_.alpha = d.new_alpha;
  state_.rounds_in_state += 1;
  return d;
}

}  // namespace atcl::control
