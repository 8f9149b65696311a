#include "etrace/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace etrace {

namespace {

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFinite(what);
  }
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NonFinite(what);
}

void check_range(bool ok, const std::string& field) {
  if (!ok) throw std::invalid_argument("learner config: " + field + " out of range");
}

LearnerConfig validated(LearnerConfig c) {
  c.validate();
  return c;
}

}  // namespace

void LearnerConfig::validate() const {
  check_range(gamma >= 0.0 && gamma < 1.0, "gamma");
  check_range(alpha >= 0.0 && std::isfinite(alpha), "alpha");
  check_range(eps_clip > 0.0 && std::isfinite(eps_clip), "eps_clip");
  check_range(beta_de >= 0.0 && std::isfinite(beta_de), "beta_de");
  check_range(beta_td >= 0.0 && std::isfinite(beta_td), "beta_td");
  check_range(kappa >= 0.0 && std::isfinite(kappa), "kappa");
  check_range(pearson_samples >= 1, "pearson_samples");
  for (double l : lambda_max) check_range(l >= 0.0 && l <= 1.0, "lambda_max");
  switch (trace_kind) {
    case TraceKind::none:
      break;
    case TraceKind::standard:
    case TraceKind::replacing:
      check_range(!lambda_max.empty(), "lambda_max");
      break;
    case TraceKind::generalized:
      check_range(lambda_max.size() >= 2, "lambda_max");
      break;
  }
}

traces::AnyTrace make_trace(TraceKind kind, std::size_t size,
                            const std::vector<double>& lambda_max) {
  switch (kind) {
    case TraceKind::none:
      return traces::NoTrace(size);
    case TraceKind::standard:
      return traces::StandardTrace(size, lambda_max.at(0));
    case TraceKind::replacing:
      return traces::ReplacingTrace(size, lambda_max.at(0));
    case TraceKind::generalized:
      return traces::GeneralizedTrace(size, lambda_max);
  }
  throw std::invalid_argument("unknown trace kind");
}

double td_error(double reward, double v_s, double v_next, double gamma, bool terminal) {
  const double bootstrap = terminal ? 0.0 : gamma * v_next;
  return reward + bootstrap - v_s;
}

double clipped_ratio(double logp_now, double logp_old, double eps_clip) {
  return std::clamp(std::exp(logp_now - logp_old), 1.0 - eps_clip, 1.0 + eps_clip);
}

SurrogateGradient surrogate_gradient(const ActorCritic& model, std::span<const double> params,
                                     const ActorCritic::Evaluation& at_state,
                                     const Transition& transition, double eps_clip) {
  const dist::LogProb lp = dist::log_prob(at_state.policy, transition.action);
  require_finite(lp.value, "log-density");
  SurrogateGradient out;
  out.log_prob = lp.value;
  out.ratio = clipped_ratio(lp.value, transition.logp_old, eps_clip);
  out.g.assign(model.parameter_count(), 0.0);
  model.add_policy_gradient(params, at_state, lp, -out.ratio, out.g);
  model.add_value_gradient(params, at_state, -out.ratio, out.g);
  return out;
}

std::vector<double> regularizer_gradient(const ActorCritic& model, std::span<const double> params,
                                         const ActorCritic::Evaluation& at_state,
                                         std::span<const double> action, double td,
                                         double beta_de, double beta_td) {
  std::vector<double> reg(model.parameter_count(), 0.0);
  if (beta_de != 0.0) {
    // minimizing beta_de * log pi(a|s) is maximizing the entropy estimate -log pi(a|s)
    const dist::LogProb lp = dist::log_prob(at_state.policy, action);
    require_finite(lp.value, "log-density");
    model.add_policy_gradient(params, at_state, lp, beta_de, reg);
  }
  if (beta_td != 0.0 && td != 0.0) {
    model.add_value_gradient(params, at_state, -beta_td * td, reg);
  }
  return reg;
}

dist::DivergenceReport divergence_probe(const dist::Policy& p_new, const dist::Policy& p_old,
                                        double v_new, double v_old, std::size_t pearson_samples,
                                        Rng& rng, bool* saturated) {
  if (p_new.index() != p_old.index()) {
    throw std::invalid_argument("divergence_probe: policy family mismatch");
  }
  dist::DivergenceReport r;
  if (const auto* n = std::get_if<dist::DiagNormal>(&p_new)) {
    r.d_pi = dist::kl_normal(*n, std::get<dist::DiagNormal>(p_old));
  } else {
    const auto est = dist::pearson_mc(p_new, p_old, pearson_samples, rng);
    r.d_pi = est.value;
    if (saturated != nullptr) *saturated = est.saturated;
  }
  r.d_v = dist::value_divergence(v_new, v_old);
  return r;
}

Learner::Learner(ActorCritic model, LearnerConfig config, std::vector<double> params,
                 std::uint64_t seed)
    : model_(std::move(model)),
      config_(validated(std::move(config))),
      params_(std::move(params)),
      trace_(make_trace(config_.trace_kind, model_.parameter_count(), config_.lambda_max)),
      decay_(config_.kappa),
      optimizer_(config_.optimizer, model_.parameter_count()),
      rng_(seed),
      update_(model_.parameter_count(), 0.0),
      backup_{params_, trace_, decay_, optimizer_, rng_} {
  if (params_.size() != model_.parameter_count()) {
    throw std::invalid_argument("learner: parameter count mismatch");
  }
  require_finite(params_, "initial parameters");
}

void Learner::episode_begin() {
  traces::reset(trace_);
  if (!config_.persist_divergence) decay_.reset();
  pending_ = {};
}

ActionSample Learner::act(std::span<const double> state, Rng& rng) const {
  ActionSample out;
  auto eval = model_.evaluate(params_, state);
  out.action = dist::sample(eval.policy, rng);
  out.log_prob = dist::log_prob(eval.policy, out.action).value;
  out.policy = std::move(eval.policy);
  out.value = eval.value;
  return out;
}

std::vector<double> Learner::act_greedy(std::span<const double> state) const {
  const auto p = model_.policy(params_, state);
  const auto loc = dist::location(p);
  return {loc.begin(), loc.end()};
}

StepDiagnostics Learner::step(const Transition& tr) {
  const auto& ms = model_.spec();
  if (tr.state.size() != ms.state_dim || tr.next_state.size() != ms.state_dim ||
      tr.action.size() != ms.action_dim) {
    throw std::invalid_argument("learner: transition shape mismatch");
  }
  StepDiagnostics diag;
  bool mutated = false;
  try {
    // (1) outputs at s and s' under the current parameters
    const auto at_s = model_.evaluate(params_, tr.state);
    const double v_next = tr.terminal ? 0.0 : model_.value(params_, tr.next_state);
    require_finite(at_s.value, "value");
    require_finite(v_next, "bootstrap value");

    // (2) TD error, (3) traced gradient and direct regularizer gradient
    const double delta = td_error(tr.reward, at_s.value, v_next, config_.gamma, tr.terminal);
    require_finite(delta, "td error");
    auto sg = surrogate_gradient(model_, params_, at_s, tr, config_.eps_clip);
    auto reg = regularizer_gradient(model_, params_, at_s, tr.action, delta, config_.beta_de,
                                    config_.beta_td);
    require_finite(sg.g, "surrogate gradient");
    require_finite(reg, "regularizer gradient");
    if (config_.trace_regularizers && std::abs(delta) >= LearnerConfig::kFoldThreshold) {
      for (std::size_t j = 0; j < reg.size(); ++j) sg.g[j] += reg[j] / delta;
      std::fill(reg.begin(), reg.end(), 0.0);
    }

    backup_.params = params_;
    backup_.trace = trace_;
    backup_.decay = decay_;
    backup_.optimizer = optimizer_;
    backup_.rng = rng_;
    mutated = true;

    // (4) decay factor from the divergence of the previous update
    const double lambda_d = decay_.update(pending_.d_pi, pending_.d_v);

    // (5) trace, (6) parameter step on delta * e + reg
    const auto e = traces::update(trace_, config_.gamma, lambda_d, sg.g);
    double e_max = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      update_[j] = delta * e[j] + reg[j];
      e_max = std::max(e_max, std::abs(e[j]));
    }
    require_finite(update_, "update");
    optimizer_.apply(params_, update_, config_.alpha);
    require_finite(params_, "parameters");

    // (7) probe the same state under the new parameters
    const auto after = model_.evaluate(params_, tr.state);
    bool saturated = false;
    const auto report = divergence_probe(after.policy, at_s.policy, after.value, at_s.value,
                                         config_.pearson_samples, rng_, &saturated);
    require_finite(report.d_pi, "policy divergence");
    require_finite(report.d_v, "value divergence");

    pending_ = report;
    ++updates_;

    diag.td_error = delta;
    diag.lambda_d = lambda_d;
    diag.d_pi = report.d_pi;
    diag.d_v = report.d_v;
    diag.ratio = sg.ratio;
    diag.trace_max = e_max;
    diag.pearson_saturated = saturated;
  } catch (const std::exception& e) {
    // NonFinite, or a non-finite value rejected further down (network input,
    // trace gradient, optimizer update)
    if (dynamic_cast<const NonFinite*>(&e) == nullptr &&
        dynamic_cast<const std::invalid_argument*>(&e) == nullptr) {
      throw;
    }
    if (mutated) {
      params_ = backup_.params;
      trace_ = backup_.trace;
      decay_ = backup_.decay;
      optimizer_ = backup_.optimizer;
      rng_ = backup_.rng;
    }
    ++incidents_;
    diag = {};
    diag.rejected = true;
  }
  return diag;
}

}  // namespace etrace
