#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "diga/exchange.hpp"
#include "diga/marketstate.hpp"

namespace diga::agent {

// Law of the per-actor component weights g_f, g_c, g_n.
enum class WeightLaw { Exponential, Laplace };

std::string to_string(WeightLaw law);
WeightLaw weight_law_from_string(const std::string& s);

// What the fundamental component sees each minute: the controller's return
// r_t itself, or ln(p_f / p_t) where p_f = p0 exp(r_1 + ... + r_t) is the
// price path the controller's returns imply.
enum class Fundamental { Return, Anchored };
// V in the demand function: variance or standard deviation of the observed
// minutely returns.
enum class RiskMeasure { Variance, Std };

std::string to_string(Fundamental f);
Fundamental fundamental_from_string(const std::string& s);
std::string to_string(RiskMeasure r);
RiskMeasure risk_measure_from_string(const std::string& s);

struct MetaAgentParams {
  double lambda_f = 10.0;
  double lambda_c = 1.5;
  double lambda_n = 1.0;
  double tau0 = 30.0;  // minutes
  double alpha0 = 0.1;
  double sigma_noise = 1e-4;
  double p0 = 10.0;
  double s0 = 100.0;   // mean initial position
  double c0 = 1000.0;  // mean initial cash
  double lambda_min = 1e-3;
  double lambda_max = 5000.0;
  double tick = 0.01;
  double v_min = 1e-4;
  double risk_floor = 1e-5;  // lower bound on V inside the demand function
  WeightLaw law = WeightLaw::Exponential;
  Fundamental fundamental = Fundamental::Anchored;
  RiskMeasure risk = RiskMeasure::Variance;

  void validate() const;  // throws ConfigError
};

struct ActorState {
  double S = 0.0;
  double C = 0.0;
  double g_f = 0.0;
  double g_c = 0.0;
  double g_n = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
};

// Fills tau and alpha from the weights.
ActorState make_actor(double S, double C, double g_f, double g_c, double g_n,
                      const MetaAgentParams& gamma);
ActorState spawn_actor(std::mt19937_64& rng, const MetaAgentParams& gamma);

double clamp_rate(double lambda, const MetaAgentParams& gamma);
// Exponential inter-arrival time in minutes at the clamped rate.
double wake_interval(double lambda, std::mt19937_64& rng, const MetaAgentParams& gamma);

// (g_f r_t + g_c r_bar + g_n r_sigma) / (g_f + g_c + g_n)
double estimate_return(const ActorState& a, double r_t, double r_bar, double r_sigma);

// u(p) = ln(p_hat / p) / (alpha V p). Throws InputError on non-positive inputs.
double demand(double p, double p_hat, double alpha, double vol);

// Root of ln(p_hat/p)/(alpha V) - p S - C on (0, p_hat) by bisection in
// log-price. Returns nullopt when the bracket cannot be represented.
std::optional<double> solve_lowest_price(double S, double C, double p_hat, double alpha,
                                         double vol);

// V for the demand function from the observed return std (already >= v_min),
// floored at risk_floor.
double risk_volatility(double vol_std, const MetaAgentParams& gamma);

// Everything a wake-up computed, kept for tests and traces.
struct Decision {
  double r_hat = 0.0;
  double p_hat = 0.0;
  double p_low = 0.0;
  double p_raw = 0.0;   // uniform draw before tick rounding
  double q_raw = 0.0;   // u(p_raw) - S
  std::optional<ex::Order> order;
  std::string skip;     // reason when no order is emitted
};

// One actor's order from an observation; r_f is the fundamental return. Draws
// r_sigma, then the price uniform; ids and timestamps are left for the caller.
Decision decide(const ActorState& a, const ex::MarketObservation& obs, double r_f,
                std::mt19937_64& rng, const MetaAgentParams& gamma);

struct GenerationResult {
  std::vector<ex::Order> flow;         // emitted orders in time order
  std::vector<ex::Trade> trades;
  std::vector<double> minute_prices;   // seed price + T minute-end mids
  std::vector<double> oir;             // top-of-book OIR at each minute close
  std::size_t wakeups = 0;
  std::size_t skipped = 0;
};

// Drives one trading day: wake-ups follow an inhomogeneous Poisson process
// whose rate is the (clamped) arrival rate of the current minute; each wake-up
// spawns a fresh actor that observes the exchange and submits one order.
GenerationResult generate_day(const ms::MarketStateDay& states, const MetaAgentParams& gamma,
                              std::uint64_t seed);

}  // namespace diga::agent
