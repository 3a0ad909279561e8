#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "abr/errors.hpp"

// Group-relative policy optimization math as pure functions: advantages
// against the group mean reward, the clipped surrogate objective with a KL
// penalty, a sample-based KL estimate, and zero-variance group pruning.
//
// All intermediate arithmetic is exact rational (doubles are dyadic
// rationals), so identities like "advantages sum to zero" and "identity
// ratios with beta = 0 give objective 0" hold exactly, not approximately.
// Consumed by external training loops and by the CLI's rl-verify subcommand.

namespace abr::rl {

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Exact rational on 128-bit integers. Inputs are ordinary RL-scale numbers
// (rewards, probability ratios, log-probabilities); values far outside that
// range overflow and throw.
class Rat {
 public:
  Rat() : num_(0), den_(1) {}

  static Rat from_int(std::int64_t v) {
    Rat r;
    r.num_ = v;
    r.den_ = 1;
    return r;
  }

  static Rat from_double(double v) {
    if (!std::isfinite(v)) throw ShapeMismatch("non-finite input");
    if (v == 0.0) return from_int(0);
    int exp = 0;
    double m = std::frexp(v, &exp);  // v = m * 2^exp, |m| in [0.5, 1)
    auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));  // exact
    int shift = exp - 53;
    Rat r;
    if (shift >= 0) {
      if (shift > 70) throw ArithmeticOverflow("input magnitude beyond supported range");
      r.num_ = i128(mant) << shift;
      r.den_ = 1;
    } else {
      if (-shift > 120) throw ArithmeticOverflow("input magnitude beyond supported range");
      r.num_ = mant;
      r.den_ = i128(1) << -shift;
    }
    r.reduce();
    return r;
  }

  bool is_zero() const { return num_ == 0; }

  friend Rat operator+(const Rat& a, const Rat& b) {
    return make(checked_add(checked_mul(a.num_, b.den_), checked_mul(b.num_, a.den_)),
                checked_mul(a.den_, b.den_));
  }
  friend Rat operator-(const Rat& a, const Rat& b) {
    return make(checked_add(checked_mul(a.num_, b.den_), -checked_mul(b.num_, a.den_)),
                checked_mul(a.den_, b.den_));
  }
  friend Rat operator*(const Rat& a, const Rat& b) {
    return make(checked_mul(a.num_, b.num_), checked_mul(a.den_, b.den_));
  }

  Rat divided_by_int(std::int64_t d) const {
    if (d == 0) throw ShapeMismatch("division by zero");
    return make(num_, checked_mul(den_, i128(d)));
  }

  friend bool operator==(const Rat& a, const Rat& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend bool operator<(const Rat& a, const Rat& b) {
    return checked_mul(a.num_, b.den_) < checked_mul(b.num_, a.den_);
  }
  friend bool operator<=(const Rat& a, const Rat& b) { return a == b || a < b; }

  double to_double() const {
    if (num_ == 0) return 0.0;
    return static_cast<double>(static_cast<long double>(num_) / static_cast<long double>(den_));
  }

 private:
  using i128 = __int128;

  static i128 checked_mul(i128 a, i128 b) {
    i128 out;
    if (__builtin_mul_overflow(a, b, &out)) throw ArithmeticOverflow("rational multiply overflow");
    return out;
  }

  static i128 checked_add(i128 a, i128 b) {
    i128 out;
    if (__builtin_add_overflow(a, b, &out)) throw ArithmeticOverflow("rational add overflow");
    return out;
  }

  static i128 gcd(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      i128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rat make(i128 num, i128 den) {
    Rat r;
    r.num_ = num;
    r.den_ = den;
    r.reduce();
    return r;
  }

  void reduce() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    if (num_ == 0) {
      den_ = 1;
      return;
    }
    i128 g = gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  i128 num_;
  i128 den_;
};

// ---------------------------------------------------------------------------

struct RolloutGroup {
  std::vector<double> rewards;
  std::vector<double> ratios;    // pi_new / pi_old, optional for advantage-only use
  std::vector<double> logp_new;  // optional
  std::vector<double> logp_old;  // optional
};

struct PolicyHyper {
  double epsilon = 0.2;  // clip radius
  double beta = 0.0;     // KL weight

  void validate() const {
    if (!(epsilon > 0.0)) throw ShapeMismatch("epsilon must be > 0");
    if (!(beta >= 0.0)) throw ShapeMismatch("beta must be >= 0");
  }
};

// A_i = r_i - mean(r). The exact rational results sum to zero by
// construction.
inline std::vector<Rat> group_advantages_exact(const std::vector<double>& rewards) {
  if (rewards.empty()) throw ShapeMismatch("group_advantages needs at least one reward");
  Rat sum;
  std::vector<Rat> r;
  r.reserve(rewards.size());
  for (double v : rewards) {
    r.push_back(Rat::from_double(v));
    sum = sum + r.back();
  }
  Rat mean = sum.divided_by_int(static_cast<std::int64_t>(rewards.size()));
  std::vector<Rat> out;
  out.reserve(rewards.size());
  for (const auto& ri : r) out.push_back(ri - mean);
  return out;
}

// Double view of the exact advantages (each value correctly rounded once).
inline std::vector<double> group_advantages(const std::vector<double>& rewards) {
  std::vector<double> out;
  for (const auto& a : group_advantages_exact(rewards)) out.push_back(a.to_double());
  return out;
}

// mean_i min(ratio_i * A_i, clip(ratio_i, 1-eps, 1+eps) * A_i) - beta * kl
inline double clipped_objective(const RolloutGroup& group, const PolicyHyper& hyper, double kl) {
  hyper.validate();
  if (!std::isfinite(kl)) throw ShapeMismatch("kl must be finite");
  if (group.ratios.size() != group.rewards.size()) {
    throw ShapeMismatch("ratios and rewards differ in length");
  }
  std::vector<Rat> advantages = group_advantages_exact(group.rewards);
  Rat one = Rat::from_int(1);
  Rat eps = Rat::from_double(hyper.epsilon);
  Rat lo = one - eps;
  Rat hi = one + eps;
  Rat sum;
  for (std::size_t i = 0; i < group.ratios.size(); ++i) {
    Rat ratio = Rat::from_double(group.ratios[i]);
    Rat clipped = ratio < lo ? lo : (hi < ratio ? hi : ratio);
    Rat a = ratio * advantages[i];
    Rat b = clipped * advantages[i];
    sum = sum + (a < b ? a : b);
  }
  Rat objective = sum.divided_by_int(static_cast<std::int64_t>(group.ratios.size())) -
                  Rat::from_double(hyper.beta) * Rat::from_double(kl);
  return objective.to_double();
}

// Sample-based estimate mean(logp_old - logp_new).
inline double kl_estimate(const std::vector<double>& logp_new, const std::vector<double>& logp_old) {
  if (logp_new.size() != logp_old.size()) throw ShapeMismatch("log-probability lengths differ");
  if (logp_new.empty()) throw ShapeMismatch("kl_estimate needs at least one sample");
  Rat sum;
  for (std::size_t i = 0; i < logp_new.size(); ++i) {
    sum = sum + (Rat::from_double(logp_old[i]) - Rat::from_double(logp_new[i]));
  }
  return sum.divided_by_int(static_cast<std::int64_t>(logp_new.size())).to_double();
}

inline bool zero_reward_variance(const std::vector<double>& rewards) {
  for (const auto& r : rewards) {
    if (r != rewards.front()) return false;
  }
  return true;  // including the empty group, which carries no signal
}

// Dynamic sampling: prune groups whose identical rewards give all-zero
// advantages and hence no gradient signal. Order is preserved.
inline std::vector<RolloutGroup> dynamic_sampling_filter(std::vector<RolloutGroup> groups) {
  std::vector<RolloutGroup> kept;
  for (auto& g : groups) {
    if (!zero_reward_variance(g.rewards)) kept.push_back(std::move(g));
  }
  return kept;
}

}  // namespace abr::rl
