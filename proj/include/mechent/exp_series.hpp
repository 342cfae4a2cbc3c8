#ifndef MECHENT_EXP_SERIES_HPP
#define MECHENT_EXP_SERIES_HPP

// Finite sums  sum_n chi_n t^k_n exp(zeta_n t)  with complex chi, zeta.
// The polynomial factor t^k only appears in transient solutions where a
// source term is resonant with the homogeneous decay.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

#include "mechent/core.hpp"

namespace mechent {

struct ExpTerm {
  cplx chi;
  cplx zeta;
  int power = 0;
};

class ExponentialSeries {
public:
  static constexpr std::size_t kDefaultCap = 200000;

  ExponentialSeries() = default;
  explicit ExponentialSeries(std::vector<ExpTerm> terms) : terms_(std::move(terms)) {}

  const std::vector<ExpTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  void add(const ExpTerm& t) {
    if (t.chi != cplx(0.0)) terms_.push_back(t);
  }

  ExponentialSeries& operator+=(const ExponentialSeries& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    return *this;
  }

  ExponentialSeries scaled(cplx f) const {
    ExponentialSeries out(terms_);
    for (auto& t : out.terms_) t.chi *= f;
    return out;
  }

  ExponentialSeries conjugate() const {
    ExponentialSeries out(terms_);
    for (auto& t : out.terms_) {
      t.chi = std::conj(t.chi);
      t.zeta = std::conj(t.zeta);
    }
    return out;
  }

  /// (s + conj s)/2, unmerged.
  ExponentialSeries real_part() const {
    ExponentialSeries out = scaled(0.5);
    out += conjugate().scaled(0.5);
    return out;
  }

  ExponentialSeries derivative() const {
    ExponentialSeries out;
    for (const auto& t : terms_) {
      out.add({t.chi * t.zeta, t.zeta, t.power});
      if (t.power > 0) out.add({t.chi * double(t.power), t.zeta, t.power - 1});
    }
    return out;
  }

  cplx operator()(double t) const {
    cplx s = 0.0;
    for (const auto& term : terms_) s += term.chi * std::pow(t, term.power) * std::exp(term.zeta * t);
    return s;
  }

  /// Terms with purely imaginary exponent and no polynomial factor.
  ExponentialSeries steady_part(double tol) const {
    ExponentialSeries out;
    for (const auto& t : terms_)
      if (t.power == 0 && std::abs(t.zeta.real()) <= tol) out.add({t.chi, cplx(0.0, t.zeta.imag()), 0});
    return out;
  }

  /// Coefficient of exp(i nu t) in the steady part.
  cplx harmonic(double nu, double tol) const {
    cplx c = 0.0;
    for (const auto& t : terms_)
      if (t.power == 0 && std::abs(t.zeta.real()) <= tol && std::abs(t.zeta.imag() - nu) <= tol)
        c += t.chi;
    return c;
  }

  /// Combines terms whose exponents agree within tol.
  void merge(double tol) {
    if (terms_.size() < 2) return;
    const double q = tol > 0.0 ? tol : std::numeric_limits<double>::min();
    std::map<std::tuple<int, long long, long long>, std::size_t> index;
    std::vector<ExpTerm> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      const auto key = std::make_tuple(t.power, std::llround(t.zeta.real() / q),
                                       std::llround(t.zeta.imag() / q));
      auto it = index.find(key);
      if (it == index.end()) {
        index.emplace(key, out.size());
        out.push_back(t);
      } else {
        out[it->second].chi += t.chi;
      }
    }
    std::erase_if(out, [](const ExpTerm& t) { return t.chi == cplx(0.0); });
    terms_ = std::move(out);
  }

  /// Upper bound of |chi t^k exp(zeta t)| over t >= t0.
  static double term_bound(const ExpTerm& t, double t0 = 0.0) {
    const double a = t.zeta.real();
    const double mag = std::abs(t.chi);
    if (t.power == 0) return a <= 0.0 ? mag * std::exp(a * t0) : std::numeric_limits<double>::infinity();
    if (a >= 0.0) return std::numeric_limits<double>::infinity();
    const double tpk = std::max(t0, t.power / -a);
    return mag * std::pow(tpk, t.power) * std::exp(a * tpk);
  }

  double bound(double t0 = 0.0) const {
    double s = 0.0;
    for (const auto& t : terms_) s += term_bound(t, t0);
    return s;
  }

  /// Drops terms bounded below abs_tol on [t0, inf).
  void prune(double abs_tol, double t0 = 0.0) {
    std::erase_if(terms_, [&](const ExpTerm& t) { return term_bound(t, t0) < abs_tol; });
  }

  void check_cap(std::size_t cap = kDefaultCap) const {
    if (terms_.size() > cap)
      throw NumericError("exponential series exceeded its term cap (" + std::to_string(cap) + ")");
  }

private:
  std::vector<ExpTerm> terms_;
};

inline ExponentialSeries operator+(ExponentialSeries a, const ExponentialSeries& b) {
  a += b;
  return a;
}

inline ExponentialSeries product(const ExponentialSeries& a, const ExponentialSeries& b) {
  ExponentialSeries out;
  for (const auto& x : a.terms())
    for (const auto& y : b.terms()) out.add({x.chi * y.chi, x.zeta + y.zeta, x.power + y.power});
  return out;
}

/// Thrown when an integration kernel 1/(z + zeta) is singular in a context
/// where no secular solution is admissible.
class ResonanceError : public NumericError {
public:
  ResonanceError(const std::string& what, cplx zeta) : NumericError(what), zeta_(zeta) {}
  cplx zeta() const { return zeta_; }

private:
  cplx zeta_;
};

/// Solution of y' = -z y + src with y(0) = 0. A term with |z + zeta| <= tol is
/// resonant and yields chi t^(k+1)/(k+1) exp(-z t); if allow_secular is false
/// this raises ResonanceError instead.
inline ExponentialSeries integrate_decay(const ExponentialSeries& src, cplx z, double tol,
                                         bool allow_secular = true) {
  ExponentialSeries out;
  for (const auto& t : src.terms()) {
    const cplx s = z + t.zeta;
    if (std::abs(s) <= tol) {
      if (!allow_secular) throw ResonanceError("resonant source term: |z + zeta| below tolerance", t.zeta);
      out.add({t.chi / double(t.power + 1), -z, t.power + 1});
      continue;
    }
    // particular solution exp(zeta t) sum_j c_j t^j
    std::vector<cplx> c(static_cast<std::size_t>(t.power) + 1);
    c[t.power] = t.chi / s;
    for (int j = t.power - 1; j >= 0; --j) c[j] = -double(j + 1) * c[j + 1] / s;
    for (int j = 0; j <= t.power; ++j) out.add({c[j], t.zeta, j});
    out.add({-c[0], -z, 0});
  }
  return out;
}

/// Evaluates a series on a sequence of equally spaced times by phasor
/// recurrence; re-synchronised exactly whenever the step changes.
class SeriesStepper {
public:
  explicit SeriesStepper(const ExponentialSeries& s) {
    for (const auto& t : s.terms()) {
      terms_.push_back(t);
      max_power_ = std::max(max_power_, t.power);
    }
  }

  void reset(double t, double h) {
    t_start_ = t_ = t;
    h_ = h;
    count_ = 0;
    mult_.resize(terms_.size());
    val_.resize(terms_.size());
    for (std::size_t n = 0; n < terms_.size(); ++n) mult_[n] = std::exp(terms_[n].zeta * h);
    resync();
  }

  /// Removes terms that stay below abs_tol from the current time on.
  void drop_decayed(double abs_tol) {
    std::size_t k = 0;
    for (std::size_t n = 0; n < terms_.size(); ++n) {
      if (ExponentialSeries::term_bound(terms_[n], t_) < abs_tol) continue;
      terms_[k] = terms_[n];
      mult_[k] = mult_[n];
      val_[k] = val_[n];
      ++k;
    }
    terms_.resize(k);
    mult_.resize(k);
    val_.resize(k);
  }

  cplx value() const {
    if (max_power_ == 0) {
      cplx s = 0.0;
      for (const auto& v : val_) s += v;
      return s;
    }
    std::vector<cplx> by_power(static_cast<std::size_t>(max_power_) + 1, cplx(0.0));
    for (std::size_t n = 0; n < terms_.size(); ++n) by_power[terms_[n].power] += val_[n];
    cplx s = 0.0;
    for (int k = max_power_; k >= 0; --k) s = s * t_ + by_power[k];
    return s;
  }

  void advance() {
    ++count_;
    t_ = t_start_ + double(count_) * h_;
    if (count_ % 4096 == 0) {
      resync();
      return;
    }
    for (std::size_t n = 0; n < val_.size(); ++n) val_[n] *= mult_[n];
  }

  double time() const { return t_; }
  std::size_t size() const { return terms_.size(); }

private:
  void resync() {
    for (std::size_t n = 0; n < terms_.size(); ++n)
      val_[n] = terms_[n].chi * std::exp(terms_[n].zeta * t_);
  }

  std::vector<ExpTerm> terms_;
  std::vector<cplx> mult_;
  std::vector<cplx> val_;
  double t_start_ = 0.0;
  double t_ = 0.0;
  double h_ = 0.0;
  std::size_t count_ = 0;
  int max_power_ = 0;
};

}  // namespace mechent

#endif  // MECHENT_EXP_SERIES_HPP
