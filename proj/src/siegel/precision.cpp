#include "siegel/precision.hpp"

#include <vector>

namespace siegel {

Real Real::ratio(const mpz_class& num, const mpz_class& den, mpfr_prec_t prec) {
  Real n(num, prec + 32);
  Real d(den, prec + 32);
  return (n / d).round_to(prec);
}

Real Real::pi(mpfr_prec_t prec) {
  Real r(prec);
  mpfr_const_pi(r.raw(), MPFR_RNDN);
  return r;
}

Real Real::pow2(long e, mpfr_prec_t prec) {
  Real r(prec);
  mpfr_set_ui_2exp(r.raw(), 1, e, MPFR_RNDN);
  return r;
}

Real Real::from_str(const std::string& s, mpfr_prec_t prec) {
  Real r(prec);
  if (mpfr_set_str(r.raw(), s.c_str(), 10, MPFR_RNDN) != 0) {
    mpfr_set_nan(r.raw());
  }
  return r;
}

std::string Real::str(int digits) const {
  if (digits <= 0) digits = 20;
  std::vector<char> buf(digits + 32);
  mpfr_snprintf(buf.data(), buf.size(), "%.*Rg", digits, v_);
  return std::string(buf.data());
}

Complex exp2pii(const Real& t) {
  mpfr_prec_t p = t.prec();
  Real ang = Real::pi(p + 8) * 2.0 * t.round_to(p + 8);
  Real c(p), s(p);
  mpfr_sin_cos(s.raw(), c.raw(), ang.raw(), MPFR_RNDN);
  return Complex(c, s);
}

}  // namespace siegel
