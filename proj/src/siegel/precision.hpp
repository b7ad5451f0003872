#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <complex>
#include <string>
#include <utility>

namespace siegel {

// MPFR-backed real. Precision is a property of the value; binary operations
// produce results at the wider of the two operand precisions.
class Real {
 public:
  explicit Real(mpfr_prec_t prec = 128) {
    mpfr_init2(v_, prec);
    mpfr_set_zero(v_, 1);
  }
  Real(double x, mpfr_prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_d(v_, x, MPFR_RNDN);
  }
  Real(const mpz_class& z, mpfr_prec_t prec) {
    mpfr_init2(v_, prec);
    mpfr_set_z(v_, z.get_mpz_t(), MPFR_RNDN);
  }
  Real(const Real& o) {
    mpfr_init2(v_, o.prec());
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  Real(Real&& o) noexcept {
    mpfr_init2(v_, o.prec());
    mpfr_swap(v_, o.v_);
  }
  Real& operator=(const Real& o) {
    if (this != &o) {
      mpfr_set_prec(v_, o.prec());
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }
  Real& operator=(Real&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }
  ~Real() { mpfr_clear(v_); }

  static Real ratio(const mpz_class& num, const mpz_class& den, mpfr_prec_t prec);
  static Real pi(mpfr_prec_t prec);
  static Real pow2(long e, mpfr_prec_t prec = 64);  // 2^e
  static Real from_str(const std::string& s, mpfr_prec_t prec);

  mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
  Real round_to(mpfr_prec_t prec) const {
    Real r(prec);
    mpfr_set(r.v_, v_, MPFR_RNDN);
    return r;
  }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  std::string str(int digits = 20) const;
  int sign() const { return mpfr_sgn(v_); }
  bool is_zero() const { return mpfr_zero_p(v_); }

  mpfr_srcptr raw() const { return v_; }
  mpfr_ptr raw() { return v_; }

  friend Real operator+(const Real& a, const Real& b) {
    Real r(std::max(a.prec(), b.prec()));
    mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator-(const Real& a, const Real& b) {
    Real r(std::max(a.prec(), b.prec()));
    mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator*(const Real& a, const Real& b) {
    Real r(std::max(a.prec(), b.prec()));
    mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real operator/(const Real& a, const Real& b) {
    Real r(std::max(a.prec(), b.prec()));
    mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  Real operator-() const {
    Real r(prec());
    mpfr_neg(r.v_, v_, MPFR_RNDN);
    return r;
  }

  friend Real operator+(const Real& a, double b) { return a + Real(b, a.prec()); }
  friend Real operator+(double a, const Real& b) { return Real(a, b.prec()) + b; }
  friend Real operator-(const Real& a, double b) { return a - Real(b, a.prec()); }
  friend Real operator-(double a, const Real& b) { return Real(a, b.prec()) - b; }
  friend Real operator*(const Real& a, double b) { return a * Real(b, a.prec()); }
  friend Real operator*(double a, const Real& b) { return Real(a, b.prec()) * b; }
  friend Real operator/(const Real& a, double b) { return a / Real(b, a.prec()); }
  friend Real operator/(double a, const Real& b) { return Real(a, b.prec()) / b; }

  friend bool operator<(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) < 0; }
  friend bool operator>(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) > 0; }
  friend bool operator<=(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) <= 0; }
  friend bool operator>=(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) >= 0; }
  friend bool operator==(const Real& a, const Real& b) { return mpfr_cmp(a.v_, b.v_) == 0; }

  friend Real abs(const Real& a) {
    Real r(a.prec());
    mpfr_abs(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real sqrt(const Real& a) {
    Real r(a.prec());
    mpfr_sqrt(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real log(const Real& a) {
    Real r(a.prec());
    mpfr_log(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real exp(const Real& a) {
    Real r(a.prec());
    mpfr_exp(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real sin(const Real& a) {
    Real r(a.prec());
    mpfr_sin(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real cos(const Real& a) {
    Real r(a.prec());
    mpfr_cos(r.v_, a.v_, MPFR_RNDN);
    return r;
  }
  friend Real atan2(const Real& y, const Real& x) {
    Real r(std::max(y.prec(), x.prec()));
    mpfr_atan2(r.v_, y.v_, x.v_, MPFR_RNDN);
    return r;
  }
  friend Real hypot(const Real& a, const Real& b) {
    Real r(std::max(a.prec(), b.prec()));
    mpfr_hypot(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend Real pow_si(const Real& a, long e) {
    Real r(a.prec());
    mpfr_pow_si(r.v_, a.v_, e, MPFR_RNDN);
    return r;
  }
  friend Real ldexp(const Real& a, long e) {
    Real r(a.prec());
    mpfr_mul_2si(r.v_, a.v_, e, MPFR_RNDN);
    return r;
  }

 private:
  mpfr_t v_;
};

// complex over Real; component precisions are kept equal
class Complex {
 public:
  explicit Complex(mpfr_prec_t prec = 128) : re_(prec), im_(prec) {}
  Complex(Real re, Real im) : re_(std::move(re)), im_(std::move(im)) {}
  Complex(double re, double im, mpfr_prec_t prec) : re_(re, prec), im_(im, prec) {}
  explicit Complex(std::complex<double> z, mpfr_prec_t prec)
      : re_(z.real(), prec), im_(z.imag(), prec) {}

  const Real& real() const { return re_; }
  const Real& imag() const { return im_; }
  mpfr_prec_t prec() const { return std::max(re_.prec(), im_.prec()); }
  std::complex<double> to_std() const { return {re_.to_double(), im_.to_double()}; }

  static Complex polar(const Real& r, const Real& theta) {
    return Complex(r * cos(theta), r * sin(theta));
  }

  friend Complex operator+(const Complex& a, const Complex& b) {
    return Complex(a.re_ + b.re_, a.im_ + b.im_);
  }
  friend Complex operator-(const Complex& a, const Complex& b) {
    return Complex(a.re_ - b.re_, a.im_ - b.im_);
  }
  friend Complex operator*(const Complex& a, const Complex& b) {
    return Complex(a.re_ * b.re_ - a.im_ * b.im_, a.re_ * b.im_ + a.im_ * b.re_);
  }
  friend Complex operator/(const Complex& a, const Complex& b) {
    Real d = b.re_ * b.re_ + b.im_ * b.im_;
    return Complex((a.re_ * b.re_ + a.im_ * b.im_) / d, (a.im_ * b.re_ - a.re_ * b.im_) / d);
  }
  Complex operator-() const { return Complex(-re_, -im_); }

  friend Complex operator*(const Real& s, const Complex& z) {
    return Complex(s * z.re_, s * z.im_);
  }
  friend Complex operator*(const Complex& z, const Real& s) { return s * z; }
  friend Complex operator/(const Complex& z, const Real& s) {
    return Complex(z.re_ / s, z.im_ / s);
  }

  Complex conj() const { return Complex(re_, -im_); }
  Real abs() const { return hypot(re_, im_); }
  Real norm2() const { return re_ * re_ + im_ * im_; }
  Real arg() const { return atan2(im_, re_); }

  friend Complex exp(const Complex& z) {
    Real m = exp(z.re_);
    return Complex(m * cos(z.im_), m * sin(z.im_));
  }
  friend Complex log(const Complex& z) { return Complex(log(z.abs()), z.arg()); }

  Complex pow_ui(unsigned long e) const {
    Complex acc(1.0, 0.0, prec());
    Complex base = *this;
    while (e) {
      if (e & 1) acc = acc * base;
      base = base * base;
      e >>= 1;
    }
    return acc;
  }

 private:
  Real re_, im_;
};

// e^{2 pi i t}
Complex exp2pii(const Real& t);

// helpers so numeric kernels can be written once for std::complex<double>
// and once for Complex via templates
inline std::complex<double> make_like(const std::complex<double>&, double re, double im) {
  return {re, im};
}
inline Complex make_like(const Complex& proto, double re, double im) {
  return Complex(re, im, proto.prec());
}
inline double abs_d(const std::complex<double>& z) { return std::abs(z); }
inline double abs_d(const Complex& z) { return z.abs().to_double(); }
inline std::complex<double> to_std(const std::complex<double>& z) { return z; }
inline std::complex<double> to_std(const Complex& z) { return z.to_std(); }

}  // namespace siegel
