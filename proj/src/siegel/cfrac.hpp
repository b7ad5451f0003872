#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

#include "siegel/errors.hpp"
#include "siegel/precision.hpp"

namespace siegel::cfrac {

enum class TailKind { finite, periodic, expr };

// quotient sequence a_1, a_2, ... of a continued fraction [0; a_1, a_2, ...].
// tail kinds:
//   finite   - nothing after the prefix
//   periodic - prefix followed by the period repeated forever
//   expr     - self-referential rule: a_m = 3^(2^(q_{n_j})) when m = n_j + 1,
//              a_m = N otherwise, where q_{n_j} is the denominator of the
//              convergent of the sequence built so far (left to right)
struct QuotientSequence {
  std::vector<mpz_class> prefix;
  TailKind tail = TailKind::finite;
  std::vector<mpz_class> period;
  unsigned long expr_N = 1;
  std::vector<std::uint64_t> expr_idx;
  // resource guard for expr entries; an entry needing more bits than this
  // (or an exponent q_{n_j} > 62) raises a numerical error
  std::uint64_t max_entry_bits = (1ull << 26);

  bool infinite() const { return tail != TailKind::finite; }
  // first k quotients; result[i] is a_{i+1}
  std::vector<mpz_class> quotients(std::size_t k) const;
  void validate() const;
};

QuotientSequence golden();                  // [0;1,1,1,...]
QuotientSequence constant(unsigned long a); // [0;a,a,a,...]

// the unbounded-type construction: a_m = N except a_{n_j+1} = 3^(2^(q_{n_j}))
QuotientSequence build_alpha0(unsigned long N, std::vector<std::uint64_t> indices);

struct Convergent {
  mpz_class p, q;
  int k = 0;
};

std::vector<Convergent> convergents(const QuotientSequence& seq, std::size_t k);

struct RealValue {
  Real value;       // p_depth / q_depth rounded to the requested precision
  Real tail_bound;  // 1/(q_depth q_{depth+1}) when a further quotient exists
  std::size_t depth;
};

RealValue eval_real(const QuotientSequence& seq, std::size_t depth, mpfr_prec_t precision_bits);
// grows depth until tail_bound < 2^-(precision_bits + guard_bits)
RealValue eval_real_auto(const QuotientSequence& seq, mpfr_prec_t precision_bits,
                         long guard_bits = 10);

struct BrjunoPartialSum {
  std::size_t K = 0;
  Real value;
  std::vector<Real> terms;  // terms[k-1] = log(q_{k+1}) / q_k
};

BrjunoPartialSum brjuno_sum(const QuotientSequence& seq, std::size_t K,
                            mpfr_prec_t precision_bits = 128);

struct PerturbationSetup {
  QuotientSequence alpha_quotients;
  QuotientSequence theta_quotients;
  int n = 0;
  mpz_class A_n;
  mpz_class p_n, q_n, q_nm1;
  Real alpha_value;  // [0; a_1, a_2, ...]
  Real theta_value;  // [0; t_1, t_2, ...]
  Real alpha_n;      // [0; a_1..a_n, A_n, t_1, t_2, ...]
  Real epsilon_n;    // alpha_n - p_n/q_n
  Real dual_gap;     // relative disagreement of the two epsilon evaluations
  mpfr_prec_t precision_bits = 128;

  double eps_d() const { return epsilon_n.to_double(); }
  double qn_d() const { return q_n.get_d(); }
};

// epsilon_n is evaluated both by the closed form
// (-1)^n / (q_n^2 (A_n + theta) + q_n q_{n-1}) and directly as
// alpha_n - p_n/q_n via exact integer cross-multiplication of a deep
// convergent; construction aborts if the two disagree
PerturbationSetup make_setup(const QuotientSequence& alpha, const QuotientSequence& theta, int n,
                             const mpz_class& A_n, mpfr_prec_t precision_bits = 128);

// line-based text form:
//   prefix: 1 1 1 1
//   tail: periodic 1           | tail: finite | tail: expr N=1 idx=2,5,9
std::string to_text(const QuotientSequence& seq);
QuotientSequence from_text(const std::string& text);

}  // namespace siegel::cfrac
