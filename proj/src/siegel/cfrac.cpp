#include "siegel/cfrac.hpp"

#include <cmath>
#include <sstream>

namespace siegel::cfrac {

void QuotientSequence::validate() const {
  for (const auto& a : prefix)
    if (a < 1) throw input_error("quotient sequence: prefix entry < 1");
  switch (tail) {
    case TailKind::finite:
      if (prefix.empty()) throw input_error("quotient sequence: empty");
      break;
    case TailKind::periodic:
      if (period.empty()) throw input_error("quotient sequence: empty period");
      for (const auto& a : period)
        if (a < 1) throw input_error("quotient sequence: period entry < 1");
      break;
    case TailKind::expr:
      if (expr_N < 1) throw input_error("quotient sequence: expr N < 1");
      for (std::size_t i = 0; i < expr_idx.size(); ++i) {
        if (expr_idx[i] < 1) throw input_error("quotient sequence: expr index < 1");
        if (i && expr_idx[i] <= expr_idx[i - 1])
          throw input_error("quotient sequence: expr indices not strictly increasing");
      }
      break;
  }
}

std::vector<mpz_class> QuotientSequence::quotients(std::size_t k) const {
  validate();
  std::vector<mpz_class> out;
  out.reserve(std::min<std::size_t>(k, 4096));

  if (tail == TailKind::expr) {
    // left-to-right self-referential walk; q tracks the running denominator
    mpz_class q_prev = 0, q_cur = 1;  // q_{-1}, q_0
    std::size_t j = 0;                // next unused special index
    std::uint64_t pending = 0;        // n_j whose successor entry is special
    bool have_pending = false;
    mpz_class q_at_pending;
    for (std::size_t m = 1; m <= k; ++m) {
      mpz_class a;
      if (m <= prefix.size()) {
        a = prefix[m - 1];
      } else if (have_pending && m == pending + 1) {
        if (q_at_pending > 62)
          throw numerical_error(
              "quotient too large: a_" + std::to_string(m) + " = 3^(2^" +
              q_at_pending.get_str() + ") needs about 2^" + q_at_pending.get_str() +
              " * 1.585 bits, beyond the " + std::to_string(max_entry_bits) + "-bit guard");
        unsigned long e = 1ul << mpz_get_ui(q_at_pending.get_mpz_t());
        double bits = static_cast<double>(e) * std::log2(3.0);
        if (bits > static_cast<double>(max_entry_bits))
          throw numerical_error("quotient too large: a_" + std::to_string(m) + " = 3^" +
                                std::to_string(e) + " needs " +
                                std::to_string(static_cast<std::uint64_t>(bits) + 1) +
                                " bits, beyond the " + std::to_string(max_entry_bits) +
                                "-bit guard");
        mpz_ui_pow_ui(a.get_mpz_t(), 3, e);
        have_pending = false;
      } else {
        a = expr_N;
      }
      out.push_back(a);
      mpz_class q_next = a * q_cur + q_prev;
      q_prev = q_cur;
      q_cur = q_next;
      if (j < expr_idx.size() && m == expr_idx[j]) {
        pending = expr_idx[j];
        q_at_pending = q_cur;
        have_pending = true;
        ++j;
      }
    }
    return out;
  }

  for (std::size_t m = 1; m <= k; ++m) {
    if (m <= prefix.size()) {
      out.push_back(prefix[m - 1]);
    } else if (tail == TailKind::periodic) {
      out.push_back(period[(m - prefix.size() - 1) % period.size()]);
    } else {
      throw input_error("insufficient quotients: sequence has " +
                        std::to_string(prefix.size()) + ", need " + std::to_string(k));
    }
  }
  return out;
}

QuotientSequence golden() {
  QuotientSequence s;
  s.tail = TailKind::periodic;
  s.period = {mpz_class(1)};
  return s;
}

QuotientSequence constant(unsigned long a) {
  QuotientSequence s;
  s.tail = TailKind::periodic;
  s.period = {mpz_class(a)};
  return s;
}

QuotientSequence build_alpha0(unsigned long N, std::vector<std::uint64_t> indices) {
  QuotientSequence s;
  s.tail = TailKind::expr;
  s.expr_N = N;
  s.expr_idx = std::move(indices);
  s.validate();
  return s;
}

std::vector<Convergent> convergents(const QuotientSequence& seq, std::size_t k) {
  if (k < 1) throw input_error("convergents: k must be >= 1");
  auto a = seq.quotients(k);
  std::vector<Convergent> out;
  out.reserve(k);
  mpz_class p_prev = 1, p_cur = 0;  // p_{-1}, p_0
  mpz_class q_prev = 0, q_cur = 1;  // q_{-1}, q_0
  for (std::size_t m = 1; m <= k; ++m) {
    mpz_class p_next = a[m - 1] * p_cur + p_prev;
    mpz_class q_next = a[m - 1] * q_cur + q_prev;
    p_prev = p_cur;
    p_cur = p_next;
    q_prev = q_cur;
    q_cur = q_next;
    out.push_back({p_cur, q_cur, static_cast<int>(m)});
  }
  return out;
}

RealValue eval_real(const QuotientSequence& seq, std::size_t depth, mpfr_prec_t precision_bits) {
  if (depth < 1) throw input_error("eval_real: depth must be >= 1");
  auto conv = convergents(seq, depth);
  RealValue rv{Real::ratio(conv.back().p, conv.back().q, precision_bits), Real(64), depth};
  bool have_next = true;
  mpz_class a_next;
  try {
    auto a = seq.quotients(depth + 1);
    a_next = a[depth];
  } catch (const error&) {
    have_next = false;
  }
  if (have_next) {
    mpz_class q_prev = depth >= 2 ? conv[depth - 2].q : mpz_class(1);
    mpz_class q_next = a_next * conv.back().q + q_prev;
    rv.tail_bound = Real::ratio(1, conv.back().q * q_next, 64);
  }
  return rv;
}

RealValue eval_real_auto(const QuotientSequence& seq, mpfr_prec_t precision_bits,
                         long guard_bits) {
  Real target = Real::pow2(-(precision_bits + guard_bits));
  std::size_t depth = 8;
  if (!seq.infinite()) {
    RealValue rv = eval_real(seq, seq.prefix.size(), precision_bits);
    rv.tail_bound = Real(0.0, 64);
    return rv;
  }
  for (;;) {
    RealValue rv = eval_real(seq, depth, precision_bits);
    if (rv.tail_bound < target) return rv;
    if (depth > 100000) throw numerical_error("eval_real_auto: depth runaway");
    depth *= 2;
  }
}

BrjunoPartialSum brjuno_sum(const QuotientSequence& seq, std::size_t K,
                            mpfr_prec_t precision_bits) {
  if (K < 1) throw input_error("brjuno_sum: K must be >= 1");
  auto conv = convergents(seq, K + 1);  // throws insufficient-quotients if too short
  BrjunoPartialSum out;
  out.K = K;
  out.value = Real(0.0, precision_bits);
  out.terms.reserve(K);
  for (std::size_t k = 1; k <= K; ++k) {
    Real lq = log(Real(conv[k].q, precision_bits));
    Real term = lq / Real(conv[k - 1].q, precision_bits);
    out.terms.push_back(term);
    out.value = out.value + term;
  }
  return out;
}

namespace {

// exact difference p1/q1 - p2/q2 as a Real
Real ratio_diff(const mpz_class& p1, const mpz_class& q1, const mpz_class& p2,
                const mpz_class& q2, mpfr_prec_t prec) {
  return Real::ratio(p1 * q2 - p2 * q1, q1 * q2, prec);
}

}  // namespace

PerturbationSetup make_setup(const QuotientSequence& alpha, const QuotientSequence& theta, int n,
                             const mpz_class& A_n, mpfr_prec_t precision_bits) {
  if (n < 1) throw input_error("make_setup: n must be >= 1");
  if (A_n < 1) throw input_error("make_setup: A_n must be >= 1");
  const mpfr_prec_t W = precision_bits + 96;

  auto conv = convergents(alpha, static_cast<std::size_t>(n));
  PerturbationSetup s;
  s.alpha_quotients = alpha;
  s.theta_quotients = theta;
  s.n = n;
  s.A_n = A_n;
  s.p_n = conv[n - 1].p;
  s.q_n = conv[n - 1].q;
  s.q_nm1 = n >= 2 ? conv[n - 2].q : mpz_class(1);
  s.precision_bits = precision_bits;

  // closed form: (-1)^n / (q_n^2 (A_n + theta) + q_n q_{n-1})
  RealValue theta_v = eval_real_auto(theta, W, 32);
  mpz_class qn2 = s.q_n * s.q_n;
  Real denom = Real(qn2 * A_n + s.q_n * s.q_nm1, W) + Real(qn2, W) * theta_v.value;
  Real eps_closed = Real(n % 2 == 0 ? 1.0 : -1.0, W) / denom;

  // direct: alpha_n = [0; a_1..a_n, A_n, t_1..t_D], epsilon = alpha_n - p_n/q_n
  // with the difference taken by exact cross-multiplication
  Real eps_direct(W);
  {
    auto a_head = alpha.quotients(static_cast<std::size_t>(n));
    Real target_bound = abs(eps_closed) * Real::pow2(-(precision_bits + 40));
    std::size_t D = 16;
    for (;;) {
      QuotientSequence comp;
      comp.prefix = a_head;
      comp.prefix.push_back(A_n);
      bool tail_done = false;
      try {
        auto t = theta.quotients(D);
        comp.prefix.insert(comp.prefix.end(), t.begin(), t.end());
      } catch (const error&) {
        // theta itself is finite; alpha_n is rational and the tail is exact
        auto t = theta.quotients(theta.prefix.size());
        comp.prefix.insert(comp.prefix.end(), t.begin(), t.end());
        tail_done = true;
      }
      auto cc = convergents(comp, comp.prefix.size());
      eps_direct = ratio_diff(cc.back().p, cc.back().q, s.p_n, s.q_n, W);
      // truncating theta at depth D perturbs alpha_n by at most 1/q_hat^2
      Real trunc_bound = Real::ratio(1, cc.back().q * cc.back().q, 64);
      if (tail_done || trunc_bound < target_bound) {
        s.alpha_n = Real::ratio(cc.back().p, cc.back().q, precision_bits);
        break;
      }
      if (D > 1u << 20) throw numerical_error("make_setup: theta depth runaway");
      D *= 2;
    }
  }

  Real gap = abs(eps_closed - eps_direct);
  Real rel_gap = gap / abs(eps_closed);
  if (!(rel_gap < Real::pow2(-(precision_bits - 20))))
    throw numerical_error("make_setup: epsilon dual evaluation disagrees, relative gap " +
                          rel_gap.str(6));

  // precision must actually resolve epsilon against 1
  {
    long e2 = 0;
    mpfr_get_d_2exp(&e2, eps_closed.raw(), MPFR_RNDN);
    long need = -e2 + 30;
    if (need > precision_bits)
      throw numerical_error("precision exhausted: resolving epsilon_n needs about " +
                            std::to_string(need + 30) + " bits, have " +
                            std::to_string(precision_bits));
  }

  s.alpha_value = eval_real_auto(alpha, precision_bits, 10).value.round_to(precision_bits);
  s.theta_value = theta_v.value.round_to(precision_bits);
  s.epsilon_n = eps_closed.round_to(precision_bits);
  s.dual_gap = rel_gap.round_to(64);

  if (s.epsilon_n.sign() != (n % 2 == 0 ? 1 : -1))
    throw numerical_error("make_setup: epsilon sign violates (-1)^n");
  if (!(abs(s.epsilon_n) * Real(qn2, W) < Real(1.0, 64)))
    throw numerical_error("make_setup: |epsilon| >= 1/q_n^2");
  return s;
}

std::string to_text(const QuotientSequence& seq) {
  std::ostringstream os;
  os << "prefix:";
  for (const auto& a : seq.prefix) os << ' ' << a.get_str();
  os << '\n';
  switch (seq.tail) {
    case TailKind::finite:
      os << "tail: finite\n";
      break;
    case TailKind::periodic: {
      os << "tail: periodic";
      for (const auto& a : seq.period) os << ' ' << a.get_str();
      os << '\n';
      break;
    }
    case TailKind::expr: {
      os << "tail: expr N=" << seq.expr_N << " idx=";
      for (std::size_t i = 0; i < seq.expr_idx.size(); ++i)
        os << (i ? "," : "") << seq.expr_idx[i];
      os << '\n';
      break;
    }
  }
  return os.str();
}

namespace {

mpz_class parse_big(const std::string& tok) {
  try {
    return mpz_class(tok);
  } catch (const std::invalid_argument&) {
    throw input_error("malformed sequence text: bad integer '" + tok + "'");
  }
}

}  // namespace

QuotientSequence from_text(const std::string& text) {
  QuotientSequence seq;
  bool saw_prefix = false, saw_tail = false;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "prefix:") {
      if (saw_prefix) throw input_error("malformed sequence text: duplicate prefix line");
      saw_prefix = true;
      std::string tok;
      while (ls >> tok) seq.prefix.push_back(parse_big(tok));
    } else if (key == "tail:") {
      if (saw_tail) throw input_error("malformed sequence text: duplicate tail line");
      saw_tail = true;
      std::string kind;
      ls >> kind;
      if (kind == "finite") {
        seq.tail = TailKind::finite;
      } else if (kind == "periodic") {
        seq.tail = TailKind::periodic;
        std::string tok;
        while (ls >> tok) seq.period.push_back(parse_big(tok));
        if (seq.period.empty()) throw input_error("malformed sequence text: empty period");
      } else if (kind == "expr") {
        seq.tail = TailKind::expr;
        std::string tok;
        bool saw_n = false, saw_idx = false;
        while (ls >> tok) {
          if (tok.rfind("N=", 0) == 0) {
            seq.expr_N = std::stoul(tok.substr(2));
            saw_n = true;
          } else if (tok.rfind("idx=", 0) == 0) {
            std::string rest = tok.substr(4);
            std::istringstream rs(rest);
            std::string item;
            while (std::getline(rs, item, ','))
              seq.expr_idx.push_back(std::stoull(item));
            saw_idx = true;
          } else {
            throw input_error("malformed sequence text: unknown expr field '" + tok + "'");
          }
        }
        if (!saw_n || !saw_idx)
          throw input_error("malformed sequence text: expr tail needs N= and idx=");
      } else {
        throw input_error("malformed sequence text: unknown tail kind '" + kind + "'");
      }
    } else {
      throw input_error("malformed sequence text: unknown line '" + key + "'");
    }
  }
  if (!saw_tail) throw input_error("malformed sequence text: missing tail line");
  seq.validate();
  return seq;
}

}  // namespace siegel::cfrac
