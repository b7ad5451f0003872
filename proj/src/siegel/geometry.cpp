#include "siegel/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "siegel/rng.hpp"

namespace siegel::geo {

namespace {

cplx cpow_n(cplx z, long n) {
  cplx out(1.0, 0.0);
  cplx base = z;
  unsigned long e = static_cast<unsigned long>(n);
  while (e) {
    if (e & 1) out *= base;
    base *= base;
    e >>= 1;
  }
  return out;
}

bool in_qn_a(const RegionParams& P, double a, cplx Z) {
  double X = P.period();
  cplx z1 = Z + cplx(X - a, 0.0);
  cplx z2 = Z + cplx(a, 0.0);
  return z1.real() > -std::fabs(z1.imag()) && z2.real() < std::fabs(z2.imag());
}

Membership in_xn(const RegionParams& P, double r8, cplx pt) {
  if (!(r8 > 0)) throw input_error("Xn: r8 must be positive");
  cplx u = cpow_n(pt, P.q());
  cplx d = u - cplx(P.eps_signed(), 0.0);
  // within rounding of the q-th power, pt sits on a singular cycle point
  if (std::abs(d) <= 64.0 * std::numeric_limits<double>::epsilon() * P.eps())
    return {false, true};
  double rq = std::pow(r8, static_cast<double>(P.q()));
  double s = rq / (rq + P.eps());
  cplx w = u / d;
  if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) return {false, true};
  return {std::norm(w) < s * s, false};
}

}  // namespace

std::vector<double> Ladder::rungs() const {
  return {r3, r5, r7, r8, r6, r4, rp2, r2, r1, r, rp, r0, rp0};
}

void Ladder::validate(double a_floor) const {
  auto rs = rungs();
  double prev = a_floor;
  static const char* names[] = {"r3", "r5", "r7", "r8", "r6",  "r4", "r'2",
                                "r2", "r1", "r",  "r'", "r0", "r'0"};
  const char* prev_name = "1/A";
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (!(rs[i] > prev)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "ladder chain violated: %s=%.17g !< %s=%.17g", prev_name,
                    prev, names[i], rs[i]);
      throw input_error(buf);
    }
    prev = rs[i];
    prev_name = names[i];
  }
  if (!(rp0 < 1.0)) throw input_error("ladder chain violated: r'0 must be below 1");
}

Ladder Ladder::defaults(double floor) {
  if (!(floor > 0.0) || floor >= 0.88)
    throw input_error("ladder floor too high: no room below the fixed outer rungs");
  Ladder L;
  L.r3 = floor + 0.001;
  L.r5 = floor + 0.002;
  L.r7 = floor + 0.0065;
  L.r8 = 0.93;
  double step = (0.975 - L.r8) / 9.0;
  L.r6 = L.r8 + step;
  L.r4 = L.r8 + 2 * step;
  L.rp2 = L.r8 + 3 * step;
  L.r2 = L.r8 + 4 * step;
  L.r1 = L.r8 + 5 * step;
  L.r = L.r8 + 6 * step;
  L.rp = L.r8 + 7 * step;
  L.r0 = L.r8 + 8 * step;
  L.rp0 = 0.975;
  return L;
}

RegionParams::RegionParams(const cfrac::PerturbationSetup& setup, const Ladder& ladder)
    : lad_(ladder) {
  if (!setup.q_n.fits_slong_p()) throw input_error("region params: q_n too large");
  q_ = mpz_get_si(setup.q_n.get_mpz_t());
  if (q_ < 1) throw input_error("region params: q_n must be positive");
  eps_signed_ = setup.eps_d();
  eps_ = std::fabs(eps_signed_);
  if (!(eps_ > 0.0)) throw input_error("region params: epsilon underflows to zero");
  double ad = setup.A_n.get_d();
  a_floor_ = ad > 0.0 ? 1.0 / ad : 0.0;
  lad_.validate(a_floor_);
}

double RegionParams::height(double rr) const {
  if (!(rr > 0)) throw input_error("height: radius must be positive");
  double qd = static_cast<double>(q_);
  return 1.0 / (2.0 * M_PI * qd * qd * std::pow(rr, qd));
}

double RegionParams::s_n() const {
  double rq = std::pow(lad_.r8, static_cast<double>(q_));
  return rq / (rq + eps_);
}

double RegionParams::tau(double rr) const {
  if (!(rr > 0)) throw input_error("tau: radius must be positive");
  double qd = static_cast<double>(q_);
  return std::log1p(eps_ / std::pow(rr, qd)) / (2.0 * M_PI * qd * qd * eps_);
}

double RegionParams::floor_radius() const {
  return std::pow(eps_, 1.0 / static_cast<double>(q_));
}

cplx RegionParams::plane_rotation() const {
  if (eps_signed_ >= 0) return cplx(1.0, 0.0);
  return std::polar(1.0, M_PI / static_cast<double>(q_));
}

cplx RegionParams::zeta(int j) const {
  if (j < 1 || j > q_) throw input_error("zeta: branch index out of range");
  return floor_radius() * std::polar(1.0, 2.0 * M_PI * j / static_cast<double>(q_)) *
         plane_rotation();
}

Membership contains(const RegionParams& P, const RegionId& R, cplx pt) {
  using Tag = RegionId::Tag;
  switch (R.tag) {
    case Tag::Qn: {
      if (pt.imag() != 0.0) return {true, false};
      double X = P.period();
      return {pt.real() > -X && pt.real() < 0.0, false};
    }
    case Tag::Qn_a: {
      if (!(R.p1 > 0)) throw input_error("Qn_a: a must be positive");
      return {in_qn_a(P, R.p1, pt), false};
    }
    case Tag::Kn: {
      if (!(R.p2 > 0 && R.p2 < R.p1)) throw input_error("Kn: need 0 < r3 < r2");
      double h3 = P.height(R.p2);
      double h2 = P.height(R.p1);
      double X = P.period();
      bool in = pt.real() >= -X - h3 && pt.real() <= h3 && pt.imag() >= h2;
      return {in, false};
    }
    case Tag::QBn: {
      const Ladder& L = P.ladder();
      if (contains(P, RegionId::Qn_a(P.a_n()), pt).inside) return {true, false};
      return contains(P, RegionId::Kn(L.r2, L.r3), pt);
    }
    case Tag::Hn_strip: {
      if (!(R.p2 > 0 && R.p2 < R.p1)) throw input_error("Hn_strip: need 0 < r5 < r6");
      bool in = std::fabs(pt.real()) < P.height(R.p2) && pt.imag() > P.height(R.p1);
      return {in, false};
    }
    case Tag::Hn_half: {
      if (!(R.p1 > 0)) throw input_error("Hn_half: r1 must be positive");
      return {pt.imag() > P.tau(R.p1), false};
    }
    case Tag::Xn:
      return in_xn(P, R.p1, pt);
    case Tag::Yn: {
      if (!(R.p2 > 0 && R.p2 < R.p1)) throw input_error("Yn: need 0 < r7 < r8");
      Membership m = in_xn(P, R.p1, pt);
      bool outside_disk = std::norm(pt) > R.p2 * R.p2;
      return {m.inside && outside_disk, m.degenerate};
    }
    case Tag::Annulus: {
      if (!(R.p1 >= 0 && R.p1 < R.p2)) throw input_error("Annulus: need 0 <= r_in < r_out");
      double n2 = std::norm(pt);
      return {n2 > R.p1 * R.p1 && n2 < R.p2 * R.p2, false};
    }
    case Tag::Disk: {
      if (!(R.p1 > 0)) throw input_error("Disk: radius must be positive");
      return {std::norm(pt) < R.p1 * R.p1, false};
    }
  }
  throw input_error("contains: unknown region tag");
}

BranchedPoint pi_n(const RegionParams& P, cplx Z, int branch) {
  long q = P.q();
  if (branch < 1 || branch > q) throw input_error("pi_n: branch index out of range");
  if (!contains(P, RegionId::Qn(), Z).inside) throw input_error("pi_n: point outside Qn");
  double qd = static_cast<double>(q);
  double k = 2.0 * M_PI * qd * qd * P.eps();
  double grow = k * Z.imag();
  cplx rot = P.plane_rotation();
  if (grow > 700.0) {
    // exponential overflow: the covering value collapses to the origin
    return {Z, branch, cplx(0.0, 0.0), cplx(0.0, 0.0), 0.0};
  }
  cplx ec = std::exp(cplx(grow, -k * Z.real()));
  cplx u = P.eps() / (1.0 - ec);
  cplx z = std::exp(std::log(u) / qd) * std::polar(1.0, 2.0 * M_PI * branch / qd);
  cplx zq = cpow_n(z, q);
  double res = std::abs(zq * (1.0 - ec) - cplx(P.eps(), 0.0)) / P.eps();
  return {Z, branch, z, z * rot, res};
}

LiftResult lift_to_H(const RegionParams& P, cplx z) {
  const Ladder& L = P.ladder();
  Membership m = contains(P, RegionId::Yn(L.r8, L.r7), z);
  if (m.degenerate) throw numerical_error("lift_to_H: z^q hits epsilon exactly");
  if (!m.inside) throw input_error("lift_to_H: point outside Yn(r8, r7)");
  long q = P.q();
  double qd = static_cast<double>(q);
  cplx u = cpow_n(z, q);
  cplx w = u / (u - cplx(P.eps_signed(), 0.0));
  double d = 2.0 * M_PI * qd * qd * P.eps();
  cplx lw = std::log(w);
  cplx W(lw.imag() / d, -lw.real() / d);
  cplx un = P.flipped() ? -u : u;
  cplx ec = std::exp(cplx(d * W.imag(), -d * W.real()));
  cplx uw = P.eps() / (1.0 - ec);
  double res = std::abs(uw - un);
  double xb = P.height(L.r5);
  double yb = P.height(L.r6);
  bool in_strip = std::fabs(W.real()) < xb && W.imag() > yb;
  if (!in_strip || !(res < kLiftTolerance)) {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "lift_to_H: inclusion violated at z=(%.17g,%.17g): W=(%.17g,%.17g) needs "
                  "|X|<%.17g Y>%.17g, root-power residual %.3g",
                  z.real(), z.imag(), W.real(), W.imag(), xb, yb, res);
    throw numerical_error(buf);
  }
  return {W, w, res};
}

ArcCoverage arc_coverage(const RegionParams& P, double t, double theta1, double theta2,
                         long samples) {
  const Ladder& L = P.ladder();
  if (!(t > L.r7 && t < L.r8)) throw input_error("arc_coverage: need r7 < t < r8");
  if (!(theta2 >= theta1 && theta2 <= theta1 + 2.0 * M_PI + 1e-12))
    throw input_error("arc_coverage: need theta1 <= theta2 <= theta1 + 2 pi");
  if (samples < 1000) throw input_error("arc_coverage: need at least 1000 samples");
  ArcCoverage out;
  out.samples = samples;
  if (theta2 == theta1) return out;
  RegionId yn = RegionId::Yn(L.r8, L.r7);
  double h = (theta2 - theta1) / static_cast<double>(samples);
  long hits = 0;
  for (long i = 0; i < samples; ++i) {
    double th = theta1 + (static_cast<double>(i) + 0.5) * h;
    if (contains(P, yn, std::polar(t, th)).inside) ++hits;
  }
  double f = static_cast<double>(hits) / static_cast<double>(samples);
  out.fraction = f;
  out.length = f * (theta2 - theta1) * t;
  out.std_error =
      t * (theta2 - theta1) * std::sqrt(f * (1.0 - f) / static_cast<double>(samples));
  return out;
}

SampleSet region_sampler(const RegionParams& P, const RegionId& R, long count,
                         std::uint64_t seed) {
  (void)P;
  if (count < 0) throw input_error("region_sampler: count must be nonnegative");
  double r_in = 0.0, r_out = 0.0;
  using Tag = RegionId::Tag;
  if (R.tag == Tag::Annulus) {
    if (!(R.p1 >= 0 && R.p1 < R.p2)) throw input_error("Annulus: need 0 <= r_in < r_out");
    r_in = R.p1;
    r_out = R.p2;
  } else if (R.tag == Tag::Disk) {
    if (!(R.p1 > 0)) throw input_error("Disk: radius must be positive");
    r_out = R.p1;
  } else {
    throw input_error("region_sampler: unsupported region (finite annulus or disk windows only)");
  }
  SampleSet out;
  out.area = M_PI * (r_out * r_out - r_in * r_in);
  out.points.reserve(static_cast<std::size_t>(count));
  auto g = make_stream(seed, 1);
  double a2 = r_in * r_in, b2 = r_out * r_out;
  for (long i = 0; i < count; ++i) {
    double rad = std::sqrt(a2 + uniform(g) * (b2 - a2));
    double th = uniform(g, 0.0, 2.0 * M_PI);
    out.points.push_back(std::polar(rad, th));
  }
  return out;
}

BranchPowerStats branch_power_envelope(const RegionParams& P, double rr, long count,
                                       std::uint64_t seed) {
  if (!(rr > 0)) throw input_error("branch_power_envelope: radius must be positive");
  double a = P.height(rr);
  double X = P.period();
  double qd = static_cast<double>(P.q());
  double k = 2.0 * M_PI * qd * qd * P.eps();
  double rq = std::pow(rr, qd);
  BranchPowerStats st;
  auto probe = [&](cplx Z) {
    if (!in_qn_a(P, a, Z)) return;
    cplx ec = std::exp(cplx(k * Z.imag(), -k * Z.real()));
    double ratio = P.eps() / (std::abs(1.0 - ec) * rq);
    ++st.samples;
    if (ratio > st.max_ratio) {
      st.max_ratio = ratio;
      st.argmax_Z = Z;
    }
  };
  for (double s : {0.55, 0.75, 1.5}) {
    probe(cplx(-a / 2, s * a));
    probe(cplx(-a / 2, -s * a));
    probe(cplx(-X + a / 2, s * a));
    probe(cplx(-X + a / 2, -s * a));
  }
  auto g = make_stream(seed, 11);
  double hh = std::max(4.0 * a, 0.25 * X);
  long tries = 0;
  while (st.samples < count && tries < 50 * count) {
    ++tries;
    probe(cplx(uniform(g, -X - 2 * a, 2 * a), uniform(g, -hh, hh)));
  }
  return st;
}

}  // namespace siegel::geo
