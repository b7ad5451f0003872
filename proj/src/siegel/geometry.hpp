#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "siegel/cfrac.hpp"
#include "siegel/errors.hpp"

namespace siegel::geo {

using cplx = std::complex<double>;

// absolute gate on |pi_n(W)^q - z^q| in lift_to_H
inline constexpr double kLiftTolerance = 1e-9;

// radius ladder ordering the nested regions,
// r3 < r5 < r7 < r8 < r6 < r4 < rp2 < r2 < r1 < r < rp < r0 < rp0 < 1
struct Ladder {
  double r3 = 0, r5 = 0, r7 = 0, r8 = 0, r6 = 0, r4 = 0, rp2 = 0;
  double r2 = 0, r1 = 0, r = 0, rp = 0, r0 = 0, rp0 = 0;

  // rungs in chain order, r3 first
  std::vector<double> rungs() const;
  // rejects any ladder violating a_floor < r3 < ... < rp0 < 1
  void validate(double a_floor) const;

  // experiment default: r3..r7 sit just above `floor` (the largest cycle
  // radius |eps|^{1/q} among the setups sharing the ladder), r8 = 0.93,
  // and the outer rungs are spread evenly up to 0.975
  static Ladder defaults(double floor);
};

struct RegionId {
  enum class Tag { Qn, Qn_a, Kn, QBn, Hn_strip, Hn_half, Xn, Yn, Annulus, Disk };
  Tag tag = Tag::Qn;
  double p1 = 0;
  double p2 = 0;

  static RegionId Qn() { return {Tag::Qn, 0, 0}; }
  static RegionId Qn_a(double a) { return {Tag::Qn_a, a, 0}; }
  static RegionId Kn(double r2, double r3) { return {Tag::Kn, r2, r3}; }
  static RegionId QBn() { return {Tag::QBn, 0, 0}; }
  static RegionId Hn_strip(double r6, double r5) { return {Tag::Hn_strip, r6, r5}; }
  static RegionId Hn_half(double r1) { return {Tag::Hn_half, r1, 0}; }
  static RegionId Xn(double r8) { return {Tag::Xn, r8, 0}; }
  static RegionId Yn(double r8, double r7) { return {Tag::Yn, r8, r7}; }
  static RegionId Annulus(double r_in, double r_out) { return {Tag::Annulus, r_in, r_out}; }
  static RegionId Disk(double r) { return {Tag::Disk, r, 0}; }
};

// Region evaluator for one perturbation stage. Coordinate-plane formulas
// work with the positive elongation eps = |epsilon_n|; when epsilon_n < 0
// the dynamical plane is the working plane rotated by plane_rotation(),
// and z-plane membership applies that change of variables internally.
class RegionParams {
 public:
  RegionParams(const cfrac::PerturbationSetup& setup, const Ladder& ladder);

  const Ladder& ladder() const { return lad_; }
  long q() const { return q_; }
  double eps() const { return eps_; }
  double eps_signed() const { return eps_signed_; }
  bool flipped() const { return eps_signed_ < 0; }
  double a_floor() const { return a_floor_; }

  // horizontal period 1/(q^2 eps) of the covering's exponential
  double period() const { return 1.0 / (static_cast<double>(q_) * q_ * eps_); }
  // 1/(2 pi q^2 rr^q)
  double height(double rr) const;
  double a_n() const { return height(lad_.r1); }
  // r8^q / (r8^q + eps)
  double s_n() const;
  // log(1 + eps/rr^q) / (2 pi q^2 eps)
  double tau(double rr) const;
  // anchor -1/(pi q^2 r1^q) used to pin the Fatou coordinate
  double base_point() const { return -2.0 * a_n(); }
  // cycle radius scale |eps|^{1/q}
  double floor_radius() const;
  // cycle-scale root in the dynamical plane, j in {1..q}
  cplx zeta(int j) const;
  // phase carrying working-plane points to the dynamical plane
  cplx plane_rotation() const;

 private:
  Ladder lad_;
  long q_ = 0;
  double eps_ = 0;
  double eps_signed_ = 0;
  double a_floor_ = 0;
};

struct Membership {
  bool inside = false;
  // set when the point hits z^q = epsilon_n exactly; reported outside
  bool degenerate = false;
};

// evaluates the defining inequalities of the region at `pt`; boundary points
// of open regions are outside, of closed regions inside
Membership contains(const RegionParams& P, const RegionId& R, cplx pt);

struct BranchedPoint {
  cplx Z;
  int branch = 0;
  cplx z;        // working plane
  cplx z_plane;  // dynamical plane, z * plane_rotation()
  double residual = 0;  // |z^q (1 - e^{-2 pi i q^2 eps Z}) - eps| / eps
};

// branch j of (eps / (1 - e^{-2 pi i q^2 eps Z}))^{1/q}: the principal root
// times e^{2 pi i j / q}; requires Z in Qn
BranchedPoint pi_n(const RegionParams& P, cplx Z, int branch);

struct LiftResult {
  cplx W;
  cplx w;               // z^q / (z^q - epsilon_n)
  double root_residual = 0;  // |pi_n(W)^q - (working-plane z)^q|
};

// W = Log(w) / (2 pi i q^2 eps) with principal Log; checks W in
// Hn_strip(r6, r5) and the root-power residual, raising a numerical error
// with the full context when either check fails
LiftResult lift_to_H(const RegionParams& P, cplx z);

struct ArcCoverage {
  double length = 0;
  double std_error = 0;
  double fraction = 0;
  long samples = 0;
};

// measures |{theta in [theta1, theta2] : t e^{i theta} in Yn(r8, r7)}| * t
// by midpoint sampling of the arc
ArcCoverage arc_coverage(const RegionParams& P, double t, double theta1, double theta2,
                         long samples);

struct SampleSet {
  std::vector<cplx> points;
  double area = 0;
};

// uniform points of a finite-area window (Annulus or Disk tags only),
// deterministic for a given seed
SampleSet region_sampler(const RegionParams& P, const RegionId& R, long count,
                         std::uint64_t seed);

struct BranchPowerStats {
  double max_ratio = 0;  // max |pi_n(Z)|^q / rr^q observed
  cplx argmax_Z;
  long samples = 0;
};

// empirical envelope of |pi_n|^q / rr^q over Qn_a(height(rr)); probes the
// trimmed corners deterministically and fills the rest with seeded samples
BranchPowerStats branch_power_envelope(const RegionParams& P, double rr, long count,
                                       std::uint64_t seed);

}  // namespace siegel::geo
