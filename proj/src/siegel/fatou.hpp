#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "siegel/cfrac.hpp"
#include "siegel/dynamics.hpp"
#include "siegel/geometry.hpp"

namespace siegel::fatou {

using cplx = std::complex<double>;

// result of lifting one return-map application to the covering plane
struct LiftValue {
  cplx W;                    // lifted point
  double conj_residual = 0;  // |chart(W) - image of the chart point|
  double map_residual = 0;   // worst series-inversion defect along the orbit
  double deviation = 0;      // |W - expected translate of Z|
};

// Couples region parameters with the model-plane dynamics and fixes an
// orientation: setups with negative detuning are driven through their mirror
// image, so the lifted q-fold return always translates toward +1.
class LiftContext {
 public:
  LiftContext(const cfrac::PerturbationSetup& setup, const geo::Ladder& ladder,
              dyn::ChiMode mode = dyn::ChiMode::proxy, std::size_t M = 200);

  const geo::RegionParams& params() const { return params_; }
  const dyn::ExplodedMapContext& dynamics() const { return ctx_; }
  bool mirrored() const { return mirrored_; }
  long q() const { return q_; }
  long q_prev() const { return q_prev_; }
  double eps() const { return eps_; }
  double period() const { return X_; }
  double theta() const { return theta_; }
  double g_translation() const { return gshift_; }  // A_n + theta
  double lift_ball() const { return 0.25; }

  // single-valued section of the covering, smooth across the waist interval;
  // upper half plane uses a product form whose only root factor stays in the
  // right half plane, the lower one keeps the principal root
  cplx chart_point(cplx Z) const;
  cplx u_of(cplx Z) const;  // chart_point(Z)^q in closed form

  // oriented model-plane map and its iterates
  dyn::EvalResult oriented_step(cplx zhat) const;
  dyn::EvalResult oriented_power(cplx zhat, long k) const;

  // q-fold return lifted near Z+1; Z must lie in the sector-box union
  LiftValue lift_Fn(cplx Z) const;
  // q_{n-1}-fold return lifted near Z-(A_n+theta); Z must lie above the
  // half-plane threshold of the outermost rung
  LiftValue lift_Gn(cplx Z) const;

 private:
  LiftValue lift(cplx target_z, cplx seed) const;

  dyn::ExplodedMapContext ctx_;
  geo::RegionParams params_;
  bool mirrored_ = false;
  long q_ = 1;
  long q_prev_ = 0;
  double eps_ = 0;
  double X_ = 0;   // horizontal period of the covering
  double k_ = 0;   // 2 pi q^2 eps
  double theta_ = 0;
  double gshift_ = 0;
  cplx omega_;       // e^{i pi / q}
  cplx ring_root_;   // eps^{1/q} e^{i pi / q}
};

// Fit controls for the translation coordinate. The correction is expanded in
// upward-decaying harmonics on the full-period frequency lattice and fitted
// on horizontal lines spanning one full period, between the strip height of
// rung r4 and band_top. Lines that high see the lifted return within its
// contraction regime, and the period-wide extent keeps the lattice columns
// independent.
struct PhiOptions {
  int max_stages = 8;
  int modes = 64;        // harmonics 1..modes on the lattice 1/(q X)
  int lines = 10;
  int line_points = 72;  // samples per line across one period
  double band_top = 30.0;
  double divisor_floor = 0.02;  // drop harmonics the step equation cannot see
  double ridge = 1e-10;
  double target_defect = 5e-8;  // stop composing stages below this
  double amp_cap = 30.0;        // trust limit below the fitted band
  double tail_tolerance = 1e-4;  // regime knob, kept as a validity probe
  int sustain = 5;
  long probe_budget = 1000;
};

struct FitReport {
  int stages = 0;
  int samples = 0;
  int modes = 0;
  int masked = 0;
  double defect_rms = 0, defect_max = 0;  // final stage, over the samples
  double mean_step = 0;                   // constant column of the last stage
  double band_lo = 0, band_hi = 0;
};

struct PhiValue {
  cplx value;
  double abel_residual = -1;  // negative when not requested
};

struct RegimeProbe {
  bool entered = false;
  long steps = 0;
  double min_tail = 0;  // smallest |F(W)-W-1| seen along the probe orbit
  cplx stopped_at;
  std::string reason;  // "entered" | "left-domain" | "budget" | "lift-ambiguity"
};

// Translation coordinate for the lifted return map: Phi(F(Z)) = Phi(Z) + 1
// up to the reported defect, normalized so the base point is fixed exactly.
// Built as identity plus a harmonic correction, the step equation solved
// mode by mode and composed over a few stages on cached lift samples.
// Accuracy is contracted within the fitted band; evaluation below it damps
// any harmonic whose extrapolated size outruns its in-band ceiling.
class FatouCoordinate {
 public:
  explicit FatouCoordinate(const LiftContext& lc, PhiOptions opt = {});

  const LiftContext& context() const { return *lc_; }
  cplx base_point() const { return B_; }
  const FitReport& report() const { return report_; }
  std::string scheme() const;

  PhiValue at(cplx Z, bool with_residual = false) const;
  cplx operator()(cplx Z) const { return at(Z).value; }
  cplx derivative(cplx Z) const;
  cplx inverse(cplx V) const;  // Newton, seeded at V

  // forward-orbit probe for the sustained-contraction regime; reports how the
  // orbit fared instead of constructing anything from it
  RegimeProbe regime_probe(cplx Z) const;

 private:
  struct Chart {
    std::vector<double> omega;  // frequencies, cycles per unit
    std::vector<cplx> coef;
    std::vector<double> band_peak;  // largest in-band modulus per harmonic
    cplx sigma{1.0, 0.0};
    cplx shift;
    double y_lo = 0, y_hi = 0;
  };

  cplx raw_eval(const Chart& c, cplx Z) const;
  cplx raw_derivative(const Chart& c, cplx Z) const;
  void gather(std::vector<cplx>& Zs, std::vector<cplx>& Ws) const;
  void fit_chart(Chart& c, const std::vector<cplx>& Zs, const std::vector<cplx>& Ws);

  const LiftContext* lc_;
  PhiOptions opt_;
  Chart chart_;
  cplx B_;
  cplx base_raw_;
  FitReport report_;
};

struct RenormValue {
  cplx value;
  double residual = 0;  // accumulated first-order error estimate
};

struct RotationCheck {
  cplx estimate;  // extrapolated derivative at the puncture
  cplx coarse, fine;
  double spread = 0;
  double h = 0;
  bool unstable = false;
};

// Quotient of the strip between a vertical ray and its translate by the
// lifted return map; the inverse-branch return composed through the
// coordinate descends to a map on a punctured disk.
class RenormContext {
 public:
  RenormContext(const FatouCoordinate& phi, double anchor_re = 0.0,
                int boundary_samples = 256);

  const FatouCoordinate& phi() const { return *phi_; }
  cplx anchor() const { return Zn_; }
  cplx anchor_image() const { return FZn_; }
  double rho() const { return rho_; }
  double theta() const { return theta_; }

  RenormValue renormalize(cplx z) const;
  RotationCheck rotation_check(double h, double tol = 1e-2) const;

 private:
  const FatouCoordinate* phi_;
  cplx Zn_, FZn_;
  cplx phi_anchor_;
  double rho_ = 0;
  double theta_ = 0;
  double strip_pad_ = 0.35;
};

}  // namespace siegel::fatou
