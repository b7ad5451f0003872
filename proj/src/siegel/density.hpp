#pragma once

#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "siegel/cfrac.hpp"
#include "siegel/dynamics.hpp"
#include "siegel/errors.hpp"
#include "siegel/geometry.hpp"

namespace siegel::density {

using cplx = std::complex<double>;

struct Window {
  double cx = 0, cy = 0;
  double hx = 0, hy = 0;

  static Window square(double half) { return {0.0, 0.0, half, half}; }
  double area() const { return 4.0 * hx * hy; }
};

// membership raster over a rectangular window; the metadata records how
// membership was decided so masks are self-describing artifacts
class GridMask {
 public:
  GridMask() = default;
  GridMask(Window w, int nx, int ny);

  const Window& window() const { return win_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  bool empty() const { return bits_.empty(); }

  bool at(int ix, int iy) const { return bits_[idx(ix, iy)] != 0; }
  void set(int ix, int iy, bool v) { bits_[idx(ix, iy)] = v ? 1 : 0; }

  cplx pixel_center(int ix, int iy) const;
  // pixel holding z; false when z is outside the window
  bool locate(cplx z, int& ix, int& iy) const;
  bool contains_point(cplx z) const;

  long inside_count() const;
  double pixel_area() const;
  double inside_area() const { return static_cast<double>(inside_count()) * pixel_area(); }

  // inside-set grown by px pixels in the 8-neighbor sense
  GridMask dilated(int px) const;

  long budget_T = 0;
  std::string decision;

 private:
  std::size_t idx(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(ix);
  }
  Window win_{};
  int nx_ = 0, ny_ = 0;
  std::vector<std::uint8_t> bits_;
};

// escape rule for orbit-decided masks: a round trap disk, or the dilated
// inside-set of a previously computed mask
struct Trap {
  enum class Kind { disk, mask };
  Kind kind = Kind::disk;
  double radius = 2.0;
  const GridMask* source = nullptr;
  int dilate_px = 1;

  static Trap disk(double r) { return {Kind::disk, r, nullptr, 0}; }
  static Trap from_mask(const GridMask& m, int dilate = 1) {
    return {Kind::mask, 0.0, &m, dilate};
  }
  std::string describe() const;
};

// pixel marked inside iff its center's orbit under `map` stays in the trap
// through T steps; deterministic, independent of the thread count
GridMask siegel_mask(const dyn::QuadraticMap& map, const Trap& trap, Window win, int nx, int ny,
                     long T, int threads = 1);

// rasterizes a closed-form membership predicate at pixel centers
GridMask mask_from_predicate(Window win, int nx, int ny,
                             const std::function<bool(cplx)>& inside, std::string decision);

enum class DensMethod { grid, monte_carlo };

struct DensityEstimate {
  double value = 0;
  long samples = 0;
  double std_error = 0;
  DensMethod method = DensMethod::monte_carlo;
};

using Predicate = std::function<bool(cplx)>;

// weighted mean of 1_X over prepared samples; standard error from the
// binomial model at the effective sample size (sum w)^2 / sum w^2
DensityEstimate dens_of_samples(const std::vector<cplx>& pts, const std::vector<double>& weights,
                                const Predicate& X);

// uniform monte-carlo over an annulus or disk window; `salt` separates the
// sample streams of unrelated estimates sharing one master seed
DensityEstimate dens_mc(const geo::RegionId& U, const Predicate& X, long samples,
                        std::uint64_t seed, std::uint64_t salt = 0);

// uniform monte-carlo over the inside-set of a mask
DensityEstimate dens_mc(const GridMask& U, const Predicate& X, long samples, std::uint64_t seed,
                        std::uint64_t salt = 0);

// raster intersection: the fraction of U's inside pixels whose centers land
// in X
DensityEstimate dens_grid(const GridMask& U, const GridMask& X);
DensityEstimate dens_grid(const GridMask& U, const Predicate& X);

// perturbation size rule A_n for the experiment rows
struct AnRule {
  enum class Kind { fixed, ceil_pow };
  Kind kind = Kind::fixed;
  mpz_class fixed_value{1};
  unsigned long base = 2;

  static AnRule fixed(mpz_class v) { return {Kind::fixed, std::move(v), 0}; }
  static AnRule ceil_pow(unsigned long b) { return {Kind::ceil_pow, mpz_class(0), b}; }
  mpz_class value_at(const mpz_class& q_n) const;
  std::string describe() const;
};

struct ExperimentConfig {
  cfrac::QuotientSequence alpha = cfrac::golden();
  cfrac::QuotientSequence theta = cfrac::golden();
  int n_lo = 4, n_hi = 6;
  AnRule rule = AnRule::ceil_pow(2);

  // shared across the family; defaulted from the family floor (the largest
  // cycle radius among the rows) when unset
  std::optional<geo::Ladder> ladder;
  long mc_samples = 100000;

  // window U: the ladder annulus in the model plane, or the image of a
  // centered disk in linearizer coordinates (fraction of the fitted radius)
  enum class UKind { annulus, lin_disk };
  UKind u_kind = UKind::annulus;
  double lin_frac = 0.5;

  // slow path: the perturbed Siegel disk column, decided by orbits of the
  // perturbed polynomial inside the dilated unperturbed trap mask
  bool orbit_column = false;
  long orbit_samples = 2000;
  long orbit_budget = 0;  // 0 selects 10 q^2 (A+1)
  int mask_resolution = 512;
  double mask_halfwidth = 0.8;
  long mask_budget = 10000;
  std::size_t linearizer_M = 200;

  std::uint64_t seed = 1;
  mpfr_prec_t precision_bits = 128;
  double slack = 0.05;
  int threads = 1;
};

struct ExperimentRow {
  int n = 0;
  mpz_class q_n, A_n;
  double epsilon_n = 0;
  double r7 = 0, r8 = 0;
  std::optional<double> dens_Yn, stderr_Yn;
  std::optional<double> dens_Dn, stderr_Dn;
  long budget_T = 0;
  long samples = 0;
  std::uint64_t seed = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  geo::Ladder ladder;
  double family_floor = 0;
  double r_hat = 0;  // set when the orbit column ran
};

ExperimentResult density_experiment(const ExperimentConfig& cfg);

struct InclusionReport {
  long samples = 0;
  long boundary_samples = 0;
  long lift_failures = 0;
  double worst_root_residual = 0;
  long violations = 0;      // orbit left the escape disk
  long eval_failures = 0;   // conjugated map failed to evaluate
  long budget = 0;
  double escape_radius = 0;
  long returns_found = 0;
  long slowest_near_return = 0;
  double mean_near_return = 0;
};

// samples the pullback region between the two inner rungs, lifts each point
// to the covering strip, then follows the conjugated-map orbit checking
// non-escape from the outermost rung disk; violations are findings
InclusionReport inclusion_spot_check(const geo::RegionParams& P,
                                     const dyn::ExplodedMapContext& ctx, long count, long budget,
                                     std::uint64_t seed);

}  // namespace siegel::density
