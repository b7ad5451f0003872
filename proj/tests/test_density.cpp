#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>

#include "doctest.h"
#include "siegel/cfrac.hpp"
#include "siegel/density.hpp"
#include "siegel/dynamics.hpp"
#include "siegel/errors.hpp"
#include "siegel/geometry.hpp"

using namespace siegel;
using namespace siegel::density;
using doctest::Approx;

namespace {

bool code_is(const error& e, errc c) { return e.code() == c; }

cfrac::PerturbationSetup ceil_setup(int n) {
  static const long qn[] = {0, 1, 2, 3, 5, 8, 13};
  mpz_class A = mpz_class(1) << static_cast<unsigned long>(qn[n]);
  return cfrac::make_setup(cfrac::golden(), cfrac::golden(), n, A, 128);
}

geo::Ladder narrow_ladder(double floor, double r8) {
  geo::Ladder L;
  L.r3 = floor + 0.001;
  L.r5 = floor + 0.002;
  L.r7 = floor + 0.0065;
  L.r8 = r8;
  double step = (0.975 - r8) / 9.0;
  L.r6 = r8 + step;
  L.r4 = r8 + 2 * step;
  L.rp2 = r8 + 3 * step;
  L.r2 = r8 + 4 * step;
  L.r1 = r8 + 5 * step;
  L.r = r8 + 6 * step;
  L.rp = r8 + 7 * step;
  L.r0 = r8 + 8 * step;
  L.rp0 = 0.975;
  return L;
}

const dyn::QuadraticMap& golden_map() {
  static dyn::QuadraticMap m = dyn::QuadraticMap::from_rotation(ceil_setup(4).alpha_value);
  return m;
}

}  // namespace

TEST_CASE("mask raster geometry and point lookup") {
  GridMask m(Window{0.1, -0.2, 0.6, 0.5}, 6, 4);
  CHECK(m.nx() == 6);
  CHECK(m.ny() == 4);
  CHECK(m.inside_count() == 0);
  CHECK(m.pixel_area() == Approx(1.2 * 1.0 / 24.0));

  cplx c = m.pixel_center(0, 0);
  CHECK(c.real() == Approx(0.1 - 0.6 + 0.1));
  CHECK(c.imag() == Approx(-0.2 - 0.5 + 0.125));

  int ix = -1, iy = -1;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      REQUIRE(m.locate(m.pixel_center(x, y), ix, iy));
      CHECK(ix == x);
      CHECK(iy == y);
    }
  CHECK(!m.locate(cplx(0.1 + 0.61, 0.0), ix, iy));
  CHECK(!m.locate(cplx(0.1, -0.71), ix, iy));

  m.set(2, 1, true);
  CHECK(m.at(2, 1));
  CHECK(m.inside_count() == 1);
  CHECK(m.contains_point(m.pixel_center(2, 1)));
  CHECK(!m.contains_point(m.pixel_center(3, 1)));
  CHECK(m.inside_area() == Approx(m.pixel_area()));

  GridMask d = m.dilated(1);
  CHECK(d.inside_count() == 9);
  CHECK(m.inside_count() == 1);
  GridMask d0 = m.dilated(0);
  CHECK(d0.inside_count() == 1);

  try {
    GridMask bad(Window{0, 0, 0.0, 1.0}, 4, 4);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    GridMask bad(Window::square(1.0), 0, 4);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("orbit masks: fixed point inside, escapers outside, guards") {
  // the center pixel of an odd grid sits exactly on the fixed point
  GridMask m = siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.1), 3, 3, 50);
  CHECK(m.at(1, 1));
  CHECK(m.budget_T == 50);
  CHECK(m.decision.find("disk") != std::string::npos);

  // every pixel of a window beyond the trap fails at step zero
  GridMask far = siegel_mask(golden_map(), Trap::disk(2.0), Window{3.0, 0.0, 0.2, 0.2}, 4, 4, 1);
  CHECK(far.inside_count() == 0);

  try {
    siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.5), 4, 4, 0);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    siegel_mask(golden_map(), Trap::disk(0.0), Window::square(0.5), 4, 4, 10);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    Trap t;
    t.kind = Trap::Kind::mask;
    siegel_mask(golden_map(), t, Window::square(0.5), 4, 4, 10);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  // a trap mask that misses the fixed point is rejected
  GridMask empty_trap(Window::square(0.5), 8, 8);
  try {
    siegel_mask(golden_map(), Trap::from_mask(empty_trap), Window::square(0.5), 4, 4, 10);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("non-escape is monotone in the budget") {
  GridMask a = siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.8), 64, 64, 400);
  GridMask b = siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.8), 64, 64, 800);
  CHECK(b.inside_count() > 0);
  CHECK(b.inside_count() <= a.inside_count());
  for (int iy = 0; iy < 64; ++iy)
    for (int ix = 0; ix < 64; ++ix)
      if (b.at(ix, iy)) CHECK(a.at(ix, iy));
}

TEST_CASE("golden trap mask area stabilizes under a tenfold budget") {
  GridMask coarse =
      siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.8), 512, 512, 10000);
  GridMask fine =
      siegel_mask(golden_map(), Trap::disk(2.0), Window::square(0.8), 512, 512, 100000);
  double rel = std::fabs(coarse.inside_area() - fine.inside_area()) / fine.inside_area();
  CHECK(rel < 0.02);
  CHECK(fine.inside_area() == Approx(1.1386).epsilon(0.01));
  for (int iy = 0; iy < 512; ++iy)
    for (int ix = 0; ix < 512; ++ix)
      if (fine.at(ix, iy)) CHECK(coarse.at(ix, iy));
}

TEST_CASE("density estimates: exact ends, weighting, guards") {
  geo::RegionId U = geo::RegionId::Annulus(0.3, 0.8);
  auto d1 = dens_mc(U, [&](cplx z) { return std::abs(z) > 0.29 && std::abs(z) < 0.81; }, 4000, 3);
  CHECK(d1.value == 1.0);
  CHECK(d1.std_error == 0.0);
  CHECK(d1.samples == 4000);
  CHECK(d1.method == DensMethod::monte_carlo);

  auto d0 = dens_mc(U, [](cplx) { return false; }, 4000, 3);
  CHECK(d0.value == 0.0);
  CHECK(d0.std_error == 0.0);

  // half-plane cut: expectation one half
  auto dh = dens_mc(U, [](cplx z) { return z.real() > 0.0; }, 40000, 3);
  CHECK(std::fabs(dh.value - 0.5) < 4.0 * dh.std_error);
  CHECK(dh.std_error == Approx(std::sqrt(0.25 / 40000)).epsilon(0.05));

  // weighted samples
  std::vector<cplx> pts = {{0, 0}, {1, 0}, {2, 0}};
  std::vector<double> w = {1.0, 2.0, 1.0};
  auto dw = dens_of_samples(pts, w, [](cplx z) { return z.real() > 0.5; });
  CHECK(dw.value == Approx(0.75));

  try {
    dens_of_samples({}, {}, [](cplx) { return true; });
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    dens_of_samples(pts, {1.0}, [](cplx) { return true; });
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    dens_of_samples(pts, {1.0, -1.0, 1.0}, [](cplx) { return true; });
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    dens_mc(geo::RegionId::Qn(), [](cplx) { return true; }, 100, 1);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    dens_mc(U, [](cplx) { return true; }, 0, 1);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  GridMask empty(Window::square(1.0), 8, 8);
  try {
    dens_mc(empty, [](cplx) { return true; }, 100, 1);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    dens_grid(empty, [](cplx) { return true; });
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("grid and monte-carlo estimates agree on the same window and set") {
  const auto& s = ceil_setup(6);
  geo::Ladder lad = geo::Ladder::defaults(0.336968);
  geo::RegionParams P(s, lad);
  geo::RegionId yn = geo::RegionId::Yn(lad.r8, lad.r7);
  Predicate X = [&](cplx z) { return geo::contains(P, yn, z).inside; };

  GridMask U = mask_from_predicate(Window::square(0.95), 256, 256,
                                   [&](cplx z) {
                                     double r = std::abs(z);
                                     return r > lad.r7 && r < lad.r8;
                                   },
                                   "annulus raster");
  DensityEstimate g = dens_grid(U, X);
  CHECK(g.method == DensMethod::grid);
  CHECK(g.samples == U.inside_count());

  DensityEstimate mc = dens_mc(geo::RegionId::Annulus(lad.r7, lad.r8), X, 100000, 17);
  double sigma = std::sqrt(g.std_error * g.std_error + mc.std_error * mc.std_error);
  CHECK(std::fabs(g.value - mc.value) < 2.0 * sigma + 0.003);

  // sampling the raster window instead of the exact annulus moves the
  // estimate by at most the boundary-pixel layer
  DensityEstimate mm = dens_mc(U, X, 100000, 18);
  CHECK(std::fabs(mm.value - mc.value) < 2.0 * sigma + 0.004);
}

TEST_CASE("closed-form density matches the arc-coverage integral") {
  const auto& s = ceil_setup(6);
  geo::Ladder lad = geo::Ladder::defaults(0.336968);
  geo::RegionParams P(s, lad);
  geo::RegionId yn = geo::RegionId::Yn(lad.r8, lad.r7);

  long NR = 64;
  double area = 0;
  for (long i = 0; i < NR; ++i) {
    double t = lad.r7 + (lad.r8 - lad.r7) * (i + 0.5) / NR;
    auto ac = geo::arc_coverage(P, t, 0.0, 2.0 * M_PI, 4000);
    area += ac.fraction * 2.0 * M_PI * t * (lad.r8 - lad.r7) / NR;
  }
  double ua = M_PI * (lad.r8 * lad.r8 - lad.r7 * lad.r7);
  double semi = area / ua;

  auto mc = dens_mc(geo::RegionId::Annulus(lad.r7, lad.r8),
                    [&](cplx z) { return geo::contains(P, yn, z).inside; }, 100000, 1,
                    static_cast<std::uint64_t>(6));
  CHECK(std::fabs(mc.value - semi) < 3.0 * mc.std_error + 0.002);
}

TEST_CASE("headline experiment rows climb toward the half bound") {
  ExperimentConfig cfg;
  ExperimentResult res = density_experiment(cfg);

  CHECK(res.family_floor == Approx(0.336968).epsilon(1e-4));
  CHECK(res.ladder.r7 == Approx(res.family_floor + 0.0065).epsilon(1e-9));
  CHECK(res.ladder.r8 == Approx(0.93).epsilon(1e-12));
  REQUIRE(res.rows.size() == 3);

  const auto& r4 = res.rows[0];
  const auto& r5 = res.rows[1];
  const auto& r6 = res.rows[2];
  CHECK(r4.q_n == 5);
  CHECK(r5.q_n == 8);
  CHECK(r6.q_n == 13);
  CHECK(r4.A_n == 32);
  CHECK(r5.A_n == 256);
  CHECK(r6.A_n == 8192);
  CHECK(r4.epsilon_n == Approx(1.204165e-3).epsilon(1e-5));
  CHECK(r5.epsilon_n == Approx(-6.074023e-5).epsilon(1e-5));
  CHECK(r6.epsilon_n == Approx(7.222008e-7).epsilon(1e-5));

  REQUIRE(r4.dens_Yn.has_value());
  REQUIRE(r6.dens_Yn.has_value());
  CHECK(!r4.dens_Dn.has_value());
  CHECK(*r4.dens_Yn <= *r5.dens_Yn);
  CHECK(*r5.dens_Yn <= *r6.dens_Yn);
  double gate = 0.5 - 0.05 - 3.0 * *r6.stderr_Yn;
  CHECK(*r6.dens_Yn >= gate);
  CHECK(*r4.dens_Yn == Approx(0.3877).epsilon(0.03));
  CHECK(*r6.dens_Yn == Approx(0.4494).epsilon(0.03));
  CHECK(r4.samples == cfg.mc_samples);
  CHECK(r4.seed == cfg.seed);
  CHECK(r4.budget_T == 0);

  // identical config reproduces identical numbers
  ExperimentResult again = density_experiment(cfg);
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(*again.rows[i].dens_Yn == *res.rows[i].dens_Yn);
    CHECK(*again.rows[i].stderr_Yn == *res.rows[i].stderr_Yn);
  }
}

TEST_CASE("experiment configuration guards") {
  try {
    AnRule::fixed(0).value_at(5);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  CHECK(AnRule::ceil_pow(2).value_at(13) == 8192);
  CHECK(AnRule::fixed(7).value_at(13) == 7);
  try {
    AnRule::ceil_pow(2).value_at(mpz_class(100000));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }

  {
    ExperimentConfig cfg;
    cfg.n_lo = 0;
    try {
      density_experiment(cfg);
      CHECK(false);
    } catch (const error& e) {
      CHECK(code_is(e, errc::input));
    }
  }
  {
    ExperimentConfig cfg;
    cfg.mc_samples = 10;
    try {
      density_experiment(cfg);
      CHECK(false);
    } catch (const error& e) {
      CHECK(code_is(e, errc::input));
    }
  }
  {
    // an explicit orbit budget below the return-time floor is refused
    ExperimentConfig cfg;
    cfg.n_lo = cfg.n_hi = 4;
    cfg.orbit_column = true;
    cfg.orbit_budget = 100;
    cfg.mask_resolution = 32;
    cfg.mask_budget = 50;
    try {
      density_experiment(cfg);
      CHECK(false);
    } catch (const error& e) {
      CHECK(code_is(e, errc::input));
      CHECK(std::string(e.what()).find("825") != std::string::npos);
    }
  }
}

TEST_CASE("unperturbed control fills the inner window") {
  ExperimentConfig cfg;
  cfg.theta = cfrac::constant(2);
  cfg.rule = AnRule::fixed(1);
  cfg.n_lo = 4;
  cfg.n_hi = 6;
  cfg.u_kind = ExperimentConfig::UKind::lin_disk;
  cfg.lin_frac = 0.5;
  cfg.orbit_column = true;
  cfg.orbit_samples = 1000;
  cfg.mask_resolution = 256;
  cfg.mask_budget = 2000;
  cfg.seed = 5;
  ExperimentResult res = density_experiment(cfg);

  CHECK(res.r_hat == Approx(0.333).epsilon(0.1));
  REQUIRE(res.rows.size() == 3);
  CHECK(res.rows[0].epsilon_n == Approx(1.9859e-2).epsilon(1e-4));
  CHECK(res.rows[1].epsilon_n < 0.0);
  CHECK(res.rows[2].epsilon_n == Approx(2.9154e-3).epsilon(1e-4));
  for (const auto& r : res.rows) {
    CHECK(!r.dens_Yn.has_value());
    REQUIRE(r.dens_Dn.has_value());
    CHECK(*r.dens_Dn >= 0.9);
    CHECK(r.samples == cfg.orbit_samples);
  }
  CHECK(res.rows[2].budget_T == 3380);
  CHECK(*res.rows[2].dens_Dn >= *res.rows[0].dens_Dn - 0.02);
}

TEST_CASE("inclusion chain holds on the narrowed window") {
  const auto& s = ceil_setup(4);
  geo::RegionParams P(s, narrow_ladder(std::pow(s.eps_d(), 0.2), 0.68));
  dyn::ExplodedMapContext ctx(s, dyn::ChiMode::proxy, 200);
  long budget = 10 * 25 * 33;

  InclusionReport rep = inclusion_spot_check(P, ctx, 200, budget, 11);
  CHECK(rep.samples == 200);
  CHECK(rep.boundary_samples == 20);
  CHECK(rep.lift_failures == 0);
  CHECK(rep.worst_root_residual < 1e-9);
  CHECK(rep.violations == 0);
  CHECK(rep.eval_failures == 0);
  CHECK(rep.budget == budget);
  CHECK(rep.escape_radius == Approx(0.975));
  CHECK(rep.returns_found == 200);
  CHECK(rep.slowest_near_return == 5);

  try {
    inclusion_spot_check(P, ctx, 0, budget, 11);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    inclusion_spot_check(P, ctx, 10, 0, 11);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}
