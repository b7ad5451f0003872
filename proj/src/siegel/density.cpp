#include "siegel/density.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

#include "siegel/rng.hpp"

namespace siegel::density {

namespace {

const double TWO_PI = 2.0 * M_PI;

struct Acc {
  double w = 0, w2 = 0, win = 0;
  long n = 0;
};

// chunk c of a (seed, salt) family always sees the same draws, so the result
// is independent of the worker count
template <class DrawEval>
Acc chunked_weighted(long total, std::uint64_t seed, std::uint64_t salt, int threads,
                     const DrawEval& draw_eval) {
  const long chunk = 1024;
  const long nchunks = (total + chunk - 1) / chunk;
  std::vector<Acc> parts(static_cast<std::size_t>(nchunks));
  std::atomic<long> next{0};
  auto work = [&] {
    for (;;) {
      long c = next.fetch_add(1);
      if (c >= nchunks) return;
      auto g = make_stream(seed, salt * (1ull << 22) + static_cast<std::uint64_t>(c));
      long lo = c * chunk, hi = std::min(total, lo + chunk);
      Acc a;
      for (long i = lo; i < hi; ++i) {
        auto [w, in] = draw_eval(g);
        a.w += w;
        a.w2 += w * w;
        if (in) a.win += w;
        ++a.n;
      }
      parts[static_cast<std::size_t>(c)] = a;
    }
  };
  long nt = threads <= 0 ? static_cast<long>(std::thread::hardware_concurrency()) : threads;
  nt = std::max(1L, std::min(nt, nchunks));
  if (nt == 1) {
    work();
  } else {
    std::vector<std::thread> ts;
    for (long i = 0; i < nt; ++i) ts.emplace_back(work);
    for (auto& t : ts) t.join();
  }
  Acc tot;
  for (const Acc& a : parts) {
    tot.w += a.w;
    tot.w2 += a.w2;
    tot.win += a.win;
    tot.n += a.n;
  }
  return tot;
}

DensityEstimate estimate_from(const Acc& a, DensMethod method) {
  if (!(a.w > 0)) throw input_error("dens: undefined density, the window carries no weight");
  DensityEstimate out;
  out.method = method;
  out.samples = a.n;
  out.value = a.win / a.w;
  double n_eff = a.w * a.w / a.w2;
  out.std_error = std::sqrt(std::max(0.0, out.value * (1.0 - out.value)) / n_eff);
  return out;
}

void run_rows(int ny, int threads, const std::function<void(int)>& fn) {
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      int y = next.fetch_add(1);
      if (y >= ny) return;
      fn(y);
    }
  };
  int nt = threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads;
  nt = std::max(1, std::min(nt, ny));
  if (nt == 1) {
    work();
  } else {
    std::vector<std::thread> ts;
    for (int i = 0; i < nt; ++i) ts.emplace_back(work);
    for (auto& t : ts) t.join();
  }
}

cplx draw_annulus(std::mt19937_64& g, double r_in, double r_out) {
  double a2 = r_in * r_in, b2 = r_out * r_out;
  double rad = std::sqrt(a2 + uniform(g) * (b2 - a2));
  return std::polar(rad, uniform(g, 0.0, TWO_PI));
}

// checks the states z_0 .. z_T inclusive
template <class InTrap>
bool orbit_stays(const dyn::QuadraticMap& map, const InTrap& in_trap, cplx z, long T) {
  for (long t = 0; t < T; ++t) {
    if (!in_trap(z)) return false;
    z = map(z);
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return in_trap(z);
}

}  // namespace

GridMask::GridMask(Window w, int nx, int ny) : win_(w), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw input_error("mask: resolution must be positive");
  if (!(w.hx > 0 && w.hy > 0)) throw input_error("mask: window half-widths must be positive");
  bits_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0);
}

cplx GridMask::pixel_center(int ix, int iy) const {
  double x = win_.cx - win_.hx + 2.0 * win_.hx * (ix + 0.5) / nx_;
  double y = win_.cy - win_.hy + 2.0 * win_.hy * (iy + 0.5) / ny_;
  return {x, y};
}

bool GridMask::locate(cplx z, int& ix, int& iy) const {
  if (bits_.empty()) return false;
  double fx = (z.real() - (win_.cx - win_.hx)) / (2.0 * win_.hx) * nx_;
  double fy = (z.imag() - (win_.cy - win_.hy)) / (2.0 * win_.hy) * ny_;
  if (!(fx >= 0.0 && fy >= 0.0)) return false;
  ix = static_cast<int>(fx);
  iy = static_cast<int>(fy);
  return ix < nx_ && iy < ny_;
}

bool GridMask::contains_point(cplx z) const {
  int ix, iy;
  return locate(z, ix, iy) && at(ix, iy);
}

long GridMask::inside_count() const {
  long n = 0;
  for (std::uint8_t b : bits_) n += b;
  return n;
}

double GridMask::pixel_area() const {
  return win_.area() / (static_cast<double>(nx_) * static_cast<double>(ny_));
}

GridMask GridMask::dilated(int px) const {
  GridMask out = *this;
  if (px <= 0 || bits_.empty()) return out;
  for (int iy = 0; iy < ny_; ++iy)
    for (int ix = 0; ix < nx_; ++ix) {
      if (!at(ix, iy)) continue;
      int x0 = std::max(0, ix - px), x1 = std::min(nx_ - 1, ix + px);
      int y0 = std::max(0, iy - px), y1 = std::min(ny_ - 1, iy + px);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.set(x, y, true);
    }
  return out;
}

std::string Trap::describe() const {
  char buf[128];
  if (kind == Kind::disk) {
    std::snprintf(buf, sizeof buf, "disk of radius %.17g", radius);
  } else {
    std::snprintf(buf, sizeof buf, "prior %dx%d mask dilated by %d px",
                  source ? source->nx() : 0, source ? source->ny() : 0, dilate_px);
  }
  return buf;
}

GridMask siegel_mask(const dyn::QuadraticMap& map, const Trap& trap, Window win, int nx, int ny,
                     long T, int threads) {
  if (T < 1) throw input_error("siegel_mask: budget must be at least 1");
  GridMask dil;
  if (trap.kind == Trap::Kind::mask) {
    if (!trap.source || trap.source->empty())
      throw input_error("siegel_mask: mask trap without a source mask");
    dil = trap.source->dilated(trap.dilate_px);
    if (!dil.contains_point(cplx(0.0, 0.0)))
      throw input_error("siegel_mask: trap region must contain the fixed point");
  } else {
    if (!(trap.radius > 0)) throw input_error("siegel_mask: trap disk radius must be positive");
  }
  double r2 = trap.radius * trap.radius;
  auto in_trap = [&](cplx z) {
    return trap.kind == Trap::Kind::disk ? std::norm(z) <= r2 : dil.contains_point(z);
  };
  GridMask out(win, nx, ny);
  out.budget_T = T;
  out.decision = "orbit stays in " + trap.describe() + " through the budget";
  run_rows(ny, threads, [&](int iy) {
    for (int ix = 0; ix < nx; ++ix)
      if (orbit_stays(map, in_trap, out.pixel_center(ix, iy), T)) out.set(ix, iy, true);
  });
  return out;
}

GridMask mask_from_predicate(Window win, int nx, int ny,
                             const std::function<bool(cplx)>& inside, std::string decision) {
  GridMask out(win, nx, ny);
  out.budget_T = 0;
  out.decision = std::move(decision);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      if (inside(out.pixel_center(ix, iy))) out.set(ix, iy, true);
  return out;
}

DensityEstimate dens_of_samples(const std::vector<cplx>& pts, const std::vector<double>& weights,
                                const Predicate& X) {
  if (pts.empty()) throw input_error("dens: no samples");
  if (!weights.empty() && weights.size() != pts.size())
    throw input_error("dens: weight count does not match sample count");
  Acc a;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0)) throw input_error("dens: weights must be nonnegative");
    a.w += w;
    a.w2 += w * w;
    if (X(pts[i])) a.win += w;
    ++a.n;
  }
  return estimate_from(a, DensMethod::monte_carlo);
}

DensityEstimate dens_mc(const geo::RegionId& U, const Predicate& X, long samples,
                        std::uint64_t seed, std::uint64_t salt) {
  if (samples < 1) throw input_error("dens: need at least one sample");
  using Tag = geo::RegionId::Tag;
  double r_in = 0, r_out = 0;
  if (U.tag == Tag::Annulus) {
    if (!(U.p1 >= 0 && U.p1 < U.p2)) throw input_error("Annulus: need 0 <= r_in < r_out");
    r_in = U.p1;
    r_out = U.p2;
  } else if (U.tag == Tag::Disk) {
    if (!(U.p1 > 0)) throw input_error("Disk: radius must be positive");
    r_out = U.p1;
  } else {
    throw input_error("dens: window must have positive finite area (annulus or disk)");
  }
  Acc a = chunked_weighted(samples, seed, salt, 1, [&](std::mt19937_64& g) {
    cplx z = draw_annulus(g, r_in, r_out);
    return std::pair<double, bool>(1.0, X(z));
  });
  return estimate_from(a, DensMethod::monte_carlo);
}

DensityEstimate dens_mc(const GridMask& U, const Predicate& X, long samples, std::uint64_t seed,
                        std::uint64_t salt) {
  if (samples < 1) throw input_error("dens: need at least one sample");
  std::vector<std::pair<int, int>> inside;
  for (int iy = 0; iy < U.ny(); ++iy)
    for (int ix = 0; ix < U.nx(); ++ix)
      if (U.at(ix, iy)) inside.emplace_back(ix, iy);
  if (inside.empty()) throw input_error("dens: undefined density, the window mask is empty");
  double px = U.window().hx * 2.0 / U.nx();
  double py = U.window().hy * 2.0 / U.ny();
  Acc a = chunked_weighted(samples, seed, salt, 1, [&](std::mt19937_64& g) {
    std::size_t k = std::min(inside.size() - 1,
                             static_cast<std::size_t>(uniform(g) * inside.size()));
    cplx c = U.pixel_center(inside[k].first, inside[k].second);
    cplx z = c + cplx((uniform(g) - 0.5) * px, (uniform(g) - 0.5) * py);
    return std::pair<double, bool>(1.0, X(z));
  });
  return estimate_from(a, DensMethod::monte_carlo);
}

DensityEstimate dens_grid(const GridMask& U, const GridMask& X) {
  return dens_grid(U, Predicate([&X](cplx z) { return X.contains_point(z); }));
}

DensityEstimate dens_grid(const GridMask& U, const Predicate& X) {
  Acc a;
  for (int iy = 0; iy < U.ny(); ++iy)
    for (int ix = 0; ix < U.nx(); ++ix) {
      if (!U.at(ix, iy)) continue;
      a.w += 1.0;
      a.w2 += 1.0;
      if (X(U.pixel_center(ix, iy))) a.win += 1.0;
      ++a.n;
    }
  DensityEstimate out = estimate_from(a, DensMethod::grid);
  return out;
}

mpz_class AnRule::value_at(const mpz_class& q_n) const {
  mpz_class v;
  if (kind == Kind::fixed) {
    v = fixed_value;
  } else {
    if (base < 1) throw input_error("A_n rule: base must be at least 1");
    if (!q_n.fits_ulong_p() || q_n.get_ui() > 4096)
      throw input_error("A_n rule: exponent q_n too large to materialize");
    mpz_ui_pow_ui(v.get_mpz_t(), base, q_n.get_ui());
  }
  if (v < 1) throw input_error("A_n rule: must produce integers >= 1");
  return v;
}

std::string AnRule::describe() const {
  char buf[96];
  if (kind == Kind::fixed)
    std::snprintf(buf, sizeof buf, "fixed %s", fixed_value.get_str().c_str());
  else
    std::snprintf(buf, sizeof buf, "ceil %lu^q_n", base);
  return buf;
}

ExperimentResult density_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_lo < 1 || cfg.n_hi < cfg.n_lo)
    throw input_error("experiment: need 1 <= n_lo <= n_hi");
  if (cfg.mc_samples < 100) throw input_error("experiment: need at least 100 samples");
  if (cfg.u_kind == ExperimentConfig::UKind::lin_disk && !(cfg.lin_frac > 0 && cfg.lin_frac < 1))
    throw input_error("experiment: linearized window fraction must be in (0,1)");

  ExperimentResult out;
  auto convs = cfrac::convergents(cfg.alpha, static_cast<std::size_t>(cfg.n_hi));
  std::vector<cfrac::PerturbationSetup> setups;
  for (int n = cfg.n_lo; n <= cfg.n_hi; ++n) {
    mpz_class A = cfg.rule.value_at(convs[static_cast<std::size_t>(n - 1)].q);
    setups.push_back(cfrac::make_setup(cfg.alpha, cfg.theta, n, A, cfg.precision_bits));
  }

  bool want_yn = cfg.u_kind == ExperimentConfig::UKind::annulus;
  if (want_yn) {
    double fl = 0;
    for (const auto& s : setups)
      fl = std::max(fl, std::pow(std::fabs(s.eps_d()), 1.0 / s.qn_d()));
    out.family_floor = fl;
    out.ladder = cfg.ladder ? *cfg.ladder : geo::Ladder::defaults(fl);
  } else if (cfg.ladder) {
    out.ladder = *cfg.ladder;
  }

  // shared plumbing for the orbit column: the unperturbed linearizer and its
  // trap mask do not depend on n
  std::optional<dyn::LinearizerSeries> lin;
  GridMask trap_dil;
  if (cfg.orbit_column) {
    lin = dyn::linearizer(exp2pii(setups.front().alpha_value), cfg.linearizer_M);
    out.r_hat = lin->radius_estimate;
    dyn::QuadraticMap Pa = dyn::QuadraticMap::from_rotation(setups.front().alpha_value);
    GridMask base = siegel_mask(Pa, Trap::disk(2.0), Window::square(cfg.mask_halfwidth),
                                cfg.mask_resolution, cfg.mask_resolution, cfg.mask_budget,
                                cfg.threads);
    trap_dil = base.dilated(1);
  }

  for (std::size_t i = 0; i < setups.size(); ++i) {
    const auto& s = setups[i];
    ExperimentRow row;
    row.n = s.n;
    row.q_n = s.q_n;
    row.A_n = s.A_n;
    row.epsilon_n = s.epsilon_n.to_double();
    row.samples = cfg.mc_samples;
    row.seed = cfg.seed;

    if (want_yn) {
      geo::RegionParams P(s, out.ladder);
      row.r7 = out.ladder.r7;
      row.r8 = out.ladder.r8;
      geo::RegionId yn = geo::RegionId::Yn(out.ladder.r8, out.ladder.r7);
      auto d = dens_mc(geo::RegionId::Annulus(out.ladder.r7, out.ladder.r8),
                       [&](cplx z) { return geo::contains(P, yn, z).inside; }, cfg.mc_samples,
                       cfg.seed, static_cast<std::uint64_t>(s.n));
      row.dens_Yn = d.value;
      row.stderr_Yn = d.std_error;
    }

    if (cfg.orbit_column) {
      mpz_class floor_budget = s.q_n * s.q_n * (s.A_n + 1);
      if (!floor_budget.fits_slong_p())
        throw input_error("experiment: orbit budget floor q_n^2 (A_n+1) exceeds long range");
      long fb = static_cast<long>(floor_budget.get_si());
      long T = cfg.orbit_budget != 0 ? cfg.orbit_budget : 10 * fb;
      if (T < fb) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "experiment: orbit budget %ld below the required floor q_n^2 (A_n+1) = %ld",
                      T, fb);
        throw input_error(buf);
      }
      dyn::QuadraticMap Pn = dyn::QuadraticMap::from_rotation(s.alpha_n);
      double rh = lin->radius_estimate;
      const auto& coef = lin->coeffs_d;
      auto in_trap = [&](cplx z) { return trap_dil.contains_point(z); };
      // draws in the model plane, transported by the linearizer with the
      // area-distortion weight
      auto draw = [&](std::mt19937_64& g) {
        cplx zm = cfg.u_kind == ExperimentConfig::UKind::lin_disk
                      ? draw_annulus(g, 0.0, cfg.lin_frac)
                      : draw_annulus(g, row.r7, row.r8);
        cplx u = rh * zm;
        cplx z0 = dyn::eval_series(coef, u);
        double dw = std::norm(rh * dyn::eval_series_deriv(coef, u));
        return std::pair<double, bool>(dw, orbit_stays(Pn, in_trap, z0, T));
      };
      Acc a = chunked_weighted(cfg.orbit_samples, cfg.seed,
                               256 + static_cast<std::uint64_t>(s.n), cfg.threads, draw);
      DensityEstimate d = estimate_from(a, DensMethod::monte_carlo);
      row.dens_Dn = d.value;
      row.stderr_Dn = d.std_error;
      row.budget_T = T;
      if (!want_yn) row.samples = cfg.orbit_samples;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

InclusionReport inclusion_spot_check(const geo::RegionParams& P,
                                     const dyn::ExplodedMapContext& ctx, long count, long budget,
                                     std::uint64_t seed) {
  if (count < 1) throw input_error("inclusion: need at least one sample");
  if (budget < 1) throw input_error("inclusion: need a positive orbit budget");
  const geo::Ladder& L = P.ladder();
  InclusionReport rep;
  rep.budget = budget;
  rep.escape_radius = L.rp0;
  geo::RegionId yn = geo::RegionId::Yn(L.r8, L.r7);

  auto g = make_stream(seed, 7);
  long attempts = 0;
  const long max_attempts = 10000 * count + 10000;
  double return_sum = 0;

  while (rep.samples < count) {
    if (++attempts > max_attempts)
      throw numerical_error("inclusion: sampler failed to hit the region");
    bool stress = (rep.samples % 10) == 9;
    cplx z = stress ? std::polar(L.r7 * (1.0 + 0.01 * uniform(g)), uniform(g, 0.0, TWO_PI))
                    : draw_annulus(g, L.r7, L.r8);
    if (!geo::contains(P, yn, z).inside) continue;
    ++rep.samples;
    if (stress) ++rep.boundary_samples;

    try {
      geo::LiftResult lr = geo::lift_to_H(P, z);
      rep.worst_root_residual = std::max(rep.worst_root_residual, lr.root_residual);
    } catch (const error&) {
      ++rep.lift_failures;
    }

    cplx z0 = z, zc = z;
    bool broke = false;
    long first_return = 0;
    for (long t = 1; t <= budget; ++t) {
      dyn::EvalResult ev = ctx.f(zc);
      if (!ev.ok) {
        ++rep.eval_failures;
        ++rep.violations;
        broke = true;
        break;
      }
      zc = ev.value;
      if (std::abs(zc) >= L.rp0) {
        ++rep.violations;
        broke = true;
        break;
      }
      if (first_return == 0 && t >= 2 && std::abs(zc - z0) < 0.1 * std::abs(z0))
        first_return = t;
    }
    if (!broke && first_return > 0) {
      ++rep.returns_found;
      return_sum += static_cast<double>(first_return);
      rep.slowest_near_return = std::max(rep.slowest_near_return, first_return);
    }
  }
  if (rep.returns_found > 0) rep.mean_near_return = return_sum / rep.returns_found;
  return rep;
}

}  // namespace siegel::density
