#include "siegel/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "siegel/cfrac.hpp"
#include "siegel/density.hpp"
#include "siegel/dynamics.hpp"
#include "siegel/errors.hpp"
#include "siegel/fatou.hpp"
#include "siegel/geometry.hpp"
#include "siegel/io.hpp"
#include "siegel/precision.hpp"

namespace siegel::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using cplx = std::complex<double>;

const char* kVersion = "0.1.0";
const double TWO_PI = 2.0 * M_PI;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// artifacts accumulate in memory and land on disk in one pass at the end of
// the subcommand, so a run that fails its checks leaves no partial output
struct Artifacts {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>> files;

  explicit Artifacts(std::string d) : dir(std::move(d)) {}
  void add(std::string name, std::string bytes) {
    files.emplace_back(std::move(name), std::move(bytes));
  }
  void flush() const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
      throw input_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto& [name, bytes] : files) io::write_file_atomic((dir / name).string(), bytes);
  }
};

std::string manifest_bytes(const std::string& sub, const json& config, std::uint64_t seed,
                           double wall) {
  json m;
  m["subcommand"] = sub;
  m["config"] = config;
  m["seed"] = seed;
  m["versions"] = {{"siegel_lab", kVersion}, {"gmp", gmp_version}, {"mpfr", mpfr_get_version()}};
  m["wall_seconds"] = wall;
  return m.dump(2) + "\n";
}

long to_long(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw input_error(std::string(what) + ": cannot parse integer from '" + s + "'");
  }
}

mpz_class to_mpz(const std::string& s, const char* what) {
  try {
    return mpz_class(s);
  } catch (const std::exception&) {
    throw input_error(std::string(what) + ": cannot parse integer from '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

// presets: golden, silver, const:<a>, alpha0:<N>:<i,j,...>, @file
cfrac::QuotientSequence parse_rotation(const std::string& s) {
  if (s == "golden") return cfrac::golden();
  if (s == "silver") return cfrac::constant(2);
  if (s.rfind("const:", 0) == 0) {
    long a = to_long(s.substr(6), "rotation");
    if (a < 1) throw input_error("rotation: const quotient must be >= 1");
    return cfrac::constant(static_cast<unsigned long>(a));
  }
  if (s.rfind("alpha0:", 0) == 0) {
    auto parts = split(s.substr(7), ':');
    if (parts.size() != 2) throw input_error("rotation: expected alpha0:<N>:<i,j,...>");
    long N = to_long(parts[0], "rotation");
    if (N < 1) throw input_error("rotation: alpha0 base quotient must be >= 1");
    std::vector<std::uint64_t> idx;
    for (const auto& piece : split(parts[1], ',')) {
      long v = to_long(piece, "rotation");
      if (v < 1) throw input_error("rotation: alpha0 indices must be >= 1");
      idx.push_back(static_cast<std::uint64_t>(v));
    }
    return cfrac::build_alpha0(static_cast<unsigned long>(N), idx);
  }
  if (!s.empty() && s[0] == '@') return cfrac::from_text(io::read_file(s.substr(1)));
  throw input_error("unknown rotation '" + s +
                    "' (expected golden, silver, const:<a>, alpha0:<N>:<i,...>, or @file)");
}

// thirteen comma-separated rungs in chain order
// r3,r5,r7,r8,r6,r4,rp2,r2,r1,r,rp,r0,rp0
geo::Ladder parse_ladder(const std::string& s) {
  auto parts = split(s, ',');
  if (parts.size() != 13) throw input_error("ladder: expected 13 comma-separated radii");
  double v[13];
  for (int i = 0; i < 13; ++i) {
    try {
      std::size_t pos = 0;
      v[i] = std::stod(parts[i], &pos);
      if (pos != parts[i].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw input_error("ladder: cannot parse radius from '" + parts[i] + "'");
    }
  }
  geo::Ladder L;
  L.r3 = v[0];
  L.r5 = v[1];
  L.r7 = v[2];
  L.r8 = v[3];
  L.r6 = v[4];
  L.r4 = v[5];
  L.rp2 = v[6];
  L.r2 = v[7];
  L.r1 = v[8];
  L.r = v[9];
  L.rp = v[10];
  L.r0 = v[11];
  L.rp0 = v[12];
  return L;
}

json ladder_json(const geo::Ladder& L) {
  json j;
  j["r3"] = L.r3;
  j["r5"] = L.r5;
  j["r7"] = L.r7;
  j["r8"] = L.r8;
  j["r6"] = L.r6;
  j["r4"] = L.r4;
  j["rp2"] = L.rp2;
  j["r2"] = L.r2;
  j["r1"] = L.r1;
  j["r"] = L.r;
  j["rp"] = L.rp;
  j["r0"] = L.r0;
  j["rp0"] = L.rp0;
  return j;
}

mpfr_prec_t prec_of(long bits) {
  if (bits < 64 || bits > 8192) throw input_error("precision must lie in [64, 8192] bits");
  return static_cast<mpfr_prec_t>(bits);
}

// band geometry for the translation-coordinate checks: inner rungs push the
// fitted band up to where the lifted return is already translation-like,
// outer rungs spread geometrically toward 0.96
geo::Ladder band_ladder(const cfrac::PerturbationSetup& s) {
  double q = s.qn_d();
  double eps = std::abs(s.eps_d());
  double k = TWO_PI * q * q * eps;
  double X = 1.0 / (q * q * eps);
  auto r_of_h = [&](double h) { return std::pow(1.0 / (TWO_PI * q * q * h), 1.0 / q); };
  geo::Ladder L;
  L.r3 = r_of_h(std::max(20.0 * X, 500.0));
  L.r4 = r_of_h(2.4 / k);
  double g = std::pow(L.r4 / L.r3, 0.2);
  L.r5 = L.r3 * g;
  L.r7 = L.r5 * g;
  L.r8 = L.r7 * g;
  L.r6 = L.r8 * g;
  double go = std::pow(0.96 / L.r4, 1.0 / 7.0);
  L.rp2 = L.r4 * go;
  L.r2 = L.rp2 * go;
  L.r1 = L.r2 * go;
  L.r = L.r1 * go;
  L.rp = L.r * go;
  L.r0 = L.rp * go;
  L.rp0 = 0.96;
  return L;
}

fatou::PhiOptions band_options(const cfrac::PerturbationSetup& s) {
  double q = s.qn_d();
  double k = TWO_PI * q * q * std::abs(s.eps_d());
  fatou::PhiOptions o;
  o.modes = static_cast<int>(std::lround(8.0 * q));
  o.band_top = 13.0 / k;
  return o;
}

struct SetupArgs {
  std::string alpha = "golden", theta = "golden", An = "10";
  long n = 5;
  long prec = 128;

  void wire(CLI::App* sub) {
    sub->add_option("--alpha", alpha, "rotation preset or @file");
    sub->add_option("--theta", theta, "tail rotation preset or @file");
    sub->add_option("--n", n, "stage index");
    sub->add_option("--An", An, "perturbation size (integer, any magnitude)");
    sub->add_option("--prec", prec, "working precision in bits");
  }
  cfrac::PerturbationSetup build() const {
    return cfrac::make_setup(parse_rotation(alpha), parse_rotation(theta),
                             static_cast<int>(n), to_mpz(An, "An"), prec_of(prec));
  }
  json echo() const {
    return {{"alpha", alpha}, {"theta", theta}, {"n", n}, {"An", An}, {"prec", prec}};
  }
};

void add_approximants(CLI::App& app) {
  struct Opts {
    std::string alpha = "golden", out = "out";
    long k = 10;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("approximants", "continued-fraction convergents of a rotation");
  sub->add_option("--alpha", o->alpha, "rotation preset or @file");
  sub->add_option("--k", o->k, "number of convergents");
  sub->add_option("--out", o->out, "output directory");
  sub->callback([o] {
    Timer t;
    if (o->k < 1 || o->k > 100000) throw input_error("approximants: k out of range [1, 100000]");
    auto seq = parse_rotation(o->alpha);
    auto conv = cfrac::convergents(seq, static_cast<std::size_t>(o->k));
    auto quot = seq.quotients(static_cast<std::size_t>(o->k));
    io::Csv csv;
    csv.header = {"k", "a_k", "p_k", "q_k"};
    for (std::size_t i = 0; i < conv.size(); ++i)
      csv.rows.push_back({std::to_string(conv[i].k), quot[i].get_str(), conv[i].p.get_str(),
                          conv[i].q.get_str()});
    Artifacts a(o->out);
    a.add("approximants.csv", csv.to_string());
    a.add("manifest.json",
          manifest_bytes("approximants", {{"alpha", o->alpha}, {"k", o->k}, {"out", o->out}}, 0,
                         t.seconds()));
    a.flush();
  });
}

void add_setup(CLI::App& app) {
  struct Opts {
    SetupArgs s;
    std::string out = "out";
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("setup", "perturbed rotation number at one stage");
  o->s.wire(sub);
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail unless the two epsilon evaluations agree");
  sub->callback([o] {
    Timer t;
    auto s = o->s.build();
    double q = s.qn_d();
    double eps = s.eps_d();
    json j;
    j["n"] = s.n;
    j["p_n"] = s.p_n.get_str();
    j["q_n"] = s.q_n.get_str();
    j["q_prev"] = s.q_nm1.get_str();
    j["A_n"] = s.A_n.get_str();
    j["alpha"] = s.alpha_value.to_double();
    j["theta"] = s.theta_value.to_double();
    j["alpha_n"] = s.alpha_n.to_double();
    j["epsilon_n"] = io::fmt_g17(eps);
    j["mirrored"] = eps < 0;
    j["period_X"] = 1.0 / (q * q * std::abs(eps));
    j["dual_gap"] = s.dual_gap.to_double();
    double tol = std::ldexp(1.0, -static_cast<int>(o->s.prec / 2));
    j["dual_gap_tol"] = tol;
    bool pass = s.dual_gap.to_double() <= tol;
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance, "setup: the two epsilon evaluations disagree beyond " +
                                        io::fmt_g17(tol));
    json echo = o->s.echo();
    echo["out"] = o->out;
    echo["check"] = o->check;
    Artifacts a(o->out);
    a.add("setup.json", j.dump(2) + "\n");
    a.add("manifest.json", manifest_bytes("setup", echo, 0, t.seconds()));
    a.flush();
  });
}

void add_brjuno(CLI::App& app) {
  struct Opts {
    std::string alpha = "golden", out = "out";
    long K = 20, prec = 128;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("brjuno", "partial sums of the Brjuno series");
  sub->add_option("--alpha", o->alpha, "rotation preset or @file");
  sub->add_option("--K", o->K, "number of terms");
  sub->add_option("--prec", o->prec, "working precision in bits");
  sub->add_option("--out", o->out, "output directory");
  sub->callback([o] {
    Timer t;
    if (o->K < 1 || o->K > 10000) throw input_error("brjuno: K out of range [1, 10000]");
    auto seq = parse_rotation(o->alpha);
    auto B = cfrac::brjuno_sum(seq, static_cast<std::size_t>(o->K), prec_of(o->prec));
    auto conv = cfrac::convergents(seq, static_cast<std::size_t>(o->K));
    io::Csv csv;
    csv.header = {"k", "q_k", "term", "partial"};
    Real acc(0.0, prec_of(o->prec));
    for (std::size_t i = 0; i < B.terms.size(); ++i) {
      acc = acc + B.terms[i];
      csv.rows.push_back({std::to_string(i + 1), conv[i].q.get_str(),
                          io::fmt_g17(B.terms[i].to_double()), io::fmt_g17(acc.to_double())});
    }
    json j;
    j["K"] = B.K;
    j["value"] = B.value.to_double();
    Artifacts a(o->out);
    a.add("brjuno.csv", csv.to_string());
    a.add("brjuno.json", j.dump(2) + "\n");
    a.add("manifest.json",
          manifest_bytes("brjuno",
                         {{"alpha", o->alpha}, {"K", o->K}, {"prec", o->prec}, {"out", o->out}}, 0,
                         t.seconds()));
    a.flush();
  });
}

void add_alpha0(CLI::App& app) {
  struct Opts {
    std::string idx = "2,4", out = "out";
    long N = 1, k = 8;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("alpha0", "unbounded-type quotient sequence");
  sub->add_option("--N", o->N, "base quotient");
  sub->add_option("--idx", o->idx, "comma-separated spike positions");
  sub->add_option("--k", o->k, "convergents to tabulate");
  sub->add_option("--out", o->out, "output directory");
  sub->callback([o] {
    Timer t;
    auto seq = parse_rotation("alpha0:" + std::to_string(o->N) + ":" + o->idx);
    if (o->k < 1 || o->k > 1000) throw input_error("alpha0: k out of range [1, 1000]");
    auto conv = cfrac::convergents(seq, static_cast<std::size_t>(o->k));
    auto quot = seq.quotients(static_cast<std::size_t>(o->k));
    io::Csv csv;
    csv.header = {"k", "a_k_bits", "q_k_bits"};
    for (std::size_t i = 0; i < conv.size(); ++i)
      csv.rows.push_back({std::to_string(conv[i].k),
                          std::to_string(mpz_sizeinbase(quot[i].get_mpz_t(), 2)),
                          std::to_string(mpz_sizeinbase(conv[i].q.get_mpz_t(), 2))});
    Artifacts a(o->out);
    a.add("alpha0.txt", cfrac::to_text(seq));
    a.add("alpha0.csv", csv.to_string());
    a.add("manifest.json",
          manifest_bytes("alpha0",
                         {{"N", o->N}, {"idx", o->idx}, {"k", o->k}, {"out", o->out}}, 0,
                         t.seconds()));
    a.flush();
  });
}

void add_linearizer(CLI::App& app) {
  struct Opts {
    std::string alpha = "golden", out = "out";
    long M = 200, prec = 128;
    double tol = 1e-10;
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("linearizer", "power series conjugating the rotation");
  sub->add_option("--alpha", o->alpha, "rotation preset or @file");
  sub->add_option("--M", o->M, "series truncation order");
  sub->add_option("--prec", o->prec, "working precision in bits");
  sub->add_option("--tol", o->tol, "conjugacy residual tolerance for --check");
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail when the conjugacy residual exceeds --tol");
  sub->callback([o] {
    Timer t;
    if (o->M < 2 || o->M > 20000) throw input_error("linearizer: M out of range [2, 20000]");
    auto seq = parse_rotation(o->alpha);
    Real av = cfrac::eval_real_auto(seq, prec_of(o->prec)).value;
    Complex lambda = exp2pii(av);
    auto lin = dyn::linearizer(lambda, static_cast<std::size_t>(o->M));

    io::Csv csv;
    csv.header = {"m", "re_c_m", "im_c_m"};
    for (std::size_t i = 0; i < lin.coeffs_d.size(); ++i)
      csv.rows.push_back({std::to_string(i + 1), io::fmt_g17(lin.coeffs_d[i].real()),
                          io::fmt_g17(lin.coeffs_d[i].imag())});

    cplx lam = lambda.to_std();
    double worst = 0;
    for (int k = 0; k < 64; ++k) {
      cplx u = 0.5 * lin.radius_estimate * std::polar(1.0, TWO_PI * (k + 0.37) / 64.0);
      cplx pu = dyn::eval_series(lin.coeffs_d, u);
      cplx lhs = lam * pu + pu * pu;
      cplx rhs = dyn::eval_series(lin.coeffs_d, lam * u);
      worst = std::max(worst, std::abs(lhs - rhs));
    }

    json j;
    j["lambda"] = {lam.real(), lam.imag()};
    j["M"] = lin.M;
    j["radius_estimate"] = lin.radius_estimate;
    j["fit_window"] = {lin.fit_lo, lin.fit_hi};
    j["excluded"] = lin.excluded.size();
    if (lin.breakdown_at)
      j["breakdown_at"] = *lin.breakdown_at;
    else
      j["breakdown_at"] = nullptr;
    j["conjugacy_residual"] = worst;
    j["residual_tol"] = o->tol;
    bool pass = worst < o->tol;
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance,
                  "linearizer: conjugacy residual " + io::fmt_g17(worst) + " exceeds " +
                      io::fmt_g17(o->tol));
    Artifacts a(o->out);
    a.add("linearizer.csv", csv.to_string());
    a.add("linearizer.json", j.dump(2) + "\n");
    a.add("manifest.json",
          manifest_bytes("linearizer",
                         {{"alpha", o->alpha},
                          {"M", o->M},
                          {"prec", o->prec},
                          {"tol", o->tol},
                          {"out", o->out},
                          {"check", o->check}},
                         0, t.seconds()));
    a.flush();
  });
}

void add_cycle(CLI::App& app) {
  struct Opts {
    SetupArgs s;
    std::string out = "out";
    long p = 0, q = 0;
    double delta_abs = 0, delta_arg = 0;
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("cycle", "q-cycle born from the parabolic explosion");
  o->s.wire(sub);
  auto* popt = sub->add_option("--p", o->p, "rotation numerator (direct mode)");
  sub->add_option("--q", o->q, "rotation denominator (direct mode)");
  sub->add_option("--delta-abs", o->delta_abs, "explosion parameter modulus (direct mode)");
  sub->add_option("--delta-arg", o->delta_arg, "explosion parameter argument (direct mode)");
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail when any cycle point misses its self-return");
  sub->callback([o, popt] {
    Timer t;
    long p, q;
    cplx delta;
    json echo;
    if (popt->count() > 0) {
      p = o->p;
      q = o->q;
      if (q < 2 || q > 1000) throw input_error("cycle: q out of range [2, 1000]");
      if (o->delta_abs <= 0) throw input_error("cycle: delta-abs must be positive");
      delta = std::polar(o->delta_abs, o->delta_arg);
      echo = {{"p", o->p}, {"q", o->q}, {"delta_abs", o->delta_abs}, {"delta_arg", o->delta_arg}};
    } else {
      auto s = o->s.build();
      if (!s.p_n.fits_slong_p() || !s.q_n.fits_slong_p())
        throw input_error("cycle: convergent too large for the continuation");
      p = s.p_n.get_si();
      q = s.q_n.get_si();
      if (q > 1000) throw input_error("cycle: q out of range [2, 1000]");
      double mag = std::pow(std::abs(s.eps_d()), 1.0 / static_cast<double>(q));
      double arg = s.eps_d() < 0 ? M_PI / static_cast<double>(q) : 0.0;
      delta = std::polar(mag, arg);
      echo = o->s.echo();
    }
    echo["out"] = o->out;
    echo["check"] = o->check;

    auto cyc = dyn::explosion_cycle(p, q, delta);
    cplx lam = std::exp(cplx(0.0, TWO_PI) * cyc.eta);
    io::Csv csv;
    csv.header = {"j", "re", "im", "residual"};
    double worst = 0;
    for (std::size_t j = 0; j < cyc.points.size(); ++j) {
      cplx z = cyc.points[j];
      for (long k = 0; k < q; ++k) z = lam * z + z * z;
      double res = std::abs(z - cyc.points[j]);
      worst = std::max(worst, res);
      csv.rows.push_back({std::to_string(j), io::fmt_g17(cyc.points[j].real()),
                          io::fmt_g17(cyc.points[j].imag()), io::fmt_g17(res)});
    }

    json j;
    j["p"] = p;
    j["q"] = q;
    j["delta"] = {delta.real(), delta.imag()};
    j["eta"] = {cyc.eta.real(), cyc.eta.imag()};
    j["max_residual"] = cyc.max_residual;
    j["return_residual"] = worst;
    j["continuation_steps"] = cyc.continuation_trace.size();
    bool pass = worst < 1e-10 && cyc.max_residual < 1e-10;
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance,
                  "cycle: self-return residual " + io::fmt_g17(worst) + " exceeds 1e-10");
    Artifacts a(o->out);
    a.add("cycle.csv", csv.to_string());
    a.add("cycle.json", j.dump(2) + "\n");
    a.add("manifest.json", manifest_bytes("cycle", echo, 0, t.seconds()));
    a.flush();
  });
}

void add_fn_check(CLI::App& app) {
  struct Opts {
    SetupArgs s;
    std::string mode = "exact", out = "out";
    double probe = 0.2;
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("fn-check", "leading-order structure of the exploded map");
  o->s.wire(sub);
  sub->add_option("--mode", o->mode, "chi mode: exact or proxy");
  sub->add_option("--probe", o->probe, "probe point modulus for the expansion residual");
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail on degenerate or out-of-envelope structure");
  sub->callback([o] {
    Timer t;
    dyn::ChiMode mode;
    if (o->mode == "exact")
      mode = dyn::ChiMode::exact;
    else if (o->mode == "proxy")
      mode = dyn::ChiMode::proxy;
    else
      throw input_error("fn-check: mode must be exact or proxy");
    auto s = o->s.build();
    dyn::ExplodedMapContext ctx(s, mode);

    json j;
    j["mode"] = o->mode;
    j["q"] = ctx.q();
    j["p"] = ctx.p();
    j["eps"] = io::fmt_g17(ctx.eps());
    j["r_hat"] = ctx.r_hat();
    j["lambda_n"] = {ctx.lambda_n().real(), ctx.lambda_n().imag()};

    auto er = dyn::qn_expansion_residual(ctx, cplx(o->probe, 0.0));
    j["expansion_probe"] = o->probe;
    j["expansion_defined"] = er.defined;
    j["expansion_residual"] = er.value;

    bool pass = er.defined && er.value < 1.0;
    if (mode == dyn::ChiMode::exact) {
      cplx cp = dyn::chi_prime0(ctx);
      j["chi_prime0"] = {cp.real(), cp.imag()};
      j["chi_prime0_abs"] = std::abs(cp);
      j["radius_gap"] = std::abs(std::abs(cp) - ctx.r_hat());

      std::vector<cplx> samples;
      for (double frac : {0.15, 0.3})
        for (int k = 0; k < 8; ++k)
          samples.push_back(frac * ctx.r_hat() * std::polar(1.0, TWO_PI * (k + 0.21) / 8.0));
      samples.push_back({0.0, 0.0});
      auto cmp = dyn::compare_explosion_to_linearizer(ctx, samples);
      j["compare"] = {{"attempted", cmp.attempted},
                      {"converged", cmp.converged},
                      {"sup_diff", cmp.sup_diff}};
      pass = pass && cmp.converged == cmp.attempted && cmp.sup_diff < 0.5;
      pass = pass && std::abs(cp) > 0.1 * ctx.r_hat() && std::abs(cp) < 3.0 * ctx.r_hat();
    }
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance, "fn-check: structure checks failed, see fn_check.json gates");
    json echo = o->s.echo();
    echo["mode"] = o->mode;
    echo["probe"] = o->probe;
    echo["out"] = o->out;
    echo["check"] = o->check;
    Artifacts a(o->out);
    a.add("fn_check.json", j.dump(2) + "\n");
    a.add("manifest.json", manifest_bytes("fn-check", echo, 0, t.seconds()));
    a.flush();
  });
}

void add_geometry_check(CLI::App& app) {
  struct Opts {
    SetupArgs s;
    std::string ladder, out = "out";
    long cov_samples = 10000, lift_samples = 200;
    std::uint64_t seed = 1;
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("geometry-check", "rung geometry, arc coverage, covering lifts");
  o->s.wire(sub);
  sub->add_option("--ladder", o->ladder, "13 comma-separated rungs (default: family defaults)");
  sub->add_option("--cov-samples", o->cov_samples, "arc coverage sample count");
  sub->add_option("--lift-samples", o->lift_samples, "annulus samples lifted to the strip");
  sub->add_option("--seed", o->seed, "sampling seed");
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail on coverage or lift-residual violations");
  sub->callback([o] {
    Timer t;
    auto s = o->s.build();
    double q = s.qn_d();
    double floor = std::pow(std::abs(s.eps_d()), 1.0 / q);
    geo::Ladder L = o->ladder.empty() ? geo::Ladder::defaults(floor) : parse_ladder(o->ladder);
    geo::RegionParams P(s, L);

    double tmid = 0.5 * (L.r7 + L.r8);
    auto cov = geo::arc_coverage(P, tmid, 0.0, TWO_PI, o->cov_samples);
    auto env = geo::branch_power_envelope(P, L.r7, 400, o->seed);

    auto ss = geo::region_sampler(P, geo::RegionId::Annulus(L.r7, L.r8), o->lift_samples, o->seed);
    io::Csv pts;
    pts.header = {"re", "im", "in_region"};
    long in_yn = 0, lift_failures = 0;
    double worst_residual = 0;
    for (cplx z : ss.points) {
      bool inside = geo::contains(P, geo::RegionId::Yn(L.r8, L.r7), z).inside;
      pts.rows.push_back({io::fmt_g17(z.real()), io::fmt_g17(z.imag()), inside ? "1" : "0"});
      if (!inside) continue;
      ++in_yn;
      try {
        auto lift = geo::lift_to_H(P, z);
        worst_residual = std::max(worst_residual, lift.root_residual);
      } catch (const error&) {
        ++lift_failures;
      }
    }

    double gate = M_PI * tmid - 3.0 * cov.std_error;
    json j;
    j["ladder"] = ladder_json(L);
    j["floor_radius"] = floor;
    j["heights"] = {{"h_r4", P.height(L.r4)},
                    {"a_n", P.a_n()},
                    {"s_n", P.s_n()},
                    {"tau_r1", P.tau(L.r1)},
                    {"period_X", P.period()}};
    j["coverage"] = {{"t", tmid},
                     {"length", cov.length},
                     {"std_error", cov.std_error},
                     {"fraction", cov.fraction},
                     {"samples", cov.samples},
                     {"gate", gate}};
    j["envelope"] = {{"max_ratio", env.max_ratio}, {"samples", env.samples}};
    j["lift"] = {{"attempted", in_yn},
                 {"failures", lift_failures},
                 {"worst_residual", worst_residual},
                 {"tolerance", geo::kLiftTolerance}};
    bool pass = cov.length >= gate && lift_failures == 0 && worst_residual < geo::kLiftTolerance &&
                in_yn > 0;
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance,
                  "geometry-check: coverage " + io::fmt_g17(cov.length) + " vs gate " +
                      io::fmt_g17(gate) + ", lift failures " + std::to_string(lift_failures) +
                      ", worst residual " + io::fmt_g17(worst_residual));
    json echo = o->s.echo();
    echo["ladder"] = o->ladder.empty() ? "defaults" : o->ladder;
    echo["cov_samples"] = o->cov_samples;
    echo["lift_samples"] = o->lift_samples;
    echo["seed"] = o->seed;
    echo["out"] = o->out;
    echo["check"] = o->check;
    Artifacts a(o->out);
    a.add("samples.csv", pts.to_string());
    a.add("geometry_check.json", j.dump(2) + "\n");
    a.add("manifest.json", manifest_bytes("geometry-check", echo, o->seed, t.seconds()));
    a.flush();
  });
}

void add_fatou_check(CLI::App& app) {
  struct Opts {
    SetupArgs s;
    std::string out = "out";
    long per_line = 8;
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("fatou-check", "translation coordinate and renormalized return");
  o->s.wire(sub);
  sub->add_option("--per-line", o->per_line, "samples per band line");
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail when any residual misses its tolerance");
  sub->callback([o] {
    Timer t;
    auto s = o->s.build();
    if (o->per_line < 2 || o->per_line > 1000)
      throw input_error("fatou-check: per-line out of range [2, 1000]");
    geo::Ladder L = band_ladder(s);
    fatou::PhiOptions opt = band_options(s);
    fatou::LiftContext lc(s, L);
    fatou::FatouCoordinate phi(lc, opt);
    const fatou::FitReport& R = phi.report();

    double span = 0.9 * s.qn_d() * lc.period();
    double heights[3] = {R.band_lo * 1.05, R.band_lo * 2.0,
                         std::max(R.band_lo * 4.0, 0.6 * opt.band_top)};
    std::vector<double> conj, fdev, gdev, abel, comm;
    for (double y : heights)
      for (long i = 0; i < o->per_line; ++i) {
        double x = -span / 2 + span * (static_cast<double>(i) + 0.5) / o->per_line + 0.07 * y;
        cplx Z(x, y);
        auto F = lc.lift_Fn(Z);
        conj.push_back(F.conj_residual);
        fdev.push_back(std::abs(F.W - Z - 1.0));
        auto G = lc.lift_Gn(Z);
        gdev.push_back(std::abs(G.W - Z + lc.g_translation()));
        abel.push_back(phi.at(Z, true).abel_residual);
        if (y == heights[0] && i % 2 == 0)
          comm.push_back(std::abs(lc.lift_Fn(G.W).W - lc.lift_Gn(F.W).W));
      }
    auto worst = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    };

    fatou::RenormContext rc(phi);
    auto rot = rc.rotation_check(rc.rho() / 20.0);
    cplx expect = std::polar(1.0, -TWO_PI * lc.theta());
    double rot_diff = std::abs(rot.estimate - expect);

    json j;
    j["q"] = lc.q();
    j["q_prev"] = lc.q_prev();
    j["eps"] = io::fmt_g17(lc.eps());
    j["period_X"] = lc.period();
    j["g_translation"] = lc.g_translation();
    j["ladder"] = ladder_json(L);
    j["fit"] = {{"stages", R.stages},     {"samples", R.samples},
                {"modes", R.modes},       {"masked", R.masked},
                {"defect_rms", R.defect_rms}, {"defect_max", R.defect_max},
                {"band_lo", R.band_lo},   {"band_hi", R.band_hi},
                {"scheme", phi.scheme()}};
    j["samples"] = {{"span", span},
                    {"heights", {heights[0], heights[1], heights[2]}},
                    {"per_line", o->per_line}};
    j["conj_residuals"] = conj;
    j["f_deviations"] = fdev;
    j["g_deviations"] = gdev;
    j["abel_residuals"] = abel;
    j["commutation_residuals"] = comm;
    j["rho"] = rc.rho();
    j["derivative"] = {{"estimate", {rot.estimate.real(), rot.estimate.imag()}},
                       {"expected", {expect.real(), expect.imag()}},
                       {"difference", rot_diff},
                       {"spread", rot.spread},
                       {"unstable", rot.unstable}};
    json gates;
    gates["conj"] = {{"worst", worst(conj)}, {"tol", 1e-8}, {"pass", worst(conj) < 1e-8}};
    gates["f_dev"] = {{"worst", worst(fdev)}, {"tol", 0.25}, {"pass", worst(fdev) < 0.25}};
    gates["g_dev"] = {{"worst", worst(gdev)}, {"tol", 0.25}, {"pass", worst(gdev) < 0.25}};
    gates["abel"] = {{"worst", worst(abel)}, {"tol", 1e-5}, {"pass", worst(abel) < 1e-5}};
    gates["commutation"] = {{"worst", worst(comm)}, {"tol", 1e-6}, {"pass", worst(comm) < 1e-6}};
    gates["fit_rms"] = {{"worst", R.defect_rms}, {"tol", 1e-5}, {"pass", R.defect_rms < 1e-5}};
    gates["rotation"] = {{"worst", rot_diff},
                         {"tol", 1e-2},
                         {"pass", !rot.unstable && rot_diff < 1e-2}};
    bool pass = true;
    std::string failed;
    for (auto& [name, g] : gates.items()) {
      if (g["pass"].get<bool>()) continue;
      pass = false;
      failed += failed.empty() ? name : ", " + name;
    }
    j["gates"] = gates;
    j["pass"] = pass;
    if (o->check && !pass)
      throw error(errc::acceptance, "fatou-check: failed gates: " + failed);
    json echo = o->s.echo();
    echo["per_line"] = o->per_line;
    echo["out"] = o->out;
    echo["check"] = o->check;
    Artifacts a(o->out);
    a.add("fatou_check.json", j.dump(2) + "\n");
    a.add("manifest.json", manifest_bytes("fatou-check", echo, 0, t.seconds()));
    a.flush();
  });
}

density::AnRule parse_rule(const std::string& s) {
  auto parts = split(s, ' ');
  if (parts.size() == 1) parts = split(s, ':');
  if (parts.size() != 2) throw input_error("rule: expected 'ceil <base>' or 'fixed <value>'");
  if (parts[0] == "ceil") {
    long b = to_long(parts[1], "rule");
    if (b < 2) throw input_error("rule: ceil base must be >= 2");
    return density::AnRule::ceil_pow(static_cast<unsigned long>(b));
  }
  if (parts[0] == "fixed") return density::AnRule::fixed(to_mpz(parts[1], "rule"));
  throw input_error("rule: expected 'ceil <base>' or 'fixed <value>'");
}

void add_density(CLI::App& app) {
  struct Opts {
    std::string config_path, out = "out";
    bool check = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("density", "area-density experiment over a stage family");
  sub->add_option("--config", o->config_path, "experiment config file")->required();
  sub->add_option("--out", o->out, "output directory");
  sub->add_flag("--check", o->check, "fail unless the density rows clear their floor");
  sub->callback([o] {
    Timer t;
    std::string text = io::read_file(o->config_path);
    io::Config c = io::parse_config(text);
    c.require_known({"alpha", "theta", "n_lo", "n_hi", "rule", "samples", "seed", "u_kind",
                     "lin_frac", "orbit", "orbit_samples", "orbit_budget", "mask_res",
                     "mask_halfwidth", "mask_budget", "linearizer_M", "prec", "slack", "threads",
                     "ladder", "emit_mask"});
    density::ExperimentConfig cfg;
    cfg.alpha = parse_rotation(c.get_str("alpha", "golden"));
    cfg.theta = parse_rotation(c.get_str("theta", "golden"));
    cfg.n_lo = static_cast<int>(c.get_long("n_lo", 4));
    cfg.n_hi = static_cast<int>(c.get_long("n_hi", 6));
    cfg.rule = parse_rule(c.get_str("rule", "ceil 2"));
    cfg.mc_samples = c.get_long("samples", 100000);
    cfg.seed = c.get_u64("seed", 1);
    std::string uk = c.get_str("u_kind", "annulus");
    if (uk == "annulus")
      cfg.u_kind = density::ExperimentConfig::UKind::annulus;
    else if (uk == "lin-disk")
      cfg.u_kind = density::ExperimentConfig::UKind::lin_disk;
    else
      throw input_error("density: u_kind must be annulus or lin-disk");
    cfg.lin_frac = c.get_double("lin_frac", 0.5);
    cfg.orbit_column = c.get_bool("orbit", false);
    cfg.orbit_samples = c.get_long("orbit_samples", 2000);
    cfg.orbit_budget = c.get_long("orbit_budget", 0);
    cfg.mask_resolution = static_cast<int>(c.get_long("mask_res", 512));
    cfg.mask_halfwidth = c.get_double("mask_halfwidth", 0.8);
    cfg.mask_budget = c.get_long("mask_budget", 10000);
    cfg.linearizer_M = static_cast<std::size_t>(c.get_long("linearizer_M", 200));
    cfg.precision_bits = prec_of(c.get_long("prec", 128));
    cfg.slack = c.get_double("slack", 0.05);
    long th = c.get_long("threads", 0);
    cfg.threads =
        th > 0 ? static_cast<int>(th)
               : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string lad = c.get_str("ladder", "defaults");
    if (lad != "defaults") cfg.ladder = parse_ladder(lad);
    bool emit_mask = c.get_bool("emit_mask", false);

    auto res = density::density_experiment(cfg);

    json verdict;
    std::string fail;
    double prev = -1.0;
    const density::ExperimentRow* last_yn = nullptr;
    for (const auto& row : res.rows) {
      if (!row.dens_Yn) continue;
      if (*row.dens_Yn < prev)
        fail = "dens_Yn decreases at n = " + std::to_string(row.n);
      prev = *row.dens_Yn;
      last_yn = &row;
    }
    if (last_yn) {
      double gate = 0.5 - cfg.slack - 3.0 * last_yn->stderr_Yn.value_or(0.0);
      verdict["yn_gate"] = gate;
      verdict["yn_last"] = *last_yn->dens_Yn;
      if (*last_yn->dens_Yn < gate && fail.empty())
        fail = "dens_Yn " + io::fmt_g17(*last_yn->dens_Yn) + " at n = " +
               std::to_string(last_yn->n) + " misses the gate " + io::fmt_g17(gate);
    }
    for (const auto& row : res.rows) {
      if (!row.dens_Dn) continue;
      verdict["dn_gate"] = 0.9;
      if (*row.dens_Dn < 0.9 && fail.empty())
        fail = "dens_Dn " + io::fmt_g17(*row.dens_Dn) + " at n = " + std::to_string(row.n) +
               " misses the gate 0.9";
    }
    verdict["pass"] = fail.empty();
    if (!fail.empty()) verdict["failure"] = fail;
    if (o->check && !fail.empty()) throw error(errc::acceptance, "density check failed: " + fail);

    json j;
    j["family_floor"] = res.family_floor;
    j["r_hat"] = res.r_hat;
    j["ladder"] = ladder_json(res.ladder);
    j["rows"] = res.rows.size();
    j["verdict"] = verdict;

    json echo;
    for (const auto& [k, v] : c.entries) echo[k] = v;
    json manifest_cfg;
    manifest_cfg["config_file"] = o->config_path;
    manifest_cfg["config_text"] = text;
    manifest_cfg["config"] = echo;
    manifest_cfg["out"] = o->out;
    manifest_cfg["check"] = o->check;

    Artifacts a(o->out);
    a.add("density.csv", io::experiment_csv(res).to_string());
    a.add("density.json", j.dump(2) + "\n");
    if (emit_mask) {
      Real av = cfrac::eval_real_auto(cfg.alpha, cfg.precision_bits).value;
      auto Pa = dyn::QuadraticMap::from_rotation(av);
      auto mask = density::siegel_mask(Pa, density::Trap::disk(2.0),
                                       density::Window::square(cfg.mask_halfwidth),
                                       cfg.mask_resolution, cfg.mask_resolution, cfg.mask_budget,
                                       cfg.threads);
      a.add("density_mask.ppm", io::mask_to_ppm(mask));
      a.add("density_mask.ppm.txt", io::mask_sidecar(mask));
    }
    a.add("manifest.json", manifest_bytes("density", manifest_cfg, cfg.seed, t.seconds()));
    a.flush();
  });
}

void add_render(CLI::App& app) {
  struct Opts {
    std::string mask, out = "out";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("render", "re-emit a mask raster with its window sidecar");
  sub->add_option("--mask", o->mask, "mask PPM path")->required();
  sub->add_option("--out", o->out, "output directory");
  sub->callback([o] {
    Timer t;
    auto mask = io::read_mask_ppm(o->mask);
    json j;
    j["nx"] = mask.nx();
    j["ny"] = mask.ny();
    j["inside_count"] = mask.inside_count();
    j["inside_area"] = mask.inside_area();
    j["window"] = {{"cx", mask.window().cx},
                   {"cy", mask.window().cy},
                   {"hx", mask.window().hx},
                   {"hy", mask.window().hy}};
    j["budget_T"] = mask.budget_T;
    j["decision"] = mask.decision;
    Artifacts a(o->out);
    a.add("render.ppm", io::mask_to_ppm(mask));
    a.add("render.ppm.txt", io::mask_sidecar(mask));
    a.add("render.json", j.dump(2) + "\n");
    a.add("manifest.json",
          manifest_bytes("render", {{"mask", o->mask}, {"out", o->out}}, 0, t.seconds()));
    a.flush();
  });
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"numerical laboratory for perturbed Siegel disks"};
  app.require_subcommand(1);
  add_approximants(app);
  add_setup(app);
  add_brjuno(app);
  add_alpha0(app);
  add_linearizer(app);
  add_cycle(app);
  add_fn_check(app);
  add_geometry_check(app);
  add_fatou_check(app);
  add_density(app);
  add_render(app);

  std::vector<const char*> argv;
  argv.push_back("siegel-lab");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace siegel::cli
