#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "siegel/density.hpp"
#include "siegel/errors.hpp"
#include "siegel/io.hpp"

using namespace siegel;
using namespace siegel::io;
namespace fs = std::filesystem;

namespace {

bool code_is(const error& e, errc c) { return e.code() == c; }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("siegel_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

density::GridMask sample_mask() {
  density::GridMask m(density::Window{0.1, -0.2, 0.6, 0.5}, 7, 5);
  m.set(0, 0, true);
  m.set(3, 2, true);
  m.set(6, 4, true);
  m.set(1, 3, true);
  m.budget_T = 123;
  m.decision = "test pattern";
  return m;
}

}  // namespace

TEST_CASE("g17 formatting round-trips doubles exactly") {
  for (double v : {1.0 / 3.0, 0.1, -6.0740230303030815e-05, 1.0, 0.0, 1e-300, 3.9e17}) {
    std::string s = fmt_g17(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(fmt_g17(0.5) == "0.5");
}

TEST_CASE("csv assembly is strict about row width") {
  Csv c;
  c.header = {"a", "b", "c"};
  c.rows.push_back({"1", "x", "2.5"});
  c.rows.push_back({"2", "", "-1"});
  CHECK(c.to_string() == "a,b,c\n1,x,2.5\n2,,-1\n");

  c.rows.push_back({"only-one"});
  try {
    c.to_string();
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("atomic writes land whole and leave no droppings") {
  TempDir tmp;
  std::string p = tmp.file("out.csv");
  write_file_atomic(p, "x,y\n1,2\n");
  CHECK(read_file(p) == "x,y\n1,2\n");
  CHECK(!fs::exists(p + ".tmp"));

  write_file_atomic(p, "replaced");
  CHECK(read_file(p) == "replaced");

  try {
    write_file_atomic(tmp.file("no/such/dir/out.csv"), "data");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    read_file(tmp.file("missing.txt"));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("config text: trimming, comments, types, strictness") {
  Config c = parse_config(
      "# experiment\n"
      "alpha = golden\n"
      "samples= 1000  # trailing comment\n"
      "\n"
      "slack =0.05\n"
      "seed = 18446744073709551615\n"
      "orbit = true\n");
  CHECK(c.entries.size() == 5);
  CHECK(c.get_str("alpha") == "golden");
  CHECK(c.get_long("samples") == 1000);
  CHECK(c.get_double("slack") == 0.05);
  CHECK(c.get_u64("seed") == 18446744073709551615ull);
  CHECK(c.get_bool("orbit") == true);
  CHECK(c.get_long("missing", 7) == 7);
  CHECK(c.get_str("missing", "dflt") == "dflt");
  CHECK(c.has("alpha"));
  CHECK(!c.has("beta"));

  c.require_known({"alpha", "samples", "slack", "seed", "orbit"});
  try {
    c.require_known({"alpha", "samples"});
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
    CHECK(std::string(e.what()).find("slack") != std::string::npos);
  }

  try {
    c.get_long("alpha");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    c.get_double("missing");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    c.get_bool("slack");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    parse_config("a = 1\na = 2\n");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    parse_config("just a line\n");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    parse_config("= orphan value\n");
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("mask images: white inside, deterministic bytes, round trip") {
  density::GridMask m = sample_mask();
  std::string ppm = mask_to_ppm(m);
  CHECK(ppm.substr(0, 9) == "P6\n7 5\n25");
  CHECK(ppm.size() == 11 + 7 * 5 * 3);
  CHECK(ppm == mask_to_ppm(m));

  // top file row is the top of the window, so pixel (6,4) leads
  std::size_t raster = 11;
  CHECK(static_cast<unsigned char>(ppm[raster + 6 * 3]) == 0xFF);
  CHECK(static_cast<unsigned char>(ppm[raster + 0]) == 0x00);

  TempDir tmp;
  std::string p = tmp.file("mask.ppm");
  write_mask_ppm(p, m);
  CHECK(fs::exists(p));
  CHECK(fs::exists(p + ".txt"));

  density::GridMask r = read_mask_ppm(p);
  CHECK(r.nx() == m.nx());
  CHECK(r.ny() == m.ny());
  CHECK(r.window().cx == m.window().cx);
  CHECK(r.window().hy == m.window().hy);
  CHECK(r.budget_T == 123);
  CHECK(r.decision == "test pattern");
  for (int iy = 0; iy < m.ny(); ++iy)
    for (int ix = 0; ix < m.nx(); ++ix) CHECK(r.at(ix, iy) == m.at(ix, iy));

  // the raster still reads without its sidecar, with a default window
  fs::remove(p + ".txt");
  density::GridMask bare = read_mask_ppm(p);
  CHECK(bare.window().hx == 1.0);
  CHECK(bare.at(3, 2) == m.at(3, 2));
  CHECK(bare.inside_count() == m.inside_count());
}

TEST_CASE("mask images: malformed inputs are rejected") {
  TempDir tmp;
  auto write_raw = [&](const std::string& name, const std::string& bytes) {
    write_file_atomic(tmp.file(name), bytes);
    return tmp.file(name);
  };

  try {
    read_mask_ppm(write_raw("p5.ppm", "P5\n2 2\n255\nxxxx"));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    read_mask_ppm(write_raw("trunc.ppm", std::string("P6\n4 4\n255\n") + "abc"));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    read_mask_ppm(write_raw("header.ppm", "P6\nnot numbers\n"));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
  try {
    read_mask_ppm(tmp.file("absent.ppm"));
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }

  // sidecar contradicting the raster geometry
  density::GridMask m = sample_mask();
  std::string p = tmp.file("geom.ppm");
  write_mask_ppm(p, m);
  std::string side = read_file(p + ".txt");
  auto pos = side.find("nx = 7");
  REQUIRE(pos != std::string::npos);
  side.replace(pos, 6, "nx = 9");
  write_file_atomic(p + ".txt", side);
  try {
    read_mask_ppm(p);
    CHECK(false);
  } catch (const error& e) {
    CHECK(code_is(e, errc::input));
  }
}

TEST_CASE("experiment rows serialize to stable csv bytes") {
  density::ExperimentConfig cfg;
  cfg.mc_samples = 2000;
  density::ExperimentResult res = density::density_experiment(cfg);

  auto to_csv = [](const density::ExperimentResult& r) {
    Csv c;
    c.header = {"n", "q_n", "A_n", "epsilon_n", "r7", "r8", "dens_Yn", "stderr_Yn",
                "dens_Dn", "stderr_Dn", "budget_T", "samples", "seed"};
    for (const auto& row : r.rows) {
      std::vector<std::string> cells;
      cells.push_back(std::to_string(row.n));
      cells.push_back(row.q_n.get_str());
      cells.push_back(row.A_n.get_str());
      cells.push_back(fmt_g17(row.epsilon_n));
      cells.push_back(fmt_g17(row.r7));
      cells.push_back(fmt_g17(row.r8));
      cells.push_back(row.dens_Yn ? fmt_g17(*row.dens_Yn) : "");
      cells.push_back(row.stderr_Yn ? fmt_g17(*row.stderr_Yn) : "");
      cells.push_back(row.dens_Dn ? fmt_g17(*row.dens_Dn) : "");
      cells.push_back(row.stderr_Dn ? fmt_g17(*row.stderr_Dn) : "");
      cells.push_back(std::to_string(row.budget_T));
      cells.push_back(std::to_string(row.samples));
      cells.push_back(std::to_string(row.seed));
      c.rows.push_back(std::move(cells));
    }
    return c.to_string();
  };

  std::string bytes = to_csv(res);
  CHECK(experiment_csv(res).to_string() == bytes);
  CHECK(bytes.find("dens_Yn") != std::string::npos);
  CHECK(bytes.rfind('\n') == bytes.size() - 1);

  density::ExperimentResult res2 = density::density_experiment(cfg);
  CHECK(to_csv(res2) == bytes);
}
