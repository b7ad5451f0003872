#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "siegel/cli.hpp"
#include "siegel/density.hpp"
#include "siegel/io.hpp"

using namespace siegel;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("siegel_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string dir(const std::string& name) const { return (path / name).string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) { return cli::run(args); }

json read_json(const std::string& path) { return json::parse(io::read_file(path)); }

std::vector<std::string> csv_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::string text = io::read_file(path);
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  return lines;
}

}  // namespace

TEST_CASE("approximants emits the convergent table") {
  TempDir td;
  std::string out = td.dir("approx");
  CHECK(run({"approximants", "--alpha", "golden", "--k", "10", "--out", out}) == 0);

  auto lines = csv_lines(out + "/approximants.csv");
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "k,a_k,p_k,q_k");
  CHECK(lines[1] == "1,1,1,1");
  CHECK(lines[5] == "5,1,5,8");
  CHECK(lines[10] == "10,1,55,89");

  json m = read_json(out + "/manifest.json");
  CHECK(m["subcommand"] == "approximants");
  CHECK(m["config"]["k"] == 10);
  CHECK(m["versions"].contains("siegel_lab"));
  CHECK(m["wall_seconds"].get<double>() >= 0.0);
}

TEST_CASE("setup reports the stage data and verifies the dual evaluation") {
  TempDir td;
  std::string out = td.dir("setup");
  CHECK(run({"setup", "--n", "4", "--An", "10", "--check", "--out", out}) == 0);

  json j = read_json(out + "/setup.json");
  CHECK(j["q_n"] == "5");
  CHECK(j["p_n"] == "3");
  CHECK(j["q_prev"] == "3");
  CHECK(j["A_n"] == "10");
  CHECK(j["mirrored"] == false);
  CHECK(std::stod(j["epsilon_n"].get<std::string>()) > 0.0);
  CHECK(j["pass"] == true);
  CHECK(j["dual_gap"].get<double>() < 1e-30);
}

TEST_CASE("malformed inputs exit with the input code") {
  TempDir td;
  CHECK(run({"setup", "--alpha", "bronze", "--out", td.dir("x1")}) == 1);
  CHECK(run({"setup", "--An", "10q", "--out", td.dir("x2")}) == 1);
  CHECK(run({"setup", "--n", "0", "--out", td.dir("x3")}) == 1);
  CHECK(run({"nonsense"}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"density", "--config", td.file("absent.cfg")}) == 1);
  CHECK(run({"render", "--mask", td.file("absent.ppm")}) == 1);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("resource blowups exit with the numerical code") {
  TempDir td;
  CHECK(run({"approximants", "--alpha", "alpha0:1:2,30", "--k", "31", "--out", td.dir("a0")}) ==
        2);
}

TEST_CASE("brjuno partial sums accumulate to the reported value") {
  TempDir td;
  std::string out = td.dir("brjuno");
  CHECK(run({"brjuno", "--alpha", "golden", "--K", "12", "--out", out}) == 0);

  auto lines = csv_lines(out + "/brjuno.csv");
  REQUIRE(lines.size() == 13);
  CHECK(lines[0] == "k,q_k,term,partial");

  json j = read_json(out + "/brjuno.json");
  double value = j["value"].get<double>();
  CHECK(value > 0.5);
  CHECK(value < 5.0);
  auto last = lines.back();
  double partial = std::stod(last.substr(last.rfind(',') + 1));
  CHECK(partial == doctest::Approx(value).epsilon(1e-12));
}

TEST_CASE("alpha0 tabulates quotient growth without materializing the giants") {
  TempDir td;
  std::string out = td.dir("alpha0");
  CHECK(run({"alpha0", "--N", "1", "--idx", "2,4", "--k", "4", "--out", out}) == 0);
  CHECK(io::read_file(out + "/alpha0.txt").find("expr") != std::string::npos);
  auto lines = csv_lines(out + "/alpha0.csv");
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "k,a_k_bits,q_k_bits");

  // the second spike's exponent is already astronomical; the guard holds
  CHECK(run({"alpha0", "--N", "1", "--idx", "2,4", "--k", "8", "--out", td.dir("a8")}) == 2);
}

TEST_CASE("linearizer emits the series and passes its conjugacy check") {
  TempDir td;
  std::string out = td.dir("lin");
  CHECK(run({"linearizer", "--alpha", "golden", "--M", "80", "--check", "--out", out}) == 0);

  auto lines = csv_lines(out + "/linearizer.csv");
  REQUIRE(lines.size() == 81);
  json j = read_json(out + "/linearizer.json");
  CHECK(j["radius_estimate"].get<double>() > 0.2);
  CHECK(j["radius_estimate"].get<double>() < 0.6);
  CHECK(j["conjugacy_residual"].get<double>() < 1e-10);
  CHECK(j["pass"] == true);
}

TEST_CASE("a failed check writes no artifacts") {
  TempDir td;
  std::string out = td.dir("lin_fail");
  CHECK(run({"linearizer", "--alpha", "golden", "--M", "80", "--tol", "1e-30", "--check",
             "--out", out}) == 3);
  CHECK(!fs::exists(fs::path(out) / "linearizer.csv"));
  CHECK(!fs::exists(fs::path(out) / "manifest.json"));
}

TEST_CASE("cycle derives the explosion parameter from a stage") {
  TempDir td;
  std::string out = td.dir("cycle");
  CHECK(run({"cycle", "--n", "5", "--An", "10", "--check", "--out", out}) == 0);

  auto lines = csv_lines(out + "/cycle.csv");
  REQUIRE(lines.size() == 9);
  json j = read_json(out + "/cycle.json");
  CHECK(j["q"] == 8);
  CHECK(j["p"] == 5);
  CHECK(j["max_residual"].get<double>() < 1e-10);
  CHECK(j["return_residual"].get<double>() < 1e-10);
  CHECK(j["pass"] == true);
}

TEST_CASE("cycle accepts a direct explosion parameter") {
  TempDir td;
  std::string out = td.dir("cycle2");
  CHECK(run({"cycle", "--p", "1", "--q", "2", "--delta-abs", "0.05", "--check", "--out", out}) ==
        0);
  json j = read_json(out + "/cycle.json");
  CHECK(j["q"] == 2);
  CHECK(j["return_residual"].get<double>() < 1e-11);
}

TEST_CASE("fn-check reports leading-order structure") {
  TempDir td;
  std::string out = td.dir("fn");
  CHECK(run({"fn-check", "--n", "5", "--An", "10", "--check", "--out", out}) == 0);

  json j = read_json(out + "/fn_check.json");
  CHECK(j["expansion_defined"] == true);
  CHECK(j["expansion_residual"].get<double>() < 0.5);
  CHECK(j["compare"]["converged"] == j["compare"]["attempted"]);
  CHECK(j["pass"] == true);
}

TEST_CASE("geometry-check measures coverage and lift residuals") {
  TempDir td;
  std::string out = td.dir("geo");
  CHECK(run({"geometry-check", "--n", "6", "--An", "8192", "--cov-samples", "4000",
             "--lift-samples", "100", "--check", "--out", out}) == 0);

  json j = read_json(out + "/geometry_check.json");
  CHECK(j["coverage"]["length"].get<double>() >= j["coverage"]["gate"].get<double>());
  CHECK(j["lift"]["failures"] == 0);
  CHECK(j["lift"]["worst_residual"].get<double>() < 1e-9);
  CHECK(j["pass"] == true);

  auto lines = csv_lines(out + "/samples.csv");
  REQUIRE(lines.size() == 101);
  CHECK(lines[0] == "re,im,in_region");
}

TEST_CASE("fatou-check passes its report gates on the mirrored stage") {
  TempDir td;
  std::string out = td.dir("fatou");
  CHECK(run({"fatou-check", "--n", "5", "--An", "10", "--check", "--out", out}) == 0);

  json j = read_json(out + "/fatou_check.json");
  CHECK(j["pass"] == true);
  CHECK(j["rho"].get<double>() > 1e-17);
  CHECK(j["rho"].get<double>() < 1e-12);
  CHECK(j["gates"]["rotation"]["pass"] == true);
  CHECK(j["gates"]["abel"]["pass"] == true);
  CHECK(j["conj_residuals"].size() == 24);
}

TEST_CASE("fatou-check handles the even unmirrored stage") {
  TempDir td;
  std::string out = td.dir("fatou_even");
  CHECK(run({"fatou-check", "--n", "4", "--An", "32", "--check", "--out", out}) == 0);
  json r = read_json(out + "/fatou_check.json");
  CHECK(r["pass"] == true);
  CHECK(r["rho"].get<double>() < 1e-30);
}

TEST_CASE("density run, manifest round-trip, thread independence") {
  TempDir td;
  std::string cfg =
      "alpha = golden\n"
      "theta = golden\n"
      "n_lo = 4\n"
      "n_hi = 5\n"
      "rule = ceil 2\n"
      "samples = 4000\n"
      "seed = 1\n"
      "slack = 0.08\n";
  io::write_file_atomic(td.file("exp.cfg"), cfg);

  std::string out1 = td.dir("d1");
  CHECK(run({"density", "--config", td.file("exp.cfg"), "--check", "--out", out1}) == 0);
  std::string bytes = io::read_file(out1 + "/density.csv");
  auto lines = csv_lines(out1 + "/density.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].rfind("n,q_n,A_n,epsilon_n,r7,r8,", 0) == 0);

  json summary = read_json(out1 + "/density.json");
  CHECK(summary["verdict"]["pass"] == true);
  CHECK(summary["family_floor"].get<double>() == doctest::Approx(0.297122).epsilon(2e-3));

  // round-trip: the manifest carries the config text verbatim
  json m = read_json(out1 + "/manifest.json");
  CHECK(m["config"]["config_text"] == cfg);
  io::write_file_atomic(td.file("echo.cfg"), m["config"]["config_text"].get<std::string>());
  std::string out2 = td.dir("d2");
  CHECK(run({"density", "--config", td.file("echo.cfg"), "--out", out2}) == 0);
  CHECK(io::read_file(out2 + "/density.csv") == bytes);

  // the sampling scheme is chunked, so the thread count cannot move a digit
  io::write_file_atomic(td.file("exp3.cfg"), cfg + "threads = 3\n");
  std::string out3 = td.dir("d3");
  CHECK(run({"density", "--config", td.file("exp3.cfg"), "--out", out3}) == 0);
  CHECK(io::read_file(out3 + "/density.csv") == bytes);
}

TEST_CASE("density check failure exits 3 and leaves nothing behind") {
  TempDir td;
  std::string cfg =
      "n_lo = 4\n"
      "n_hi = 4\n"
      "samples = 4000\n"
      "slack = 0.0\n";
  io::write_file_atomic(td.file("tight.cfg"), cfg);
  std::string out = td.dir("dfail");
  CHECK(run({"density", "--config", td.file("tight.cfg"), "--check", "--out", out}) == 3);
  CHECK(!fs::exists(fs::path(out) / "density.csv"));
  CHECK(!fs::exists(fs::path(out) / "manifest.json"));

  // without --check the same run succeeds and records the failed verdict
  std::string out2 = td.dir("dnocheck");
  CHECK(run({"density", "--config", td.file("tight.cfg"), "--out", out2}) == 0);
  json summary = read_json(out2 + "/density.json");
  CHECK(summary["verdict"]["pass"] == false);
}

TEST_CASE("density rejects unknown config keys") {
  TempDir td;
  io::write_file_atomic(td.file("bad.cfg"), "n_lo = 4\nn_high = 5\n");
  CHECK(run({"density", "--config", td.file("bad.cfg"), "--out", td.dir("dbad")}) == 1);
}

TEST_CASE("render re-emits a mask with equal white count") {
  TempDir td;
  auto disk = density::mask_from_predicate(density::Window::square(1.0), 24, 24,
                                           [](std::complex<double> z) { return std::abs(z) < 0.7; },
                                           "closed-form disk");
  io::write_mask_ppm(td.file("disk.ppm"), disk);

  std::string out = td.dir("render");
  CHECK(run({"render", "--mask", td.file("disk.ppm"), "--out", out}) == 0);
  CHECK(io::read_file(out + "/render.ppm") == io::mask_to_ppm(disk));
  json j = read_json(out + "/render.json");
  CHECK(j["inside_count"].get<long>() == disk.inside_count());

  // white pixel count in the emitted raster equals the mask's inside count
  std::string ppm = io::read_file(out + "/render.ppm");
  std::size_t raster = ppm.find("255\n") + 4;
  long white = 0;
  for (std::size_t i = raster; i + 2 < ppm.size(); i += 3)
    if (static_cast<unsigned char>(ppm[i]) == 0xFF) ++white;
  CHECK(white == disk.inside_count());
}

TEST_CASE("render edge rasters and malformed input") {
  TempDir td;
  auto none = density::mask_from_predicate(density::Window::square(1.0), 6, 6,
                                           [](std::complex<double>) { return false; }, "empty");
  auto all = density::mask_from_predicate(density::Window::square(1.0), 6, 6,
                                          [](std::complex<double>) { return true; }, "full");
  io::write_mask_ppm(td.file("none.ppm"), none);
  io::write_mask_ppm(td.file("all.ppm"), all);

  CHECK(run({"render", "--mask", td.file("none.ppm"), "--out", td.dir("r0")}) == 0);
  CHECK(run({"render", "--mask", td.file("all.ppm"), "--out", td.dir("r1")}) == 0);
  std::string black = io::read_file(td.dir("r0") + "/render.ppm");
  std::string white = io::read_file(td.dir("r1") + "/render.ppm");
  CHECK(black.find('\xFF') == std::string::npos);
  CHECK(white.substr(white.find("255\n") + 4).find('\0') == std::string::npos);

  io::write_file_atomic(td.file("junk.ppm"), "not a raster at all");
  CHECK(run({"render", "--mask", td.file("junk.ppm"), "--out", td.dir("r2")}) == 1);
}
