#include "siegel/io.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace siegel::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Csv::to_string() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw input_error("csv: row width does not match header");
    line(r);
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw input_error("cannot open for writing: " + tmp);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw input_error("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw input_error("cannot rename into place: " + path + ": " + std::strerror(errno));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

const std::string* Config::find(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::string Config::get_str(const std::string& key, std::optional<std::string> dflt) const {
  const std::string* v = find(key);
  if (v) return *v;
  if (dflt) return *dflt;
  throw input_error("config: missing key '" + key + "'");
}

long Config::get_long(const std::string& key, std::optional<long> dflt) const {
  const std::string* v = find(key);
  if (!v) {
    if (dflt) return *dflt;
    throw input_error("config: missing key '" + key + "'");
  }
  try {
    std::size_t pos = 0;
    long r = std::stol(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return r;
  } catch (const std::exception&) {
    throw input_error("config: key '" + key + "' is not an integer: " + *v);
  }
}

double Config::get_double(const std::string& key, std::optional<double> dflt) const {
  const std::string* v = find(key);
  if (!v) {
    if (dflt) return *dflt;
    throw input_error("config: missing key '" + key + "'");
  }
  try {
    std::size_t pos = 0;
    double r = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return r;
  } catch (const std::exception&) {
    throw input_error("config: key '" + key + "' is not a number: " + *v);
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::optional<std::uint64_t> dflt) const {
  const std::string* v = find(key);
  if (!v) {
    if (dflt) return *dflt;
    throw input_error("config: missing key '" + key + "'");
  }
  try {
    std::size_t pos = 0;
    unsigned long long r = std::stoull(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return r;
  } catch (const std::exception&) {
    throw input_error("config: key '" + key + "' is not an unsigned integer: " + *v);
  }
}

bool Config::get_bool(const std::string& key, std::optional<bool> dflt) const {
  const std::string* v = find(key);
  if (!v) {
    if (dflt) return *dflt;
    throw input_error("config: missing key '" + key + "'");
  }
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  throw input_error("config: key '" + key + "' is not a boolean: " + *v);
}

void Config::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : entries) {
    (void)v;
    bool ok = false;
    for (const auto& kn : known)
      if (k == kn) {
        ok = true;
        break;
      }
    if (!ok) throw input_error("config: unknown key '" + k + "'");
  }
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw input_error("config: line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw input_error("config: line " + std::to_string(lineno) + " has no key");
    if (cfg.has(key)) throw input_error("config: duplicate key '" + key + "'");
    cfg.entries.emplace_back(std::move(key), std::move(val));
  }
  return cfg;
}

Config load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string mask_to_ppm(const density::GridMask& mask) {
  if (mask.empty()) throw input_error("ppm: cannot write an unsized mask");
  std::string out = "P6\n" + std::to_string(mask.nx()) + " " + std::to_string(mask.ny()) +
                    "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(mask.nx()) * mask.ny() * 3);
  // raster rows top-down: row 0 of the file is the highest y
  for (int iy = mask.ny() - 1; iy >= 0; --iy)
    for (int ix = 0; ix < mask.nx(); ++ix) {
      char c = mask.at(ix, iy) ? static_cast<char>(0xFF) : 0;
      out.push_back(c);
      out.push_back(c);
      out.push_back(c);
    }
  return out;
}

std::string mask_sidecar(const density::GridMask& mask) {
  const density::Window& w = mask.window();
  std::string out;
  out += "cx = " + fmt_g17(w.cx) + "\n";
  out += "cy = " + fmt_g17(w.cy) + "\n";
  out += "hx = " + fmt_g17(w.hx) + "\n";
  out += "hy = " + fmt_g17(w.hy) + "\n";
  out += "nx = " + std::to_string(mask.nx()) + "\n";
  out += "ny = " + std::to_string(mask.ny()) + "\n";
  out += "budget_T = " + std::to_string(mask.budget_T) + "\n";
  out += "decision = " + mask.decision + "\n";
  return out;
}

void write_mask_ppm(const std::string& path, const density::GridMask& mask) {
  write_file_atomic(path, mask_to_ppm(mask));
  write_file_atomic(path + ".txt", mask_sidecar(mask));
}

density::GridMask read_mask_ppm(const std::string& path) {
  std::string data = read_file(path);
  std::istringstream ss(data);
  std::string magic;
  long nx = 0, ny = 0, maxval = 0;
  // header tokens may be separated by whitespace or comment lines
  auto next_token = [&ss]() {
    std::string tok;
    for (;;) {
      if (!(ss >> tok)) throw input_error("ppm: truncated header");
      if (tok[0] == '#') {
        std::string rest;
        std::getline(ss, rest);
        continue;
      }
      return tok;
    }
  };
  magic = next_token();
  if (magic != "P6") throw input_error("ppm: not a P6 file");
  try {
    nx = std::stol(next_token());
    ny = std::stol(next_token());
    maxval = std::stol(next_token());
  } catch (const std::exception&) {
    throw input_error("ppm: malformed header");
  }
  if (nx < 1 || ny < 1 || maxval < 1 || maxval > 255)
    throw input_error("ppm: unsupported geometry or depth");
  std::streampos pos = ss.tellg();
  if (pos < 0) throw input_error("ppm: truncated header");
  std::size_t start = static_cast<std::size_t>(pos) + 1;  // single whitespace after maxval
  std::size_t need = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * 3;
  if (data.size() < start + need) throw input_error("ppm: truncated raster");

  density::Window win = density::Window::square(1.0);
  long budget = 0;
  std::string decision;
  std::string side_text;
  bool have_side = true;
  try {
    side_text = read_file(path + ".txt");
  } catch (const error&) {
    have_side = false;
  }
  if (have_side) {
    Config side = parse_config(side_text);
    win.cx = side.get_double("cx", 0.0);
    win.cy = side.get_double("cy", 0.0);
    win.hx = side.get_double("hx", 1.0);
    win.hy = side.get_double("hy", 1.0);
    budget = side.get_long("budget_T", 0);
    decision = side.get_str("decision", "");
    long snx = side.get_long("nx", nx), sny = side.get_long("ny", ny);
    if (snx != nx || sny != ny) throw input_error("ppm: sidecar geometry mismatch");
  }

  density::GridMask mask(win, static_cast<int>(nx), static_cast<int>(ny));
  mask.budget_T = budget;
  mask.decision = decision.empty() ? "read from " + path : decision;
  for (long iy = 0; iy < ny; ++iy)
    for (long ix = 0; ix < nx; ++ix) {
      std::size_t off = start + (static_cast<std::size_t>(iy) * nx + ix) * 3;
      bool inside = data[off] != 0 || data[off + 1] != 0 || data[off + 2] != 0;
      // file rows are top-down
      mask.set(static_cast<int>(ix), static_cast<int>(ny - 1 - iy), inside);
    }
  return mask;
}

Csv experiment_csv(const density::ExperimentResult& res) {
  Csv csv;
  csv.header = {"n",       "q_n",       "A_n",     "epsilon_n", "r7",       "r8",     "dens_Yn",
                "stderr_Yn", "dens_Dn", "stderr_Dn", "budget_T", "samples", "seed"};
  auto opt = [](const std::optional<double>& v) { return v ? fmt_g17(*v) : std::string(); };
  for (const auto& row : res.rows) {
    csv.rows.push_back({std::to_string(row.n), row.q_n.get_str(), row.A_n.get_str(),
                        fmt_g17(row.epsilon_n), fmt_g17(row.r7), fmt_g17(row.r8), opt(row.dens_Yn),
                        opt(row.stderr_Yn), opt(row.dens_Dn), opt(row.stderr_Dn),
                        std::to_string(row.budget_T), std::to_string(row.samples),
                        std::to_string(row.seed)});
  }
  return csv;
}

}  // namespace siegel::io
