#include "macx/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

namespace macx {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message) {
  throw Error(ErrorKind::invalid_input, message);
}

json parse_document(const std::string& path) {
  const std::string text = read_text(path);
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) bad(path + " is not valid JSON");
  if (!j.is_object()) bad(path + " must contain a JSON object");
  return j;
}

int positive_int_field(const json& j, const char* name) {
  if (!j.contains(name)) bad(std::string(name) + " is missing");
  const json& f = j.at(name);
  if (!f.is_number_integer()) bad(std::string(name) + " must be an integer");
  const std::int64_t v = f.get<std::int64_t>();
  if (v < 1 || v > 1 << 20) bad(std::string(name) + " must be a positive integer");
  return static_cast<int>(v);
}

const json& array_field(const json& parent, const std::string& path_label,
                        std::size_t expected_size) {
  if (!parent.is_array() || parent.size() != expected_size)
    bad(path_label + " must be an array of length " + std::to_string(expected_size));
  return parent;
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) bad("cannot write " + path);
  out << text;
  if (!out) bad("cannot write " + path);
}

Mac load_channel(const std::string& path) {
  const json j = parse_document(path);
  const int nx = positive_int_field(j, "x_size");
  const int ny = positive_int_field(j, "y_size");
  const int nz = positive_int_field(j, "z_size");
  if (!j.contains("w")) bad("w is missing");

  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(nx) * ny * nz);
  const json& w = array_field(j.at("w"), "w", static_cast<std::size_t>(nx));
  for (int x = 0; x < nx; ++x) {
    const std::string px = "w[" + std::to_string(x) + "]";
    const json& wx = array_field(w.at(static_cast<std::size_t>(x)), px,
                                 static_cast<std::size_t>(ny));
    for (int y = 0; y < ny; ++y) {
      const std::string pxy = px + "[" + std::to_string(y) + "]";
      const json& wxy = array_field(wx.at(static_cast<std::size_t>(y)), pxy,
                                    static_cast<std::size_t>(nz));
      for (int z = 0; z < nz; ++z) {
        const json& cell = wxy.at(static_cast<std::size_t>(z));
        if (!cell.is_number())
          bad(pxy + "[" + std::to_string(z) + "] must be a number");
        flat.push_back(cell.get<double>());
      }
    }
  }
  return make_mac(nx, ny, nz, flat);
}

MultiUserCode load_code(const std::string& path, int nx, int ny) {
  const json j = parse_document(path);
  MultiUserCode code;
  code.n = positive_int_field(j, "n");
  code.nx = nx;
  code.ny = ny;

  const auto load_side = [&](const char* name) {
    if (!j.contains(name)) bad(std::string(name) + " is missing");
    const json& side = j.at(name);
    if (!side.is_array() || side.empty())
      bad(std::string(name) + " must be a nonempty array of codewords");
    std::vector<std::vector<int>> words;
    words.reserve(side.size());
    for (std::size_t i = 0; i < side.size(); ++i) {
      const std::string pi = std::string(name) + "[" + std::to_string(i) + "]";
      const json& word = array_field(side.at(i), pi, static_cast<std::size_t>(code.n));
      std::vector<int> symbols(static_cast<std::size_t>(code.n));
      for (int t = 0; t < code.n; ++t) {
        const json& cell = word.at(static_cast<std::size_t>(t));
        if (!cell.is_number_integer())
          bad(pi + "[" + std::to_string(t) + "] must be an integer");
        symbols[static_cast<std::size_t>(t)] = cell.get<int>();
      }
      words.push_back(std::move(symbols));
    }
    return words;
  };
  code.u = load_side("u");
  code.v = load_side("v");
  validate_code(code);
  return code;
}

const char* method_name(ExponentMethod m) {
  switch (m) {
    case ExponentMethod::haroutunian: return "haroutunian";
    case ExponentMethod::sphere_packing: return "sphere_packing";
    case ExponentMethod::grid_oracle: return "grid_oracle";
  }
  return "unknown";
}

bool parse_method(const std::string& name, ExponentMethod& out) {
  if (name == "haroutunian") out = ExponentMethod::haroutunian;
  else if (name == "sphere_packing") out = ExponentMethod::sphere_packing;
  else if (name == "grid_oracle") out = ExponentMethod::grid_oracle;
  else return false;
  return true;
}

std::string surface_csv(const std::vector<SurfacePoint>& points, ExponentMethod m) {
  std::string out = "r1,r2,value,method,converged\n";
  char buf[128];
  const char* name = method_name(m);
  for (const SurfacePoint& p : points) {
    const double value = p.infinite ? std::numeric_limits<double>::infinity() : p.value;
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%s,%s\n", p.r.r1, p.r.r2, value, name,
                  p.converged ? "true" : "false");
    out += buf;
  }
  return out;
}

double sig12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

}  // namespace macx
