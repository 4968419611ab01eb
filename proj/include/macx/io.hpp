#pragma once

#include <string>
#include <vector>

#include "macx/codesim.hpp"
#include "macx/exponents.hpp"
#include "macx/mac.hpp"

namespace macx {

// Loads a channel from a UTF-8 JSON document with integer fields `x_size`,
// `y_size`, `z_size` and row-major nested transition arrays `w[x][y][z]`.
// Malformed documents raise invalid_input naming the offending field or
// index path (e.g. "w[1][0] must be an array of length 3"); row-sum and
// range violations propagate from channel construction.
Mac load_channel(const std::string& path);

// Loads a two-sender block code from a JSON document with fields `n`, `u`
// (array of M length-n integer arrays) and `v` (array of N such arrays),
// stamping the given input alphabet sizes. Symbol-range violations are
// rejected by the structural code validation.
MultiUserCode load_code(const std::string& path, int nx, int ny);

// Reads a whole file; raises invalid_input when it cannot be opened.
std::string read_text(const std::string& path);

// Writes text to a file, replacing any previous content.
void save_text(const std::string& path, const std::string& text);

// Method names as they appear in CSV rows and CLI flags.
const char* method_name(ExponentMethod m);

// Parses a method name; returns false on an unknown name.
bool parse_method(const std::string& name, ExponentMethod& out);

// Renders a rate sweep as CSV with header `r1,r2,value,method,converged`,
// one row per surface point in sweep order, floats at 9 significant digits
// (infinite exponents print as "inf").
std::string surface_csv(const std::vector<SurfacePoint>& points, ExponentMethod m);

// Rounds to 12 significant digits: the precision of all JSON report floats.
double sig12(double x);

}  // namespace macx
