#pragma once

// Internal numeric kernels shared by the region and exponent code paths.
// Everything here works on raw row-major arrays to keep the hot loops free
// of allocation; the public typed API lives in the macx headers.

#include <cmath>
#include <limits>

namespace macx::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = 0.6931471805599453094172321214581766;

inline double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

inline double entropy_bits(const double* p, int n) {
  double h = 0.0;
  for (int i = 0; i < n; ++i) h -= xlog2x(p[i]);
  return h;
}

inline double kl_bits(const double* p, const double* q, int n) {
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) return kInf;
      d += p[i] * std::log2(p[i] / q[i]);
    }
  }
  return d < 0.0 ? 0.0 : d;  // guard tiny negative roundoff
}

// I(X; Z) in bits for input a[x] and channel rows[x*nz+z].
// m must have room for nz doubles of scratch.
inline double mi_bits(const double* a, const double* rows, int nx, int nz, double* m) {
  for (int z = 0; z < nz; ++z) m[z] = 0.0;
  for (int x = 0; x < nx; ++x) {
    if (a[x] <= 0.0) continue;
    const double* r = rows + x * nz;
    for (int z = 0; z < nz; ++z) m[z] += a[x] * r[z];
  }
  double info = 0.0;
  for (int x = 0; x < nx; ++x) {
    if (a[x] <= 0.0) continue;
    const double* r = rows + x * nz;
    for (int z = 0; z < nz; ++z) {
      if (r[z] > 0.0) info += a[x] * r[z] * std::log2(r[z] / m[z]);
    }
  }
  return info < 0.0 ? 0.0 : info;
}

struct InfoTriple {
  double i1 = 0.0;   // I(X ; Z | ...)
  double i2 = 0.0;   // I(Y ; Z | ...)
  double i12 = 0.0;  // I(X,Y ; Z | ...)
};

// Information triple of a joint input pxy[x*ny+y] pushed through the channel
// v[(x*ny+y)*nz+z]: i1 = I(X;Z|Y), i2 = I(Y;Z|X), i12 = I(XY;Z).
// Scratch must hold nz doubles.
inline InfoTriple joint_info_triple(const double* pxy, const double* v, int nx, int ny,
                                    int nz, double* scratch) {
  InfoTriple t;
  // i12: treat (x, y) as one input symbol.
  t.i12 = mi_bits(pxy, v, nx * ny, nz, scratch);
  // i1: condition on y, input p(x|y), rows v(.|x,y) for that y.
  for (int y = 0; y < ny; ++y) {
    double py = 0.0;
    for (int x = 0; x < nx; ++x) py += pxy[x * ny + y];
    if (py <= 0.0) continue;
    for (int z = 0; z < nz; ++z) scratch[z] = 0.0;
    for (int x = 0; x < nx; ++x) {
      const double w = pxy[x * ny + y] / py;
      if (w <= 0.0) continue;
      const double* r = v + (x * ny + y) * nz;
      for (int z = 0; z < nz; ++z) scratch[z] += w * r[z];
    }
    double info = 0.0;
    for (int x = 0; x < nx; ++x) {
      const double w = pxy[x * ny + y] / py;
      if (w <= 0.0) continue;
      const double* r = v + (x * ny + y) * nz;
      for (int z = 0; z < nz; ++z) {
        if (r[z] > 0.0) info += w * r[z] * std::log2(r[z] / scratch[z]);
      }
    }
    if (info > 0.0) t.i1 += py * info;
  }
  // i2: condition on x.
  for (int x = 0; x < nx; ++x) {
    double px = 0.0;
    for (int y = 0; y < ny; ++y) px += pxy[x * ny + y];
    if (px <= 0.0) continue;
    for (int z = 0; z < nz; ++z) scratch[z] = 0.0;
    for (int y = 0; y < ny; ++y) {
      const double w = pxy[x * ny + y] / px;
      if (w <= 0.0) continue;
      const double* r = v + (x * ny + y) * nz;
      for (int z = 0; z < nz; ++z) scratch[z] += w * r[z];
    }
    double info = 0.0;
    for (int y = 0; y < ny; ++y) {
      const double w = pxy[x * ny + y] / px;
      if (w <= 0.0) continue;
      const double* r = v + (x * ny + y) * nz;
      for (int z = 0; z < nz; ++z) {
        if (r[z] > 0.0) info += w * r[z] * std::log2(r[z] / scratch[z]);
      }
    }
    if (info > 0.0) t.i2 += px * info;
  }
  return t;
}

// Information triple of one time-sharing component: product input a[x]*b[y]
// through v. i1 = I(X;Z|Y), i2 = I(Y;Z|X), i12 = I(XY;Z), all under a x b.
// Scratch must hold nx*ny + nz doubles.
inline InfoTriple component_info_triple(const double* a, const double* b, const double* v,
                                        int nx, int ny, int nz, double* scratch) {
  double* pxy = scratch;
  double* m = scratch + nx * ny;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) pxy[x * ny + y] = a[x] * b[y];
  return joint_info_triple(pxy, v, nx, ny, nz, m);
}

// D(V || W | p) in bits for joint weights pxy over rows.
inline double weighted_row_kl(const double* pxy, const double* v, const double* w,
                              int nrows, int nz) {
  double d = 0.0;
  for (int i = 0; i < nrows; ++i) {
    if (pxy[i] <= 0.0) continue;
    const double r = kl_bits(v + i * nz, w + i * nz, nz);
    if (r == kInf) return kInf;
    d += pxy[i] * r;
  }
  return d;
}

}  // namespace macx::detail
