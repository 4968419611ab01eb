#pragma once

// Internal search utilities: seeded randomness with a fixed bit mapping (so
// results are reproducible across standard libraries) and a deterministic
// pattern search over products of probability simplices.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace macx::detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() { return g_(); }
  double u01() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }

  // Uniform over the simplex (flat Dirichlet).
  void dirichlet(double* p, int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      p[i] = -std::log(1.0 - u01());
      s += p[i];
    }
    for (int i = 0; i < k; ++i) p[i] /= s;
  }

  int index(int k) { return static_cast<int>(next() % static_cast<std::uint64_t>(k)); }

 private:
  std::mt19937_64 g_;
};

// Coordinates partitioned into simplex blocks; each block keeps its sum
// constant under the moves below, so feasibility is preserved exactly.
struct SimplexBlocks {
  std::vector<double> x;
  std::vector<int> offsets;  // block i spans [offsets[i], offsets[i+1])

  int blocks() const { return static_cast<int>(offsets.size()) - 1; }
  int block_size(int i) const { return offsets[i + 1] - offsets[i]; }
  double* block(int i) { return x.data() + offsets[i]; }
  const double* block(int i) const { return x.data() + offsets[i]; }
};

// Maximizes f by moving mass h between coordinate pairs within blocks,
// re-applying accepted moves greedily and halving h once a sweep stalls.
// Deterministic given the starting point. Returns the best value seen;
// sb holds the corresponding point on return.
template <class F>
double pattern_search_max(SimplexBlocks& sb, F&& f, double h0, double h_min,
                          int max_evals) {
  double best = f(sb);
  int evals = 1;
  for (double h = h0; h >= h_min && evals < max_evals;) {
    bool improved = false;
    for (int bi = 0; bi < sb.blocks() && evals < max_evals; ++bi) {
      const int k = sb.block_size(bi);
      if (k < 2) continue;
      double* b = sb.block(bi);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          if (i == j) continue;
          // repeat an accepted move while it keeps paying off
          while (b[i] >= h && evals < max_evals) {
            b[i] -= h;
            b[j] += h;
            const double v = f(sb);
            ++evals;
            if (v > best + 1e-15) {
              best = v;
              improved = true;
            } else {
              b[i] += h;
              b[j] -= h;
              break;
            }
          }
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  return best;
}

}  // namespace macx::detail
