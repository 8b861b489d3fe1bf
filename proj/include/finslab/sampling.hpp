#pragma once

#include <cstdint>
#include <vector>

namespace finslab::sampling {

/// Radical inverse of i in the given prime base (Halton coordinate).
double radical_inverse(std::uint64_t i, int base);

/// Unit directions in R^n from an angle parametrization.
/// n = 2: evenly spaced angles 2 pi k / count (offset by `phase` turns).
/// n >= 3: Halton points in the hyperspherical angle box, skipping the first `seed` indices.
std::vector<std::vector<double>> direction_grid(int n, int count, std::uint64_t seed = 0, double phase = 0.0);

/// Low-discrepancy unit directions; the first `count` of a longer request are
/// exactly the shorter request, so doubling a sample keeps the original points.
/// n = 2 uses the golden-ratio angle sequence.
std::vector<std::vector<double>> low_discrepancy_directions(int n, int count, std::uint64_t seed);

}  // namespace finslab::sampling
