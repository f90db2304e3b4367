#pragma once

#include <random>
#include <vector>

#include "coxmesh/model.hpp"

namespace toy {

using namespace coxmesh;

inline std::vector<Sighting> random_sightings(int n, const DomainPolygon& dom, std::uint64_t seed,
                                              std::vector<Species> species = {Species::Beluga, Species::Bowhead},
                                              int month = 8, int year = 2015) {
  std::mt19937_64 rng(seed);
  auto bb = bounding_box(dom.outer);
  std::uniform_real_distribution<double> ux(bb[0], bb[2]), uy(bb[1], bb[3]);
  std::uniform_int_distribution<int> beh(0, kBehaviorCount - 1), sz(1, 12), sp(0, static_cast<int>(species.size()) - 1);
  std::vector<Sighting> out;
  while (static_cast<int>(out.size()) < n) {
    PlanarPoint p{ux(rng), uy(rng)};
    if (!contains(dom, p)) continue;
    Sighting s;
    s.location = p;
    s.species = species[sp(rng)];
    s.month = month;
    s.year = year;
    s.behavior = static_cast<Behavior>(beh(rng));
    s.group_size = sz(rng);
    out.push_back(s);
  }
  return out;
}

// Grid whose value is a + b x + c y over the box, node spacing h.
inline CovariateGrid linear_grid(double x0, double y0, double x1, double y1, double h, double a, double b, double c,
                                 int month = 8, int year = 2015) {
  CovariateGrid g;
  g.x0 = x0;
  g.y0 = y0;
  g.dx = g.dy = h;
  g.nx = static_cast<int>(std::ceil((x1 - x0) / h)) + 1;
  g.ny = static_cast<int>(std::ceil((y1 - y0) / h)) + 1;
  g.month = month;
  g.year = year;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) g.values.push_back(a + b * (x0 + i * h) + c * (y0 + j * h));
  return g;
}

}  // namespace toy
