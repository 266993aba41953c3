#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intent/geometry.hpp"

namespace intent {

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(const Vec2& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

struct WorldConfig {
  double extent_x = 40.0;  // meters
  double extent_y = 40.0;
  double resolution = 0.5;  // meters per grid cell
  double obstacle_density = 0.3;  // in [0, 1): target blocked-area fraction
  double street_pitch = 10.0;     // spacing of the street grid, meters
  double block_jitter = 0.4;      // max random shift of block edges, meters
  double street_dropout = 0.15;   // chance a street segment is walled off
};

// Synthetic driving world: a rectangular extent with axis-aligned building
// blocks separated by streets. The traversability mask marks a cell blocked
// exactly when its center lies inside an obstacle rectangle.
struct World {
  double extent_x = 0, extent_y = 0;
  double resolution = 0.5;
  std::uint64_t seed = 0;
  int cells_x = 0, cells_y = 0;
  std::vector<std::uint8_t> blocked;  // row-major [iy * cells_x + ix]
  std::vector<Rect> obstacles;

  bool blocked_cell(int ix, int iy) const { return blocked[static_cast<std::size_t>(iy) * cells_x + ix] != 0; }
  bool in_bounds(const Vec2& p) const {
    return p.x >= 0.0 && p.x < extent_x && p.y >= 0.0 && p.y < extent_y;
  }
  int cell_x(double x) const { return static_cast<int>(x / resolution); }
  int cell_y(double y) const { return static_cast<int>(y / resolution); }
  Vec2 cell_center(int ix, int iy) const {
    return {(ix + 0.5) * resolution, (iy + 0.5) * resolution};
  }
  // Inside the extent and on an unblocked cell.
  bool traversable_at(const Vec2& p) const;
  double blocked_fraction() const;
};

// Street centerline graph used by the scenario driver. Nodes are junction
// centers; edges are open street segments between adjacent junctions.
struct StreetGraph {
  std::vector<Vec2> nodes;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor indices
};

struct GeneratedWorld {
  World world;
  StreetGraph graph;
};

// Deterministic world synthesis from (seed, config). Throws data_error when
// the configuration yields no connected traversable region.
GeneratedWorld generate_world(std::uint64_t seed, const WorldConfig& cfg);

// Number of 4-connected traversable regions (0 when everything is blocked).
int count_traversable_regions(const World& world);

// Plain-text grid file: key-value header (extent, resolution, seed) followed
// by one row of '#'/'.' per grid row, row 0 = lowest y. The file round-trips
// byte-exactly through load + save.
void save_world_grid(const World& world, const std::string& path);
World load_world_grid(const std::string& path);

}  // namespace intent
