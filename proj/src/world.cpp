#include "intent/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "intent/errors.hpp"
#include "intent/rng.hpp"

namespace intent {

bool World::traversable_at(const Vec2& p) const {
  if (!in_bounds(p)) return false;
  const int ix = std::min(cell_x(p.x), cells_x - 1);
  const int iy = std::min(cell_y(p.y), cells_y - 1);
  return !blocked_cell(ix, iy);
}

double World::blocked_fraction() const {
  std::size_t n = 0;
  for (std::uint8_t b : blocked) n += (b != 0);
  return static_cast<double>(n) / static_cast<double>(blocked.size());
}

namespace {

constexpr double kMinStreetWidth = 1.6;  // clearance kept around centerlines, meters

struct GridLayout {
  std::vector<double> cx, cy;  // street centerlines
  double street_width = 0.0;
};

GridLayout make_layout(const WorldConfig& cfg) {
  GridLayout lay;
  const int kx = static_cast<int>(std::floor(cfg.extent_x / cfg.street_pitch));
  const int ky = static_cast<int>(std::floor(cfg.extent_y / cfg.street_pitch));
  if (kx < 2 || ky < 2) {
    throw data_error("world extent too small for street pitch (need >= 2 streets per axis)");
  }
  for (int i = 0; i < kx; ++i) lay.cx.push_back(cfg.street_pitch * (0.5 + i));
  for (int j = 0; j < ky; ++j) lay.cy.push_back(cfg.street_pitch * (0.5 + j));
  lay.street_width = cfg.street_pitch * (1.0 - std::sqrt(cfg.obstacle_density));
  return lay;
}

bool graph_connected(const StreetGraph& g) {
  if (g.nodes.empty()) return false;
  std::vector<char> seen(g.nodes.size(), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : g.adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        queue.push_back(v);
      }
    }
  }
  return visited == g.nodes.size();
}

void remove_edge(StreetGraph& g, int a, int b) {
  auto& na = g.adjacency[a];
  auto& nb = g.adjacency[b];
  na.erase(std::remove(na.begin(), na.end(), b), na.end());
  nb.erase(std::remove(nb.begin(), nb.end(), a), nb.end());
}

void add_edge(StreetGraph& g, int a, int b) {
  g.adjacency[a].insert(std::upper_bound(g.adjacency[a].begin(), g.adjacency[a].end(), b), b);
  g.adjacency[b].insert(std::upper_bound(g.adjacency[b].begin(), g.adjacency[b].end(), a), a);
}

void rebuild_mask(World& world) {
  world.blocked.assign(static_cast<std::size_t>(world.cells_x) * world.cells_y, 0);
  for (int iy = 0; iy < world.cells_y; ++iy) {
    for (int ix = 0; ix < world.cells_x; ++ix) {
      const Vec2 center = world.cell_center(ix, iy);
      for (const Rect& r : world.obstacles) {
        if (r.contains(center)) {
          world.blocked[static_cast<std::size_t>(iy) * world.cells_x + ix] = 1;
          break;
        }
      }
    }
  }
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

GeneratedWorld generate_world(std::uint64_t seed, const WorldConfig& cfg) {
  if (cfg.extent_x <= 0 || cfg.extent_y <= 0) throw std::invalid_argument("world extent must be positive");
  if (cfg.resolution <= 0) throw std::invalid_argument("world resolution must be positive");
  if (cfg.obstacle_density < 0.0 || cfg.obstacle_density >= 1.0) {
    throw std::invalid_argument("obstacle density must lie in [0, 1)");
  }

  GeneratedWorld out;
  World& world = out.world;
  world.extent_x = cfg.extent_x;
  world.extent_y = cfg.extent_y;
  world.resolution = cfg.resolution;
  world.seed = seed;
  world.cells_x = static_cast<int>(std::lround(cfg.extent_x / cfg.resolution));
  world.cells_y = static_cast<int>(std::lround(cfg.extent_y / cfg.resolution));

  const GridLayout lay = make_layout(cfg);
  const int kx = static_cast<int>(lay.cx.size());
  const int ky = static_cast<int>(lay.cy.size());

  StreetGraph& graph = out.graph;
  graph.nodes.reserve(static_cast<std::size_t>(kx) * ky);
  for (int j = 0; j < ky; ++j) {
    for (int i = 0; i < kx; ++i) graph.nodes.push_back({lay.cx[i], lay.cy[j]});
  }
  graph.adjacency.assign(graph.nodes.size(), {});
  const auto node_id = [kx](int i, int j) { return j * kx + i; };
  for (int j = 0; j < ky; ++j) {
    for (int i = 0; i < kx; ++i) {
      if (i + 1 < kx) add_edge(graph, node_id(i, j), node_id(i + 1, j));
      if (j + 1 < ky) add_edge(graph, node_id(i, j), node_id(i, j + 1));
    }
  }

  Rng rng(derive_seed(seed, 0x77));

  if (cfg.obstacle_density > 0.0) {
    const double half_w = lay.street_width / 2.0;
    // Strip boundaries between streets; strip 0 and strip k are the border
    // blocks pinned to the world edge.
    const auto strip_edges = [&](const std::vector<double>& c, double extent, int idx, double& lo,
                                 double& hi) {
      const int k = static_cast<int>(c.size());
      lo = (idx == 0) ? 0.0 : c[idx - 1] + half_w;
      hi = (idx == k) ? extent : c[idx] - half_w;
    };
    for (int sy = 0; sy <= ky; ++sy) {
      for (int sx = 0; sx <= kx; ++sx) {
        Rect r;
        strip_edges(lay.cx, cfg.extent_x, sx, r.x0, r.x1);
        strip_edges(lay.cy, cfg.extent_y, sy, r.y0, r.y1);
        // Jitter interior edges. An edge may never move closer to a street
        // centerline than the base street half-width or the minimum corridor,
        // whichever is smaller, so jitter cannot narrow an already-tight street.
        const double margin = std::min(kMinStreetWidth / 2.0, half_w);
        if (sx > 0) r.x0 = std::max(lay.cx[sx - 1] + margin, r.x0 + rng.uniform(-cfg.block_jitter, cfg.block_jitter));
        if (sx < kx) r.x1 = std::min(lay.cx[sx] - margin, r.x1 + rng.uniform(-cfg.block_jitter, cfg.block_jitter));
        if (sy > 0) r.y0 = std::max(lay.cy[sy - 1] + margin, r.y0 + rng.uniform(-cfg.block_jitter, cfg.block_jitter));
        if (sy < ky) r.y1 = std::min(lay.cy[sy] - margin, r.y1 + rng.uniform(-cfg.block_jitter, cfg.block_jitter));
        if (r.width() > 1e-9 && r.height() > 1e-9) world.obstacles.push_back(r);
      }
    }

    // Wall off a fraction of street segments, skipping removals that would
    // disconnect the junction graph.
    struct EdgeRef {
      int a, b;
      Rect wall;
    };
    std::vector<EdgeRef> candidates;
    for (int j = 0; j < ky; ++j) {
      for (int i = 0; i + 1 < kx; ++i) {
        candidates.push_back({node_id(i, j), node_id(i + 1, j),
                              Rect{lay.cx[i] + half_w, lay.cy[j] - half_w, lay.cx[i + 1] - half_w,
                                   lay.cy[j] + half_w}});
      }
    }
    for (int j = 0; j + 1 < ky; ++j) {
      for (int i = 0; i < kx; ++i) {
        candidates.push_back({node_id(i, j), node_id(i, j + 1),
                              Rect{lay.cx[i] - half_w, lay.cy[j] + half_w, lay.cx[i] + half_w,
                                   lay.cy[j + 1] - half_w}});
      }
    }
    for (const EdgeRef& e : candidates) {
      const double u = rng.uniform();
      if (u >= cfg.street_dropout) continue;
      remove_edge(graph, e.a, e.b);
      if (graph_connected(graph)) {
        world.obstacles.push_back(e.wall);
      } else {
        add_edge(graph, e.a, e.b);
      }
    }
  }

  rebuild_mask(world);

  const int regions = count_traversable_regions(world);
  if (regions != 1) {
    throw data_error("world generation produced " + std::to_string(regions) +
                     " traversable regions (need exactly 1 connected region)");
  }
  return out;
}

int count_traversable_regions(const World& world) {
  std::vector<char> seen(world.blocked.size(), 0);
  int regions = 0;
  const auto idx = [&](int ix, int iy) { return static_cast<std::size_t>(iy) * world.cells_x + ix; };
  for (int iy = 0; iy < world.cells_y; ++iy) {
    for (int ix = 0; ix < world.cells_x; ++ix) {
      if (seen[idx(ix, iy)] || world.blocked_cell(ix, iy)) continue;
      ++regions;
      std::deque<std::pair<int, int>> queue{{ix, iy}};
      seen[idx(ix, iy)] = 1;
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        const int nbr[4][2] = {{cx + 1, cy}, {cx - 1, cy}, {cx, cy + 1}, {cx, cy - 1}};
        for (const auto& n : nbr) {
          const int nx = n[0], ny = n[1];
          if (nx < 0 || ny < 0 || nx >= world.cells_x || ny >= world.cells_y) continue;
          if (seen[idx(nx, ny)] || world.blocked_cell(nx, ny)) continue;
          seen[idx(nx, ny)] = 1;
          queue.push_back({nx, ny});
        }
      }
    }
  }
  return regions;
}

void save_world_grid(const World& world, const std::string& path) {
  std::ostringstream out;
  out << "extent " << fmt_g9(world.extent_x) << ' ' << fmt_g9(world.extent_y) << '\n';
  out << "resolution " << fmt_g9(world.resolution) << '\n';
  out << "seed " << world.seed << '\n';
  out << "grid " << world.cells_x << ' ' << world.cells_y << '\n';
  for (int iy = 0; iy < world.cells_y; ++iy) {
    for (int ix = 0; ix < world.cells_x; ++ix) out << (world.blocked_cell(ix, iy) ? '#' : '.');
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write world grid: " + path);
  const std::string s = out.str();
  file.write(s.data(), static_cast<std::streamsize>(s.size()));
}

World load_world_grid(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw data_error("cannot open world grid: " + path);
  World world;
  std::string key;
  if (!(file >> key) || key != "extent" || !(file >> world.extent_x >> world.extent_y)) {
    throw data_error("world grid: bad extent header in " + path);
  }
  if (!(file >> key) || key != "resolution" || !(file >> world.resolution)) {
    throw data_error("world grid: bad resolution header in " + path);
  }
  if (!(file >> key) || key != "seed" || !(file >> world.seed)) {
    throw data_error("world grid: bad seed header in " + path);
  }
  if (!(file >> key) || key != "grid" || !(file >> world.cells_x >> world.cells_y)) {
    throw data_error("world grid: bad grid header in " + path);
  }
  world.blocked.assign(static_cast<std::size_t>(world.cells_x) * world.cells_y, 0);
  std::string row;
  for (int iy = 0; iy < world.cells_y; ++iy) {
    if (!(file >> row) || static_cast<int>(row.size()) != world.cells_x) {
      throw data_error("world grid: bad row " + std::to_string(iy) + " in " + path);
    }
    for (int ix = 0; ix < world.cells_x; ++ix) {
      if (row[ix] != '#' && row[ix] != '.') {
        throw data_error("world grid: unexpected character in " + path);
      }
      world.blocked[static_cast<std::size_t>(iy) * world.cells_x + ix] = (row[ix] == '#') ? 1 : 0;
    }
  }
  return world;
}

}  // namespace intent
