#include "efex/topologies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <utility>

namespace efex {
namespace {

constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;
constexpr std::array<int, 4> kDr = {-1, 1, 0, 0};
constexpr std::array<int, 4> kDc = {0, 0, -1, 1};

void set_deterministic(GroundTruthGraph& g, int a, int z, int dest) {
  auto row = g.transition.row(a, z);
  std::fill(row.begin(), row.end(), 0.0);
  row[dest] = 1.0;
}

void set_boundary(GroundTruthGraph& g, int a, int z, bool on) {
  g.boundary[static_cast<std::size_t>(a) * g.n_nodes() + z] = on ? 1 : 0;
}

GroundTruthGraph blank_graph(int n_actions, int n_nodes) {
  GroundTruthGraph g;
  g.transition = TransitionTensor(n_actions, n_nodes, 0.0);
  g.emission.resize(n_nodes);
  std::iota(g.emission.begin(), g.emission.end(), 0);
  g.n_observations = n_nodes;
  g.boundary.assign(static_cast<std::size_t>(n_actions) * n_nodes, 0);
  return g;
}

// Keeps only the open cells reachable from the first open cell.
void keep_home_component(int rows, int cols, std::vector<std::uint8_t>& open) {
  const int total = rows * cols;
  const auto first = std::find(open.begin(), open.end(), std::uint8_t{1});
  if (first == open.end()) return;
  std::vector<std::uint8_t> seen(total, 0);
  std::queue<int> frontier;
  const int start = static_cast<int>(first - open.begin());
  seen[start] = 1;
  frontier.push(start);
  while (!frontier.empty()) {
    const int c = frontier.front();
    frontier.pop();
    for (int a = 0; a < 4; ++a) {
      const int r = c / cols + kDr[a], q = c % cols + kDc[a];
      if (r < 0 || r >= rows || q < 0 || q >= cols) continue;
      const int d = r * cols + q;
      if (open[d] && !seen[d]) {
        seen[d] = 1;
        frontier.push(d);
      }
    }
  }
  open = std::move(seen);
}

// Recursive backtracker over a rows x cols cell lattice. Returns, per cell,
// which of its 4 sides are open.
std::vector<std::array<bool, 4>> backtracker(int rows, int cols, Rng& rng) {
  std::vector<std::array<bool, 4>> passages(static_cast<std::size_t>(rows) * cols, {false, false, false, false});
  std::vector<std::uint8_t> visited(passages.size(), 0);
  std::vector<int> stack = {0};
  visited[0] = 1;
  while (!stack.empty()) {
    const int c = stack.back();
    const int r = c / cols, q = c % cols;
    std::array<int, 4> options{};
    int n_options = 0;
    for (int a = 0; a < 4; ++a) {
      const int nr = r + kDr[a], nq = q + kDc[a];
      if (nr < 0 || nr >= rows || nq < 0 || nq >= cols || visited[nr * cols + nq]) continue;
      options[n_options++] = a;
    }
    if (n_options == 0) {
      stack.pop_back();
      continue;
    }
    const int a = options[rng.index(n_options)];
    const int d = (r + kDr[a]) * cols + (q + kDc[a]);
    passages[c][a] = true;
    passages[d][a ^ 1] = true;  // up<->down, left<->right
    visited[d] = 1;
    stack.push_back(d);
  }
  return passages;
}

}  // namespace

std::optional<TopologyKind> parse_topology_kind(std::string_view name) {
  if (name == "chain") return TopologyKind::chain;
  if (name == "grid2d") return TopologyKind::grid2d;
  if (name == "grid3d") return TopologyKind::grid3d;
  if (name == "interconnected_grids" || name == "icg") return TopologyKind::interconnected_grids;
  if (name == "dense_maze") return TopologyKind::dense_maze;
  if (name == "sparse_maze") return TopologyKind::sparse_maze;
  return std::nullopt;
}

std::string topology_kind_name(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::chain: return "chain";
    case TopologyKind::grid2d: return "grid2d";
    case TopologyKind::grid3d: return "grid3d";
    case TopologyKind::interconnected_grids: return "interconnected_grids";
    case TopologyKind::dense_maze: return "dense_maze";
    case TopologyKind::sparse_maze: return "sparse_maze";
  }
  return "unknown";
}

GroundTruthGraph build_chain(int length, bool stochastic_trap, std::uint64_t seed) {
  if (length < 2) throw std::invalid_argument("chain length must be >= 2");
  GroundTruthGraph g = blank_graph(2, length);
  Rng rng(seed);
  for (int z = 0; z < length; ++z) {
    const int right = rng.uniform() < 0.5 ? 1 : 0;
    const int left = 1 - right;
    if (z + 1 < length) {
      set_deterministic(g, right, z, z + 1);
    } else {
      set_deterministic(g, right, z, z);
      set_boundary(g, right, z, true);
    }
    if (z > 0) {
      set_deterministic(g, left, z, z - 1);
    } else {
      set_deterministic(g, left, z, z);
      set_boundary(g, left, z, true);
    }
  }
  if (stochastic_trap) {
    for (int a = 0; a < 2; ++a) {
      auto row = g.transition.row(a, 0);
      std::fill(row.begin(), row.end(), 0.0);
      row[0] = 0.5;
      row[1] = 0.5;
      set_boundary(g, a, 0, false);
    }
  }
  g.home = 1;
  GridLayout layout{1, length, {}};
  layout.cell.resize(length);
  std::iota(layout.cell.begin(), layout.cell.end(), 0);
  g.layout = std::move(layout);
  return g;
}

GroundTruthGraph build_grid(std::span<const int> dims, std::uint64_t /*seed*/) {
  if (dims.size() != 2 && dims.size() != 3) throw std::invalid_argument("grid needs 2 or 3 dimensions");
  for (int d : dims) {
    if (d < 2) throw std::invalid_argument("grid dimensions must be >= 2");
  }
  const int k = static_cast<int>(dims.size());
  std::vector<int> stride(k, 1);
  for (int i = k - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
  const int n = stride[0] * dims[0];
  GroundTruthGraph g = blank_graph(2 * k, n);
  for (int z = 0; z < n; ++z) {
    for (int axis = 0; axis < k; ++axis) {
      const int coord = (z / stride[axis]) % dims[axis];
      for (int dir = 0; dir < 2; ++dir) {
        const int a = 2 * axis + dir;
        const int next = coord + (dir == 0 ? -1 : 1);
        if (next < 0 || next >= dims[axis]) {
          set_deterministic(g, a, z, z);
          set_boundary(g, a, z, true);
        } else {
          set_deterministic(g, a, z, z + (dir == 0 ? -stride[axis] : stride[axis]));
        }
      }
    }
  }
  g.home = 0;
  if (k == 2) {
    GridLayout layout{dims[0], dims[1], {}};
    layout.cell.resize(n);
    std::iota(layout.cell.begin(), layout.cell.end(), 0);
    g.layout = std::move(layout);
  }
  return g;
}

GroundTruthGraph build_interconnected_grids(int n_grids, int grid_side, int corridor_length, std::uint64_t seed) {
  if (n_grids < 2) throw std::invalid_argument("interconnected grids: need at least 2 grids");
  if (grid_side < 2) throw std::invalid_argument("interconnected grids: grid side must be >= 2");
  if (corridor_length < 1) throw std::invalid_argument("interconnected grids: corridor length must be >= 1");
  const int per_grid = grid_side * grid_side;
  // A ring of two grids needs only one corridor.
  const int n_corridors = n_grids == 2 ? 1 : n_grids;
  const int n = n_grids * per_grid + n_corridors * corridor_length;

  const std::array<int, 2> dims = {grid_side, grid_side};
  const GroundTruthGraph cell = build_grid(dims, seed);
  GroundTruthGraph g = blank_graph(4, n);
  for (int gi = 0; gi < n_grids; ++gi) {
    const int base = gi * per_grid;
    for (int a = 0; a < 4; ++a) {
      for (int z = 0; z < per_grid; ++z) {
        const auto row = cell.transition.row(a, z);
        const int dest = static_cast<int>(std::find(row.begin(), row.end(), 1.0) - row.begin());
        set_deterministic(g, a, base + z, base + dest);
        set_boundary(g, a, base + z, cell.is_boundary(a, z));
      }
    }
  }
  const int mid = grid_side / 2;
  const int first_corridor = n_grids * per_grid;
  for (int ci = 0; ci < n_corridors; ++ci) {
    const int exit_cell = ci * per_grid + mid * grid_side + (grid_side - 1);
    const int entry_cell = ((ci + 1) % n_grids) * per_grid + mid * grid_side;
    const int c0 = first_corridor + ci * corridor_length;
    for (int k = 0; k < corridor_length; ++k) {
      const int z = c0 + k;
      set_deterministic(g, kLeft, z, k == 0 ? exit_cell : z - 1);
      set_deterministic(g, kRight, z, k + 1 == corridor_length ? entry_cell : z + 1);
      for (int a : {kUp, kDown}) {
        set_deterministic(g, a, z, z);
        set_boundary(g, a, z, true);
      }
    }
    set_deterministic(g, kRight, exit_cell, c0);
    set_boundary(g, kRight, exit_cell, false);
    set_deterministic(g, kLeft, entry_cell, c0 + corridor_length - 1);
    set_boundary(g, kLeft, entry_cell, false);
  }
  g.home = 0;

  // Preview: grids side by side with corridors between them; the wrap-around
  // corridor is drawn on an extra row underneath.
  const int pitch = grid_side + corridor_length;
  GridLayout layout{grid_side + (n_corridors == n_grids ? 2 : 0), n_grids * pitch - corridor_length, {}};
  layout.cell.resize(n);
  for (int gi = 0; gi < n_grids; ++gi) {
    for (int z = 0; z < per_grid; ++z) {
      layout.cell[gi * per_grid + z] = (z / grid_side) * layout.cols + gi * pitch + z % grid_side;
    }
  }
  for (int ci = 0; ci < n_corridors; ++ci) {
    for (int k = 0; k < corridor_length; ++k) {
      const int z = first_corridor + ci * corridor_length + k;
      if (ci + 1 < n_grids) {
        layout.cell[z] = mid * layout.cols + ci * pitch + grid_side + k;
      } else {
        layout.cell[z] = (grid_side + 1) * layout.cols + k;
      }
    }
  }
  g.layout = std::move(layout);
  return g;
}

GroundTruthGraph graph_from_occupancy(int rows, int cols, const std::vector<std::uint8_t>& open) {
  if (rows < 1 || cols < 1 || open.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("occupancy grid has wrong size");
  }
  std::vector<int> node_of(open.size(), -1);
  GridLayout layout{rows, cols, {}};
  for (int c = 0; c < rows * cols; ++c) {
    if (open[c]) {
      node_of[c] = static_cast<int>(layout.cell.size());
      layout.cell.push_back(c);
    }
  }
  const int n = static_cast<int>(layout.cell.size());
  if (n == 0) throw std::invalid_argument("occupancy grid has no open cell");
  GroundTruthGraph g = blank_graph(4, n);
  for (int z = 0; z < n; ++z) {
    const int r = layout.cell[z] / cols, q = layout.cell[z] % cols;
    for (int a = 0; a < 4; ++a) {
      const int nr = r + kDr[a], nq = q + kDc[a];
      if (nr < 0 || nr >= rows || nq < 0 || nq >= cols) {
        set_deterministic(g, a, z, z);
        set_boundary(g, a, z, true);
      } else {
        const int d = node_of[nr * cols + nq];
        set_deterministic(g, a, z, d >= 0 ? d : z);
      }
    }
  }
  g.home = 0;
  g.layout = std::move(layout);
  return g;
}

GroundTruthGraph build_dense_maze(int side, std::uint64_t seed) {
  if (side < 6) throw std::invalid_argument("dense maze side must be >= 6");
  // Pitch 6: one wall row/column followed by a 5-wide corridor cell.
  constexpr int kPitch = 6;
  const int coarse = (side - 1 + kPitch - 1) / kPitch;
  const int full = 1 + coarse * kPitch;
  Rng rng(seed);
  const auto passages = backtracker(coarse, coarse, rng);
  std::vector<std::uint8_t> full_open(static_cast<std::size_t>(full) * full, 0);
  for (int i = 0; i < coarse; ++i) {
    for (int j = 0; j < coarse; ++j) {
      const int r0 = 1 + i * kPitch, c0 = 1 + j * kPitch;
      for (int r = r0; r < r0 + kPitch - 1; ++r) {
        for (int c = c0; c < c0 + kPitch - 1; ++c) full_open[r * full + c] = 1;
      }
      const auto& p = passages[i * coarse + j];
      if (p[kRight]) {
        for (int r = r0; r < r0 + kPitch - 1; ++r) full_open[r * full + c0 + kPitch - 1] = 1;
      }
      if (p[kDown]) {
        for (int c = c0; c < c0 + kPitch - 1; ++c) full_open[(r0 + kPitch - 1) * full + c] = 1;
      }
    }
  }
  std::vector<std::uint8_t> open(static_cast<std::size_t>(side) * side, 0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) open[r * side + c] = full_open[r * full + c];
  }
  keep_home_component(side, side, open);
  return graph_from_occupancy(side, side, open);
}

GroundTruthGraph build_sparse_maze(int side, std::uint64_t seed, double loop_fraction) {
  if (side < 5 || side % 2 == 0) throw std::invalid_argument("sparse maze side must be odd and >= 5");
  if (!(loop_fraction >= 0.0 && loop_fraction <= 1.0)) throw std::invalid_argument("loop_fraction outside [0,1]");
  // Cells sit at even coordinates and walls at odd ones, so the maze spans
  // the whole background with no outer wall.
  const int cells = (side + 1) / 2;
  Rng rng(seed);
  auto passages = backtracker(cells, cells, rng);
  if (loop_fraction > 0.0) {
    std::vector<std::pair<int, int>> closed;  // (cell, side) for right/down walls
    for (int c = 0; c < cells * cells; ++c) {
      if (c % cells + 1 < cells && !passages[c][kRight]) closed.emplace_back(c, kRight);
      if (c / cells + 1 < cells && !passages[c][kDown]) closed.emplace_back(c, kDown);
    }
    std::shuffle(closed.begin(), closed.end(), rng.engine());
    const auto n_open = static_cast<std::size_t>(std::llround(loop_fraction * static_cast<double>(closed.size())));
    for (std::size_t i = 0; i < n_open; ++i) {
      const auto [c, a] = closed[i];
      const int d = c + (a == kRight ? 1 : cells);
      passages[c][a] = true;
      passages[d][a ^ 1] = true;
    }
  }
  std::vector<std::uint8_t> open(static_cast<std::size_t>(side) * side, 0);
  for (int c = 0; c < cells * cells; ++c) {
    const int r = 2 * (c / cells), q = 2 * (c % cells);
    open[r * side + q] = 1;
    if (passages[c][kRight]) open[r * side + q + 1] = 1;
    if (passages[c][kDown]) open[(r + 1) * side + q] = 1;
  }
  return graph_from_occupancy(side, side, open);
}

GroundTruthGraph assign_aliasing(GroundTruthGraph graph, double unique_fraction, std::uint64_t seed) {
  const int n = graph.n_nodes();
  if (!(unique_fraction > 0.0 && unique_fraction <= 1.0)) throw std::invalid_argument("unique fraction outside (0,1]");
  const long n_obs = std::lround(unique_fraction * n);
  if (n_obs < 1 || n_obs > n) throw std::invalid_argument("unique fraction gives no valid symbol count");
  graph.n_observations = static_cast<int>(n_obs);
  if (n_obs == n) {
    std::iota(graph.emission.begin(), graph.emission.end(), 0);
    return graph;
  }
  Rng rng(seed);
  std::vector<int> labels(n);
  for (int z = 0; z < n; ++z) labels[z] = z < n_obs ? z : static_cast<int>(rng.index(static_cast<std::size_t>(n_obs)));
  std::shuffle(labels.begin(), labels.end(), rng.engine());
  graph.emission = std::move(labels);
  return graph;
}

GroundTruthGraph build_topology(const TopologySpec& spec) {
  const Rng root(spec.seed);
  const std::uint64_t build_seed = root.split(0).seed();
  const std::uint64_t alias_seed = root.split(1).seed();
  const auto need = [&](std::size_t k) {
    if (spec.size.size() != k) {
      throw std::invalid_argument(topology_kind_name(spec.kind) + ": expected " + std::to_string(k) + " size values");
    }
  };
  GroundTruthGraph g;
  switch (spec.kind) {
    case TopologyKind::chain:
      need(1);
      g = build_chain(spec.size[0], spec.stochastic_trap, build_seed);
      break;
    case TopologyKind::grid2d:
      need(2);
      g = build_grid(spec.size, build_seed);
      break;
    case TopologyKind::grid3d:
      need(3);
      g = build_grid(spec.size, build_seed);
      break;
    case TopologyKind::interconnected_grids:
      need(3);
      g = build_interconnected_grids(spec.size[0], spec.size[1], spec.size[2], build_seed);
      break;
    case TopologyKind::dense_maze:
      need(1);
      g = build_dense_maze(spec.size[0], build_seed);
      break;
    case TopologyKind::sparse_maze:
      need(1);
      g = build_sparse_maze(spec.size[0], build_seed, spec.loop_fraction);
      break;
  }
  return assign_aliasing(std::move(g), spec.unique_fraction, alias_seed);
}

std::string ascii_preview(const GroundTruthGraph& graph) {
  if (!graph.layout) throw std::invalid_argument("graph has no 2D layout");
  static constexpr std::string_view kSymbols = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  const GridLayout& layout = *graph.layout;
  std::string canvas(static_cast<std::size_t>(layout.rows) * layout.cols, '#');
  for (int z = 0; z < graph.n_nodes(); ++z) {
    canvas[layout.cell[z]] = z == graph.home ? '@' : kSymbols[graph.emission[z] % kSymbols.size()];
  }
  std::string out;
  out.reserve(canvas.size() + layout.rows);
  for (int r = 0; r < layout.rows; ++r) {
    out.append(canvas, static_cast<std::size_t>(r) * layout.cols, layout.cols);
    out.push_back('\n');
  }
  return out;
}

}  // namespace efex
