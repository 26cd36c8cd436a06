#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "efex/env.hpp"

namespace efex {

enum class TopologyKind { chain, grid2d, grid3d, interconnected_grids, dense_maze, sparse_maze };

std::optional<TopologyKind> parse_topology_kind(std::string_view name);
std::string topology_kind_name(TopologyKind kind);

struct TopologySpec {
  TopologyKind kind = TopologyKind::grid2d;
  // chain: {L}; grid2d: {rows, cols}; grid3d: {x, y, z};
  // interconnected_grids: {n_grids, side, corridor}; mazes: {side}.
  std::vector<int> size;
  double unique_fraction = 1.0;
  bool stochastic_trap = false;
  double loop_fraction = 0.0;  // sparse maze only
  std::uint64_t seed = 0;
};

// Chain actions: 0 and 1 ("L"/"R" before the per-node flip).
GroundTruthGraph build_chain(int length, bool stochastic_trap, std::uint64_t seed);

// Actions are (-axis0, +axis0, -axis1, +axis1, ...).
GroundTruthGraph build_grid(std::span<const int> dims, std::uint64_t seed);

GroundTruthGraph build_interconnected_grids(int n_grids, int grid_side, int corridor_length, std::uint64_t seed);

GroundTruthGraph build_dense_maze(int side, std::uint64_t seed);

GroundTruthGraph build_sparse_maze(int side, std::uint64_t seed, double loop_fraction = 0.0);

// Relabels emissions with round(uf * n_nodes) symbols, each used at least once.
GroundTruthGraph assign_aliasing(GroundTruthGraph graph, double unique_fraction, std::uint64_t seed);

// Generator plus aliasing, with the aliasing stream split from the spec seed.
GroundTruthGraph build_topology(const TopologySpec& spec);

// Occupancy preview for graphs with a 2D layout: '#' blocked, '@' home,
// otherwise a symbol per observation id.
std::string ascii_preview(const GroundTruthGraph& graph);

// 2D occupancy grid to graph: 4 actions (up, down, left, right). Moves off
// the grid are boundary self-loops; moves into a blocked cell are plain
// self-loops. Home is the first open cell in row-major order.
GroundTruthGraph graph_from_occupancy(int rows, int cols, const std::vector<std::uint8_t>& open);

}  // namespace efex
