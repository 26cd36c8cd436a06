#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "efex/cscg.hpp"
#include "efex/env.hpp"

namespace efex {

struct EvalProtocol {
  int n_walks = 100;
  long walk_length = 10000;  // observations per walk
  std::uint64_t seed = 0;
};

// Uniform-random-action walks from uniformly random start nodes, without
// resets, under the environment's one-step law (slippage included).
std::vector<Trajectory> sample_walks(const GroundTruthGraph& graph, SlippageConfig slip, const EvalProtocol& protocol);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error across walks
};

// Per-walk log-likelihood divided by walk length, averaged over walks.
Estimate expected_log_likelihood(const LearnedModel& model, const CloneAllocation& allocation,
                                 std::span<const Trajectory> walks);

// Mean and standard error of ELL(model) - ELL(reference) over the same walks.
Estimate paired_log_likelihood_gap(const LearnedModel& model, const CloneAllocation& allocation,
                                   const LearnedModel& reference, const CloneAllocation& reference_allocation,
                                   std::span<const Trajectory> walks);

// (1/N) sum_i max_j #{n : decoded_n = i, truth_n = j}.
double precision(std::span<const int> decoded, std::span<const int> truth);

// Viterbi-decodes each walk and averages per-walk precision.
Estimate walk_precision(const LearnedModel& model, const CloneAllocation& allocation,
                        std::span<const Trajectory> walks);

struct VisitedTriple {
  int action = 0;
  int source = 0;
  int destination = 0;
};

double weighted_coverage(std::span<const VisitedTriple> visited, const EdgeSet& support);
double unweighted_coverage(std::span<const VisitedTriple> visited, const EdgeSet& support);

// Incremental first-visit bookkeeping for both coverage measures.
class CoverageTracker {
 public:
  explicit CoverageTracker(EdgeSet support);
  // Returns true on the first visit of a support edge.
  bool visit(int action, int source, int destination);
  double weighted() const;
  double unweighted() const;
  std::size_t visited_edges() const { return n_visited_; }
  const EdgeSet& support() const { return support_; }

 private:
  EdgeSet support_;
  std::vector<std::uint8_t> seen_;
  std::size_t n_visited_ = 0;
  double mass_ = 0.0;
};

// Ground truth expressed as a clone model: one clone per node, blocks ordered
// by observation. node_to_clone maps graph nodes to clone ids.
struct GroundTruthModel {
  LearnedModel model;
  CloneAllocation allocation;
  std::vector<int> node_to_clone;
};
GroundTruthModel gt_as_model(const GroundTruthGraph& graph, SlippageConfig slip);

struct SplitModel {
  LearnedModel model;
  CloneAllocation allocation;
  std::vector<int> old_to_new;  // clone id remapping
  int new_clone = 0;
};
// Duplicates `clone` inside its observation block: incoming mass goes
// `ratio` to the original and 1 - ratio to the copy; outgoing rows are shared.
SplitModel clone_split(const LearnedModel& model, const CloneAllocation& allocation, int clone, double ratio);

// Renames clones by a block-preserving permutation: new id = permutation[old].
LearnedModel relabel(const LearnedModel& model, const CloneAllocation& allocation, std::span<const int> permutation);

struct MetricRow {
  long step = 0;
  double ell = 0.0;
  double ell_se = 0.0;
  double wcov = 0.0;
  double prec = 0.0;
  double prec_se = 0.0;
  std::uint64_t seed = 0;
  std::string policy;
};

struct MetricTrace {
  std::vector<MetricRow> rows;
  // Throws unless steps strictly increase and coverage never decreases.
  void validate() const;
};

}  // namespace efex
