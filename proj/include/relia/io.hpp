#pragma once

#include "relia/imbalance.hpp"
#include "relia/sampler.hpp"
#include "relia/space.hpp"

#include <istream>
#include <ostream>
#include <string>

namespace relia {

/// Shortest text that parses back to exactly `v`.
std::string exact_number(double v);

/// Header: one column per dimension, then accuracy, label.
void write_labeled_csv(const LabeledSet& set, const SearchSpace& space, std::ostream& out);
/// Reads a file written by write_labeled_csv. The header must name the
/// space's dimensions in order, and every label must agree with `h`.
LabeledSet read_labeled_csv(std::istream& in, const SearchSpace& space, double h);

/// Header: dimensions, then label, weight, synthetic, parent, neighbor
/// (empty when absent).
void write_rebalanced_csv(const RebalancedSet& set, const SearchSpace& space, std::ostream& out);
RebalancedSet read_rebalanced_csv(std::istream& in, const SearchSpace& space);

} // namespace relia
