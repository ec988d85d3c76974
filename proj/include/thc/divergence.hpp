#pragma once

#include <string>
#include <vector>

#include "thc/ast.hpp"

namespace thc {

enum class Divergence { None, Direct, Indirect };

const char* to_string(Divergence d);

/// One if/for condition, in source pre-order.
struct BranchLabel {
  std::string construct;  // "if" or "for"
  std::string condition;  // printed condition
  Divergence label = Divergence::None;
  bool id_dependent = false;    // reached by work-item id taint
  bool data_dependent = false;  // reached by loaded-value taint
};

/// Taint propagation from work-item ids (direct) and global loads (indirect),
/// including flows through assignments under tainted if-conditions.
std::vector<BranchLabel> classify_divergence(const Kernel& kernel);

}  // namespace thc
