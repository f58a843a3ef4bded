#pragma once

#include <string>

#include "cascade/dynamics/tree.hpp"

namespace cascade::dyn {

/// Loads a robot model from a structured text file and validates every
/// invariant. Errors carry file and line.
KinematicTree load_model(const std::string& path);
KinematicTree parse_model_text(const std::string& text, const std::string& path);

}  // namespace cascade::dyn
