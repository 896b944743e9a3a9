#ifndef BLEV_MODEL_IO_HPP
#define BLEV_MODEL_IO_HPP

// Model description files: JSON object
//   {"beta": ..., "motion": {...}, "offspring": {...}}
// Unknown fields are rejected; parse errors carry line/column anchors.

#include <string>

#include "blev/model.hpp"

namespace blev {
namespace io {

// Parse and validate; ModelError with a line-anchored message on failure.
BranchingModel model_from_json(const std::string& text);

BranchingModel load_model_file(const std::string& path);

// Canonical serialization; round-trips field-for-field through the parser.
std::string model_to_json(const BranchingModel&);

} // namespace io
} // namespace blev

#endif
